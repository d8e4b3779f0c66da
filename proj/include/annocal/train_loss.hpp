#ifndef ANNOCAL_TRAIN_LOSS_HPP_
#define ANNOCAL_TRAIN_LOSS_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "annocal/assignment.hpp"
#include "annocal/preprocess.hpp"

namespace annocal
{

inline constexpr double kDefaultLambda = 0.1;
inline constexpr double kLogEps = 1e-12;

/// Treatment of the background entry of the soft class target.
enum class BackgroundMode
{
  keep,        // cross-entropy over all J+1 entries
  objectness,  // foreground cross-entropy plus BCE of certainty against 1 - t[0]
  drop,        // foreground cross-entropy only
};

struct LossConfig
{
  double lambda = kDefaultLambda;
  double gamma = kDefaultGamma;
  double eps = kLogEps;
  BackgroundMode background = BackgroundMode::keep;
};

struct PairLoss
{
  std::size_t pair = 0;
  double l_cls = 0.0;
  double l_reg = 0.0;
  double l_total = 0.0;
};

struct LossBreakdown
{
  double l_cls = 0.0;
  double l_reg = 0.0;
  double l_total = 0.0;
  double lambda = kDefaultLambda;
  std::vector<PairLoss> per_pair;
  bool empty_pairing = false;
};

/// Soft-target cross-entropy -sum_j t_j ln max(p_j, eps) over all entries.
inline double classification_loss(std::span<const double> t, std::span<const double> p,
                                  double eps = kLogEps)
{
  if (t.size() != p.size()) throw Error("classification_loss: length mismatch");
  double loss = 0.0;
  for (std::size_t j = 0; j < t.size(); ++j)
    if (t[j] != 0.0) loss -= t[j] * std::log(std::max(p[j], eps));
  return loss;
}

inline double classification_loss(std::span<const double> t, std::span<const double> p,
                                  double certainty, BackgroundMode mode, double eps = kLogEps)
{
  if (mode == BackgroundMode::keep) return classification_loss(t, p, eps);
  if (t.size() != p.size() || t.empty()) throw Error("classification_loss: length mismatch");
  double loss = classification_loss(t.subspan(1), p.subspan(1), eps);
  if (mode == BackgroundMode::objectness)
  {
    const double target = 1.0 - t[0];
    const double o = std::clamp(certainty, eps, 1.0 - eps);
    loss -= target * std::log(o) + (1.0 - target) * std::log(1.0 - o);
  }
  return loss;
}

/// L1 distance between target and predicted box mean plus L1 distance between
/// target and predicted diagonal variances.
inline double regression_loss(const Box& mean_box, const Box& target_var, const Box& pred_mean,
                              const Box& pred_var)
{
  double loss = 0.0;
  for (std::size_t i = 0; i < 4; ++i)
    loss += std::abs(mean_box[i] - pred_mean[i]) + std::abs(target_var[i] - pred_var[i]);
  return loss;
}

namespace detail
{

struct PairTargets
{
  std::vector<double> soft_label;
  Box mean_box{};
  Box target_var{};
};

// Targets recomputed from the cluster members, independent of any cached
// fields on the cluster.
inline PairTargets pair_targets(const AnnotationCluster& cluster, const DatasetMeta& meta,
                                double gamma)
{
  AnnotationCluster c;
  c.members = cluster.members;
  finalize_cluster(c, meta.num_classes, meta.num_annotators, gamma);
  return {std::move(c.soft_label), c.mean_box, c.target_var};
}

inline void check_pair(const IndexPair& pr, std::size_t n_preds, std::size_t n_clusters)
{
  if (pr.first >= n_preds || pr.second >= n_clusters) throw Error("pairing index out of range");
}

inline double sign(double x) { return (x > 0.0) - (x < 0.0); }

} // namespace detail

/// Per-image training objective: for each (prediction, cluster) pair the
/// classification and regression losses combined as lambda * L_r + L_c,
/// averaged over pairs.
inline LossBreakdown image_loss(std::span<const AnnotationCluster> clusters,
                                std::span<const Prediction> preds,
                                std::span<const IndexPair> pairs, const DatasetMeta& meta,
                                const LossConfig& config = {})
{
  LossBreakdown out;
  out.lambda = config.lambda;
  if (pairs.empty())
  {
    out.empty_pairing = true;
    return out;
  }
  for (std::size_t i = 0; i < pairs.size(); ++i)
  {
    detail::check_pair(pairs[i], preds.size(), clusters.size());
    const auto& pred = preds[pairs[i].first];
    const auto targets = detail::pair_targets(clusters[pairs[i].second], meta, config.gamma);
    if (pred.class_probs.size() != targets.soft_label.size())
      throw Error("prediction has " + std::to_string(pred.class_probs.size()) +
                  " class probabilities, expected " + std::to_string(targets.soft_label.size()));

    PairLoss pl;
    pl.pair = i;
    pl.l_cls = classification_loss(targets.soft_label, pred.class_probs, pred.certainty,
                                   config.background, config.eps);
    pl.l_reg = regression_loss(targets.mean_box, targets.target_var, pred.mean, pred.var);
    pl.l_total = config.lambda * pl.l_reg + pl.l_cls;
    out.l_cls += pl.l_cls;
    out.l_reg += pl.l_reg;
    out.per_pair.push_back(pl);
  }
  const double m = static_cast<double>(pairs.size());
  out.l_cls /= m;
  out.l_reg /= m;
  out.l_total = config.lambda * out.l_reg + out.l_cls;
  return out;
}

enum class GradientTarget
{
  pred_mean,
  pred_var,
  class_logits,
};

/// Gradient of the mean loss with respect to one parameter group of every
/// prediction (entries for unpaired predictions stay zero). Class logits are
/// the pre-softmax scores of class_probs. L1 kinks use sign(0) = 0; the
/// log floor is ignored.
struct LossGradient
{
  GradientTarget wrt = GradientTarget::pred_mean;
  std::vector<std::vector<double>> values;  // one vector per prediction
};

inline LossGradient loss_gradient(std::span<const AnnotationCluster> clusters,
                                  std::span<const Prediction> preds,
                                  std::span<const IndexPair> pairs, const DatasetMeta& meta,
                                  const LossConfig& config, GradientTarget wrt)
{
  LossGradient g;
  g.wrt = wrt;
  for (const auto& p : preds)
    g.values.emplace_back(wrt == GradientTarget::class_logits ? p.class_probs.size() : 4, 0.0);
  if (pairs.empty()) return g;

  const double scale = 1.0 / static_cast<double>(pairs.size());
  for (const auto& pr : pairs)
  {
    detail::check_pair(pr, preds.size(), clusters.size());
    const auto& pred = preds[pr.first];
    auto& out = g.values[pr.first];
    const auto targets = detail::pair_targets(clusters[pr.second], meta, config.gamma);
    switch (wrt)
    {
    case GradientTarget::pred_mean:
      for (std::size_t i = 0; i < 4; ++i)
        out[i] += scale * config.lambda * detail::sign(pred.mean[i] - targets.mean_box[i]);
      break;
    case GradientTarget::pred_var:
      for (std::size_t i = 0; i < 4; ++i)
        out[i] += scale * config.lambda * detail::sign(pred.var[i] - targets.target_var[i]);
      break;
    case GradientTarget::class_logits:
    {
      // d/dz_k of -sum_{j in S} t_j ln softmax(z)_j = p_k * T_S - t_k [k in S]
      const std::size_t first = config.background == BackgroundMode::keep ? 0 : 1;
      double mass = 0.0;
      for (std::size_t j = first; j < targets.soft_label.size(); ++j) mass += targets.soft_label[j];
      for (std::size_t k = 0; k < out.size(); ++k)
      {
        double d = pred.class_probs[k] * mass;
        if (k >= first) d -= targets.soft_label[k];
        out[k] += scale * d;
      }
      break;
    }
    }
  }
  return g;
}

} // namespace annocal

#endif
