#ifndef ANNOCAL_METRICS_HPP_
#define ANNOCAL_METRICS_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "annocal/core.hpp"
#include "annocal/eval_match.hpp"
#include "annocal/normal_quantile.hpp"
#include "annocal/pipeline.hpp"

namespace annocal
{

/// Half the L1 distance between two categorical distributions.
inline double tvd_pair(std::span<const double> t, std::span<const double> p)
{
  if (t.size() != p.size()) throw Error("tvd_pair: length mismatch");
  double s = 0.0;
  for (std::size_t j = 0; j < t.size(); ++j) s += std::abs(t[j] - p[j]);
  return 0.5 * s;
}

inline std::vector<double> one_hot_background(std::size_t length)
{
  std::vector<double> v(length, 0.0);
  if (length > 0) v[0] = 1.0;
  return v;
}

/// Central Gaussian interval of the predicted box at level min(certainty, gamma).
inline std::pair<Box, Box> box_interval(const Prediction& pred, double gamma = kDefaultGamma)
{
  const double level = std::clamp(std::min(pred.certainty, gamma), 0.0, 1.0);
  const double z = central_interval_z(level);
  Box lower{}, upper{};
  for (std::size_t i = 0; i < 4; ++i)
  {
    const double half = z * std::sqrt(std::max(pred.var[i], 0.0));
    lower[i] = pred.mean[i] - half;
    upper[i] = pred.mean[i] + half;
  }
  return {lower, upper};
}

/// Fraction of member boxes strictly inside [lower, upper] on all coordinates.
inline double interval_coverage(const AnnotationCluster& cluster, const Box& lower, const Box& upper)
{
  if (cluster.members.empty()) return 0.0;
  std::size_t inside = 0;
  for (const auto& m : cluster.members)
  {
    bool ok = true;
    for (std::size_t i = 0; i < 4 && ok; ++i)
      ok = lower[i] < m.annotation.box[i] && m.annotation.box[i] < upper[i];
    if (ok) ++inside;
  }
  return static_cast<double>(inside) / static_cast<double>(cluster.members.size());
}

/// Running sums behind the four metrics; pooled across images by addition.
struct MetricSums
{
  double tvd = 0.0;
  std::size_t tvd_count = 0;  // |TP| + |FN|
  double tvd_fp = 0.0;
  std::size_t fp_count = 0;
  double lue = 0.0;
  std::size_t tp_count = 0;
  double fne = 0.0;
  std::size_t fn_count = 0;

  MetricSums& operator+=(const MetricSums& o)
  {
    tvd += o.tvd;
    tvd_count += o.tvd_count;
    tvd_fp += o.tvd_fp;
    fp_count += o.fp_count;
    lue += o.lue;
    tp_count += o.tp_count;
    fne += o.fne;
    fn_count += o.fn_count;
    return *this;
  }
};

inline MetricSums accumulate_metrics(const MatchOutcome& outcome,
                                     std::span<const AnnotationCluster> clusters,
                                     std::span<const Prediction> preds, int num_annotators,
                                     double gamma = kDefaultGamma)
{
  MetricSums s;
  for (const auto& [n, h] : outcome.tp)
  {
    s.tvd += tvd_pair(clusters[h].soft_label, preds[n].class_probs);
    const auto [lo, hi] = box_interval(preds[n], gamma);
    s.lue += std::abs(preds[n].certainty - interval_coverage(clusters[h], lo, hi));
  }
  s.tp_count = outcome.tp.size();

  for (auto h : outcome.fn)
  {
    const auto bg = one_hot_background(clusters[h].soft_label.size());
    s.tvd += tvd_pair(clusters[h].soft_label, bg);
    s.fne += static_cast<double>(clusters[h].size()) / num_annotators;
  }
  s.fn_count = outcome.fn.size();
  s.tvd_count = outcome.tp.size() + outcome.fn.size();

  for (auto n : outcome.fp)
  {
    const auto bg = one_hot_background(preds[n].class_probs.size());
    s.tvd_fp += tvd_pair(bg, preds[n].class_probs);
  }
  s.fp_count = outcome.fp.size();
  return s;
}

/// Inverted weighted geometric mean of the metric complements. An undefined
/// LUE is left out and the remaining weights renormalized.
inline double aggregate_mean(double tvd, double tvd_fp, std::optional<double> lue, double fne,
                             const std::array<double, 4>& weights = {1.0, 1.0, 1.0, 1.0})
{
  const std::array<std::optional<double>, 4> m{tvd, tvd_fp, lue, fne};
  double log_sum = 0.0;
  double wsum = 0.0;
  for (std::size_t i = 0; i < 4; ++i)
  {
    if (!m[i]) continue;
    if (!(weights[i] > 0.0)) throw Error("aggregate weights must be positive");
    const double complement = std::clamp(1.0 - *m[i], 0.0, 1.0);
    if (complement == 0.0) return 1.0;
    log_sum += weights[i] * std::log(complement);
    wsum += weights[i];
  }
  if (wsum == 0.0) return 0.0;
  return std::clamp(1.0 - std::exp(log_sum / wsum), 0.0, 1.0);
}

inline MetricValues finalize_metrics(const MetricSums& s,
                                     const std::array<double, 4>& weights = {1.0, 1.0, 1.0, 1.0})
{
  MetricValues v;
  v.tvd = s.tvd_count ? s.tvd / static_cast<double>(s.tvd_count) : 0.0;
  v.tvd_fp = s.fp_count ? s.tvd_fp / static_cast<double>(s.fp_count) : 0.0;
  if (s.tp_count) v.lue = s.lue / static_cast<double>(s.tp_count);
  v.fne = s.fn_count ? s.fne / static_cast<double>(s.fn_count) : 0.0;
  v.mean = aggregate_mean(v.tvd, v.tvd_fp, v.lue, v.fne, weights);
  v.tp = s.tp_count;
  v.fp = s.fp_count;
  v.fn = s.fn_count;
  return v;
}

/// TVD over TP and FN, and TVD over FP, for one image.
inline std::pair<double, double> tvd_metrics(const MatchOutcome& outcome,
                                             std::span<const AnnotationCluster> clusters,
                                             std::span<const Prediction> preds)
{
  const auto s = accumulate_metrics(outcome, clusters, preds, 1);
  return {s.tvd_count ? s.tvd / static_cast<double>(s.tvd_count) : 0.0,
          s.fp_count ? s.tvd_fp / static_cast<double>(s.fp_count) : 0.0};
}

inline std::optional<double> lue(const MatchOutcome& outcome,
                                 std::span<const AnnotationCluster> clusters,
                                 std::span<const Prediction> preds, double gamma = kDefaultGamma)
{
  const auto s = accumulate_metrics(outcome, clusters, preds, 1, gamma);
  if (!s.tp_count) return std::nullopt;
  return s.lue / static_cast<double>(s.tp_count);
}

inline double fne(const MatchOutcome& outcome, std::span<const AnnotationCluster> clusters,
                  int num_annotators)
{
  if (outcome.fn.empty()) return 0.0;
  double s = 0.0;
  for (auto h : outcome.fn) s += static_cast<double>(clusters[h].size()) / num_annotators;
  return s / static_cast<double>(outcome.fn.size());
}

/// Metrics pooled over the TP/FP/FN sets of already matched images.
inline MetricsReport evaluate_matched(const DatasetMatch& matched, const DatasetMeta& meta,
                                      const EvaluationConfig& config = {})
{
  MetricsReport report;
  MetricSums pooled;
  for (const auto& img : matched.images)
  {
    const auto s = accumulate_metrics(img.outcome, img.clusters, img.predictions,
                                      meta.num_annotators, config.cluster.gamma);
    pooled += s;
    if (config.per_image) report.per_image.push_back({img.image_id, finalize_metrics(s, config.weights)});
  }
  report.values = finalize_metrics(pooled, config.weights);
  report.unknown_image_predictions = matched.unknown_image_predictions;
  return report;
}

inline MetricsReport evaluate_dataset(std::span<const ImageAnnotations> annotations,
                                      std::span<const Prediction> predictions,
                                      const DatasetMeta& meta, const EvaluationConfig& config = {})
{
  return evaluate_matched(match_dataset(annotations, predictions, meta, config), meta, config);
}

// ---------------------------------------------------------------------------
// Reliability diagrams

enum class ReliabilityKind
{
  class_label,
  bounding_box,
};

struct ReliabilitySample
{
  double confidence = 0.0;
  double agreement = 0.0;
};

struct ReliabilityBins
{
  ReliabilityKind kind = ReliabilityKind::class_label;
  std::vector<double> edges;  // B + 1
  std::vector<std::optional<double>> mean_confidence;  // empty bins have no value
  std::vector<std::optional<double>> mean_agreement;
  std::vector<double> sample_fraction;
  std::vector<std::size_t> counts;
};

inline constexpr int kDefaultBins = 10;

inline ReliabilityBins bin_samples(std::span<const ReliabilitySample> samples, int num_bins,
                                   ReliabilityKind kind)
{
  if (num_bins < 2) throw Error("reliability diagrams need at least 2 bins");
  const auto b = static_cast<std::size_t>(num_bins);
  ReliabilityBins out;
  out.kind = kind;
  out.edges.resize(b + 1);
  for (std::size_t i = 0; i <= b; ++i) out.edges[i] = static_cast<double>(i) / num_bins;

  std::vector<double> conf(b, 0.0), agree(b, 0.0);
  out.counts.assign(b, 0);
  for (const auto& s : samples)
  {
    const double c = std::clamp(s.confidence, 0.0, 1.0);
    auto idx = static_cast<std::size_t>(std::floor(c * num_bins));
    idx = std::min(idx, b - 1);
    conf[idx] += c;
    agree[idx] += s.agreement;
    ++out.counts[idx];
  }
  out.mean_confidence.resize(b);
  out.mean_agreement.resize(b);
  out.sample_fraction.assign(b, 0.0);
  for (std::size_t i = 0; i < b; ++i)
  {
    if (!out.counts[i]) continue;
    const double n = static_cast<double>(out.counts[i]);
    out.mean_confidence[i] = conf[i] / n;
    out.mean_agreement[i] = agree[i] / n;
    out.sample_fraction[i] = n / static_cast<double>(samples.size());
  }
  return out;
}

/// Reliability samples of one matched image. Class-label samples come from
/// TP and FN (a missed cluster has confidence 0 and agreement 0); bounding
/// box samples come from TP only.
inline void collect_reliability_samples(const MatchOutcome& outcome,
                                        std::span<const AnnotationCluster> clusters,
                                        std::span<const Prediction> preds, ReliabilityKind kind,
                                        double gamma, std::vector<ReliabilitySample>& out)
{
  for (const auto& [n, h] : outcome.tp)
  {
    if (kind == ReliabilityKind::class_label)
    {
      const int j = predicted_class(preds[n].class_probs);
      const double conf = j > 0 ? preds[n].class_probs[static_cast<std::size_t>(j)] : 0.0;
      const double agree = j > 0 ? clusters[h].soft_label[static_cast<std::size_t>(j)] : 0.0;
      out.push_back({conf, agree});
    }
    else
    {
      const auto [lo, hi] = box_interval(preds[n], gamma);
      out.push_back({preds[n].certainty, interval_coverage(clusters[h], lo, hi)});
    }
  }
  if (kind == ReliabilityKind::class_label)
    for (std::size_t i = 0; i < outcome.fn.size(); ++i) out.push_back({0.0, 0.0});
}

inline ReliabilityBins reliability_bins(const DatasetMatch& matched, int num_bins,
                                        ReliabilityKind kind, double gamma = kDefaultGamma)
{
  std::vector<ReliabilitySample> samples;
  for (const auto& img : matched.images)
    collect_reliability_samples(img.outcome, img.clusters, img.predictions, kind, gamma, samples);
  return bin_samples(samples, num_bins, kind);
}

} // namespace annocal

#endif
