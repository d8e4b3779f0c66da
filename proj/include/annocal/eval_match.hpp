#ifndef ANNOCAL_EVAL_MATCH_HPP_
#define ANNOCAL_EVAL_MATCH_HPP_

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "annocal/assignment.hpp"
#include "annocal/preprocess.hpp"

namespace annocal
{

inline constexpr double kDefaultVarFloor = 1e-6;

/// How assignments between boxes with zero overlap are excluded.
enum class ZeroIouPolicy
{
  void_after_assignment,  // solve on finite costs, then void zero-IoU pairs
  forbid_before_assignment,  // prohibitive cost entries, then void
};

struct MatchOptions
{
  double var_floor = kDefaultVarFloor;
  ZeroIouPolicy zero_iou = ZeroIouPolicy::void_after_assignment;
};

/// TP pairs are (prediction index, cluster index).
struct MatchOutcome
{
  std::vector<IndexPair> tp;
  std::vector<std::size_t> fp;
  std::vector<std::size_t> fn;

  bool operator==(const MatchOutcome&) const = default;
};

/// Mean squared Mahalanobis distance of the cluster's member boxes under the
/// predicted diagonal Gaussian, normalized by the number of annotators K.
inline double mahalanobis_cost(const AnnotationCluster& cluster, const Prediction& pred,
                               int num_annotators, double var_floor = kDefaultVarFloor)
{
  double total = 0.0;
  for (const auto& m : cluster.members)
  {
    for (std::size_t i = 0; i < 4; ++i)
    {
      const double r = m.annotation.box[i] - pred.mean[i];
      total += r * r / std::max(pred.var[i], var_floor);
    }
  }
  return total / num_annotators;
}

inline CostMatrix mahalanobis_cost_matrix(std::span<const AnnotationCluster> clusters,
                                          std::span<const Prediction> preds, int num_annotators,
                                          double var_floor = kDefaultVarFloor)
{
  CostMatrix cost(clusters.size(), preds.size());
  for (std::size_t h = 0; h < clusters.size(); ++h)
    for (std::size_t n = 0; n < preds.size(); ++n)
      cost(h, n) = mahalanobis_cost(clusters[h], preds[n], num_annotators, var_floor);
  return cost;
}

/// Hungarian matching of clusters to predictions. Assigned pairs whose mean
/// boxes do not overlap are voided into one FP and one FN.
inline MatchOutcome match_predictions(std::span<const AnnotationCluster> clusters,
                                      std::span<const Prediction> preds, int num_annotators,
                                      const MatchOptions& options = {})
{
  MatchOutcome out;
  CostMatrix cost = mahalanobis_cost_matrix(clusters, preds, num_annotators, options.var_floor);

  if (options.zero_iou == ZeroIouPolicy::forbid_before_assignment)
  {
    double finite_sum = 0.0;
    for (std::size_t h = 0; h < cost.rows(); ++h)
      for (std::size_t n = 0; n < cost.cols(); ++n) finite_sum += cost(h, n);
    const double prohibitive = 1.0 + 2.0 * finite_sum;
    for (std::size_t h = 0; h < cost.rows(); ++h)
      for (std::size_t n = 0; n < cost.cols(); ++n)
        if (iou(clusters[h].mean_box, preds[n].mean) <= 0.0) cost(h, n) = prohibitive;
  }

  std::vector<char> pred_used(preds.size(), 0), cluster_used(clusters.size(), 0);
  for (const auto& [h, n] : solve_assignment(cost))
  {
    if (iou(clusters[h].mean_box, preds[n].mean) <= 0.0) continue;
    out.tp.emplace_back(n, h);
    pred_used[n] = 1;
    cluster_used[h] = 1;
  }
  std::sort(out.tp.begin(), out.tp.end());
  for (std::size_t n = 0; n < preds.size(); ++n)
    if (!pred_used[n]) out.fp.push_back(n);
  for (std::size_t h = 0; h < clusters.size(); ++h)
    if (!cluster_used[h]) out.fn.push_back(h);
  return out;
}

} // namespace annocal

#endif
