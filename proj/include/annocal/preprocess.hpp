#ifndef ANNOCAL_PREPROCESS_HPP_
#define ANNOCAL_PREPROCESS_HPP_

#include <algorithm>
#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include "annocal/assignment.hpp"
#include "annocal/core.hpp"
#include "annocal/normal_quantile.hpp"

namespace annocal
{

inline constexpr double kDefaultMinIou = 0.5;
inline constexpr double kDefaultGamma = 0.999;

struct ClusterMember
{
  Annotation annotation;
  std::size_t index = 0;  // position in ImageAnnotations::annotations

  bool operator==(const ClusterMember&) const = default;
};

/// Annotations of one object instance from distinct annotators, with the
/// reference targets derived from them.
struct AnnotationCluster
{
  std::vector<ClusterMember> members;
  std::vector<double> soft_label;  // J+1 entries, index 0 = background
  Box mean_box{};
  Box min_box{};
  Box max_box{};
  double annotator_certainty = 0.0;  // |members| / K
  Box target_var{};

  std::size_t size() const { return members.size(); }
  bool operator==(const AnnotationCluster&) const = default;
};

struct ClusterOptions
{
  double min_iou = kDefaultMinIou;
  double gamma = kDefaultGamma;
};

/// Hungarian matching of two box sets under cost 1 - IoU. Pairs below
/// `min_iou` (and pairs with zero overlap) are dropped after assignment.
inline std::vector<IndexPair> match_pair(std::span<const Box> set_a, std::span<const Box> set_b,
                                         double min_iou)
{
  if (set_a.empty() || set_b.empty()) return {};
  CostMatrix cost(set_a.size(), set_b.size());
  for (std::size_t i = 0; i < set_a.size(); ++i)
    for (std::size_t j = 0; j < set_b.size(); ++j) cost(i, j) = 1.0 - iou(set_a[i], set_b[j]);

  std::vector<IndexPair> kept;
  for (const auto& pr : solve_assignment(cost))
  {
    const double overlap = 1.0 - cost(pr.first, pr.second);
    if (overlap > 0.0 && overlap >= min_iou) kept.push_back(pr);
  }
  return kept;
}

inline std::vector<IndexPair> match_pair(std::span<const Annotation> set_a,
                                         std::span<const Annotation> set_b, double min_iou)
{
  std::vector<Box> a, b;
  for (const auto& x : set_a) a.push_back(x.box);
  for (const auto& x : set_b) b.push_back(x.box);
  return match_pair(std::span<const Box>(a), std::span<const Box>(b), min_iou);
}

/// Fraction of the K annotators choosing each class. Annotators absent from
/// the cluster count as background.
inline std::vector<double> soft_class_target(std::span<const ClusterMember> members, int num_classes,
                                             int num_annotators)
{
  if (static_cast<int>(members.size()) > num_annotators)
    throw Error("cluster has more members than annotators");
  std::vector<int> counts(static_cast<std::size_t>(num_classes) + 1, 0);
  counts[0] = num_annotators - static_cast<int>(members.size());
  for (const auto& m : members)
  {
    if (m.annotation.class_id < 1 || m.annotation.class_id > num_classes)
      throw Error("class_id " + std::to_string(m.annotation.class_id) + " out of range");
    ++counts[static_cast<std::size_t>(m.annotation.class_id)];
  }
  std::vector<double> t(counts.size());
  const double k = num_annotators;
  for (std::size_t j = 0; j < counts.size(); ++j) t[j] = counts[j] / k;
  return t;
}

/// Per-coordinate variance such that the cluster's box spread equals the
/// central Gaussian interval at the (clamped) annotator-certainty level.
inline Box target_variance(const Box& min_box, const Box& max_box, std::size_t num_members,
                           int num_annotators, double gamma = kDefaultGamma)
{
  if (num_members == 0) throw Error("target_variance requires a non-empty cluster");
  if (!(gamma > 0.0 && gamma < 1.0)) throw Error("gamma must lie in (0, 1)");
  const double level = std::min(static_cast<double>(num_members) / num_annotators, gamma);
  const double z = central_interval_z(level);
  Box var{};
  for (std::size_t i = 0; i < 4; ++i)
  {
    const double half = (max_box[i] - min_box[i]) / (2.0 * z);
    var[i] = half * half;
  }
  return var;
}

inline Box target_variance(const AnnotationCluster& cluster, int num_annotators,
                           double gamma = kDefaultGamma)
{
  return target_variance(cluster.min_box, cluster.max_box, cluster.size(), num_annotators, gamma);
}

namespace detail
{

inline Box member_mean(const std::vector<ClusterMember>& members)
{
  Box mean{};
  for (const auto& m : members)
    for (std::size_t i = 0; i < 4; ++i) mean[i] += m.annotation.box[i];
  for (auto& x : mean) x /= static_cast<double>(members.size());
  return mean;
}

} // namespace detail

/// Fill the derived fields of a cluster from its members.
inline void finalize_cluster(AnnotationCluster& cluster, int num_classes, int num_annotators,
                             double gamma = kDefaultGamma)
{
  if (cluster.members.empty()) throw Error("cannot finalize an empty cluster");
  cluster.soft_label = soft_class_target(cluster.members, num_classes, num_annotators);
  cluster.mean_box = detail::member_mean(cluster.members);
  cluster.min_box = cluster.members.front().annotation.box;
  cluster.max_box = cluster.min_box;
  for (const auto& m : cluster.members)
  {
    for (std::size_t i = 0; i < 4; ++i)
    {
      cluster.min_box[i] = std::min(cluster.min_box[i], m.annotation.box[i]);
      cluster.max_box[i] = std::max(cluster.max_box[i], m.annotation.box[i]);
    }
  }
  cluster.annotator_certainty = static_cast<double>(cluster.size()) / num_annotators;
  cluster.target_var = target_variance(cluster, num_annotators, gamma);
}

/// Greedy multipartite clustering. Annotators are visited in ascending id;
/// the first seeds one cluster per box and each later annotator is matched
/// against the running cluster mean boxes. Unmatched boxes seed new clusters.
inline std::vector<AnnotationCluster> cluster_annotations(const ImageAnnotations& image,
                                                          const DatasetMeta& meta,
                                                          const ClusterOptions& options = {})
{
  std::map<int, std::vector<std::size_t>> by_annotator;
  for (std::size_t i = 0; i < image.annotations.size(); ++i)
    by_annotator[image.annotations[i].annotator_id].push_back(i);

  std::vector<AnnotationCluster> clusters;
  std::vector<Box> centers;
  for (const auto& [annotator, indices] : by_annotator)
  {
    std::vector<Box> boxes;
    boxes.reserve(indices.size());
    for (auto idx : indices) boxes.push_back(image.annotations[idx].box);

    std::vector<char> matched(indices.size(), 0);
    const auto pairs = match_pair(std::span<const Box>(boxes), std::span<const Box>(centers),
                                  options.min_iou);
    for (const auto& [a, c] : pairs)
    {
      clusters[c].members.push_back({image.annotations[indices[a]], indices[a]});
      centers[c] = detail::member_mean(clusters[c].members);
      matched[a] = 1;
    }
    for (std::size_t a = 0; a < indices.size(); ++a)
    {
      if (matched[a]) continue;
      AnnotationCluster fresh;
      fresh.members.push_back({image.annotations[indices[a]], indices[a]});
      clusters.push_back(std::move(fresh));
      centers.push_back(boxes[a]);
    }
  }

  for (auto& c : clusters) finalize_cluster(c, meta.num_classes, meta.num_annotators, options.gamma);
  return clusters;
}

} // namespace annocal

#endif
