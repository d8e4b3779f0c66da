#ifndef ANNOCAL_PIPELINE_HPP_
#define ANNOCAL_PIPELINE_HPP_

#include <algorithm>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "annocal/eval_match.hpp"
#include "annocal/preprocess.hpp"

namespace annocal
{

struct EvaluationConfig
{
  ClusterOptions cluster;
  MatchOptions match;
  std::array<double, 4> weights{1.0, 1.0, 1.0, 1.0};  // tvd, tvd_fp, lue, fne
  std::optional<double> min_certainty;                // drop predictions below
  bool per_image = false;
};

/// Clusters, predictions and the matching result of one image.
struct EvaluatedImage
{
  std::string image_id;
  std::vector<AnnotationCluster> clusters;
  std::vector<Prediction> predictions;
  MatchOutcome outcome;
  bool known = true;  // false when the image is absent from the annotations
};

struct DatasetMatch
{
  std::vector<EvaluatedImage> images;  // ascending image_id
  std::size_t unknown_image_predictions = 0;
};

/// Group predictions by image_id, preserving file order within each image.
inline std::map<std::string, std::vector<Prediction>> group_predictions(
    std::span<const Prediction> predictions, std::optional<double> min_certainty = std::nullopt)
{
  std::map<std::string, std::vector<Prediction>> grouped;
  for (const auto& p : predictions)
  {
    if (min_certainty && p.certainty < *min_certainty) continue;
    grouped[p.image_id].push_back(p);
  }
  return grouped;
}

/// Cluster every image and match its predictions. Images are processed in
/// ascending image_id so that pooled sums do not depend on input order.
inline DatasetMatch match_dataset(std::span<const ImageAnnotations> annotations,
                                  std::span<const Prediction> predictions, const DatasetMeta& meta,
                                  const EvaluationConfig& config = {})
{
  auto grouped = group_predictions(predictions, config.min_certainty);

  std::vector<const ImageAnnotations*> order;
  for (const auto& img : annotations) order.push_back(&img);
  std::sort(order.begin(), order.end(),
            [](const auto* a, const auto* b) { return a->image_id < b->image_id; });
  for (std::size_t i = 1; i < order.size(); ++i)
    if (order[i]->image_id == order[i - 1]->image_id)
      throw Error("duplicate image_id '" + order[i]->image_id + "'");

  DatasetMatch out;
  for (const auto* img : order)
  {
    EvaluatedImage e;
    e.image_id = img->image_id;
    e.clusters = cluster_annotations(*img, meta, config.cluster);
    if (auto it = grouped.find(img->image_id); it != grouped.end())
    {
      e.predictions = std::move(it->second);
      grouped.erase(it);
    }
    e.outcome = match_predictions(e.clusters, e.predictions, meta.num_annotators, config.match);
    out.images.push_back(std::move(e));
  }

  // leftovers reference images without annotations: all false positives
  for (auto& [id, preds] : grouped)
  {
    EvaluatedImage e;
    e.image_id = id;
    e.known = false;
    out.unknown_image_predictions += preds.size();
    e.predictions = std::move(preds);
    e.outcome = match_predictions(e.clusters, e.predictions, meta.num_annotators, config.match);
    out.images.push_back(std::move(e));
  }
  std::sort(out.images.begin(), out.images.end(),
            [](const auto& a, const auto& b) { return a.image_id < b.image_id; });
  return out;
}

} // namespace annocal

#endif
