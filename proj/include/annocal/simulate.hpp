#ifndef ANNOCAL_SIMULATE_HPP_
#define ANNOCAL_SIMULATE_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "annocal/core.hpp"
#include "annocal/eval_match.hpp"
#include "annocal/preprocess.hpp"

namespace annocal
{

/// What a random stream is used for; part of the stream key.
enum class DrawPurpose : std::uint64_t
{
  object_count = 1,
  object_layout = 2,
  miss = 3,
  class_flip = 4,
  jitter = 5,
  spurious_count = 6,
  spurious_box = 7,
};

/// SplitMix64 stream keyed by (seed, purpose, image, annotator, object). Each
/// key gives an independent sequence, so draws do not depend on the order in
/// which images or annotators are visited.
class KeyedStream
{
public:
  KeyedStream(std::uint64_t seed, DrawPurpose purpose, std::uint64_t image,
              std::uint64_t annotator = 0, std::uint64_t object = 0)
  {
    std::uint64_t h = mix(seed);
    h = mix(h ^ static_cast<std::uint64_t>(purpose));
    h = mix(h ^ image);
    h = mix(h ^ annotator);
    h = mix(h ^ object);
    state_ = h;
  }

  std::uint64_t next_u64()
  {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix(state_);
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool bernoulli(double p) { return uniform() < p; }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return n ? next_u64() % n : 0; }

  /// Standard normal by Box-Muller.
  double normal()
  {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Poisson by multiplication of uniforms (small means only).
  int poisson(double mean)
  {
    if (mean <= 0.0) return 0;
    const double limit = std::exp(-mean);
    int k = 0;
    double prod = uniform();
    while (prod > limit)
    {
      ++k;
      prod *= uniform();
    }
    return k;
  }

private:
  static std::uint64_t mix(std::uint64_t z)
  {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_ = 0;
};

struct AnnotatorProfile
{
  double class_accuracy = 1.0;   // keep the true class, else uniform flip
  double miss_rate = 0.0;        // skip the object entirely
  double box_jitter_sigma = 0.0; // corner noise std as a fraction of box size
  double spurious_rate = 0.0;    // expected spurious boxes per image

  void validate() const
  {
    auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
    if (!prob(class_accuracy) || !prob(miss_rate)) throw Error("annotator probabilities must be in [0,1]");
    if (!(box_jitter_sigma >= 0.0) || !(spurious_rate >= 0.0))
      throw Error("annotator jitter and spurious rate must be nonnegative");
  }
};

struct SimulationConfig
{
  std::uint64_t seed = 0;
  int num_images = 10;
  int num_classes = 10;
  double image_width = 640.0;
  double image_height = 480.0;
  int min_objects = 1;
  int max_objects = 4;
  double min_size = 0.05;  // object side as a fraction of the image side
  double max_size = 0.25;
  bool separated = true;   // latent objects never overlap
  std::vector<AnnotatorProfile> annotators;

  void validate() const
  {
    if (num_images < 0) throw Error("num_images must be >= 0");
    if (num_classes < 1) throw Error("num_classes must be >= 1");
    if (annotators.size() < 2) throw Error("at least 2 annotators are required");
    if (min_objects < 0 || max_objects < min_objects) throw Error("invalid object count range");
    if (!(min_size > 0.0) || max_size < min_size || max_size > 1.0) throw Error("invalid object size range");
    if (!(image_width > 0.0) || !(image_height > 0.0)) throw Error("invalid image size");
    for (const auto& a : annotators) a.validate();
  }

  DatasetMeta meta() const
  {
    DatasetMeta m;
    m.num_classes = num_classes;
    m.num_annotators = static_cast<int>(annotators.size());
    for (int j = 1; j <= num_classes; ++j) m.class_names.push_back("class_" + std::to_string(j));
    return m;
  }
};

struct LatentObject
{
  Box box{};
  int class_id = 1;
  bool operator==(const LatentObject&) const = default;
};

struct LatentImage
{
  std::string image_id;
  std::vector<LatentObject> objects;
  bool operator==(const LatentImage&) const = default;
};

struct SimulatedDataset
{
  DatasetMeta meta;
  std::vector<ImageAnnotations> images;
  std::vector<LatentImage> latent;  // test oracles only
};

inline std::string simulated_image_id(int index)
{
  std::string digits = std::to_string(index);
  if (digits.size() < 6) digits.insert(0, 6 - digits.size(), '0');
  return "img_" + digits;
}

namespace detail
{

inline Box draw_box(KeyedStream& rng, const SimulationConfig& c)
{
  const double w = rng.uniform(c.min_size, c.max_size) * c.image_width;
  const double h = rng.uniform(c.min_size, c.max_size) * c.image_height;
  const double x = rng.uniform(0.0, c.image_width - w);
  const double y = rng.uniform(0.0, c.image_height - h);
  return {x, y, x + w, y + h};
}

// Sorts each corner pair, clamps to the image and keeps at least 1 px extent.
inline Box tidy_box(Box b, double width, double height)
{
  if (b[0] > b[2]) std::swap(b[0], b[2]);
  if (b[1] > b[3]) std::swap(b[1], b[3]);
  const double limits[2] = {width, height};
  for (std::size_t axis = 0; axis < 2; ++axis)
  {
    double& lo = b[axis];
    double& hi = b[axis + 2];
    lo = std::clamp(lo, 0.0, limits[axis]);
    hi = std::clamp(hi, 0.0, limits[axis]);
    if (hi - lo < 1.0)
    {
      const double mid = std::clamp(0.5 * (lo + hi), 0.5, limits[axis] - 0.5);
      lo = mid - 0.5;
      hi = mid + 0.5;
    }
  }
  return b;
}

inline int flip_class(KeyedStream& rng, int true_class, int num_classes)
{
  if (num_classes < 2) return true_class;
  auto other = static_cast<int>(rng.below(static_cast<std::uint64_t>(num_classes - 1))) + 1;
  return other >= true_class ? other + 1 : other;
}

} // namespace detail

/// Draw latent objects per image and let every annotator independently miss,
/// relabel, jitter and hallucinate boxes.
inline SimulatedDataset simulate_dataset(const SimulationConfig& config)
{
  config.validate();
  SimulatedDataset out;
  out.meta = config.meta();
  const int J = config.num_classes;

  for (int img = 0; img < config.num_images; ++img)
  {
    const auto img_key = static_cast<std::uint64_t>(img);
    LatentImage latent;
    latent.image_id = simulated_image_id(img);

    KeyedStream count_rng(config.seed, DrawPurpose::object_count, img_key);
    const int span = config.max_objects - config.min_objects + 1;
    const int n_objects =
        config.min_objects + static_cast<int>(count_rng.below(static_cast<std::uint64_t>(span)));
    for (int o = 0; o < n_objects; ++o)
    {
      KeyedStream layout(config.seed, DrawPurpose::object_layout, img_key, 0,
                         static_cast<std::uint64_t>(o));
      const int cls = static_cast<int>(layout.below(static_cast<std::uint64_t>(J))) + 1;
      for (int attempt = 0; attempt < 100; ++attempt)
      {
        const Box b = detail::draw_box(layout, config);
        const bool clash = config.separated &&
                           std::any_of(latent.objects.begin(), latent.objects.end(),
                                       [&](const LatentObject& x) { return iou(x.box, b) > 0.0; });
        if (clash) continue;
        latent.objects.push_back({b, cls});
        break;
      }
    }

    ImageAnnotations image;
    image.image_id = latent.image_id;
    image.width = config.image_width;
    image.height = config.image_height;
    for (std::size_t k = 0; k < config.annotators.size(); ++k)
    {
      const auto& prof = config.annotators[k];
      const int annotator_id = static_cast<int>(k) + 1;
      const auto ak = static_cast<std::uint64_t>(annotator_id);
      for (std::size_t o = 0; o < latent.objects.size(); ++o)
      {
        const auto& obj = latent.objects[o];
        KeyedStream miss(config.seed, DrawPurpose::miss, img_key, ak, o);
        if (miss.bernoulli(prof.miss_rate)) continue;

        KeyedStream cls_rng(config.seed, DrawPurpose::class_flip, img_key, ak, o);
        int cls = obj.class_id;
        if (!cls_rng.bernoulli(prof.class_accuracy)) cls = detail::flip_class(cls_rng, cls, J);

        Box b = obj.box;
        if (prof.box_jitter_sigma > 0.0)
        {
          KeyedStream jit(config.seed, DrawPurpose::jitter, img_key, ak, o);
          const double w = obj.box[2] - obj.box[0];
          const double h = obj.box[3] - obj.box[1];
          for (std::size_t i = 0; i < 4; ++i)
            b[i] += jit.normal() * prof.box_jitter_sigma * (i % 2 == 0 ? w : h);
          b = detail::tidy_box(b, config.image_width, config.image_height);
        }
        image.annotations.push_back({b, cls, annotator_id});
      }

      KeyedStream sp_count(config.seed, DrawPurpose::spurious_count, img_key, ak);
      const int n_spurious = sp_count.poisson(prof.spurious_rate);
      for (int s = 0; s < n_spurious; ++s)
      {
        KeyedStream sp(config.seed, DrawPurpose::spurious_box, img_key, ak,
                       static_cast<std::uint64_t>(s));
        const int cls = static_cast<int>(sp.below(static_cast<std::uint64_t>(J))) + 1;
        image.annotations.push_back({detail::draw_box(sp, config), cls, annotator_id});
      }
    }
    out.images.push_back(std::move(image));
    out.latent.push_back(std::move(latent));
  }
  return out;
}

/// Known distortions applied to the oracle detector.
struct Miscalibration
{
  double beta = 1.0;       // class_probs -> class_probs^beta, renormalized
  double var_scale = 1.0;  // var -> var_scale * var
  double var_floor = kDefaultVarFloor;
};

/// Oracle predictions for one image: one prediction per cluster carrying the
/// cluster's own targets, then distorted.
inline std::vector<Prediction> oracle_predictions(const std::string& image_id,
                                                  std::span<const AnnotationCluster> clusters,
                                                  const Miscalibration& mis = {})
{
  if (!(mis.beta > 0.0) || !(mis.var_scale > 0.0)) throw Error("beta and var_scale must be positive");
  std::vector<Prediction> preds;
  for (const auto& c : clusters)
  {
    Prediction p;
    p.image_id = image_id;
    p.mean = c.mean_box;
    for (std::size_t i = 0; i < 4; ++i) p.var[i] = mis.var_scale * std::max(c.target_var[i], mis.var_floor);
    p.class_probs = c.soft_label;
    if (mis.beta != 1.0)
    {
      double total = 0.0;
      for (auto& x : p.class_probs)
      {
        x = x > 0.0 ? std::pow(x, mis.beta) : 0.0;
        total += x;
      }
      for (auto& x : p.class_probs) x /= total;
    }
    p.certainty = c.annotator_certainty;
    preds.push_back(std::move(p));
  }
  return preds;
}

inline std::vector<Prediction> simulate_predictions(std::span<const ImageAnnotations> images,
                                                    const DatasetMeta& meta,
                                                    const Miscalibration& mis = {},
                                                    const ClusterOptions& options = {})
{
  std::vector<Prediction> preds;
  for (const auto& img : images)
  {
    const auto clusters = cluster_annotations(img, meta, options);
    auto p = oracle_predictions(img.image_id, clusters, mis);
    preds.insert(preds.end(), std::make_move_iterator(p.begin()), std::make_move_iterator(p.end()));
  }
  return preds;
}

} // namespace annocal

#endif
