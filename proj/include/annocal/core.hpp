#ifndef ANNOCAL_CORE_HPP_
#define ANNOCAL_CORE_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace annocal
{

/// Raised for malformed inputs: bad files, schema violations, broken invariants.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Corner-form box [x1, y1, x2, y2] in pixels. Also used for any per-coordinate
/// 4-vector (variances, interval bounds).
using Box = std::array<double, 4>;

inline bool is_valid_box(const Box& b)
{
  return std::isfinite(b[0]) && std::isfinite(b[1]) && std::isfinite(b[2]) &&
         std::isfinite(b[3]) && b[0] < b[2] && b[1] < b[3];
}

inline double box_area(const Box& b)
{
  return std::max(0.0, b[2] - b[0]) * std::max(0.0, b[3] - b[1]);
}

/// Intersection over union; 0 for disjoint boxes.
inline double iou(const Box& a, const Box& b)
{
  const double iw = std::min(a[2], b[2]) - std::max(a[0], b[0]);
  const double ih = std::min(a[3], b[3]) - std::max(a[1], b[1]);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = box_area(a) + box_area(b) - inter;
  return uni > 0.0 ? std::min(1.0, inter / uni) : 0.0;
}

/// Source of the scalar prediction certainty when it is not supplied.
enum class CertaintySource
{
  foreground,  // 1 - p[0]
  objectness,  // must be supplied by the detector
  max_class,   // max over foreground classes
};

inline std::string to_string(CertaintySource s)
{
  switch (s)
  {
  case CertaintySource::foreground: return "foreground";
  case CertaintySource::objectness: return "objectness";
  case CertaintySource::max_class: return "max_class";
  }
  return "foreground";
}

inline CertaintySource certainty_source_from_string(const std::string& s)
{
  if (s == "foreground") return CertaintySource::foreground;
  if (s == "objectness") return CertaintySource::objectness;
  if (s == "max_class") return CertaintySource::max_class;
  throw Error("unknown certainty_source '" + s + "'");
}

struct DatasetMeta
{
  int num_classes = 1;     // J, foreground classes 1..J
  int num_annotators = 2;  // K
  std::vector<std::string> class_names;
  CertaintySource certainty_source = CertaintySource::foreground;

  void validate() const
  {
    if (num_classes < 1) throw Error("num_classes must be >= 1");
    if (num_annotators < 2) throw Error("num_annotators must be >= 2");
    if (static_cast<int>(class_names.size()) != num_classes)
      throw Error("class_names length " + std::to_string(class_names.size()) +
                  " does not match num_classes " + std::to_string(num_classes));
  }
};

struct Annotation
{
  Box box{};
  int class_id = 1;      // 1..J, 0 is background
  int annotator_id = 1;  // 1..K

  bool operator==(const Annotation&) const = default;
};

struct ImageAnnotations
{
  std::string image_id;
  double width = 0.0;
  double height = 0.0;
  std::vector<Annotation> annotations;

  bool operator==(const ImageAnnotations&) const = default;
};

/// A probabilistic detection with a diagonal Gaussian box and a categorical
/// class distribution over J+1 entries (index 0 = background).
struct Prediction
{
  std::string image_id;
  Box mean{};
  Box var{};
  std::vector<double> class_probs;
  double certainty = 0.0;

  bool operator==(const Prediction&) const = default;
};

/// Foreground class with the highest probability; ties go to the lowest id.
/// Returns 0 when no foreground entry exists.
inline int predicted_class(const std::vector<double>& probs)
{
  int best = 0;
  double best_p = -1.0;
  for (std::size_t j = 1; j < probs.size(); ++j)
  {
    if (probs[j] > best_p)
    {
      best_p = probs[j];
      best = static_cast<int>(j);
    }
  }
  return best;
}

inline double derive_certainty(const std::vector<double>& probs, CertaintySource source)
{
  switch (source)
  {
  case CertaintySource::foreground: return std::clamp(1.0 - probs.at(0), 0.0, 1.0);
  case CertaintySource::max_class:
  {
    double m = 0.0;
    for (std::size_t j = 1; j < probs.size(); ++j) m = std::max(m, probs[j]);
    return m;
  }
  case CertaintySource::objectness:
    throw Error("certainty source 'objectness' cannot be derived from class_probs");
  }
  return 0.0;
}

struct MetricValues
{
  double tvd = 0.0;
  double tvd_fp = 0.0;
  std::optional<double> lue;  // undefined without true positives
  double fne = 0.0;
  double mean = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  bool operator==(const MetricValues&) const = default;
};

struct ImageMetrics
{
  std::string image_id;
  MetricValues values;

  bool operator==(const ImageMetrics&) const = default;
};

struct MetricsReport
{
  MetricValues values;
  std::size_t unknown_image_predictions = 0;
  std::vector<ImageMetrics> per_image;

  bool operator==(const MetricsReport&) const = default;
};

} // namespace annocal

#endif
