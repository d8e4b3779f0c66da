#ifndef ANNOCAL_AGREEMENT_HPP_
#define ANNOCAL_AGREEMENT_HPP_

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "annocal/preprocess.hpp"

namespace annocal
{

/// How annotators that did not label a cluster enter the reliability data.
enum class AbsentAnnotatorCoding
{
  background,  // counted as having labeled class 0
  missing,     // dropped from the unit
};

struct AgreementResult
{
  std::optional<double> alpha;  // empty: insufficient pairable values
  double pairable_values = 0.0;
  std::size_t units = 0;
};

/// Nominal Krippendorff's alpha computed from the coincidence matrix with
/// clusters as units, annotators as coders and class labels as values.
/// When every pairable value is identical (no disagreement is possible) the
/// result is 1.
inline AgreementResult krippendorff_alpha(
    std::span<const std::vector<AnnotationCluster>> dataset, const DatasetMeta& meta,
    AbsentAnnotatorCoding coding = AbsentAnnotatorCoding::background)
{
  const std::size_t values = static_cast<std::size_t>(meta.num_classes) + 1;
  std::vector<double> coincidence(values * values, 0.0);
  AgreementResult result;

  std::vector<double> counts(values);
  for (const auto& image : dataset)
  {
    for (const auto& cluster : image)
    {
      std::fill(counts.begin(), counts.end(), 0.0);
      for (const auto& m : cluster.members)
      {
        const int c = m.annotation.class_id;
        if (c < 1 || c > meta.num_classes) throw Error("class_id out of range in agreement");
        counts[static_cast<std::size_t>(c)] += 1.0;
      }
      if (coding == AbsentAnnotatorCoding::background)
        counts[0] = static_cast<double>(meta.num_annotators) - static_cast<double>(cluster.size());

      double m_u = 0.0;
      for (double x : counts) m_u += x;
      if (m_u < 2.0) continue;
      ++result.units;
      for (std::size_t c = 0; c < values; ++c)
      {
        if (counts[c] == 0.0) continue;
        for (std::size_t k = 0; k < values; ++k)
        {
          const double pairs = counts[c] * (counts[k] - (c == k ? 1.0 : 0.0));
          coincidence[c * values + k] += pairs / (m_u - 1.0);
        }
      }
    }
  }

  std::vector<double> marginal(values, 0.0);
  double n = 0.0;
  for (std::size_t c = 0; c < values; ++c)
  {
    for (std::size_t k = 0; k < values; ++k) marginal[c] += coincidence[c * values + k];
    n += marginal[c];
  }
  result.pairable_values = n;
  if (n < 2.0) return result;

  double observed = 0.0;
  double expected = 0.0;
  for (std::size_t c = 0; c < values; ++c)
  {
    for (std::size_t k = 0; k < values; ++k)
    {
      if (c == k) continue;
      observed += coincidence[c * values + k];
      expected += marginal[c] * marginal[k];
    }
  }
  if (expected == 0.0)
  {
    result.alpha = 1.0;
    return result;
  }
  result.alpha = 1.0 - (n - 1.0) * observed / expected;
  return result;
}

} // namespace annocal

#endif
