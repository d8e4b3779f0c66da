#ifndef ANNOCAL_POSTHOC_HPP_
#define ANNOCAL_POSTHOC_HPP_

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "annocal/isotonic.hpp"
#include "annocal/pipeline.hpp"

namespace annocal
{

/// How the non-calibrated entries are adjusted after the predicted class is
/// remapped.
enum class RenormalizationMode
{
  proportional,  // scale every other entry by (1 - new) / (1 - old)
  printed,       // divide other foreground entries by (1 - new), then renormalize
};

struct PosthocConfig
{
  EvaluationConfig eval;
  InputSpace variance_space = InputSpace::linear;
};

struct BankFingerprint
{
  int num_classes = 0;
  int num_annotators = 0;
  std::size_t num_pairs = 0;
  double min_iou = kDefaultMinIou;
  double gamma = kDefaultGamma;
  double var_floor = kDefaultVarFloor;
  std::vector<int> identity_classes;  // classes left uncalibrated for lack of data
  bool operator==(const BankFingerprint&) const = default;
};

/// J class-confidence maps followed by one variance map per box coordinate.
struct CalibratorBank
{
  std::vector<IsotonicMap> class_maps;  // class_maps[j - 1] calibrates class j
  std::array<IsotonicMap, 4> var_maps{IsotonicMap::identity(MapDomain::nonnegative_reals),
                                      IsotonicMap::identity(MapDomain::nonnegative_reals),
                                      IsotonicMap::identity(MapDomain::nonnegative_reals),
                                      IsotonicMap::identity(MapDomain::nonnegative_reals)};
  BankFingerprint fingerprint;

  int num_classes() const { return static_cast<int>(class_maps.size()); }

  static CalibratorBank identity(int num_classes)
  {
    CalibratorBank bank;
    bank.class_maps.assign(static_cast<std::size_t>(num_classes),
                           IsotonicMap::identity(MapDomain::unit_interval));
    bank.fingerprint.num_classes = num_classes;
    for (int j = 1; j <= num_classes; ++j) bank.fingerprint.identity_classes.push_back(j);
    return bank;
  }

  bool operator==(const CalibratorBank&) const = default;
};

/// Fit the calibrator bank on matched validation pairs. Every TP pair adds,
/// for each class j, the point (p[j], t[j]) and, for each coordinate i, the
/// point (var[i], sigma[i]), all weighted by the prediction certainty.
inline CalibratorBank fit_calibrator_bank(std::span<const ImageAnnotations> annotations,
                                          std::span<const Prediction> predictions,
                                          const DatasetMeta& meta, const PosthocConfig& config = {})
{
  if (annotations.empty() || predictions.empty()) throw Error("empty validation set");
  const auto matched = match_dataset(annotations, predictions, meta, config.eval);

  const auto J = static_cast<std::size_t>(meta.num_classes);
  std::vector<std::vector<double>> cx(J), cy(J), cw(J);
  std::array<std::vector<double>, 4> vx, vy, vw;
  std::size_t pairs = 0;
  for (const auto& img : matched.images)
  {
    for (const auto& [n, h] : img.outcome.tp)
    {
      const auto& pred = img.predictions[n];
      const auto& cluster = img.clusters[h];
      if (pred.class_probs.size() != J + 1) throw Error("prediction class count does not match meta");
      for (std::size_t j = 1; j <= J; ++j)
      {
        cx[j - 1].push_back(pred.class_probs[j]);
        cy[j - 1].push_back(cluster.soft_label[j]);
        cw[j - 1].push_back(pred.certainty);
      }
      for (std::size_t i = 0; i < 4; ++i)
      {
        vx[i].push_back(pred.var[i]);
        vy[i].push_back(cluster.target_var[i]);
        vw[i].push_back(pred.certainty);
      }
      ++pairs;
    }
  }
  if (pairs == 0) throw Error("no matched prediction-cluster pairs in the validation set");

  auto has_weight = [](const std::vector<double>& w) {
    for (double x : w)
      if (x > 0.0) return true;
    return false;
  };

  CalibratorBank bank;
  bank.fingerprint.num_classes = meta.num_classes;
  bank.fingerprint.num_annotators = meta.num_annotators;
  bank.fingerprint.num_pairs = pairs;
  bank.fingerprint.min_iou = config.eval.cluster.min_iou;
  bank.fingerprint.gamma = config.eval.cluster.gamma;
  bank.fingerprint.var_floor = config.eval.match.var_floor;
  for (std::size_t j = 0; j < J; ++j)
  {
    if (has_weight(cw[j]))
    {
      bank.class_maps.push_back(fit_isotonic(cx[j], cy[j], cw[j], MapDomain::unit_interval));
    }
    else
    {
      bank.class_maps.push_back(IsotonicMap::identity(MapDomain::unit_interval));
      bank.fingerprint.identity_classes.push_back(static_cast<int>(j + 1));
    }
  }
  for (std::size_t i = 0; i < 4; ++i)
  {
    if (has_weight(vw[i]))
      bank.var_maps[i] = fit_isotonic(vx[i], vy[i], vw[i], MapDomain::nonnegative_reals,
                                      config.variance_space);
  }
  return bank;
}

/// Remap the predicted foreground class and adjust the remaining entries so
/// the vector stays a categorical distribution.
inline std::vector<double> apply_class_calibration(
    std::span<const double> probs, const CalibratorBank& bank,
    RenormalizationMode mode = RenormalizationMode::proportional)
{
  if (probs.size() != static_cast<std::size_t>(bank.num_classes()) + 1)
    throw Error("class probability length " + std::to_string(probs.size()) +
                " does not match calibrator bank with " + std::to_string(bank.num_classes()) +
                " classes");
  std::vector<double> out(probs.begin(), probs.end());
  const int j = predicted_class(out);
  if (j == 0) return out;
  const auto jj = static_cast<std::size_t>(j);
  const double old_p = probs[jj];
  const double new_p = bank.class_maps[jj - 1](old_p);

  if (mode == RenormalizationMode::proportional)
  {
    out[jj] = new_p;
    if (old_p >= 1.0)
    {
      for (std::size_t c = 0; c < out.size(); ++c)
        if (c != jj) out[c] = 0.0;
      out[0] = 1.0 - new_p;
      return out;
    }
    const double factor = (1.0 - new_p) / (1.0 - old_p);
    for (std::size_t c = 0; c < out.size(); ++c)
      if (c != jj) out[c] = probs[c] * factor;
    return out;
  }

  out[jj] = new_p;
  for (std::size_t c = 1; c < out.size(); ++c)
  {
    if (c == jj) continue;
    out[c] = new_p < 1.0 ? probs[c] / (1.0 - new_p) : 0.0;
  }
  double total = 0.0;
  for (double x : out) total += x;
  if (total > 0.0)
    for (auto& x : out) x /= total;
  return out;
}

inline Box apply_variance_calibration(const Box& var, const CalibratorBank& bank)
{
  Box out{};
  for (std::size_t i = 0; i < 4; ++i) out[i] = bank.var_maps[i](var[i]);
  return out;
}

/// Calibrated copy of a prediction; the box mean and certainty are untouched.
inline Prediction calibrate_prediction(const Prediction& pred, const CalibratorBank& bank,
                                       RenormalizationMode mode = RenormalizationMode::proportional)
{
  Prediction out = pred;
  out.class_probs = apply_class_calibration(pred.class_probs, bank, mode);
  out.var = apply_variance_calibration(pred.var, bank);
  return out;
}

} // namespace annocal

#endif
