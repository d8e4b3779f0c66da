// Oracles and fixtures shared by the unit tests and the acceptance runner.
// Everything here is deliberately naive: exhaustive enumeration, bisection,
// hand-rolled loops. None of it calls back into the code under test except to
// build inputs.

#ifndef ANNOCAL_TESTS_SUPPORT_HPP_
#define ANNOCAL_TESTS_SUPPORT_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include "annocal/annocal.hpp"

namespace oracle
{

using annocal::Box;
using annocal::CostMatrix;
using annocal::IndexPair;

// Standard normal CDF via erfc, then bisection for its inverse.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

inline double quantile_by_bisection(double p)
{
  double lo = -40.0, hi = 40.0;
  for (int i = 0; i < 200; ++i)
  {
    const double mid = 0.5 * (lo + hi);
    if (normal_cdf(mid) < p)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

struct BruteAssignment
{
  double best = std::numeric_limits<double>::infinity();
  std::vector<std::vector<IndexPair>> optimal;  // every assignment within tol of best
};

// All injective maps of the smaller side into the larger side.
inline BruteAssignment brute_force_assignment(const CostMatrix& cost, double tol = 1e-12)
{
  BruteAssignment out;
  const std::size_t r = cost.rows(), c = cost.cols();
  if (r == 0 || c == 0)
  {
    out.best = 0.0;
    out.optimal.push_back({});
    return out;
  }
  const bool rows_small = r <= c;
  const std::size_t small = rows_small ? r : c, large = rows_small ? c : r;
  std::vector<std::size_t> perm(large);
  std::iota(perm.begin(), perm.end(), 0);

  std::vector<std::pair<double, std::vector<IndexPair>>> all;
  std::set<std::vector<std::size_t>> seen;
  do
  {
    std::vector<std::size_t> head(perm.begin(), perm.begin() + static_cast<long>(small));
    if (!seen.insert(head).second) continue;
    std::vector<IndexPair> pairs;
    double total = 0.0;
    for (std::size_t i = 0; i < small; ++i)
    {
      const IndexPair p = rows_small ? IndexPair{i, head[i]} : IndexPair{head[i], i};
      pairs.push_back(p);
      total += cost(p.first, p.second);
    }
    std::sort(pairs.begin(), pairs.end());
    out.best = std::min(out.best, total);
    all.emplace_back(total, std::move(pairs));
  } while (std::next_permutation(perm.begin(), perm.end()));

  for (auto& [total, pairs] : all)
    if (total <= out.best + tol * std::max(1.0, std::abs(out.best))) out.optimal.push_back(pairs);
  return out;
}

// Isotonic least squares by enumerating every split of the sorted points into
// contiguous blocks. A split is admissible when its block means are
// nondecreasing; the best admissible split is the projection. Requires
// distinct xs.
inline double brute_force_isotonic_objective(const std::vector<double>& xs,
                                             const std::vector<double>& ys,
                                             const std::vector<double>& ws)
{
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return xs[a] < xs[b]; });
  const std::size_t n = order.size();
  double best = std::numeric_limits<double>::infinity();
  for (std::uint32_t cuts = 0; cuts < (1u << (n - 1)); ++cuts)
  {
    double obj = 0.0, prev = -std::numeric_limits<double>::infinity();
    bool ok = true;
    std::size_t start = 0;
    for (std::size_t i = 0; i < n && ok; ++i)
    {
      const bool end_here = i == n - 1 || (cuts >> i) & 1u;
      if (!end_here) continue;
      double wy = 0.0, w = 0.0;
      for (std::size_t k = start; k <= i; ++k)
      {
        wy += ws[order[k]] * ys[order[k]];
        w += ws[order[k]];
      }
      const double mean = wy / w;
      if (mean < prev) ok = false;
      prev = mean;
      for (std::size_t k = start; k <= i; ++k)
        obj += ws[order[k]] * (mean - ys[order[k]]) * (mean - ys[order[k]]);
      start = i + 1;
    }
    if (ok) best = std::min(best, obj);
  }
  return best;
}

inline Box random_box(std::mt19937_64& rng, double extent = 100.0, double min_side = 5.0,
                      double max_side = 40.0)
{
  std::uniform_real_distribution<double> side(min_side, max_side);
  const double w = side(rng), h = side(rng);
  std::uniform_real_distribution<double> px(0.0, extent - w), py(0.0, extent - h);
  const double x = px(rng), y = py(rng);
  return {x, y, x + w, y + h};
}

inline std::vector<double> random_simplex(std::mt19937_64& rng, std::size_t n)
{
  std::exponential_distribution<double> e(1.0);
  std::vector<double> v(n);
  double s = 0.0;
  for (auto& x : v) s += (x = e(rng));
  for (auto& x : v) x /= s;
  return v;
}

inline annocal::DatasetMeta make_meta(int classes, int annotators)
{
  annocal::DatasetMeta m;
  m.num_classes = classes;
  m.num_annotators = annotators;
  for (int j = 1; j <= classes; ++j) m.class_names.push_back("c" + std::to_string(j));
  return m;
}

inline annocal::AnnotationCluster make_cluster(const std::vector<annocal::Annotation>& anns,
                                               int classes, int annotators,
                                               double gamma = annocal::kDefaultGamma)
{
  annocal::AnnotationCluster c;
  for (std::size_t i = 0; i < anns.size(); ++i) c.members.push_back({anns[i], i});
  annocal::finalize_cluster(c, classes, annotators, gamma);
  return c;
}

// Voiding rule of the evaluation matcher applied to a list of (cluster, pred)
// pairs; returns surviving (pred, cluster) pairs.
inline std::vector<IndexPair> void_zero_iou(const std::vector<IndexPair>& cluster_pred,
                                            const std::vector<annocal::AnnotationCluster>& clusters,
                                            const std::vector<annocal::Prediction>& preds)
{
  std::vector<IndexPair> out;
  for (const auto& [h, n] : cluster_pred)
    if (annocal::iou(clusters[h].mean_box, preds[n].mean) > 0.0) out.emplace_back(n, h);
  std::sort(out.begin(), out.end());
  return out;
}

inline std::vector<IndexPair> filter_min_iou(const std::vector<IndexPair>& pairs,
                                             const std::vector<Box>& a, const std::vector<Box>& b,
                                             double min_iou)
{
  std::vector<IndexPair> out;
  for (const auto& [i, j] : pairs)
  {
    const double o = annocal::iou(a[i], b[j]);
    if (o > 0.0 && o >= min_iou) out.emplace_back(i, j);
  }
  return out;
}

} // namespace oracle

namespace gen
{

using annocal::Box;
using oracle::make_cluster;
using oracle::make_meta;
using oracle::random_box;

inline annocal::Prediction pred_at(const Box& mean, double var = 1.0)
{
  annocal::Prediction p;
  p.image_id = "i";
  p.mean = mean;
  p.var = {var, var, var, var};
  p.class_probs = {0.5, 0.5};
  p.certainty = 0.5;
  return p;
}

struct RandomImage
{
  std::vector<annocal::AnnotationCluster> clusters;
  std::vector<annocal::Prediction> preds;
};

inline RandomImage random_image(std::mt19937_64& rng, int K, std::size_t max_side = 6)
{
  std::uniform_int_distribution<std::size_t> n(0, max_side);
  std::uniform_real_distribution<double> var(0.5, 30.0);
  std::uniform_int_distribution<int> members(1, K);
  RandomImage out;
  const std::size_t nc = n(rng), np = n(rng);
  for (std::size_t h = 0; h < nc; ++h)
  {
    const Box base = random_box(rng, 80.0, 8.0, 30.0);
    std::vector<annocal::Annotation> anns;
    const int m = members(rng);
    for (int k = 1; k <= m; ++k)
    {
      Box b = base;
      for (auto& x : b) x += std::normal_distribution<double>(0.0, 1.5)(rng);
      if (b[0] >= b[2]) b[2] = b[0] + 1.0;
      if (b[1] >= b[3]) b[3] = b[1] + 1.0;
      anns.push_back({b, 1, k});
    }
    out.clusters.push_back(make_cluster(anns, 1, K));
  }
  for (std::size_t i = 0; i < np; ++i)
  {
    annocal::Prediction p = pred_at(random_box(rng, 80.0, 8.0, 30.0));
    for (auto& v : p.var) v = var(rng);
    out.preds.push_back(p);
  }
  return out;
}

inline std::vector<double> softmax(const std::vector<double>& z)
{
  const double m = *std::max_element(z.begin(), z.end());
  std::vector<double> p(z.size());
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) s += (p[i] = std::exp(z[i] - m));
  for (auto& x : p) x /= s;
  return p;
}

struct Problem
{
  annocal::DatasetMeta meta;
  std::vector<annocal::AnnotationCluster> clusters;
  std::vector<annocal::Prediction> preds;
  std::vector<std::vector<double>> logits;
  std::vector<annocal::IndexPair> pairs;
};

inline Problem random_problem(std::mt19937_64& rng)
{
  const int J = 3, K = 4;
  Problem pr;
  pr.meta = make_meta(J, K);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<int> cls(1, J), members(1, K);
  for (int h = 0; h < 3; ++h)
  {
    const Box base = random_box(rng);
    std::vector<annocal::Annotation> anns;
    for (int k = 1, m = members(rng); k <= m; ++k)
    {
      Box b = base;
      for (auto& x : b) x += 2.0 * u(rng);
      anns.push_back({b, cls(rng), k});
    }
    pr.clusters.push_back(make_cluster(anns, J, K));
  }
  for (int n = 0; n < 4; ++n)
  {
    annocal::Prediction p;
    p.image_id = "i";
    p.mean = random_box(rng);
    for (auto& v : p.var) v = 5.0 + 20.0 * (u(rng) + 1.0);
    std::vector<double> z(J + 1);
    for (auto& x : z) x = 2.0 * u(rng);
    pr.logits.push_back(z);
    p.class_probs = softmax(z);
    p.certainty = 0.2 + 0.3 * (u(rng) + 1.0);
    pr.preds.push_back(p);
  }
  pr.pairs = {{0, 2}, {2, 0}, {3, 1}};
  return pr;
}

} // namespace gen

namespace fixtures
{

// Every annotator sees every object with the exact latent box; only class
// labels are noisy.
inline annocal::SimulationConfig clean_box_config()
{
  annocal::SimulationConfig c;
  c.seed = 20240601;
  c.num_images = 1000;
  c.num_classes = 10;
  c.annotators = {{0.74, 0.0, 0.0, 0.0}, {0.74, 0.0, 0.0, 0.0}, {0.55, 0.0, 0.0, 0.0},
                  {0.55, 0.0, 0.0, 0.0}, {0.55, 0.0, 0.0, 0.0}};
  return c;
}

// Frequent misses and box jitter: most clusters have one or two members.
inline annocal::SimulationConfig low_agreement_config(std::uint64_t seed = 20240917)
{
  annocal::SimulationConfig c;
  c.seed = seed;
  c.num_images = 1000;
  c.num_classes = 10;
  c.annotators = {{0.74, 0.6, 0.03, 0.05}, {0.74, 0.6, 0.03, 0.05}, {0.55, 0.6, 0.05, 0.1},
                  {0.55, 0.6, 0.05, 0.1}, {0.55, 0.6, 0.05, 0.1}};
  return c;
}

} // namespace fixtures

#endif
