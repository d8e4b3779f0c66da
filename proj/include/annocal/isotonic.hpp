#ifndef ANNOCAL_ISOTONIC_HPP_
#define ANNOCAL_ISOTONIC_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "annocal/core.hpp"

namespace annocal
{

enum class MapDomain
{
  unit_interval,      // outputs clamped to [0, 1]
  nonnegative_reals,  // outputs clamped to [0, inf)
};

enum class InputSpace
{
  linear,
  log,  // breakpoints stored as log(max(x, kLogInputFloor))
};

inline constexpr double kLogInputFloor = 1e-12;

inline std::string to_string(MapDomain d)
{
  return d == MapDomain::unit_interval ? "unit_interval" : "nonnegative_reals";
}

inline MapDomain map_domain_from_string(const std::string& s)
{
  if (s == "unit_interval") return MapDomain::unit_interval;
  if (s == "nonnegative_reals") return MapDomain::nonnegative_reals;
  throw Error("unknown map domain '" + s + "'");
}

inline std::string to_string(InputSpace s) { return s == InputSpace::linear ? "linear" : "log"; }

inline InputSpace input_space_from_string(const std::string& s)
{
  if (s == "linear") return InputSpace::linear;
  if (s == "log") return InputSpace::log;
  throw Error("unknown input space '" + s + "'");
}

/// Monotone piecewise-linear map. Linear interpolation between breakpoints,
/// constant extrapolation outside them. No breakpoints means identity.
struct IsotonicMap
{
  std::vector<double> breakpoints;  // strictly ascending, in input space
  std::vector<double> values;       // nondecreasing
  MapDomain domain = MapDomain::unit_interval;
  InputSpace input_space = InputSpace::linear;

  static IsotonicMap identity(MapDomain domain)
  {
    IsotonicMap m;
    m.domain = domain;
    return m;
  }

  bool is_identity() const { return breakpoints.empty(); }

  double clamp_output(double y) const
  {
    return domain == MapDomain::unit_interval ? std::clamp(y, 0.0, 1.0) : std::max(y, 0.0);
  }

  double transform_input(double x) const
  {
    return input_space == InputSpace::log ? std::log(std::max(x, kLogInputFloor)) : x;
  }

  double operator()(double x) const
  {
    if (is_identity()) return clamp_output(x);
    const double u = transform_input(x);
    if (u <= breakpoints.front()) return values.front();
    if (u >= breakpoints.back()) return values.back();
    const auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), u);
    const auto hi = static_cast<std::size_t>(it - breakpoints.begin());
    const auto lo = hi - 1;
    const double t = (u - breakpoints[lo]) / (breakpoints[hi] - breakpoints[lo]);
    return values[lo] + t * (values[hi] - values[lo]);
  }

  bool operator==(const IsotonicMap&) const = default;
};

/// Weighted isotonic regression by pool-adjacent-violators. Minimizes
/// sum w_i (f(x_i) - y_i)^2 over nondecreasing f. Points with zero weight do
/// not influence the fit; equal inputs are pooled first.
inline IsotonicMap fit_isotonic(std::span<const double> xs, std::span<const double> ys,
                                std::span<const double> weights,
                                MapDomain domain = MapDomain::unit_interval,
                                InputSpace input_space = InputSpace::linear)
{
  if (xs.size() != ys.size() || xs.size() != weights.size())
    throw Error("fit_isotonic: input lengths differ");
  if (xs.empty()) throw Error("fit_isotonic: empty input");

  IsotonicMap map;
  map.domain = domain;
  map.input_space = input_space;

  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < xs.size(); ++i)
  {
    if (weights[i] < 0.0 || !std::isfinite(weights[i])) throw Error("fit_isotonic: invalid weight");
    if (!std::isfinite(xs[i]) || !std::isfinite(ys[i])) throw Error("fit_isotonic: non-finite sample");
    if (weights[i] > 0.0) order.push_back(i);
  }
  if (order.empty()) throw Error("fit_isotonic: all weights are zero");

  std::vector<double> u(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) u[i] = map.transform_input(xs[i]);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return u[a] < u[b]; });

  struct Block
  {
    double wy = 0.0;
    double w = 0.0;
    double x_first = 0.0;
    double x_last = 0.0;
    double mean() const { return wy / w; }
  };

  // pool ties in x
  std::vector<Block> points;
  for (auto i : order)
  {
    if (!points.empty() && points.back().x_last == u[i])
    {
      points.back().wy += weights[i] * ys[i];
      points.back().w += weights[i];
    }
    else
    {
      points.push_back({weights[i] * ys[i], weights[i], u[i], u[i]});
    }
  }

  std::vector<Block> stack;
  for (const auto& p : points)
  {
    stack.push_back(p);
    while (stack.size() > 1 && stack[stack.size() - 2].mean() >= stack.back().mean())
    {
      Block top = stack.back();
      stack.pop_back();
      stack.back().wy += top.wy;
      stack.back().w += top.w;
      stack.back().x_last = top.x_last;
    }
  }

  for (const auto& b : stack)
  {
    const double v = map.clamp_output(b.mean());
    map.breakpoints.push_back(b.x_first);
    map.values.push_back(v);
    if (b.x_last != b.x_first)
    {
      map.breakpoints.push_back(b.x_last);
      map.values.push_back(v);
    }
  }
  return map;
}

} // namespace annocal

#endif
