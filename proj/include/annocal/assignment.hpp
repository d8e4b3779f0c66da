#ifndef ANNOCAL_ASSIGNMENT_HPP_
#define ANNOCAL_ASSIGNMENT_HPP_

#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

#include "annocal/core.hpp"

namespace annocal
{

/// Dense row-major cost matrix.
class CostMatrix
{
public:
  CostMatrix() = default;
  CostMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill)
  {
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

using IndexPair = std::pair<std::size_t, std::size_t>;

namespace detail
{

// Shortest augmenting path Hungarian method with row/column potentials,
// requires rows <= cols. Returns the column assigned to each row.
inline std::vector<std::size_t> hungarian_rows_le_cols(const CostMatrix& cost)
{
  const std::size_t n = cost.rows();
  const std::size_t m = cost.cols();
  const double inf = std::numeric_limits<double>::infinity();

  // 1-based with column 0 as the virtual source
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> owner(m + 1, 0), way(m + 1, 0);

  for (std::size_t i = 1; i <= n; ++i)
  {
    owner[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do
    {
      used[j0] = 1;
      const std::size_t i0 = owner[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j)
      {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j])
        {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta)
        {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j)
      {
        if (used[j])
        {
          u[owner[j]] += delta;
          v[j] -= delta;
        }
        else
        {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (owner[j0] != 0);

    do
    {
      const std::size_t j1 = way[j0];
      owner[j0] = owner[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<std::size_t> row_to_col(n, 0);
  for (std::size_t j = 1; j <= m; ++j)
    if (owner[j] != 0) row_to_col[owner[j] - 1] = j - 1;
  return row_to_col;
}

} // namespace detail

/// Minimum-cost rectangular assignment. Every element of the smaller side is
/// assigned; the result lists (row, col) pairs in ascending row order. All
/// costs must be finite.
inline std::vector<IndexPair> solve_assignment(const CostMatrix& cost)
{
  std::vector<IndexPair> pairs;
  if (cost.rows() == 0 || cost.cols() == 0) return pairs;
  for (std::size_t r = 0; r < cost.rows(); ++r)
    for (std::size_t c = 0; c < cost.cols(); ++c)
      if (!std::isfinite(cost(r, c))) throw Error("assignment cost matrix contains a non-finite entry");

  if (cost.rows() <= cost.cols())
  {
    const auto cols = detail::hungarian_rows_le_cols(cost);
    for (std::size_t r = 0; r < cols.size(); ++r) pairs.emplace_back(r, cols[r]);
  }
  else
  {
    CostMatrix t(cost.cols(), cost.rows());
    for (std::size_t r = 0; r < cost.rows(); ++r)
      for (std::size_t c = 0; c < cost.cols(); ++c) t(c, r) = cost(r, c);
    const auto rows = detail::hungarian_rows_le_cols(t);
    for (std::size_t c = 0; c < rows.size(); ++c) pairs.emplace_back(rows[c], c);
    std::sort(pairs.begin(), pairs.end());
  }
  return pairs;
}

inline double assignment_cost(const CostMatrix& cost, const std::vector<IndexPair>& pairs)
{
  double total = 0.0;
  for (const auto& [r, c] : pairs) total += cost(r, c);
  return total;
}

} // namespace annocal

#endif
