#include <algorithm>
#include <cmath>
#include <limits>

#include "cova/errors.hpp"
#include "cova/tracking.hpp"

namespace cova {
namespace {

// Shortest augmenting path with potentials, rows <= cols. Returns, for each
// row, its assigned column.
std::vector<int> solve_rows_le_cols(const std::vector<double>& a, int n, int m) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(static_cast<std::size_t>(n) + 1, 0.0), v(static_cast<std::size_t>(m) + 1, 0.0);
  std::vector<int> p(static_cast<std::size_t>(m) + 1, 0), way(static_cast<std::size_t>(m) + 1, 0);
  auto cost = [&](int i, int j) { return a[static_cast<std::size_t>(i - 1) * m + (j - 1)]; };
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(static_cast<std::size_t>(m) + 1, kInf);
    std::vector<char> used(static_cast<std::size_t>(m) + 1, 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const int i0 = p[static_cast<std::size_t>(j0)];
      double delta = kInf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const double cur = cost(i0, j) - u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= m; ++j)
    if (p[static_cast<std::size_t>(j)] != 0) row_to_col[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)] = j - 1;
  return row_to_col;
}

// Optimal cost of matching min(|rows|, |cols|) pairs within a submatrix.
double optimal_cost(const Grid<double>& c, const std::vector<int>& rows, const std::vector<int>& cols) {
  if (rows.empty() || cols.empty()) return 0.0;
  const bool transpose = rows.size() > cols.size();
  const int n = static_cast<int>(transpose ? cols.size() : rows.size());
  const int m = static_cast<int>(transpose ? rows.size() : cols.size());
  std::vector<double> a(static_cast<std::size_t>(n) * m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j)
      a[static_cast<std::size_t>(i) * m + j] =
          transpose ? c.at(rows[static_cast<std::size_t>(j)], cols[static_cast<std::size_t>(i)])
                    : c.at(rows[static_cast<std::size_t>(i)], cols[static_cast<std::size_t>(j)]);
  const auto r2c = solve_rows_le_cols(a, n, m);
  double total = 0.0;
  for (int i = 0; i < n; ++i) total += a[static_cast<std::size_t>(i) * m + r2c[static_cast<std::size_t>(i)]];
  return total;
}

bool same_cost(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b)); }

}  // namespace

Assignment hungarian(const Grid<double>& cost) {
  for (double v : cost.data)
    if (!std::isfinite(v)) throw InputError("assignment cost matrix contains a non-finite value");
  Assignment out;
  if (cost.rows == 0 || cost.cols == 0) return out;

  std::vector<int> rows(static_cast<std::size_t>(cost.rows)), cols(static_cast<std::size_t>(cost.cols));
  for (int i = 0; i < cost.rows; ++i) rows[static_cast<std::size_t>(i)] = i;
  for (int j = 0; j < cost.cols; ++j) cols[static_cast<std::size_t>(j)] = j;
  const double best = optimal_cost(cost, rows, cols);

  // Fix pairs row by row, taking the smallest column that keeps the remainder
  // optimal. With more rows than columns a row may end up unassigned.
  int need = std::min(cost.rows, cost.cols);
  double spent = 0.0;
  std::vector<int> rows_left = rows;
  std::vector<int> cols_left = cols;
  for (int r = 0; r < cost.rows && need > 0; ++r) {
    rows_left.erase(rows_left.begin());
    const bool feasible = static_cast<int>(std::min(rows_left.size(), cols_left.size() - 1)) >= need - 1;
    for (std::size_t k = 0; feasible && k < cols_left.size(); ++k) {
      const int c = cols_left[k];
      std::vector<int> rest_cols = cols_left;
      rest_cols.erase(rest_cols.begin() + static_cast<std::ptrdiff_t>(k));
      const double total = spent + cost.at(r, c) + optimal_cost(cost, rows_left, rest_cols);
      if (same_cost(total, best)) {
        out.pairs.emplace_back(r, c);
        spent += cost.at(r, c);
        cols_left = std::move(rest_cols);
        --need;
        break;
      }
    }
  }
  double total = 0.0;
  for (const auto& [r, c] : out.pairs) total += cost.at(r, c);
  out.cost = total;
  return out;
}

}  // namespace cova
