#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "hetplan/cluster.hpp"
#include "hetplan/orchestrator.hpp"

namespace hetplan::testing {

// Gaussian elimination with partial pivoting; nullopt when singular.
inline std::optional<std::vector<double>> solve_square(Matrix a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t p = c;
    for (std::size_t r = c + 1; r < n; ++r) {
      if (std::fabs(a[r][c]) > std::fabs(a[p][c])) p = r;
    }
    if (std::fabs(a[p][c]) < 1e-12) return std::nullopt;
    std::swap(a[p], a[c]);
    std::swap(b[p], b[c]);
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c) continue;
      const double f = a[r][c] / a[c][c];
      if (f == 0.0) continue;
      for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
      b[r] -= f * b[c];
    }
  }
  for (std::size_t k = 0; k < n; ++k) b[k] /= a[k][k];
  return b;
}

// Optimum of the routing LP by enumerating every basic solution: the sum
// equality plus (m*n - 1) active inequalities drawn from the row limits, the
// column limits and z >= 0.
inline double vertex_enumeration_optimum(const Matrix& d, const std::vector<double>& prefill_cap,
                                         const std::vector<double>& decode_cap, double rate) {
  const std::size_t m = d.size();
  const std::size_t n = d[0].size();
  const std::size_t nv = m * n;
  Matrix rows;
  std::vector<double> rhs;
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<double> r(nv, 0.0);
    for (std::size_t j = 0; j < n; ++j) r[i * n + j] = 1.0;
    rows.push_back(r);
    rhs.push_back(prefill_cap[i] / rate);
  }
  for (std::size_t j = 0; j < n; ++j) {
    std::vector<double> r(nv, 0.0);
    for (std::size_t i = 0; i < m; ++i) r[i * n + j] = 1.0;
    rows.push_back(r);
    rhs.push_back(decode_cap[j] / rate);
  }
  for (std::size_t k = 0; k < nv; ++k) {
    std::vector<double> r(nv, 0.0);
    r[k] = 1.0;
    rows.push_back(r);
    rhs.push_back(0.0);
  }
  const std::size_t total = rows.size();
  const std::size_t pick = nv - 1;
  std::vector<bool> mask(total, false);
  std::fill(mask.begin(), mask.begin() + static_cast<long>(pick), true);
  double best = -std::numeric_limits<double>::infinity();
  do {
    Matrix a = {std::vector<double>(nv, 1.0)};
    std::vector<double> b = {1.0};
    for (std::size_t k = 0; k < total; ++k) {
      if (mask[k]) {
        a.push_back(rows[k]);
        b.push_back(rhs[k]);
      }
    }
    const auto x = solve_square(a, b);
    if (!x) continue;
    bool feasible = true;
    for (std::size_t k = 0; k < total && feasible; ++k) {
      double lhs = 0.0;
      for (std::size_t v = 0; v < nv; ++v) lhs += rows[k][v] * (*x)[v];
      if (k < m + n) {
        feasible = lhs <= rhs[k] + 1e-9;
      } else {
        feasible = lhs >= -1e-12;
      }
    }
    if (!feasible) continue;
    double obj = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) obj += d[i][j] * (*x)[i * n + j];
    }
    best = std::max(best, obj);
  } while (std::prev_permutation(mask.begin(), mask.end()));
  return best;
}

}  // namespace hetplan::testing
