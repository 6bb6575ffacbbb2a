#include "hetplan/lp.hpp"

#include <cmath>
#include <cstddef>
#include <limits>

namespace hetplan::lp {

namespace {

constexpr double kEps = 1e-11;
constexpr double kPivotTol = 1e-9;

class Tableau {
 public:
  Tableau(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), a_((rows + 1) * (cols + 1), 0.0), basis_(rows, 0) {}

  double& at(std::size_t r, std::size_t c) { return a_[r * (cols_ + 1) + c]; }
  double at(std::size_t r, std::size_t c) const { return a_[r * (cols_ + 1) + c]; }
  double& rhs(std::size_t r) { return at(r, cols_); }
  // Objective row lives at index rows_; entry c holds -(reduced cost).
  double& obj(std::size_t c) { return at(rows_, c); }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::vector<std::size_t>& basis() { return basis_; }

  void pivot(std::size_t pr, std::size_t pc) {
    const double p = at(pr, pc);
    for (std::size_t c = 0; c <= cols_; ++c) at(pr, c) /= p;
    for (std::size_t r = 0; r <= rows_; ++r) {
      if (r == pr) continue;
      const double f = at(r, pc);
      if (f == 0.0) continue;
      for (std::size_t c = 0; c <= cols_; ++c) at(r, c) -= f * at(pr, c);
    }
    for (std::size_t r = 0; r < rows_; ++r) {
      if (rhs(r) < 0.0 && rhs(r) > -kEps) rhs(r) = 0.0;
    }
    basis_[pr] = pc;
  }

  // Loads the objective row for maximising `c` (length cols_) given the
  // current basis.
  void set_objective(const std::vector<double>& c) {
    for (std::size_t j = 0; j <= cols_; ++j) obj(j) = j < cols_ ? -c[j] : 0.0;
    for (std::size_t r = 0; r < rows_; ++r) {
      const double cb = c[basis_[r]];
      if (cb == 0.0) continue;
      for (std::size_t j = 0; j <= cols_; ++j) obj(j) += cb * at(r, j);
    }
  }

  // Bland's rule. `allowed` masks columns that may enter.
  Status run(const std::vector<bool>& allowed) {
    const std::size_t limit = 50 * (rows_ + cols_) + 1000;
    for (std::size_t it = 0; it < limit; ++it) {
      std::size_t enter = cols_;
      for (std::size_t j = 0; j < cols_; ++j) {
        if (allowed[j] && obj(j) < -kEps) {
          enter = j;
          break;
        }
      }
      if (enter == cols_) return Status::kOptimal;
      std::size_t leave = rows_;
      double best_ratio = std::numeric_limits<double>::infinity();
      for (std::size_t r = 0; r < rows_; ++r) {
        const double v = at(r, enter);
        if (v <= kPivotTol) continue;
        // Round-off can leave a basic value slightly negative; treat it as 0.
        const double ratio = std::max(0.0, rhs(r)) / v;
        if (ratio < best_ratio - kEps ||
            (std::fabs(ratio - best_ratio) <= kEps && leave < rows_ && basis_[r] < basis_[leave])) {
          best_ratio = ratio;
          leave = r;
        }
      }
      if (leave == rows_) return Status::kUnbounded;
      pivot(leave, enter);
    }
    return Status::kIterationLimit;
  }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> a_;
  std::vector<std::size_t> basis_;
};

}  // namespace

Solution solve(const Problem& problem) {
  const std::size_t n = problem.objective.size();
  const std::size_t m = problem.constraints.size();

  // Column layout: [structural n | slack/surplus per inequality | artificial per row needing one]
  std::vector<int> slack_col(m, -1);
  std::vector<int> art_col(m, -1);
  std::vector<double> sign(m, 1.0);
  std::size_t cols = n;
  for (std::size_t r = 0; r < m; ++r) {
    Sense s = problem.constraints[r].sense;
    if (problem.constraints[r].rhs < 0) {
      sign[r] = -1.0;
      if (s == Sense::kLessEqual) {
        s = Sense::kGreaterEqual;
      } else if (s == Sense::kGreaterEqual) {
        s = Sense::kLessEqual;
      }
    }
    if (s != Sense::kEqual) slack_col[r] = static_cast<int>(cols++);
  }
  const std::size_t first_art = cols;
  for (std::size_t r = 0; r < m; ++r) {
    Sense s = problem.constraints[r].sense;
    const bool flipped = sign[r] < 0;
    const bool is_le = (s == Sense::kLessEqual && !flipped) || (s == Sense::kGreaterEqual && flipped);
    if (!is_le) art_col[r] = static_cast<int>(cols++);
  }

  Tableau t(m, cols);
  for (std::size_t r = 0; r < m; ++r) {
    const auto& con = problem.constraints[r];
    for (std::size_t j = 0; j < n && j < con.coef.size(); ++j) t.at(r, j) = sign[r] * con.coef[j];
    t.rhs(r) = sign[r] * con.rhs;
    const Sense s = con.sense;
    const bool flipped = sign[r] < 0;
    const bool is_le = (s == Sense::kLessEqual && !flipped) || (s == Sense::kGreaterEqual && flipped);
    if (slack_col[r] >= 0) t.at(r, static_cast<std::size_t>(slack_col[r])) = is_le ? 1.0 : -1.0;
    if (art_col[r] >= 0) {
      t.at(r, static_cast<std::size_t>(art_col[r])) = 1.0;
      t.basis()[r] = static_cast<std::size_t>(art_col[r]);
    } else {
      t.basis()[r] = static_cast<std::size_t>(slack_col[r]);
    }
  }

  std::vector<bool> allowed(cols, true);
  if (first_art < cols) {
    std::vector<double> phase1(cols, 0.0);
    for (std::size_t j = first_art; j < cols; ++j) phase1[j] = -1.0;
    t.set_objective(phase1);
    if (t.run(allowed) == Status::kIterationLimit) return {Status::kIterationLimit, {}, 0.0};
    if (t.obj(cols) < -1e-9) return {Status::kInfeasible, {}, 0.0};
    // Drive zero-valued artificials out of the basis where a well-sized
    // pivot exists; the row's value is zero up to round-off.
    for (std::size_t r = 0; r < m; ++r) {
      if (t.basis()[r] < first_art) continue;
      std::size_t best = first_art;
      for (std::size_t j = 0; j < first_art; ++j) {
        if (std::fabs(t.at(r, j)) > 1e-7 &&
            (best == first_art || std::fabs(t.at(r, j)) > std::fabs(t.at(r, best)))) {
          best = j;
        }
      }
      if (best < first_art) {
        t.rhs(r) = 0.0;
        t.pivot(r, best);
      }
    }
    for (std::size_t j = first_art; j < cols; ++j) allowed[j] = false;
  }

  std::vector<double> c(cols, 0.0);
  for (std::size_t j = 0; j < n; ++j) c[j] = problem.objective[j];
  t.set_objective(c);
  const Status st = t.run(allowed);
  if (st != Status::kOptimal) return {st, {}, 0.0};

  Solution sol;
  sol.status = Status::kOptimal;
  sol.x.assign(n, 0.0);
  for (std::size_t r = 0; r < m; ++r) {
    if (t.basis()[r] < n) sol.x[t.basis()[r]] = std::max(0.0, t.rhs(r));
  }
  for (std::size_t j = 0; j < n; ++j) sol.objective += problem.objective[j] * sol.x[j];
  return sol;
}

}  // namespace hetplan::lp
