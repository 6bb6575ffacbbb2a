#pragma once

#include <vector>

namespace hetplan::lp {

enum class Sense { kLessEqual, kEqual, kGreaterEqual };

struct Constraint {
  std::vector<double> coef;
  Sense sense = Sense::kLessEqual;
  double rhs = 0.0;
};

// maximize objective . x  subject to constraints, x >= 0.
struct Problem {
  std::vector<double> objective;
  std::vector<Constraint> constraints;
};

enum class Status { kOptimal, kInfeasible, kUnbounded, kIterationLimit };

struct Solution {
  Status status = Status::kInfeasible;
  std::vector<double> x;
  double objective = 0.0;
};

// Dense two-phase simplex with Bland's pivoting rule. Deterministic; meant
// for the small routing problems (a few hundred columns at most).
Solution solve(const Problem& problem);

}  // namespace hetplan::lp
