#pragma once

#include "gpufair/model.hpp"

namespace gpufair {

/// Standard-form linear program: maximize objective over x >= 0 subject to
/// equality and <= constraints.
struct LinearProgram {
  std::size_t num_vars = 0;
  Vec objective;

  struct Row {
    Vec coeffs;
    double rhs = 0;
  };
  std::vector<Row> eq;
  std::vector<Row> le;

  void add_eq(Vec coeffs, double rhs) { eq.push_back({std::move(coeffs), rhs}); }
  void add_le(Vec coeffs, double rhs) { le.push_back({std::move(coeffs), rhs}); }
};

enum class LpStatus { Optimal, Infeasible, Unbounded };

struct LpSolution {
  LpStatus status = LpStatus::Infeasible;
  Vec values;
  double objective_value = 0;
  bool is_vertex = false;  // basic feasible solution
};

/// Dense two-phase simplex. Deterministic: identical inputs produce
/// bitwise-identical outputs. Entering variable by largest reduced cost with
/// lowest-index tie break; after a degenerate stall the rule switches to
/// Bland's (lowest index) until the objective moves again, which prevents
/// cycling. Equality rows go through phase-1 artificial variables.
/// Throws NumericalBreakdown if pivoting exceeds the iteration budget.
LpSolution solve(const LinearProgram& lp);

}  // namespace gpufair
