#pragma once

// Bounded-variable primal simplex for small dense-ish linear programs.
//
//   max (or min) c'x  s.t.  a_r' x {<=,=,>=} b_r,  lo <= x <= hi
//
// Every variable must have finite bounds. Pricing is Dantzig's rule with a
// permanent switch to Bland's rule after 3 * (rows + cols) consecutive
// degenerate pivots. The basis inverse is held densely and rebuilt from an LU
// factorization periodically, so results are a deterministic function of the
// input.

#include <stdexcept>
#include <string>
#include <vector>

namespace crowdsense::lp {

enum class RowSense { kLessEqual, kEqual, kGreaterEqual };
enum class Objective { kMaximize, kMinimize };
enum class Status { kOptimal, kInfeasible, kUnbounded };

std::string to_string(Status status);

struct Entry {
  int row = 0;
  int col = 0;
  double value = 0.0;
};

class LpError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct LinearProgram {
  Objective objective_sense = Objective::kMaximize;
  std::vector<double> objective;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<Entry> entries;  // sparse triplets; duplicates are summed
  std::vector<RowSense> row_sense;
  std::vector<double> rhs;

  int num_cols() const { return static_cast<int>(objective.size()); }
  int num_rows() const { return static_cast<int>(rhs.size()); }

  int add_column(double cost, double lo, double hi);
  int add_row(RowSense sense, double rhs_value);
  void add_entry(int row, int col, double value);

  /// Throws LpError on dimension mismatches, infinite bounds or lo > hi.
  void check() const;
};

struct LpSolution {
  Status status = Status::kInfeasible;
  std::vector<double> x;
  double objective = 0.0;
  /// Row multipliers in the sign convention of the stated objective: for a
  /// maximization, y_r >= 0 on <= rows and y_r <= 0 on >= rows.
  std::vector<double> duals;
  /// c_j - a_j' y, same convention.
  std::vector<double> reduced_costs;
  int iterations = 0;
};

struct SolverOptions {
  double feasibility_tolerance = 1e-7;
  double optimality_tolerance = 1e-7;
  double pivot_tolerance = 1e-9;
  int refactor_interval = 50;
  int max_iterations = 0;  // 0 = automatic (100 * (rows + cols) + 1000)
};

LpSolution solve(const LinearProgram& lp, const SolverOptions& options = {});

/// Lagrangian dual bound b'y + sum_j max(r_j lo_j, r_j hi_j) (maximization;
/// mirrored for minimization). Equals the optimal objective at an optimal
/// dual; any sign-feasible y gives a valid bound.
double dual_objective(const LinearProgram& lp, const std::vector<double>& duals);

}  // namespace crowdsense::lp
