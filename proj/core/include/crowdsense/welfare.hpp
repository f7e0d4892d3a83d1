#pragma once

// Welfare maximization over a scenario: the binary program (with or without
// data reuse), its LP relaxation, and an exhaustive oracle for tiny instances.

#include <optional>
#include <string>
#include <vector>

#include "crowdsense/lp.hpp"
#include "crowdsense/market.hpp"

namespace crowdsense {

struct WelfareProblem {
  const Scenario* scenario = nullptr;
  Bids bids;
  ReuseMode mode = ReuseMode::kReuse;
  std::vector<int> excluded_tasks;  // zero-based; their columns are dropped
  std::vector<int> excluded_users;

  WelfareProblem(const Scenario& s, Bids b, ReuseMode m = ReuseMode::kReuse);
  static WelfareProblem truthful(const Scenario& s, ReuseMode m = ReuseMode::kReuse);

  WelfareProblem without_task(int j) const;
  WelfareProblem without_user(int i) const;
  bool task_excluded(int j) const;
  bool user_excluded(int i) const;
};

/// What an LP column stands for.
struct ColumnRole {
  enum class Kind { kUserItem, kUserAll, kUserSubset, kCoverage, kTask };
  Kind kind = Kind::kTask;
  int user = -1;      // kUser*
  int item = -1;      // kUserItem, kCoverage
  unsigned mask = 0;  // kUserSubset: bitmask over the capability positions
  int task = -1;      // kTask
};

/// The binary program as an LP plus integrality markers.
///
/// Additive users get one column per capability item (cost rho each);
/// single-minded users one column for their whole capability; Table users one
/// column per non-empty subset with a packing row. Coverage columns y_k exist
/// only with reuse. All columns are binary in the integer program.
struct P1Model {
  lp::LinearProgram lp;
  std::vector<ColumnRole> roles;
  std::vector<bool> integer;
  std::vector<int> task_column;      // -1 when the task is excluded
  std::vector<int> coverage_column;  // -1 without reuse
  int coverage_rows = 0;             // rows of the form z_j - y_k <= 0

  int count(ColumnRole::Kind kind) const;
};

P1Model build_p1(const WelfareProblem& problem);

struct WelfareSolution {
  Allocation allocation;
  double objective = 0.0;  // reported welfare of the allocation
  long nodes = 0;          // branch-and-bound nodes (1 for a pure LP solve)
  int lp_iterations = 0;
  std::optional<double> integrality_gap;  // root LP optimum - integer optimum
  std::optional<double> fractional_objective;
};

struct BranchOptions {
  double integrality_tolerance = 1e-6;
  long max_open_nodes = 100000;  // switch to depth-first beyond this
  long max_nodes = 0;            // 0 = unlimited
};

WelfareSolution solve_integer(const WelfareProblem& problem, const BranchOptions& options = {});
WelfareSolution solve_fractional(const WelfareProblem& problem);

/// Exhaustive search over every user choice (and every task subset without
/// reuse). Throws std::invalid_argument when the enumeration would exceed
/// 2^22 combinations.
WelfareSolution brute_force(const WelfareProblem& problem);

struct GainResult {
  enum class Status { kDefined, kUndefined };
  Status status = Status::kUndefined;
  double gamma = 0.0;  // valid when defined
  double with_reuse = 0.0;
  double without_reuse = 0.0;
};

/// W_reuse / W_no-reuse under true types; undefined when the latter is 0.
GainResult relative_gain(const Scenario& scenario);

/// Converts an LP point of `model` into an allocation (weights within
/// kWeightTolerance of 0 or 1 are snapped).
Allocation allocation_from_lp(const WelfareProblem& problem, const P1Model& model,
                              const std::vector<double>& x);

std::string solution_to_json(const Scenario& scenario, const WelfareSolution& solution,
                             const std::string& mode);

}  // namespace crowdsense
