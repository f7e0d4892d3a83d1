#pragma once

// Three-layer crowdsensing market: data items, tasks that require sets of
// items, and users that can sense sets of items at a private cost.
//
// All indices are zero-based in memory. Serialized documents use the 1-based
// ids (see scenario_io.hpp).

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace crowdsense {

/// Sorted, duplicate-free list of item indices.
using ItemSet = std::vector<int>;

ItemSet make_item_set(std::vector<int> items);
bool is_subset(const ItemSet& sub, const ItemSet& super);
bool contains(const ItemSet& set, int item);

/// Largest capability a Table cost oracle may span (2^12 subsets).
inline constexpr int kTableSubsetCap = 12;

/// Absolute tolerance used when comparing fractional weights.
inline constexpr double kWeightTolerance = 1e-9;

class ScenarioError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Location {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Location&) const = default;
};

struct DataItem {
  int id = 0;
  std::optional<Location> location;
};

struct Task {
  int id = 0;
  ItemSet requirements;
  double value = 0.0;
};

/// Cost of sensing a subset of a user's capability.
///
/// Additive: rho * |S|. SingleMinded: the user senses all of her capability or
/// nothing; any non-empty subset is charged the full-set cost. Table: explicit
/// cost per subset of the capability, stored by bitmask over the capability's
/// positions; validated to be monotone with cost(empty) = 0.
class CostOracle {
 public:
  enum class Kind { kAdditive, kSingleMinded, kTable };

  static CostOracle additive(double unit_cost);
  static CostOracle single_minded(double full_set_cost);
  /// `costs[mask]` is the cost of the subset of `domain` selected by `mask`.
  static CostOracle table(ItemSet domain, std::vector<double> costs);

  Kind kind() const { return kind_; }
  double unit_cost() const;
  double full_set_cost() const;
  const ItemSet& table_domain() const { return domain_; }
  const std::vector<double>& table_costs() const { return costs_; }

  /// Cost of sensing `subset`. The subset must lie inside the capability the
  /// oracle was attached to; Table oracles check this against their domain.
  double cost(const ItemSet& subset) const;

  /// Same oracle with every cost multiplied by `factor` (> 0).
  CostOracle scaled(double factor) const;

  bool operator==(const CostOracle&) const = default;

 private:
  CostOracle(Kind kind, double param) : kind_(kind), param_(param) {}

  Kind kind_;
  double param_ = 0.0;
  ItemSet domain_;
  std::vector<double> costs_;
};

struct User {
  int id = 0;
  ItemSet capability;
  CostOracle cost = CostOracle::additive(0.0);
};

/// Validated, immutable market instance.
class Scenario {
 public:
  Scenario(std::vector<DataItem> items, std::vector<Task> tasks,
           std::vector<User> users, std::uint64_t seed = 0);

  int num_items() const { return static_cast<int>(items_.size()); }
  int num_tasks() const { return static_cast<int>(tasks_.size()); }
  int num_users() const { return static_cast<int>(users_.size()); }

  const std::vector<DataItem>& items() const { return items_; }
  const std::vector<Task>& tasks() const { return tasks_; }
  const std::vector<User>& users() const { return users_; }
  const DataItem& item(int k) const { return items_.at(k); }
  const Task& task(int j) const { return tasks_.at(j); }
  const User& user(int i) const { return users_.at(i); }
  std::uint64_t seed() const { return seed_; }

 private:
  std::vector<DataItem> items_;
  std::vector<Task> tasks_;
  std::vector<User> users_;
  std::uint64_t seed_;
};

/// Reported types: a value per task and a cost oracle per user.
struct Bids {
  std::vector<double> values;
  std::vector<CostOracle> costs;

  static Bids truthful(const Scenario& scenario);
};

/// Throws ScenarioError when bids do not shadow the scenario's shape
/// (counts, nonnegative values, Table domains matching capabilities).
void check_bids(const Scenario& scenario, const Bids& bids);

struct SubsetWeight {
  ItemSet items;
  double weight = 0.0;
};

/// One user's (possibly fractional) schedule.
///
/// Explicit schedules list x_i(S) for every subset carrying weight, including
/// the empty set. Independent schedules are the product distribution of
/// per-item Bernoulli marginals over the capability; they describe fractional
/// schedules of additive users without enumerating 2^|S_i| subsets.
struct UserSchedule {
  std::vector<SubsetWeight> subsets;
  bool independent = false;
  std::vector<double> item_marginals;  // aligned with the user's capability

  static UserSchedule idle();
  static UserSchedule exactly(ItemSet items);
};

struct Allocation {
  std::vector<UserSchedule> x;
  std::vector<double> y;                 // per item
  std::vector<std::vector<double>> y_ki;  // [user][item]
  std::vector<double> z;                 // per task
  bool integral = true;

  /// All users idle, no task selected.
  static Allocation empty(const Scenario& scenario);
};

/// Fills y_ki from x and sets y_k = min(1, sum_i y_ki).
void derive_coverage(const Scenario& scenario, Allocation& allocation);

/// Coverage requirement used by validation and by welfare-opt.
enum class ReuseMode { kReuse, kNoReuse };

struct Violation {
  std::string constraint;  // "shape", "range", "subset", "eq1", "eq3", "eq5", "eq28", "y_ki", "integrality"
  std::vector<int> indices;
  std::string message;
};

std::vector<Violation> validate(const Scenario& scenario, const Allocation& allocation,
                                ReuseMode mode = ReuseMode::kReuse);

class FeasibilityError : public std::runtime_error {
 public:
  explicit FeasibilityError(std::vector<Violation> violations);
  const std::vector<Violation>& violations() const { return violations_; }

 private:
  std::vector<Violation> violations_;
};

/// Expected cost of a schedule under an oracle.
double schedule_cost(const CostOracle& oracle, const ItemSet& capability,
                     const UserSchedule& schedule);

struct WelfareBreakdown {
  double value = 0.0;
  double cost = 0.0;
  double welfare() const { return value - cost; }
};

/// V(z) - C(x) under true types.
double welfare(const Scenario& scenario, const Allocation& allocation,
               ReuseMode mode = ReuseMode::kReuse);
/// V(z) - C(x) under reported types.
double welfare(const Scenario& scenario, const Allocation& allocation, const Bids& bids,
               ReuseMode mode = ReuseMode::kReuse);
WelfareBreakdown welfare_breakdown(const Scenario& scenario, const Allocation& allocation,
                                   const Bids& bids, ReuseMode mode = ReuseMode::kReuse);

}  // namespace crowdsense
