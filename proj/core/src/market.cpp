#include "crowdsense/market.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace crowdsense {

ItemSet make_item_set(std::vector<int> items) {
  std::sort(items.begin(), items.end());
  items.erase(std::unique(items.begin(), items.end()), items.end());
  return items;
}

bool is_subset(const ItemSet& sub, const ItemSet& super) {
  return std::includes(super.begin(), super.end(), sub.begin(), sub.end());
}

bool contains(const ItemSet& set, int item) {
  return std::binary_search(set.begin(), set.end(), item);
}

namespace {

bool is_sorted_set(const ItemSet& s) {
  return std::adjacent_find(s.begin(), s.end(), [](int a, int b) { return a >= b; }) == s.end();
}

void require_finite_nonnegative(double v, const char* what) {
  if (!std::isfinite(v) || v < 0.0) {
    std::ostringstream os;
    os << what << " must be finite and nonnegative, got " << v;
    throw ScenarioError(os.str());
  }
}

bool near_integral(double w) {
  return std::abs(w) <= kWeightTolerance || std::abs(w - 1.0) <= kWeightTolerance;
}

}  // namespace

// ---------------------------------------------------------------------------
// CostOracle

CostOracle CostOracle::additive(double unit_cost) {
  require_finite_nonnegative(unit_cost, "additive unit cost");
  return CostOracle(Kind::kAdditive, unit_cost);
}

CostOracle CostOracle::single_minded(double full_set_cost) {
  require_finite_nonnegative(full_set_cost, "single-minded cost");
  return CostOracle(Kind::kSingleMinded, full_set_cost);
}

CostOracle CostOracle::table(ItemSet domain, std::vector<double> costs) {
  if (!is_sorted_set(domain)) throw ScenarioError("table domain must be a sorted set");
  if (domain.size() > static_cast<std::size_t>(kTableSubsetCap)) {
    throw ScenarioError("table oracle spans " + std::to_string(domain.size()) +
                        " items, above the cap of " + std::to_string(kTableSubsetCap));
  }
  const std::size_t n = std::size_t{1} << domain.size();
  if (costs.size() != n) {
    throw ScenarioError("table oracle needs " + std::to_string(n) + " subset costs, got " +
                        std::to_string(costs.size()));
  }
  for (double c : costs) require_finite_nonnegative(c, "table cost");
  if (costs[0] != 0.0) throw ScenarioError("table oracle must have zero cost for the empty set");
  for (std::size_t mask = 0; mask < n; ++mask) {
    for (std::size_t b = 0; b < domain.size(); ++b) {
      const std::size_t bigger = mask | (std::size_t{1} << b);
      if (costs[bigger] < costs[mask]) {
        throw ScenarioError("table oracle is not monotone: adding item " +
                            std::to_string(domain[b] + 1) + " lowers the cost");
      }
    }
  }
  CostOracle oracle(Kind::kTable, 0.0);
  oracle.domain_ = std::move(domain);
  oracle.costs_ = std::move(costs);
  return oracle;
}

double CostOracle::unit_cost() const {
  if (kind_ != Kind::kAdditive) throw std::logic_error("not an additive oracle");
  return param_;
}

double CostOracle::full_set_cost() const {
  if (kind_ != Kind::kSingleMinded) throw std::logic_error("not a single-minded oracle");
  return param_;
}

double CostOracle::cost(const ItemSet& subset) const {
  switch (kind_) {
    case Kind::kAdditive:
      return param_ * static_cast<double>(subset.size());
    case Kind::kSingleMinded:
      return subset.empty() ? 0.0 : param_;
    case Kind::kTable: {
      std::size_t mask = 0;
      for (int item : subset) {
        auto it = std::lower_bound(domain_.begin(), domain_.end(), item);
        if (it == domain_.end() || *it != item) {
          throw ScenarioError("item " + std::to_string(item + 1) +
                              " is outside the table oracle's domain");
        }
        mask |= std::size_t{1} << (it - domain_.begin());
      }
      return costs_[mask];
    }
  }
  return 0.0;
}

CostOracle CostOracle::scaled(double factor) const {
  if (!(factor > 0.0) || !std::isfinite(factor)) throw ScenarioError("scale factor must be positive");
  CostOracle out = *this;
  out.param_ *= factor;
  for (double& c : out.costs_) c *= factor;
  return out;
}

// ---------------------------------------------------------------------------
// Scenario

Scenario::Scenario(std::vector<DataItem> items, std::vector<Task> tasks,
                   std::vector<User> users, std::uint64_t seed)
    : items_(std::move(items)), tasks_(std::move(tasks)), users_(std::move(users)), seed_(seed) {
  const int K = num_items();
  for (int k = 0; k < K; ++k) {
    if (items_[k].id != k + 1) {
      throw ScenarioError("data item ids must be dense 1..K in order; position " +
                          std::to_string(k + 1) + " has id " + std::to_string(items_[k].id));
    }
  }
  auto check_items = [K](const ItemSet& s, const std::string& who) {
    if (!is_sorted_set(s)) throw ScenarioError(who + ": item set must be sorted and unique");
    for (int k : s) {
      if (k < 0 || k >= K) {
        throw ScenarioError(who + ": unknown data item " + std::to_string(k + 1));
      }
    }
  };
  for (int j = 0; j < num_tasks(); ++j) {
    const Task& t = tasks_[j];
    if (t.id != j + 1) throw ScenarioError("task ids must be dense 1..J in order");
    check_items(t.requirements, "task " + std::to_string(t.id));
    require_finite_nonnegative(t.value, "task value");
  }
  for (int i = 0; i < num_users(); ++i) {
    const User& u = users_[i];
    if (u.id != i + 1) throw ScenarioError("user ids must be dense 1..I in order");
    check_items(u.capability, "user " + std::to_string(u.id));
    if (u.cost.kind() == CostOracle::Kind::kTable && u.cost.table_domain() != u.capability) {
      throw ScenarioError("user " + std::to_string(u.id) +
                          ": table oracle domain must equal the capability");
    }
  }
}

Bids Bids::truthful(const Scenario& scenario) {
  Bids bids;
  for (const Task& t : scenario.tasks()) bids.values.push_back(t.value);
  for (const User& u : scenario.users()) bids.costs.push_back(u.cost);
  return bids;
}

void check_bids(const Scenario& scenario, const Bids& bids) {
  if (static_cast<int>(bids.values.size()) != scenario.num_tasks() ||
      static_cast<int>(bids.costs.size()) != scenario.num_users()) {
    throw ScenarioError("bids do not match the scenario's task and user counts");
  }
  for (double v : bids.values) require_finite_nonnegative(v, "task bid");
  for (int i = 0; i < scenario.num_users(); ++i) {
    const CostOracle& b = bids.costs[i];
    if (b.kind() == CostOracle::Kind::kTable && b.table_domain() != scenario.user(i).capability) {
      throw ScenarioError("user " + std::to_string(i + 1) +
                          ": table bid domain must equal the capability");
    }
  }
}

// ---------------------------------------------------------------------------
// Allocation

UserSchedule UserSchedule::idle() {
  UserSchedule s;
  s.subsets.push_back({{}, 1.0});
  return s;
}

UserSchedule UserSchedule::exactly(ItemSet items) {
  UserSchedule s;
  s.subsets.push_back({std::move(items), 1.0});
  return s;
}

Allocation Allocation::empty(const Scenario& scenario) {
  Allocation a;
  a.x.assign(scenario.num_users(), UserSchedule::idle());
  a.y.assign(scenario.num_items(), 0.0);
  a.y_ki.assign(scenario.num_users(), std::vector<double>(scenario.num_items(), 0.0));
  a.z.assign(scenario.num_tasks(), 0.0);
  a.integral = true;
  return a;
}

namespace {

std::vector<double> user_item_weights(const Scenario& scenario, int i, const UserSchedule& s) {
  std::vector<double> w(scenario.num_items(), 0.0);
  const ItemSet& cap = scenario.user(i).capability;
  if (s.independent) {
    for (std::size_t p = 0; p < cap.size() && p < s.item_marginals.size(); ++p) {
      w[cap[p]] = s.item_marginals[p];
    }
  } else {
    for (const SubsetWeight& sw : s.subsets) {
      for (int k : sw.items) {
        if (k >= 0 && k < scenario.num_items()) w[k] += sw.weight;
      }
    }
  }
  return w;
}

}  // namespace

void derive_coverage(const Scenario& scenario, Allocation& a) {
  a.y_ki.assign(scenario.num_users(), {});
  a.y.assign(scenario.num_items(), 0.0);
  for (int i = 0; i < scenario.num_users(); ++i) {
    a.y_ki[i] = user_item_weights(scenario, i, a.x.at(i));
    for (int k = 0; k < scenario.num_items(); ++k) a.y[k] += a.y_ki[i][k];
  }
  for (double& y : a.y) y = std::min(1.0, y);
}

std::vector<Violation> validate(const Scenario& scenario, const Allocation& a, ReuseMode mode) {
  std::vector<Violation> out;
  const int I = scenario.num_users(), J = scenario.num_tasks(), K = scenario.num_items();
  const double tol = kWeightTolerance;
  auto add = [&out](std::string c, std::vector<int> idx, std::string msg) {
    out.push_back({std::move(c), std::move(idx), std::move(msg)});
  };

  if (static_cast<int>(a.x.size()) != I || static_cast<int>(a.y.size()) != K ||
      static_cast<int>(a.z.size()) != J || static_cast<int>(a.y_ki.size()) != I) {
    add("shape", {}, "allocation dimensions do not match the scenario");
    return out;
  }
  for (int i = 0; i < I; ++i) {
    if (static_cast<int>(a.y_ki[i].size()) != K) {
      add("shape", {i}, "y_ki row has wrong length");
      return out;
    }
  }
  auto in_unit = [tol](double w) { return std::isfinite(w) && w >= -tol && w <= 1.0 + tol; };

  for (int i = 0; i < I; ++i) {
    const UserSchedule& s = a.x[i];
    const ItemSet& cap = scenario.user(i).capability;
    if (s.independent) {
      if (s.item_marginals.size() != cap.size()) {
        add("shape", {i}, "independent schedule must give one marginal per capability item");
        continue;
      }
      for (std::size_t p = 0; p < cap.size(); ++p) {
        const double w = s.item_marginals[p];
        if (!in_unit(w)) add("range", {i, cap[p]}, "item marginal outside [0,1]");
        if (a.integral && !near_integral(w)) add("integrality", {i, cap[p]}, "fractional marginal");
      }
    } else {
      double total = 0.0;
      for (const SubsetWeight& sw : s.subsets) {
        if (!is_sorted_set(sw.items) || !is_subset(sw.items, cap)) {
          add("subset", {i}, "scheduled set is not inside the user's capability");
        }
        if (!in_unit(sw.weight)) add("range", {i}, "schedule weight outside [0,1]");
        if (a.integral && !near_integral(sw.weight)) add("integrality", {i}, "fractional x_i(S)");
        total += sw.weight;
      }
      if (std::abs(total - 1.0) > tol) {
        std::ostringstream os;
        os << "user " << i + 1 << " schedule weights sum to " << total << ", not 1";
        add("eq3", {i}, os.str());
      }
    }
    const std::vector<double> w = user_item_weights(scenario, i, s);
    for (int k = 0; k < K; ++k) {
      if (std::abs(w[k] - a.y_ki[i][k]) > tol) {
        add("y_ki", {i, k}, "y_ki disagrees with the schedule's coverage of the item");
      }
    }
  }
  for (int k = 0; k < K; ++k) {
    if (!in_unit(a.y[k])) add("range", {k}, "y_k outside [0,1]");
    if (a.integral && !near_integral(a.y[k])) add("integrality", {k}, "fractional y_k");
  }
  for (int j = 0; j < J; ++j) {
    if (!in_unit(a.z[j])) add("range", {j}, "z_j outside [0,1]");
    if (a.integral && !near_integral(a.z[j])) add("integrality", {j}, "fractional z_j");
  }

  if (mode == ReuseMode::kReuse) {
    for (int j = 0; j < J; ++j) {
      for (int k : scenario.task(j).requirements) {
        if (a.z[j] > a.y[k] + tol) {
          add("eq1", {j, k},
              "task " + std::to_string(j + 1) + " selected beyond coverage of item " +
                  std::to_string(k + 1));
        }
      }
    }
    for (int k = 0; k < K; ++k) {
      double supply = 0.0;
      for (int i = 0; i < I; ++i) supply += a.y_ki[i][k];
      if (a.y[k] > supply + tol) {
        add("eq5", {k}, "item " + std::to_string(k + 1) + " marked sensed beyond its sensing");
      }
    }
  } else {
    for (int k = 0; k < K; ++k) {
      double demand = 0.0, supply = 0.0;
      for (int j = 0; j < J; ++j) {
        if (contains(scenario.task(j).requirements, k)) demand += a.z[j];
      }
      for (int i = 0; i < I; ++i) supply += a.y_ki[i][k];
      if (demand > supply + tol) {
        add("eq28", {k}, "item " + std::to_string(k + 1) + " demanded more often than sensed");
      }
    }
  }
  return out;
}

namespace {
std::string describe(const std::vector<Violation>& v) {
  std::ostringstream os;
  os << "infeasible allocation:";
  for (const Violation& x : v) os << " [" << x.constraint << "] " << x.message << ";";
  return os.str();
}
}  // namespace

FeasibilityError::FeasibilityError(std::vector<Violation> violations)
    : std::runtime_error(describe(violations)), violations_(std::move(violations)) {}

double schedule_cost(const CostOracle& oracle, const ItemSet& capability,
                     const UserSchedule& schedule) {
  if (!schedule.independent) {
    double c = 0.0;
    for (const SubsetWeight& sw : schedule.subsets) c += sw.weight * oracle.cost(sw.items);
    return c;
  }
  const std::vector<double>& p = schedule.item_marginals;
  switch (oracle.kind()) {
    case CostOracle::Kind::kAdditive: {
      double total = 0.0;
      for (double m : p) total += m;
      return oracle.unit_cost() * total;
    }
    case CostOracle::Kind::kSingleMinded: {
      double none = 1.0;
      for (double m : p) none *= 1.0 - m;
      return oracle.full_set_cost() * (1.0 - none);
    }
    case CostOracle::Kind::kTable: {
      const std::size_t n = capability.size();
      double c = 0.0;
      for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
        double prob = 1.0;
        ItemSet s;
        for (std::size_t b = 0; b < n; ++b) {
          if (mask & (std::size_t{1} << b)) {
            prob *= p[b];
            s.push_back(capability[b]);
          } else {
            prob *= 1.0 - p[b];
          }
        }
        if (prob != 0.0) c += prob * oracle.cost(s);
      }
      return c;
    }
  }
  return 0.0;
}

WelfareBreakdown welfare_breakdown(const Scenario& scenario, const Allocation& allocation,
                                   const Bids& bids, ReuseMode mode) {
  check_bids(scenario, bids);
  if (auto v = validate(scenario, allocation, mode); !v.empty()) throw FeasibilityError(std::move(v));
  WelfareBreakdown w;
  for (int j = 0; j < scenario.num_tasks(); ++j) w.value += bids.values[j] * allocation.z[j];
  for (int i = 0; i < scenario.num_users(); ++i) {
    w.cost += schedule_cost(bids.costs[i], scenario.user(i).capability, allocation.x[i]);
  }
  return w;
}

double welfare(const Scenario& scenario, const Allocation& allocation, const Bids& bids,
               ReuseMode mode) {
  return welfare_breakdown(scenario, allocation, bids, mode).welfare();
}

double welfare(const Scenario& scenario, const Allocation& allocation, ReuseMode mode) {
  return welfare(scenario, allocation, Bids::truthful(scenario), mode);
}

}  // namespace crowdsense
