#include "crowdsense/welfare.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <stdexcept>

#include "json_detail.hpp"

namespace crowdsense {

WelfareProblem::WelfareProblem(const Scenario& s, Bids b, ReuseMode m)
    : scenario(&s), bids(std::move(b)), mode(m) {
  check_bids(s, bids);
}

WelfareProblem WelfareProblem::truthful(const Scenario& s, ReuseMode m) {
  return WelfareProblem(s, Bids::truthful(s), m);
}

WelfareProblem WelfareProblem::without_task(int j) const {
  if (j < 0 || j >= scenario->num_tasks()) throw std::out_of_range("no such task");
  WelfareProblem p = *this;
  if (!task_excluded(j)) p.excluded_tasks.push_back(j);
  std::sort(p.excluded_tasks.begin(), p.excluded_tasks.end());
  return p;
}

WelfareProblem WelfareProblem::without_user(int i) const {
  if (i < 0 || i >= scenario->num_users()) throw std::out_of_range("no such user");
  WelfareProblem p = *this;
  if (!user_excluded(i)) p.excluded_users.push_back(i);
  std::sort(p.excluded_users.begin(), p.excluded_users.end());
  return p;
}

bool WelfareProblem::task_excluded(int j) const {
  return std::find(excluded_tasks.begin(), excluded_tasks.end(), j) != excluded_tasks.end();
}

bool WelfareProblem::user_excluded(int i) const {
  return std::find(excluded_users.begin(), excluded_users.end(), i) != excluded_users.end();
}

int P1Model::count(ColumnRole::Kind kind) const {
  return static_cast<int>(std::count_if(roles.begin(), roles.end(),
                                        [kind](const ColumnRole& r) { return r.kind == kind; }));
}

namespace {

void check_problem(const WelfareProblem& p) {
  if (p.scenario == nullptr) throw std::invalid_argument("welfare problem without a scenario");
  for (int j : p.excluded_tasks) {
    if (j < 0 || j >= p.scenario->num_tasks()) throw std::out_of_range("excluded task does not exist");
  }
  for (int i : p.excluded_users) {
    if (i < 0 || i >= p.scenario->num_users()) throw std::out_of_range("excluded user does not exist");
  }
}

ItemSet subset_of(const ItemSet& cap, unsigned mask) {
  ItemSet s;
  for (std::size_t b = 0; b < cap.size(); ++b) {
    if (mask & (1u << b)) s.push_back(cap[b]);
  }
  return s;
}

double snap(double w) {
  if (std::abs(w) <= kWeightTolerance) return 0.0;
  if (std::abs(w - 1.0) <= kWeightTolerance) return 1.0;
  return std::clamp(w, 0.0, 1.0);
}

bool is01(double w) { return w == 0.0 || w == 1.0; }

}  // namespace

P1Model build_p1(const WelfareProblem& problem) {
  check_problem(problem);
  const Scenario& sc = *problem.scenario;
  const int I = sc.num_users(), J = sc.num_tasks(), K = sc.num_items();
  P1Model m;
  lp::LinearProgram& lp = m.lp;
  lp.objective_sense = lp::Objective::kMaximize;
  std::vector<std::vector<int>> supply(K);
  std::vector<std::pair<int, std::vector<int>>> packing;  // table users

  for (int i = 0; i < I; ++i) {
    if (problem.user_excluded(i)) continue;
    const ItemSet& cap = sc.user(i).capability;
    if (cap.empty()) continue;
    const CostOracle& b = problem.bids.costs[i];
    switch (b.kind()) {
      case CostOracle::Kind::kAdditive:
        for (int k : cap) {
          const int c = lp.add_column(-b.unit_cost(), 0.0, 1.0);
          m.roles.push_back({ColumnRole::Kind::kUserItem, i, k, 0, -1});
          supply[k].push_back(c);
        }
        break;
      case CostOracle::Kind::kSingleMinded: {
        const int c = lp.add_column(-b.full_set_cost(), 0.0, 1.0);
        m.roles.push_back({ColumnRole::Kind::kUserAll, i, -1, 0, -1});
        for (int k : cap) supply[k].push_back(c);
        break;
      }
      case CostOracle::Kind::kTable: {
        if (static_cast<int>(cap.size()) > kTableSubsetCap) {
          throw ScenarioError("table oracle exceeds the subset cap");
        }
        std::vector<int> cols;
        for (unsigned mask = 1; mask < (1u << cap.size()); ++mask) {
          const int c = lp.add_column(-b.table_costs()[mask], 0.0, 1.0);
          m.roles.push_back({ColumnRole::Kind::kUserSubset, i, -1, mask, -1});
          for (std::size_t p = 0; p < cap.size(); ++p) {
            if (mask & (1u << p)) supply[cap[p]].push_back(c);
          }
          cols.push_back(c);
        }
        packing.push_back({i, std::move(cols)});
        break;
      }
    }
  }
  m.coverage_column.assign(K, -1);
  if (problem.mode == ReuseMode::kReuse) {
    for (int k = 0; k < K; ++k) {
      m.coverage_column[k] = lp.add_column(0.0, 0.0, 1.0);
      m.roles.push_back({ColumnRole::Kind::kCoverage, -1, k, 0, -1});
    }
  }
  m.task_column.assign(J, -1);
  for (int j = 0; j < J; ++j) {
    if (problem.task_excluded(j)) continue;
    m.task_column[j] = lp.add_column(problem.bids.values[j], 0.0, 1.0);
    m.roles.push_back({ColumnRole::Kind::kTask, -1, -1, 0, j});
  }

  for (const auto& [user, cols] : packing) {
    const int r = lp.add_row(lp::RowSense::kLessEqual, 1.0);
    for (int c : cols) lp.add_entry(r, c, 1.0);
  }
  if (problem.mode == ReuseMode::kReuse) {
    for (int j = 0; j < J; ++j) {
      if (m.task_column[j] < 0) continue;
      for (int k : sc.task(j).requirements) {
        const int r = lp.add_row(lp::RowSense::kLessEqual, 0.0);
        lp.add_entry(r, m.task_column[j], 1.0);
        lp.add_entry(r, m.coverage_column[k], -1.0);
        ++m.coverage_rows;
      }
    }
    for (int k = 0; k < K; ++k) {
      const int r = lp.add_row(lp::RowSense::kLessEqual, 0.0);
      lp.add_entry(r, m.coverage_column[k], 1.0);
      for (int c : supply[k]) lp.add_entry(r, c, -1.0);
    }
  } else {
    for (int k = 0; k < K; ++k) {
      std::vector<int> demand;
      for (int j = 0; j < J; ++j) {
        if (m.task_column[j] >= 0 && contains(sc.task(j).requirements, k)) {
          demand.push_back(m.task_column[j]);
        }
      }
      if (demand.empty()) continue;
      const int r = lp.add_row(lp::RowSense::kLessEqual, 0.0);
      for (int c : demand) lp.add_entry(r, c, 1.0);
      for (int c : supply[k]) lp.add_entry(r, c, -1.0);
    }
  }
  m.integer.assign(lp.num_cols(), true);
  return m;
}

Allocation allocation_from_lp(const WelfareProblem& problem, const P1Model& model,
                              const std::vector<double>& x) {
  const Scenario& sc = *problem.scenario;
  const int I = sc.num_users();
  Allocation a = Allocation::empty(sc);
  std::vector<std::vector<double>> marginals(I);
  std::vector<double> whole(I, 0.0);
  std::vector<std::vector<std::pair<unsigned, double>>> subsets(I);
  for (int i = 0; i < I; ++i) marginals[i].assign(sc.user(i).capability.size(), 0.0);

  for (std::size_t c = 0; c < model.roles.size(); ++c) {
    const ColumnRole& r = model.roles[c];
    const double w = snap(x[c]);
    switch (r.kind) {
      case ColumnRole::Kind::kUserItem: {
        const ItemSet& cap = sc.user(r.user).capability;
        const auto p = std::lower_bound(cap.begin(), cap.end(), r.item) - cap.begin();
        marginals[r.user][p] = w;
        break;
      }
      case ColumnRole::Kind::kUserAll: whole[r.user] = w; break;
      case ColumnRole::Kind::kUserSubset:
        if (w > 0.0) subsets[r.user].push_back({r.mask, w});
        break;
      case ColumnRole::Kind::kCoverage: break;
      case ColumnRole::Kind::kTask: a.z[r.task] = w; break;
    }
  }

  bool integral = true;
  for (int i = 0; i < I; ++i) {
    const ItemSet& cap = sc.user(i).capability;
    UserSchedule s = UserSchedule::idle();
    switch (problem.bids.costs[i].kind()) {
      case CostOracle::Kind::kAdditive: {
        const auto& m = marginals[i];
        if (std::all_of(m.begin(), m.end(), is01)) {
          ItemSet chosen;
          for (std::size_t p = 0; p < cap.size(); ++p) {
            if (m[p] == 1.0) chosen.push_back(cap[p]);
          }
          if (!chosen.empty()) s = UserSchedule::exactly(std::move(chosen));
        } else {
          s = UserSchedule{};
          s.independent = true;
          s.item_marginals = m;
          integral = false;
        }
        break;
      }
      case CostOracle::Kind::kSingleMinded: {
        const double w = whole[i];
        if (w == 1.0) {
          s = UserSchedule::exactly(cap);
        } else if (w > 0.0) {
          s.subsets = {{cap, w}, {{}, 1.0 - w}};
          integral = false;
        }
        break;
      }
      case CostOracle::Kind::kTable: {
        auto& list = subsets[i];
        double total = 0.0;
        for (auto& [mask, w] : list) total += w;
        if (total > 1.0) {
          for (auto& [mask, w] : list) w /= total;
          total = 1.0;
        }
        s.subsets.clear();
        for (auto& [mask, w] : list) {
          s.subsets.push_back({subset_of(cap, mask), w});
          if (w != 1.0) integral = false;
        }
        const double residual = 1.0 - total;
        if (residual > kWeightTolerance) {
          s.subsets.push_back({{}, residual});
        } else if (!s.subsets.empty()) {
          // absorb rounding into the largest weight so the row sums to one
          auto it = std::max_element(s.subsets.begin(), s.subsets.end(),
                                     [](auto& a, auto& b) { return a.weight < b.weight; });
          it->weight += residual;
        } else {
          s = UserSchedule::idle();
        }
        break;
      }
    }
    a.x[i] = std::move(s);
  }
  for (double z : a.z) {
    if (!is01(z)) integral = false;
  }
  derive_coverage(sc, a);
  if (problem.mode == ReuseMode::kReuse) {
    for (int j = 0; j < sc.num_tasks(); ++j) {
      for (int k : sc.task(j).requirements) a.z[j] = std::min(a.z[j], a.y[k]);
    }
  }
  a.integral = integral;
  for (double y : a.y) {
    if (!is01(y)) a.integral = false;
  }
  return a;
}

namespace {

double reported_welfare(const WelfareProblem& p, const Allocation& a) {
  return welfare(*p.scenario, a, p.bids, p.mode);
}

struct Node {
  double bound;
  long id;
  std::vector<std::pair<int, double>> fixes;
  std::vector<double> x;
};

struct NodeOrder {
  bool operator()(const Node& a, const Node& b) const {
    if (a.bound != b.bound) return a.bound < b.bound;
    return a.id > b.id;
  }
};

int branching_column(const P1Model& m, const std::vector<double>& x, double tol) {
  int best = -1;
  double best_frac = tol;
  for (int c = 0; c < static_cast<int>(x.size()); ++c) {
    if (!m.integer[c]) continue;
    const double f = std::min(x[c] - std::floor(x[c]), std::ceil(x[c]) - x[c]);
    if (f > best_frac + 1e-12) {
      best_frac = f;
      best = c;
    }
  }
  return best;
}

}  // namespace

WelfareSolution solve_fractional(const WelfareProblem& problem) {
  const P1Model model = build_p1(problem);
  const lp::LpSolution s = lp::solve(model.lp);
  if (s.status != lp::Status::kOptimal) {
    throw std::runtime_error("welfare LP did not solve: " + lp::to_string(s.status));
  }
  WelfareSolution out;
  out.allocation = allocation_from_lp(problem, model, s.x);
  out.objective = reported_welfare(problem, out.allocation);
  out.fractional_objective = out.objective;
  out.nodes = 1;
  out.lp_iterations = s.iterations;
  return out;
}

WelfareSolution solve_integer(const WelfareProblem& problem, const BranchOptions& options) {
  P1Model model = build_p1(problem);
  const int n = model.lp.num_cols();
  const std::vector<double> base_lo = model.lp.lower, base_hi = model.lp.upper;
  WelfareSolution out;

  auto solve_node = [&](const std::vector<std::pair<int, double>>& fixes) {
    model.lp.lower = base_lo;
    model.lp.upper = base_hi;
    for (auto [c, v] : fixes) model.lp.lower[c] = model.lp.upper[c] = v;
    lp::LpSolution s = lp::solve(model.lp);
    ++out.nodes;
    out.lp_iterations += s.iterations;
    return s;
  };

  std::vector<double> incumbent(n, 0.0);
  double incumbent_obj = 0.0;
  const double tol = options.integrality_tolerance;
  const double prune = 1e-9;

  lp::LpSolution root = solve_node({});
  if (root.status != lp::Status::kOptimal) {
    throw std::runtime_error("welfare LP relaxation did not solve: " + lp::to_string(root.status));
  }
  const double root_obj = root.objective;

  std::priority_queue<Node, std::vector<Node>, NodeOrder> open;
  std::vector<Node> stack;
  long next_id = 0;
  auto consider = [&](std::vector<std::pair<int, double>> fixes, const lp::LpSolution& s) {
    if (s.status != lp::Status::kOptimal || s.objective <= incumbent_obj + prune) return;
    if (branching_column(model, s.x, tol) < 0) {
      incumbent = s.x;
      incumbent_obj = s.objective;
      return;
    }
    Node node{s.objective, next_id++, std::move(fixes), s.x};
    if (static_cast<long>(open.size()) >= options.max_open_nodes) {
      stack.push_back(std::move(node));
    } else {
      open.push(std::move(node));
    }
  };
  consider({}, root);

  while (!open.empty() || !stack.empty()) {
    if (options.max_nodes > 0 && out.nodes >= options.max_nodes) {
      throw std::runtime_error("branch-and-bound node limit reached");
    }
    Node node;
    if (!stack.empty()) {
      node = std::move(stack.back());
      stack.pop_back();
    } else {
      node = open.top();
      open.pop();
    }
    if (node.bound <= incumbent_obj + prune) continue;
    const int c = branching_column(model, node.x, tol);
    for (double v : {1.0, 0.0}) {
      auto fixes = node.fixes;
      fixes.push_back({c, v});
      const lp::LpSolution child = solve_node(fixes);
      consider(std::move(fixes), child);
    }
  }

  for (double& v : incumbent) v = std::round(v);
  out.allocation = allocation_from_lp(problem, model, incumbent);
  out.objective = reported_welfare(problem, out.allocation);
  out.fractional_objective = root_obj;
  out.integrality_gap = root_obj - out.objective;
  return out;
}

WelfareSolution brute_force(const WelfareProblem& problem) {
  check_problem(problem);
  const Scenario& sc = *problem.scenario;
  const int I = sc.num_users(), J = sc.num_tasks(), K = sc.num_items();
  std::vector<std::vector<ItemSet>> options(I);
  std::vector<std::vector<double>> option_cost(I);
  double combos = 1.0;
  for (int i = 0; i < I; ++i) {
    const ItemSet& cap = sc.user(i).capability;
    const CostOracle& b = problem.bids.costs[i];
    options[i].push_back({});
    if (!problem.user_excluded(i) && !cap.empty()) {
      if (b.kind() == CostOracle::Kind::kSingleMinded) {
        options[i].push_back(cap);
      } else {
        if (cap.size() > 20) throw std::invalid_argument("capability too large to enumerate");
        for (unsigned mask = 1; mask < (1u << cap.size()); ++mask) {
          options[i].push_back(subset_of(cap, mask));
        }
      }
    }
    for (const ItemSet& s : options[i]) option_cost[i].push_back(b.cost(s));
    combos *= static_cast<double>(options[i].size());
  }
  std::vector<int> eligible;
  for (int j = 0; j < J; ++j) {
    if (!problem.task_excluded(j) && problem.bids.values[j] > 0.0) eligible.push_back(j);
  }
  if (problem.mode == ReuseMode::kNoReuse) combos *= std::pow(2.0, eligible.size());
  if (combos > static_cast<double>(1 << 22)) {
    throw std::invalid_argument("instance too large for exhaustive search");
  }

  std::vector<std::size_t> pick(I, 0), best_pick(I, 0);
  std::vector<int> best_tasks;
  double best = -std::numeric_limits<double>::infinity();
  WelfareSolution out;
  std::vector<int> supply(K);
  while (true) {
    ++out.nodes;
    std::fill(supply.begin(), supply.end(), 0);
    double cost = 0.0;
    for (int i = 0; i < I; ++i) {
      for (int k : options[i][pick[i]]) ++supply[k];
      cost += option_cost[i][pick[i]];
    }
    std::vector<int> chosen;
    double value = 0.0;
    if (problem.mode == ReuseMode::kReuse) {
      for (int j : eligible) {
        const ItemSet& req = sc.task(j).requirements;
        if (std::all_of(req.begin(), req.end(), [&](int k) { return supply[k] > 0; })) {
          chosen.push_back(j);
          value += problem.bids.values[j];
        }
      }
    } else {
      const std::size_t E = eligible.size();
      std::vector<int> used(K);
      for (std::size_t mask = 0; mask < (std::size_t{1} << E); ++mask) {
        std::fill(used.begin(), used.end(), 0);
        double v = 0.0;
        bool ok = true;
        for (std::size_t e = 0; e < E && ok; ++e) {
          if (!(mask & (std::size_t{1} << e))) continue;
          const int j = eligible[e];
          for (int k : sc.task(j).requirements) {
            if (++used[k] > supply[k]) ok = false;
          }
          v += problem.bids.values[j];
        }
        if (ok && v > value) {
          value = v;
          chosen.clear();
          for (std::size_t e = 0; e < E; ++e) {
            if (mask & (std::size_t{1} << e)) chosen.push_back(eligible[e]);
          }
        }
      }
    }
    if (value - cost > best) {
      best = value - cost;
      best_pick = pick;
      best_tasks = chosen;
    }
    int i = 0;
    while (i < I && ++pick[i] == options[i].size()) pick[i++] = 0;
    if (i == I) break;
  }

  Allocation a = Allocation::empty(sc);
  for (int i = 0; i < I; ++i) {
    const ItemSet& s = options[i][best_pick[i]];
    a.x[i] = s.empty() ? UserSchedule::idle() : UserSchedule::exactly(s);
  }
  for (int j : best_tasks) a.z[j] = 1.0;
  derive_coverage(sc, a);
  out.allocation = std::move(a);
  out.objective = reported_welfare(problem, out.allocation);
  return out;
}

GainResult relative_gain(const Scenario& scenario) {
  GainResult g;
  g.with_reuse = solve_integer(WelfareProblem::truthful(scenario, ReuseMode::kReuse)).objective;
  g.without_reuse = solve_integer(WelfareProblem::truthful(scenario, ReuseMode::kNoReuse)).objective;
  if (g.without_reuse > 1e-12) {
    g.status = GainResult::Status::kDefined;
    g.gamma = g.with_reuse / g.without_reuse;
  }
  return g;
}

std::string solution_to_json(const Scenario& scenario, const WelfareSolution& solution,
                             const std::string& mode) {
  detail::json j = {{"mode", mode},
                    {"objective", solution.objective},
                    {"nodes", solution.nodes},
                    {"lp_iterations", solution.lp_iterations},
                    {"allocation", detail::allocation_json(scenario, solution.allocation)}};
  if (solution.fractional_objective) j["fractional_objective"] = *solution.fractional_objective;
  if (solution.integrality_gap) j["integrality_gap"] = *solution.integrality_gap;
  return j.dump(2);
}

}  // namespace crowdsense
