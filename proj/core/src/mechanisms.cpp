#include "crowdsense/mechanisms.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "json_detail.hpp"

namespace crowdsense {

namespace {

constexpr double kPaymentTolerance = 1e-7;
constexpr double kZeroExpectation = 1e-12;

double clean(double v) { return std::abs(v) < 1e-12 ? 0.0 : v; }

struct VcgCore {
  WelfareSolution solution;
  std::vector<double> payments;
  std::vector<double> charges;
};

// VCG transfers on the given (possibly task-restricted) problem. A user idle
// in the optimum, or a task not selected, has a zero externality: the
// optimum stays feasible and optimal without it, so its solve is skipped.
VcgCore vcg_core(const WelfareProblem& base, bool fractional) {
  const Scenario& sc = *base.scenario;
  auto solve = [fractional](const WelfareProblem& p) {
    return fractional ? solve_fractional(p) : solve_integer(p);
  };
  VcgCore core;
  core.solution = solve(base);
  const double W = core.solution.objective;
  const Allocation& a = core.solution.allocation;
  core.payments.assign(sc.num_users(), 0.0);
  core.charges.assign(sc.num_tasks(), 0.0);
  for (int i = 0; i < sc.num_users(); ++i) {
    if (base.user_excluded(i)) continue;
    const double own = schedule_cost(base.bids.costs[i], sc.user(i).capability, a.x[i]);
    const bool idle = std::all_of(a.y_ki[i].begin(), a.y_ki[i].end(), [](double w) { return w == 0.0; });
    if (idle) continue;
    const double w_minus = solve(base.without_user(i)).objective;
    core.payments[i] = clean(W + own - w_minus);
  }
  for (int j = 0; j < sc.num_tasks(); ++j) {
    if (base.task_excluded(j) || a.z[j] == 0.0) continue;
    const double w_minus = solve(base.without_task(j)).objective;
    core.charges[j] = clean(w_minus - W + base.bids.values[j] * a.z[j]);
  }
  return core;
}

double true_cost(const Scenario& sc, int i, const UserSchedule& s) {
  return schedule_cost(sc.user(i).cost, sc.user(i).capability, s);
}

AuctionOutcome deterministic_outcome(const Scenario& sc, const std::string& name, VcgCore core) {
  AuctionOutcome out;
  out.mechanism = name;
  out.allocation = std::move(core.solution.allocation);
  out.payments = core.payments;
  out.charges = core.charges;
  out.expected_payments = core.payments;
  out.expected_charges = core.charges;
  out.reported_welfare = core.solution.objective;
  out.welfare = welfare(sc, out.allocation);
  out.expected_welfare = out.welfare;
  for (int i = 0; i < sc.num_users(); ++i) {
    out.user_utilities.push_back(out.payments[i] - true_cost(sc, i, out.allocation.x[i]));
  }
  for (int j = 0; j < sc.num_tasks(); ++j) {
    out.task_utilities.push_back(sc.task(j).value * out.allocation.z[j] - out.charges[j]);
  }
  out.expected_user_utilities = out.user_utilities;
  out.expected_task_utilities = out.task_utilities;
  out.withdrawn.assign(sc.num_tasks(), false);
  return out;
}

// Distribution of one sampling unit restricted to the task's uncertain items,
// as (local bitmask, probability) pairs.
using LocalDistribution = std::vector<std::pair<unsigned, double>>;

struct TaskUnits {
  std::vector<int> uncertain;            // items of K_j not surely covered
  std::vector<LocalDistribution> units;  // independent units touching them
  bool impossible = false;               // some item can never be covered
};

TaskUnits coverage_units(const Scenario& sc, const Allocation& x, int j) {
  const ItemSet& req = sc.task(j).requirements;
  std::vector<bool> sure(sc.num_items(), false), possible(sc.num_items(), false);
  for (int i = 0; i < sc.num_users(); ++i) {
    const UserSchedule& s = x.x[i];
    const ItemSet& cap = sc.user(i).capability;
    if (s.independent) {
      for (std::size_t p = 0; p < cap.size(); ++p) {
        if (s.item_marginals[p] >= 1.0) sure[cap[p]] = true;
        if (s.item_marginals[p] > 0.0) possible[cap[p]] = true;
      }
    } else {
      for (const SubsetWeight& sw : s.subsets) {
        if (sw.weight <= 0.0) continue;
        for (int k : sw.items) {
          possible[k] = true;
          if (sw.weight >= 1.0) sure[k] = true;
        }
      }
    }
  }
  TaskUnits t;
  for (int k : req) {
    if (!possible[k]) t.impossible = true;
    if (!sure[k]) t.uncertain.push_back(k);
  }
  if (t.impossible || t.uncertain.empty()) return t;
  auto local = [&t](int k) -> int {
    auto it = std::lower_bound(t.uncertain.begin(), t.uncertain.end(), k);
    return (it != t.uncertain.end() && *it == k) ? static_cast<int>(it - t.uncertain.begin()) : -1;
  };
  for (int i = 0; i < sc.num_users(); ++i) {
    const UserSchedule& s = x.x[i];
    const ItemSet& cap = sc.user(i).capability;
    if (s.independent) {
      for (std::size_t p = 0; p < cap.size(); ++p) {
        const int b = local(cap[p]);
        const double m = s.item_marginals[p];
        if (b < 0 || m <= 0.0) continue;
        t.units.push_back({{0u, 1.0 - m}, {1u << b, m}});
      }
    } else {
      std::map<unsigned, double> d;
      for (const SubsetWeight& sw : s.subsets) {
        if (sw.weight <= 0.0) continue;
        unsigned mask = 0;
        for (int k : sw.items) {
          const int b = local(k);
          if (b >= 0) mask |= 1u << b;
        }
        d[mask] += sw.weight;
      }
      if (d.size() == 1 && d.begin()->first == 0u) continue;
      t.units.emplace_back(d.begin(), d.end());
    }
  }
  return t;
}

double exact_coverage(const TaskUnits& t) {
  const std::size_t n = t.uncertain.size();
  std::vector<double> dp(std::size_t{1} << n, 0.0), next(dp.size());
  dp[0] = 1.0;
  for (const LocalDistribution& u : t.units) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t m = 0; m < dp.size(); ++m) {
      if (dp[m] == 0.0) continue;
      for (auto [o, p] : u) next[m | o] += dp[m] * p;
    }
    dp.swap(next);
  }
  return dp.back();
}

ItemSet draw_subset(const UserSchedule& s, const ItemSet& cap, Rng& rng) {
  if (s.independent) {
    ItemSet out;
    for (std::size_t p = 0; p < cap.size(); ++p) {
      const double m = s.item_marginals[p];
      if (m >= 1.0 || (m > 0.0 && rng.uniform() < m)) out.push_back(cap[p]);
    }
    return out;
  }
  if (s.subsets.size() == 1) return s.subsets.front().items;
  const double u = rng.uniform();
  double acc = 0.0;
  for (const SubsetWeight& sw : s.subsets) {
    acc += sw.weight;
    if (u < acc) return sw.items;
  }
  // rounding residue: last subset with positive weight
  for (auto it = s.subsets.rbegin(); it != s.subsets.rend(); ++it) {
    if (it->weight > 0.0) return it->items;
  }
  return {};
}

bool covered(const Scenario& sc, const std::vector<int>& sensed_count, int j) {
  const ItemSet& req = sc.task(j).requirements;
  return std::all_of(req.begin(), req.end(), [&](int k) { return sensed_count[k] > 0; });
}

}  // namespace

double AuctionOutcome::profit() const {
  double p = 0.0;
  for (double q : charges) p += q;
  for (double x : payments) p -= x;
  return p;
}

double AuctionOutcome::expected_profit() const {
  double p = 0.0;
  for (double q : expected_charges) p += q;
  for (double x : expected_payments) p -= x;
  return p;
}

bool RandomizedPolicy::deterministic() const {
  for (const UserSchedule& s : fractional.x) {
    if (s.independent) {
      for (double m : s.item_marginals) {
        if (m != 0.0 && m != 1.0) return false;
      }
    } else {
      for (const SubsetWeight& sw : s.subsets) {
        if (sw.weight != 0.0 && sw.weight != 1.0) return false;
      }
    }
  }
  return std::all_of(accept.begin(), accept.end(), [](double a) { return a == 0.0 || a == 1.0; });
}

RandomizedPolicy build_policy(const Scenario& scenario, const Bids& bids, const PolicyOptions& options) {
  const WelfareSolution f = solve_fractional(WelfareProblem(scenario, bids, ReuseMode::kReuse));
  return build_policy(scenario, bids, f.allocation, std::vector<bool>(scenario.num_tasks(), true),
                      options);
}

RandomizedPolicy build_policy(const Scenario& sc, const Bids& bids, const Allocation& fractional,
                              const std::vector<bool>& included_tasks, const PolicyOptions& options) {
  const int J = sc.num_tasks();
  RandomizedPolicy p;
  p.scenario = &sc;
  p.bids = bids;
  p.fractional = fractional;
  p.included_tasks = included_tasks;
  p.coverage_probability.assign(J, 0.0);
  p.coverage_stderr.assign(J, 0.0);
  p.beta_j.assign(J, 0.0);
  p.accept.assign(J, 0.0);
  p.exact.assign(J, true);

  std::vector<int> sampled;
  for (int j = 0; j < J; ++j) {
    if (!included_tasks[j] || fractional.z[j] <= 0.0) continue;
    const TaskUnits t = coverage_units(sc, fractional, j);
    if (t.impossible) {
      p.coverage_probability[j] = 0.0;
    } else if (t.uncertain.empty()) {
      p.coverage_probability[j] = 1.0;
    } else if (!options.force_monte_carlo &&
               static_cast<int>(t.uncertain.size()) <= options.exact_item_limit) {
      p.coverage_probability[j] = exact_coverage(t);
    } else {
      sampled.push_back(j);
      p.exact[j] = false;
    }
  }
  if (!sampled.empty()) {
    Rng rng(options.monte_carlo_seed);
    std::vector<long> hits(J, 0);
    std::vector<int> count(sc.num_items());
    const long N = std::max(1L, options.monte_carlo_samples);
    for (long s = 0; s < N; ++s) {
      std::fill(count.begin(), count.end(), 0);
      for (int i = 0; i < sc.num_users(); ++i) {
        for (int k : draw_subset(fractional.x[i], sc.user(i).capability, rng)) ++count[k];
      }
      for (int j : sampled) hits[j] += covered(sc, count, j) ? 1 : 0;
    }
    for (int j : sampled) {
      const double ph = static_cast<double>(hits[j]) / static_cast<double>(N);
      p.coverage_probability[j] = ph;
      p.coverage_stderr[j] = std::sqrt(ph * (1.0 - ph) / static_cast<double>(N));
    }
  }

  double beta = 1.0;
  for (int j = 0; j < J; ++j) {
    if (!included_tasks[j] || fractional.z[j] <= 0.0) continue;
    if (p.coverage_probability[j] <= 0.0) {
      throw DegeneratePolicyError(j, "task " + std::to_string(j + 1) +
                                         " has positive fractional selection but can never be "
                                         "covered by an integer draw");
    }
    p.beta_j[j] = p.coverage_probability[j] / fractional.z[j];
    beta = std::min(beta, p.beta_j[j]);
  }
  p.beta = beta;
  for (int j = 0; j < J; ++j) {
    if (p.beta_j[j] > 0.0) p.accept[j] = std::min(1.0, beta / p.beta_j[j]);
  }
  return p;
}

Allocation sample_realization(const RandomizedPolicy& policy, Rng& rng) {
  const Scenario& sc = *policy.scenario;
  Allocation a = Allocation::empty(sc);
  std::vector<int> count(sc.num_items(), 0);
  for (int i = 0; i < sc.num_users(); ++i) {
    ItemSet s = draw_subset(policy.fractional.x[i], sc.user(i).capability, rng);
    for (int k : s) ++count[k];
    a.x[i] = s.empty() ? UserSchedule::idle() : UserSchedule::exactly(std::move(s));
  }
  for (int j = 0; j < sc.num_tasks(); ++j) {
    const double acc = policy.accept[j];
    if (acc <= 0.0) continue;
    const bool coin = acc >= 1.0 || rng.uniform() < acc;
    a.z[j] = (coin && covered(sc, count, j)) ? 1.0 : 0.0;
  }
  derive_coverage(sc, a);
  a.integral = true;
  return a;
}

std::vector<WeightedAllocation> enumerate_realizations(const RandomizedPolicy& policy, long limit) {
  const Scenario& sc = *policy.scenario;
  const int I = sc.num_users();
  // user outcomes as (subset, probability)
  std::vector<std::vector<std::pair<ItemSet, double>>> outcomes(I);
  double total = 1.0;
  for (int i = 0; i < I; ++i) {
    const UserSchedule& s = policy.fractional.x[i];
    const ItemSet& cap = sc.user(i).capability;
    if (s.independent) {
      std::vector<std::size_t> free;
      ItemSet base;
      for (std::size_t p = 0; p < cap.size(); ++p) {
        if (s.item_marginals[p] >= 1.0) base.push_back(cap[p]);
        else if (s.item_marginals[p] > 0.0) free.push_back(p);
      }
      if (free.size() > 20) throw std::invalid_argument("too many realizations to enumerate");
      for (std::size_t m = 0; m < (std::size_t{1} << free.size()); ++m) {
        ItemSet set = base;
        double pr = 1.0;
        for (std::size_t b = 0; b < free.size(); ++b) {
          const double mg = s.item_marginals[free[b]];
          if (m & (std::size_t{1} << b)) {
            set.push_back(cap[free[b]]);
            pr *= mg;
          } else {
            pr *= 1.0 - mg;
          }
        }
        outcomes[i].push_back({make_item_set(set), pr});
      }
    } else {
      for (const SubsetWeight& sw : s.subsets) {
        if (sw.weight > 0.0) outcomes[i].push_back({sw.items, sw.weight});
      }
    }
    total *= static_cast<double>(outcomes[i].size());
    if (total > static_cast<double>(limit)) throw std::invalid_argument("too many realizations to enumerate");
  }

  std::vector<WeightedAllocation> out;
  std::vector<std::size_t> pick(I, 0);
  std::vector<int> count(sc.num_items());
  while (true) {
    double pr = 1.0;
    std::fill(count.begin(), count.end(), 0);
    Allocation a = Allocation::empty(sc);
    for (int i = 0; i < I; ++i) {
      const auto& [set, w] = outcomes[i][pick[i]];
      pr *= w;
      for (int k : set) ++count[k];
      a.x[i] = set.empty() ? UserSchedule::idle() : UserSchedule::exactly(set);
    }
    std::vector<int> coin_tasks;
    for (int j = 0; j < sc.num_tasks(); ++j) {
      const double acc = policy.accept[j];
      if (acc <= 0.0 || !covered(sc, count, j)) continue;
      if (acc >= 1.0) a.z[j] = 1.0;
      else coin_tasks.push_back(j);
    }
    if (static_cast<double>(out.size()) + std::pow(2.0, coin_tasks.size()) > static_cast<double>(limit)) {
      throw std::invalid_argument("too many realizations to enumerate");
    }
    for (std::size_t m = 0; m < (std::size_t{1} << coin_tasks.size()); ++m) {
      Allocation b = a;
      double q = pr;
      for (std::size_t t = 0; t < coin_tasks.size(); ++t) {
        const int j = coin_tasks[t];
        if (m & (std::size_t{1} << t)) {
          b.z[j] = 1.0;
          q *= policy.accept[j];
        } else {
          q *= 1.0 - policy.accept[j];
        }
      }
      derive_coverage(sc, b);
      b.integral = true;
      out.push_back({q, std::move(b)});
    }
    int i = 0;
    while (i < I && ++pick[i] == outcomes[i].size()) pick[i++] = 0;
    if (i == I) break;
  }
  return out;
}

RealizedTransfers realization_transfers(const RandomizedPolicy& policy, const Allocation& realization,
                                        const std::vector<double>& fractional_payments,
                                        const std::vector<double>& fractional_charges,
                                        const std::vector<double>& reserve) {
  const Scenario& sc = *policy.scenario;
  RealizedTransfers t;
  t.payments.assign(sc.num_users(), 0.0);
  t.charges.assign(sc.num_tasks(), 0.0);
  for (int i = 0; i < sc.num_users(); ++i) {
    const CostOracle& b = policy.bids.costs[i];
    const double expected = schedule_cost(b, sc.user(i).capability, policy.fractional.x[i]);
    const double pstar = fractional_payments[i];
    if (expected <= kZeroExpectation) {
      if (std::abs(pstar) > kPaymentTolerance) {
        throw PaymentDegeneracyError(i, "user " + std::to_string(i + 1) +
                                            " has zero expected reported cost but a nonzero "
                                            "fractional VCG payment");
      }
      continue;
    }
    const double realized = schedule_cost(b, sc.user(i).capability, realization.x[i]);
    t.payments[i] = policy.alpha * pstar * realized / expected;
  }
  for (int j = 0; j < sc.num_tasks(); ++j) {
    if (!policy.included_tasks[j] || policy.fractional.z[j] <= 0.0) continue;
    const double zl = realization.z[j];
    // V_j(z^l) / E[V_j] = z^l / (beta z*): the reported value cancels.
    t.charges[j] = policy.beta * fractional_charges[j] * zl / (policy.beta * policy.fractional.z[j]);
    if (!reserve.empty()) t.charges[j] += reserve[j] * zl;
  }
  return t;
}

std::vector<double> minimum_charges(const Scenario& scenario, const std::vector<double>& sigma) {
  if (static_cast<int>(sigma.size()) != scenario.num_items()) {
    throw ScenarioError("need one reserve price per data item");
  }
  for (double s : sigma) {
    if (!(s >= 0.0) || !std::isfinite(s)) throw ScenarioError("reserve prices must be finite and >= 0");
  }
  std::vector<double> out;
  for (const Task& t : scenario.tasks()) {
    double q = 0.0;
    for (int k : t.requirements) q += sigma[k];
    out.push_back(q);
  }
  return out;
}

AuctionOutcome vcg(const Scenario& scenario, const Bids& bids) {
  return deterministic_outcome(scenario, "vcg",
                               vcg_core(WelfareProblem(scenario, bids, ReuseMode::kReuse), false));
}

AuctionOutcome fractional_vcg(const Scenario& scenario, const Bids& bids) {
  return deterministic_outcome(scenario, "fvcg",
                               vcg_core(WelfareProblem(scenario, bids, ReuseMode::kReuse), true));
}

namespace {

AuctionOutcome randomized_outcome(const Scenario& sc, const std::string& name, const WelfareProblem& base,
                                  const std::vector<double>& reserve, std::uint64_t seed,
                                  const PolicyOptions& options) {
  const int I = sc.num_users(), J = sc.num_tasks();
  VcgCore core = vcg_core(base, true);
  std::vector<bool> included(J, true);
  for (int j : base.excluded_tasks) included[j] = false;
  const RandomizedPolicy policy = build_policy(sc, base.bids, core.solution.allocation, included, options);
  Rng rng(seed);
  Allocation real = sample_realization(policy, rng);
  RealizedTransfers t = realization_transfers(policy, real, core.payments, core.charges, reserve);

  AuctionOutcome out;
  out.mechanism = name;
  out.seed = seed;
  out.alpha = policy.alpha;
  out.beta = policy.beta;
  out.reported_welfare = core.solution.objective;
  out.payments = t.payments;
  out.charges = t.charges;
  out.welfare = welfare(sc, real);
  const Allocation& fx = core.solution.allocation;
  out.expected_welfare = 0.0;
  for (int i = 0; i < I; ++i) {
    const double c_true = true_cost(sc, i, fx.x[i]);
    out.expected_payments.push_back(policy.alpha * core.payments[i]);
    out.user_utilities.push_back(t.payments[i] - true_cost(sc, i, real.x[i]));
    out.expected_user_utilities.push_back(policy.alpha * core.payments[i] - policy.alpha * c_true);
    out.expected_welfare -= policy.alpha * c_true;
  }
  for (int j = 0; j < J; ++j) {
    const double v = sc.task(j).value;
    const double selected = included[j] ? policy.beta * fx.z[j] : 0.0;
    const double reserve_part = reserve.empty() ? 0.0 : reserve[j] * selected;
    const double charge = included[j] ? policy.beta * core.charges[j] + reserve_part : 0.0;
    out.expected_charges.push_back(charge);
    out.task_utilities.push_back(v * real.z[j] - t.charges[j]);
    out.expected_task_utilities.push_back(v * selected - charge);
    out.expected_welfare += v * selected;
  }
  out.withdrawn.resize(J);
  for (int j = 0; j < J; ++j) out.withdrawn[j] = !included[j];
  out.allocation = std::move(real);
  return out;
}

}  // namespace

AuctionOutcome randomized_auction(const Scenario& scenario, const Bids& bids, std::uint64_t seed,
                                  const PolicyOptions& options) {
  return randomized_outcome(scenario, "rand", WelfareProblem(scenario, bids, ReuseMode::kReuse), {}, seed,
                            options);
}

AuctionOutcome reserve_price_auction(const Scenario& scenario, const Bids& bids,
                                     const std::vector<double>& sigma, std::uint64_t seed,
                                     const PolicyOptions& options) {
  check_bids(scenario, bids);
  const std::vector<double> qmin = minimum_charges(scenario, sigma);
  Bids reduced = bids;
  std::vector<int> withdrawn;
  for (int j = 0; j < scenario.num_tasks(); ++j) {
    const double r = bids.values[j] - qmin[j];
    if (r < 0.0) {
      withdrawn.push_back(j);
      reduced.values[j] = 0.0;
    } else {
      reduced.values[j] = r;
    }
  }
  WelfareProblem base(scenario, reduced, ReuseMode::kReuse);
  base.excluded_tasks = withdrawn;
  return randomized_outcome(scenario, "reserve", base, qmin, seed, options);
}

BudgetReport budget_report(const AuctionOutcome& outcome, BudgetBasis basis) {
  const bool exp = basis == BudgetBasis::kExpected;
  const std::vector<double>& q = exp ? outcome.expected_charges : outcome.charges;
  const std::vector<double>& p = exp ? outcome.expected_payments : outcome.payments;
  BudgetReport r;
  for (double v : q) r.total_charges += v;
  for (double v : p) r.total_payments += v;
  r.profit = r.total_charges - r.total_payments;
  r.balanced = r.profit >= -1e-9;
  return r;
}

std::string outcome_to_json(const Scenario& scenario, const AuctionOutcome& o) {
  using detail::json;
  json payments = json::array(), charges = json::array();
  for (int i = 0; i < scenario.num_users(); ++i) {
    payments.push_back({{"id", i + 1},
                        {"payment", o.payments[i]},
                        {"expected", o.expected_payments[i]},
                        {"utility", o.user_utilities[i]}});
  }
  for (int j = 0; j < scenario.num_tasks(); ++j) {
    json c = {{"id", j + 1},
              {"charge", o.charges[j]},
              {"expected", o.expected_charges[j]},
              {"utility", o.task_utilities[j]}};
    if (!o.withdrawn.empty() && o.withdrawn[j]) c["withdrawn"] = true;
    charges.push_back(c);
  }
  json j = {{"mechanism", o.mechanism},
            {"alpha", o.alpha},
            {"beta", o.beta},
            {"payments", payments},
            {"charges", charges},
            {"profit", o.profit()},
            {"expected_profit", o.expected_profit()},
            {"welfare", o.welfare},
            {"expected_welfare", o.expected_welfare},
            {"seed", o.seed},
            {"allocation", detail::allocation_json(scenario, o.allocation)}};
  return j.dump(2);
}

}  // namespace crowdsense
