#include "crowdsense/reuse_bounds.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

#include "blocks.hpp"
#include "crowdsense/market.hpp"
#include "crowdsense/welfare.hpp"
#include "json_detail.hpp"

namespace crowdsense {

Distribution Distribution::uniform(double lo, double hi) {
  if (!(hi > lo)) throw std::domain_error("uniform distribution needs lo < hi");
  Distribution d;
  d.name = "uniform";
  d.lo = lo;
  d.hi = hi;
  const double w = hi - lo;
  d.pdf = [lo, hi, w](double x) { return (x >= lo && x <= hi) ? 1.0 / w : 0.0; };
  d.cdf = [lo, hi, w](double x) { return x <= lo ? 0.0 : (x >= hi ? 1.0 : (x - lo) / w); };
  d.sample = [lo, w](Rng& rng) { return lo + w * rng.uniform(); };
  return d;
}

double pdf_mass(const Distribution& dist, int panels) {
  if (panels % 2) ++panels;
  const double h = (dist.hi - dist.lo) / panels;
  double s = dist.pdf(dist.lo) + dist.pdf(dist.hi);
  for (int k = 1; k < panels; ++k) s += (k % 2 ? 4.0 : 2.0) * dist.pdf(dist.lo + k * h);
  return s * h / 3.0;
}

void check_distribution(const Distribution& dist) {
  if (!dist.pdf || !dist.cdf || !dist.sample) throw std::domain_error("distribution is incomplete");
  const double mass = pdf_mass(dist);
  if (std::abs(mass - 1.0) > 1e-6) {
    throw std::domain_error("pdf of '" + dist.name + "' integrates to " + std::to_string(mass));
  }
}

double order_stat_pdf(int m, int n, double x, const Distribution& dist) {
  if (n < 1 || m < 1 || m > n) throw std::domain_error("order statistic index out of range");
  if (x < dist.lo || x > dist.hi) return 0.0;
  const double F = dist.cdf(x);
  // n * C(n-1, m-1) in log space to survive large n
  const double log_coef = std::log(static_cast<double>(n)) + std::lgamma(n) - std::lgamma(m) -
                          std::lgamma(n - m + 1);
  double dens = std::exp(log_coef) * dist.pdf(x);
  if (m > 1) dens *= std::pow(F, m - 1);
  if (n > m) dens *= std::pow(1.0 - F, n - m);
  return dens;
}

double irwin_hall_pdf(int J, double v) {
  if (J < 1) throw std::domain_error("irwin_hall_pdf needs J >= 1");
  if (v < 0.0 || v > J) return 0.0;
  if (J == 1) return 1.0;
  long double s = 0.0L;
  long double binom = 1.0L;
  for (int j = 0; j <= J; ++j) {
    const long double d = static_cast<long double>(v) - j;
    const int sgn = d > 0 ? 1 : (d < 0 ? -1 : 0);
    s += (j % 2 ? -1.0L : 1.0L) * binom * std::pow(d, J - 1) * sgn;
    binom = binom * (J - j) / (j + 1);
  }
  const long double fact = std::tgamma(static_cast<long double>(J));
  return static_cast<double>(s / (2.0L * fact));
}

double min_cost_pdf(int I, double c) {
  if (I < 1) throw std::domain_error("min_cost_pdf needs I >= 1");
  if (c < 0.0 || c > 1.0) return 0.0;
  return I * std::pow(1.0 - c, I - 1);
}

double single_item_no_reuse(std::vector<double> values, std::vector<double> costs) {
  const std::size_t m = std::min(values.size(), costs.size());
  std::partial_sort(values.begin(), values.begin() + m, values.end(), std::greater<>());
  std::partial_sort(costs.begin(), costs.begin() + m, costs.end());
  double w = 0.0;
  for (std::size_t k = 0; k < m && values[k] >= costs[k]; ++k) w += values[k] - costs[k];
  return w;
}

double single_item_with_reuse(const std::vector<double>& values, const std::vector<double>& costs) {
  if (costs.empty()) return 0.0;
  const double v = std::accumulate(values.begin(), values.end(), 0.0);
  return std::max(0.0, v - *std::min_element(costs.begin(), costs.end()));
}

double reuse_welfare_bound(int I, int J) { return J / 2.0 - 1.0 + static_cast<double>(I) / (I + 1); }

const char* gain_status_name(BoundReport::GainStatus s) {
  switch (s) {
    case BoundReport::GainStatus::kDefined:
      return "defined";
    case BoundReport::GainStatus::kUndefined:
      return "undefined";
    case BoundReport::GainStatus::kNoDemand:
      return "undefined (no demand)";
  }
  return "?";
}

namespace {

struct BlockSums {
  Moments n, r, ratio;
  double cross = 0.0;  // sum of sw_n * sw_r
  long excluded = 0;
};

void check_common(int I, int J, long replications, const McOptions& o) {
  if (I < 1 || J < 1) throw std::domain_error("I and J must be positive");
  if (replications < 1) throw std::domain_error("replications must be >= 1");
  if (o.block_size < 1) throw std::domain_error("block_size must be >= 1");
}

template <class Rep>
BlockSums run_blocks(long replications, std::uint64_t seed, const McOptions& o, Rep&& rep) {
  const long blocks = (replications + o.block_size - 1) / o.block_size;
  const auto parts = detail::run_indexed<BlockSums>(blocks, o.workers, [&](long b) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(b)));
    BlockSums s;
    const long end = std::min(replications, (b + 1) * o.block_size);
    for (long t = b * o.block_size; t < end; ++t) rep(rng, s);
    return s;
  });
  BlockSums total;
  for (const auto& p : parts) {
    total.n.merge(p.n);
    total.r.merge(p.r);
    total.ratio.merge(p.ratio);
    total.cross += p.cross;
    total.excluded += p.excluded;
  }
  return total;
}

}  // namespace

BoundReport mc_gain_single_item(int I, int J, long replications, std::uint64_t seed,
                                const McOptions& options) {
  check_common(I, J, replications, options);
  check_distribution(options.values);
  check_distribution(options.costs);
  const BlockSums s = run_blocks(replications, seed, options, [&](Rng& rng, BlockSums& acc) {
    std::vector<double> v(J), c(I);
    for (double& x : v) x = options.values.sample(rng);
    for (double& x : c) x = options.costs.sample(rng);
    const double wr = single_item_with_reuse(v, c);
    const double wn = single_item_no_reuse(std::move(v), std::move(c));
    acc.n.add(wn);
    acc.r.add(wr);
    acc.cross += wn * wr;
  });

  BoundReport rep;
  rep.I = I;
  rep.J = J;
  rep.replications = replications;
  rep.seed = seed;
  rep.sw_n = s.n.estimate();
  rep.sw_r = s.r.estimate();
  rep.sw_r_bound = reuse_welfare_bound(I, J);
  if (I == 2 && J == 2 && options.values.name == "uniform" && options.costs.name == "uniform" &&
      options.values.lo == 0.0 && options.values.hi == 1.0 && options.costs.lo == 0.0 &&
      options.costs.hi == 1.0) {
    rep.sw_n_exact = 2.0 / 5.0;
    rep.sw_r_exact = 41.0 / 60.0;
  }
  const double mn = rep.sw_n.mean, mr = rep.sw_r.mean;
  if (mn <= 1e-12) {
    rep.status = BoundReport::GainStatus::kUndefined;
    return rep;
  }
  rep.status = BoundReport::GainStatus::kDefined;
  rep.gamma.mean = mr / mn;
  const long n = s.n.n;
  if (n > 1) {
    const double cov = (s.cross - n * mn * mr) / (n - 1);
    const double var = (s.r.variance() / (mn * mn) + mr * mr * s.n.variance() / (mn * mn * mn * mn) -
                        2.0 * mr * cov / (mn * mn * mn)) /
                       n;
    rep.gamma.se = std::sqrt(std::max(0.0, var));
  }
  return rep;
}

Scenario multi_item_scenario(int I, int J, int K, double demand_prob, double supply_prob, Rng& rng,
                             const McOptions& options) {
  std::vector<DataItem> items(K);
  for (int k = 0; k < K; ++k) items[k].id = k + 1;
  std::vector<Task> tasks(J);
  for (int j = 0; j < J; ++j) {
    tasks[j].id = j + 1;
    for (int k = 0; k < K; ++k) {
      if (rng.bernoulli(demand_prob)) tasks[j].requirements.push_back(k);
    }
    tasks[j].value = options.values.sample(rng);
  }
  std::vector<User> users(I);
  for (int i = 0; i < I; ++i) {
    users[i].id = i + 1;
    for (int k = 0; k < K; ++k) {
      if (rng.bernoulli(supply_prob)) users[i].capability.push_back(k);
    }
    users[i].cost = CostOracle::additive(options.costs.sample(rng));
  }
  return Scenario(std::move(items), std::move(tasks), std::move(users));
}

BoundReport mc_gain_multi_item(int I, int J, int K, double demand_prob, long replications,
                               std::uint64_t seed, double supply_prob, const McOptions& options) {
  check_common(I, J, replications, options);
  if (K < 1) throw std::domain_error("K must be positive");
  if (!(demand_prob >= 0.0 && demand_prob <= 1.0)) throw std::domain_error("demand_prob must lie in [0,1]");
  if (supply_prob < 0.0) supply_prob = demand_prob;
  if (supply_prob > 1.0) throw std::domain_error("supply_prob must lie in [0,1]");

  BoundReport rep;
  rep.I = I;
  rep.J = J;
  rep.K = K;
  rep.demand_prob = demand_prob;
  rep.supply_prob = supply_prob;
  rep.replications = replications;
  rep.seed = seed;
  rep.sw_r_bound = reuse_welfare_bound(I, J);
  const BlockSums s = run_blocks(replications, seed, options, [&](Rng& rng, BlockSums& acc) {
    const Scenario sc = multi_item_scenario(I, J, K, demand_prob, supply_prob, rng, options);
    const double wr = solve_integer(WelfareProblem::truthful(sc, ReuseMode::kReuse)).objective;
    const double wn = solve_integer(WelfareProblem::truthful(sc, ReuseMode::kNoReuse)).objective;
    acc.n.add(wn);
    acc.r.add(wr);
    acc.cross += wn * wr;
    if (wn > 1e-12) {
      acc.ratio.add(wr / wn);
    } else {
      ++acc.excluded;
    }
  });

  rep.sw_n = s.n.estimate();
  rep.sw_r = s.r.estimate();
  rep.excluded = s.excluded;
  rep.reliable = s.excluded <= 0.01 * replications;
  if (demand_prob == 0.0) {
    // every task completes for free in both modes; no gain to speak of
    rep.status = BoundReport::GainStatus::kNoDemand;
  } else if (s.ratio.n == 0) {
    rep.status = BoundReport::GainStatus::kUndefined;
  } else {
    rep.status = BoundReport::GainStatus::kDefined;
    rep.gamma = s.ratio.estimate();
  }
  return rep;
}

std::string bound_csv_header() {
  return "I,J,K,demand_prob,sw_n,sw_n_se,sw_r,sw_r_se,gamma,gamma_se,replications,seed";
}

std::string bound_csv_row(const BoundReport& r) {
  auto num = [](double v) {
    char b[32];
    std::snprintf(b, sizeof b, "%.17g", v);
    return std::string(b);
  };
  const bool g = r.status == BoundReport::GainStatus::kDefined;
  return std::to_string(r.I) + "," + std::to_string(r.J) + "," + std::to_string(r.K) + "," +
         num(r.demand_prob) + "," + num(r.sw_n.mean) + "," + num(r.sw_n.se) + "," + num(r.sw_r.mean) + "," +
         num(r.sw_r.se) + "," + (g ? num(r.gamma.mean) : "") + "," + (g ? num(r.gamma.se) : "") + "," +
         std::to_string(r.replications) + "," + std::to_string(r.seed);
}

std::string bound_report_to_json(const BoundReport& r) {
  detail::json j;
  j["I"] = r.I;
  j["J"] = r.J;
  j["K"] = r.K;
  j["demand_prob"] = r.demand_prob;
  j["supply_prob"] = r.supply_prob;
  j["sw_n"] = {{"mean", r.sw_n.mean}, {"stderr", r.sw_n.se}};
  j["sw_r"] = {{"mean", r.sw_r.mean}, {"stderr", r.sw_r.se}};
  j["gamma_status"] = gain_status_name(r.status);
  if (r.status == BoundReport::GainStatus::kDefined) {
    j["gamma"] = {{"mean", r.gamma.mean}, {"stderr", r.gamma.se}};
  }
  if (r.sw_n_exact) j["sw_n_exact"] = *r.sw_n_exact;
  if (r.sw_r_exact) j["sw_r_exact"] = *r.sw_r_exact;
  j["sw_r_lower_bound"] = r.sw_r_bound;
  j["replications"] = r.replications;
  j["excluded"] = r.excluded;
  j["reliable"] = r.reliable;
  j["seed"] = r.seed;
  return j.dump(2);
}

}  // namespace crowdsense
