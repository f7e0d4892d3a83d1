#pragma once

// Order statistics of the single-item market and Monte Carlo estimates of the
// welfare with and without data reuse.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "crowdsense/market.hpp"
#include "crowdsense/rng.hpp"
#include "crowdsense/stats.hpp"

namespace crowdsense {

/// Continuous distribution on [lo, hi] given by its pdf, cdf and a sampler.
struct Distribution {
  std::string name;
  double lo = 0.0;
  double hi = 1.0;
  std::function<double(double)> pdf;
  std::function<double(double)> cdf;
  std::function<double(Rng&)> sample;

  static Distribution uniform(double lo = 0.0, double hi = 1.0);
};

/// Simpson integral of the pdf over its support.
double pdf_mass(const Distribution& dist, int panels = 20000);
/// Throws std::domain_error unless the pdf integrates to 1 within 1e-6.
void check_distribution(const Distribution& dist);

/// Density of the m-th smallest of n draws. Throws std::domain_error for m
/// outside [1, n].
double order_stat_pdf(int m, int n, double x, const Distribution& dist = Distribution::uniform());

/// Density of the sum of J uniforms on [0,1]; 0 outside [0, J]. The
/// alternating sum loses precision beyond J of about 20.
double irwin_hall_pdf(int J, double v);

/// Density of the minimum of I uniforms on [0,1].
double min_cost_pdf(int I, double c);

/// Single-item welfare when each task needs its own sensing: pair the
/// highest values with the lowest costs while value >= cost.
double single_item_no_reuse(std::vector<double> values, std::vector<double> costs);
/// Single-item welfare with reuse: the cheapest user serves every task.
double single_item_with_reuse(const std::vector<double>& values, const std::vector<double>& costs);

/// Closed-form reference J/2 - 1 + I/(I+1). It holds as a lower bound.
double reuse_welfare_bound(int I, int J);

struct BoundReport {
  enum class GainStatus { kDefined, kUndefined, kNoDemand };

  int I = 0;
  int J = 0;
  int K = 1;
  double demand_prob = 1.0;
  double supply_prob = 1.0;
  Estimate sw_n;
  Estimate sw_r;
  Estimate gamma;
  GainStatus status = GainStatus::kUndefined;
  std::optional<double> sw_n_exact;  // known closed forms (I = J = 2)
  std::optional<double> sw_r_exact;
  double sw_r_bound = 0.0;
  long replications = 0;
  long excluded = 0;      // replications with zero no-reuse welfare (multi-item)
  bool reliable = true;   // false when more than 1% were excluded
  std::uint64_t seed = 0;
};

const char* gain_status_name(BoundReport::GainStatus s);

struct McOptions {
  int workers = 1;          // results do not depend on this
  long block_size = 1024;   // replications per derived seed
  Distribution values = Distribution::uniform();
  Distribution costs = Distribution::uniform();
};

/// Single item, J tasks, I users. gamma is the ratio of the two means with a
/// delta-method standard error.
BoundReport mc_gain_single_item(int I, int J, long replications, std::uint64_t seed,
                                const McOptions& options = {});

/// K items; every task requires each item with probability demand_prob and
/// every user senses each item with probability supply_prob (negative: same
/// as demand_prob). Users are additive with a U[0,1] cost per item; a task's
/// total value is U[0,1] whatever it requires. gamma is the mean of the
/// per-replication ratios over replications whose no-reuse welfare is
/// positive. demand_prob = 0 yields status kNoDemand.
BoundReport mc_gain_multi_item(int I, int J, int K, double demand_prob, long replications,
                               std::uint64_t seed, double supply_prob = -1.0,
                               const McOptions& options = {});

/// One replication's market for mc_gain_multi_item.
Scenario multi_item_scenario(int I, int J, int K, double demand_prob, double supply_prob, Rng& rng,
                             const McOptions& options = {});

std::string bound_csv_header();
std::string bound_csv_row(const BoundReport& report);
std::string bound_report_to_json(const BoundReport& report);

}  // namespace crowdsense
