#pragma once

// Two-sided auctions: VCG on the binary program, VCG on its LP relaxation,
// the randomized decomposition auction built on the latter, and its
// reserve-price variant.
//
// All mechanisms work with data reuse. Payments p_i go from the platform to
// users, charges q_j from task owners to the platform.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "crowdsense/market.hpp"
#include "crowdsense/rng.hpp"
#include "crowdsense/welfare.hpp"

namespace crowdsense {

class DegeneratePolicyError : public std::runtime_error {
 public:
  DegeneratePolicyError(int task, const std::string& what) : std::runtime_error(what), task_(task) {}
  int task() const { return task_; }

 private:
  int task_;
};

class PaymentDegeneracyError : public std::runtime_error {
 public:
  PaymentDegeneracyError(int user, const std::string& what) : std::runtime_error(what), user_(user) {}
  int user() const { return user_; }

 private:
  int user_;
};

struct AuctionOutcome {
  std::string mechanism;  // "vcg", "fvcg", "rand", "reserve"
  Allocation allocation;  // integer, fractional, or one sampled realization
  std::vector<double> payments;  // realized p_i
  std::vector<double> charges;   // realized q_j
  std::vector<double> expected_payments;
  std::vector<double> expected_charges;
  double alpha = 1.0;
  double beta = 1.0;
  double welfare = 0.0;           // true-type welfare of `allocation`
  double expected_welfare = 0.0;  // true-type welfare in expectation
  double reported_welfare = 0.0;  // objective on the (reduced) bids
  std::vector<double> user_utilities;  // true types, realized
  std::vector<double> task_utilities;
  std::vector<double> expected_user_utilities;
  std::vector<double> expected_task_utilities;
  std::vector<bool> withdrawn;  // reserve auction only
  std::uint64_t seed = 0;

  double profit() const;
  double expected_profit() const;
};

/// x* and z* of the fractional optimum turned into independent sampling
/// units, plus the thinning that equalizes every task's selection scaling.
struct RandomizedPolicy {
  const Scenario* scenario = nullptr;
  Bids bids;
  Allocation fractional;  // x*, z*
  std::vector<bool> included_tasks;  // false for withdrawn tasks
  std::vector<double> coverage_probability;  // P(all of K_j covered)
  std::vector<double> coverage_stderr;       // 0 when computed exactly
  std::vector<double> beta_j;                // coverage_probability / z*_j, 0 if z*_j = 0
  std::vector<double> accept;                // beta / beta_j, 0 if z*_j = 0
  std::vector<bool> exact;
  double alpha = 1.0;
  double beta = 1.0;

  bool deterministic() const;
};

struct PolicyOptions {
  int exact_item_limit = 20;     // exact coverage DP over 2^|K_j| masks up to this size
  long monte_carlo_samples = 100000;
  std::uint64_t monte_carlo_seed = 0x5eed;
  bool force_monte_carlo = false;
};

RandomizedPolicy build_policy(const Scenario& scenario, const Bids& bids,
                              const PolicyOptions& options = {});
/// Policy from an already computed fractional allocation (reuse mode).
RandomizedPolicy build_policy(const Scenario& scenario, const Bids& bids, const Allocation& fractional,
                              const std::vector<bool>& included_tasks, const PolicyOptions& options = {});

/// One integer allocation drawn from the policy. Users are drawn in index
/// order, then one acceptance coin per task with z*_j > 0.
Allocation sample_realization(const RandomizedPolicy& policy, Rng& rng);

struct WeightedAllocation {
  double probability = 0.0;
  Allocation allocation;
};

/// Every realization with its probability. Throws std::invalid_argument when
/// there would be more than `limit` of them.
std::vector<WeightedAllocation> enumerate_realizations(const RandomizedPolicy& policy,
                                                       long limit = 1L << 20);

AuctionOutcome vcg(const Scenario& scenario, const Bids& bids);
AuctionOutcome fractional_vcg(const Scenario& scenario, const Bids& bids);
AuctionOutcome randomized_auction(const Scenario& scenario, const Bids& bids, std::uint64_t seed,
                                  const PolicyOptions& options = {});
/// sigma has one reserve price per item.
AuctionOutcome reserve_price_auction(const Scenario& scenario, const Bids& bids,
                                     const std::vector<double>& sigma, std::uint64_t seed,
                                     const PolicyOptions& options = {});

/// Payments for one realization of `policy`, given the fractional VCG
/// transfers it was built from. `reserve` holds the per-task minimum charges
/// (empty for none).
struct RealizedTransfers {
  std::vector<double> payments;
  std::vector<double> charges;
};
RealizedTransfers realization_transfers(const RandomizedPolicy& policy, const Allocation& realization,
                                        const std::vector<double>& fractional_payments,
                                        const std::vector<double>& fractional_charges,
                                        const std::vector<double>& reserve = {});

/// Sum over K_j of sigma_k.
std::vector<double> minimum_charges(const Scenario& scenario, const std::vector<double>& sigma);

struct BudgetReport {
  double total_charges = 0.0;
  double total_payments = 0.0;
  double profit = 0.0;
  bool balanced = true;  // profit >= -1e-9
};

enum class BudgetBasis { kRealized, kExpected };
BudgetReport budget_report(const AuctionOutcome& outcome, BudgetBasis basis = BudgetBasis::kRealized);

std::string outcome_to_json(const Scenario& scenario, const AuctionOutcome& outcome);

}  // namespace crowdsense
