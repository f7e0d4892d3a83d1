#include <gtest/gtest.h>

#include <cmath>
#include <crowdsense/mechanisms.hpp>

#include "instances.hpp"
#include "truthfulness.hpp"

namespace cs = crowdsense;
using cs::testing::Mechanism;

TEST(Vcg, FourTaskExample) {
  const cs::Scenario sc = cs::testing::four_task_example();
  const cs::AuctionOutcome o = cs::vcg(sc, cs::Bids::truthful(sc));
  EXPECT_NEAR(o.payments[0], 0.2, 1e-9);
  EXPECT_NEAR(o.payments[1], 0.0, 1e-9);
  for (double q : o.charges) EXPECT_NEAR(q, 0.0, 1e-9);
  EXPECT_NEAR(o.welfare, 2.5, 1e-9);
  EXPECT_NEAR(o.profit(), -0.2, 1e-9);
  const cs::BudgetReport b = cs::budget_report(o);
  EXPECT_FALSE(b.balanced);
  EXPECT_NEAR(b.profit, -0.2, 1e-9);
}

TEST(Vcg, SingleTaskSingleUser) {
  const cs::Scenario sc({{1, {}}}, {{1, {0}, 1.0}}, {{1, {0}, cs::CostOracle::additive(0.3)}});
  const cs::AuctionOutcome o = cs::vcg(sc, cs::Bids::truthful(sc));
  EXPECT_NEAR(o.payments[0], 1.0, 1e-12);  // the whole surplus plus cost
  EXPECT_NEAR(o.charges[0], 0.3, 1e-12);
  EXPECT_GE(o.user_utilities[0], 0.0);
  EXPECT_GE(o.task_utilities[0], 0.0);
}

TEST(FractionalVcg, MatchesVcgWhenIntegral) {
  const cs::Scenario sc = cs::testing::four_task_example();
  const cs::AuctionOutcome v = cs::vcg(sc, cs::Bids::truthful(sc));
  const cs::AuctionOutcome f = cs::fractional_vcg(sc, cs::Bids::truthful(sc));
  for (int i = 0; i < 2; ++i) EXPECT_NEAR(v.payments[i], f.payments[i], 1e-9);
  for (int j = 0; j < 4; ++j) EXPECT_NEAR(v.charges[j], f.charges[j], 1e-9);
}

TEST(FractionalVcg, NoProfitableTrade) {
  const cs::Scenario sc({{1, {}}}, {{1, {0}, 0.1}, {2, {0}, 0.2}},
                        {{1, {0}, cs::CostOracle::additive(0.5)}});
  const cs::AuctionOutcome f = cs::fractional_vcg(sc, cs::Bids::truthful(sc));
  EXPECT_EQ(f.payments, std::vector<double>{0.0});
  EXPECT_EQ(f.charges, (std::vector<double>{0.0, 0.0}));
  EXPECT_EQ(f.welfare, 0.0);
  EXPECT_TRUE(cs::budget_report(f).balanced);
  EXPECT_EQ(cs::budget_report(f).profit, 0.0);
}

TEST(FractionalVcg, CyclicInstance) {
  const cs::Scenario sc = cs::testing::cyclic_example();
  const cs::AuctionOutcome f = cs::fractional_vcg(sc, cs::Bids::truthful(sc));
  EXPECT_NEAR(f.reported_welfare, 1.5, 1e-9);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(f.allocation.x[i].subsets[0].weight, 0.5, 1e-9);
}

TEST(Policy, IntegralOptimumIsDeterministic) {
  const cs::Scenario sc = cs::testing::four_task_example();
  const cs::RandomizedPolicy p = cs::build_policy(sc, cs::Bids::truthful(sc));
  EXPECT_TRUE(p.deterministic());
  EXPECT_EQ(p.beta, 1.0);
  for (double b : p.beta_j) EXPECT_EQ(b, 1.0);
  cs::Rng rng(3);
  const cs::WelfareSolution opt = cs::solve_integer(cs::WelfareProblem::truthful(sc));
  for (int t = 0; t < 20; ++t) {
    const cs::Allocation a = cs::sample_realization(p, rng);
    EXPECT_EQ(a.z, opt.allocation.z);
    EXPECT_EQ(a.x[0].subsets[0].items, opt.allocation.x[0].subsets[0].items);
  }
}

TEST(Policy, CyclicInstanceCoverageIsOneHalf) {
  const cs::Scenario sc = cs::testing::cyclic_example();
  const cs::RandomizedPolicy p = cs::build_policy(sc, cs::Bids::truthful(sc));
  EXPECT_NEAR(p.coverage_probability[0], 0.5, 1e-12);
  EXPECT_NEAR(p.beta_j[0], 0.5, 1e-12);
  EXPECT_NEAR(p.beta, 0.5, 1e-12);
  EXPECT_TRUE(p.exact[0]);
  const auto all = cs::enumerate_realizations(p);
  EXPECT_EQ(all.size(), 8u);
  double covered = 0.0;
  for (const auto& r : all) covered += r.probability * r.allocation.z[0];
  EXPECT_NEAR(covered, 0.5, 1e-15);
}

TEST(Policy, MonteCarloAgreesWithExactCoverage) {
  const cs::Scenario sc = cs::testing::cyclic_example();
  cs::PolicyOptions o;
  o.force_monte_carlo = true;
  const cs::RandomizedPolicy p = cs::build_policy(sc, cs::Bids::truthful(sc), o);
  EXPECT_FALSE(p.exact[0]);
  EXPECT_GT(p.coverage_stderr[0], 0.0);
  EXPECT_NEAR(p.coverage_probability[0], 0.5, 3 * p.coverage_stderr[0] + 1e-12);
}

TEST(Policy, DecompositionIdentitiesHoldExactly) {
  cs::Rng rng(17);
  cs::testing::RandomSpec spec;
  spec.allow_additive = true;
  int checked = 0;
  while (checked < 40) {
    const cs::Scenario sc = cs::testing::random_scenario(rng, spec);
    cs::RandomizedPolicy p;
    try {
      p = cs::build_policy(sc, cs::Bids::truthful(sc));
    } catch (const cs::DegeneratePolicyError&) {
      continue;
    }
    ++checked;
    const auto all = cs::enumerate_realizations(p);
    double mass = 0.0;
    std::vector<double> z(sc.num_tasks(), 0.0);
    std::vector<std::vector<double>> yki(sc.num_users(), std::vector<double>(sc.num_items(), 0.0));
    for (const auto& r : all) {
      mass += r.probability;
      for (int j = 0; j < sc.num_tasks(); ++j) z[j] += r.probability * r.allocation.z[j];
      for (int i = 0; i < sc.num_users(); ++i) {
        for (int k = 0; k < sc.num_items(); ++k) yki[i][k] += r.probability * r.allocation.y_ki[i][k];
      }
      EXPECT_TRUE(cs::validate(sc, r.allocation).empty());
    }
    EXPECT_NEAR(mass, 1.0, 1e-12);
    for (int j = 0; j < sc.num_tasks(); ++j) EXPECT_NEAR(z[j], p.beta * p.fractional.z[j], 1e-12);
    for (int i = 0; i < sc.num_users(); ++i) {
      for (int k = 0; k < sc.num_items(); ++k) EXPECT_NEAR(yki[i][k], p.fractional.y_ki[i][k], 1e-12);
    }
  }
}

TEST(Policy, SampledMeansConcentrate) {
  const cs::Scenario sc = cs::testing::cyclic_example();
  const cs::RandomizedPolicy p = cs::build_policy(sc, cs::Bids::truthful(sc));
  cs::Rng rng(101);
  const int N = 100000;
  double z = 0.0, x0 = 0.0;
  for (int t = 0; t < N; ++t) {
    const cs::Allocation a = cs::sample_realization(p, rng);
    z += a.z[0];
    x0 += a.x[0].subsets[0].items.empty() ? 0.0 : 1.0;
  }
  const double se = std::sqrt(0.25 / N);
  EXPECT_NEAR(z / N, 0.5, 3 * se);
  EXPECT_NEAR(x0 / N, 0.5, 3 * se);
}

TEST(Randomized, IdleUserIsNeverPaid) {
  std::vector<cs::User> users = {{1, {0}, cs::CostOracle::single_minded(0.2)},
                                 {2, {0}, cs::CostOracle::single_minded(5.0)}};
  const cs::Scenario sc({{1, {}}}, {{1, {0}, 1.0}}, users);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const cs::AuctionOutcome o = cs::randomized_auction(sc, cs::Bids::truthful(sc), s);
    EXPECT_EQ(o.payments[1], 0.0);
  }
}

TEST(Randomized, ExpectedPaymentMatchesFractionalVcg) {
  const cs::Scenario sc = cs::testing::cyclic_example(4.0);
  const cs::AuctionOutcome f = cs::fractional_vcg(sc, cs::Bids::truthful(sc));
  const int N = 100000;
  std::vector<double> sum(3, 0.0), sq(3, 0.0);
  double charge = 0.0;
  const cs::RandomizedPolicy pol = cs::build_policy(sc, cs::Bids::truthful(sc));
  cs::Rng rng(9);
  for (int t = 0; t < N; ++t) {
    const cs::Allocation a = cs::sample_realization(pol, rng);
    const cs::RealizedTransfers tr = cs::realization_transfers(pol, a, f.payments, f.charges);
    for (int i = 0; i < 3; ++i) {
      sum[i] += tr.payments[i];
      sq[i] += tr.payments[i] * tr.payments[i];
    }
    charge += tr.charges[0];
  }
  for (int i = 0; i < 3; ++i) {
    const double mean = sum[i] / N;
    const double se = std::sqrt((sq[i] / N - mean * mean) / N);
    EXPECT_NEAR(mean, f.payments[i], 3 * se + 1e-12);
  }
  EXPECT_GT(f.charges[0], 0.0);
  const double se_q = f.charges[0] / pol.fractional.z[0] * std::sqrt(pol.beta * (1 - pol.beta) / N);
  EXPECT_NEAR(charge / N, pol.beta * f.charges[0], 3 * se_q);
}

TEST(Randomized, IndividuallyRationalPerRealization) {
  cs::Rng rng(55);
  int runs = 0;
  while (runs < 300) {
    const cs::Scenario sc = cs::testing::random_scenario(rng);
    try {
      const cs::AuctionOutcome o = cs::randomized_auction(sc, cs::Bids::truthful(sc), rng.next());
      for (double u : o.user_utilities) EXPECT_GE(u, -1e-9);
      for (double u : o.task_utilities) EXPECT_GE(u, -1e-9);
      EXPECT_TRUE(cs::validate(sc, o.allocation).empty());
      ++runs;
    } catch (const cs::DegeneratePolicyError&) {
    }
  }
}

TEST(Randomized, ReproducibleFromSeed) {
  const cs::Scenario sc = cs::testing::cyclic_example();
  const cs::AuctionOutcome a = cs::randomized_auction(sc, cs::Bids::truthful(sc), 42);
  const cs::AuctionOutcome b = cs::randomized_auction(sc, cs::Bids::truthful(sc), 42);
  EXPECT_EQ(cs::outcome_to_json(sc, a), cs::outcome_to_json(sc, b));
}

TEST(Randomized, ExpectedWelfareIsBetaValueMinusCost) {
  const cs::Scenario sc = cs::testing::cyclic_example(4.0);
  const cs::AuctionOutcome o = cs::randomized_auction(sc, cs::Bids::truthful(sc), 1);
  EXPECT_NEAR(o.beta, 0.5, 1e-12);
  EXPECT_NEAR(o.expected_welfare, 0.5 * 4.0 - 1.5, 1e-12);
  // direct Monte Carlo welfare
  double w = 0.0;
  const int N = 40000;
  for (int s = 0; s < N; ++s) w += cs::randomized_auction(sc, cs::Bids::truthful(sc), 1000 + s).welfare;
  // welfare per draw is in {-2, 2, 1, -3...}; sd < 3
  EXPECT_NEAR(w / N, o.expected_welfare, 3 * 3.0 / std::sqrt(N));
}

TEST(Reserve, ZeroReserveMatchesRandomized) {
  const cs::Scenario sc = cs::testing::cyclic_example(4.0);
  for (std::uint64_t s = 0; s < 10; ++s) {
    const cs::AuctionOutcome a = cs::randomized_auction(sc, cs::Bids::truthful(sc), s);
    const cs::AuctionOutcome b = cs::reserve_price_auction(sc, cs::Bids::truthful(sc), {0, 0, 0}, s);
    EXPECT_EQ(a.allocation.z, b.allocation.z);
    EXPECT_EQ(a.payments, b.payments);
    EXPECT_EQ(a.charges, b.charges);
  }
}

TEST(Reserve, FourTaskExampleTurnsAProfit) {
  const cs::Scenario sc = cs::testing::four_task_example();
  const cs::AuctionOutcome o = cs::reserve_price_auction(sc, cs::Bids::truthful(sc), {0.3}, 7);
  for (bool w : o.withdrawn) EXPECT_FALSE(w);
  EXPECT_NEAR(o.payments[0], 0.2, 1e-9);
  for (double q : o.charges) EXPECT_NEAR(q, 0.3, 1e-9);
  EXPECT_NEAR(o.expected_profit(), 1.0, 1e-9);
  EXPECT_TRUE(cs::budget_report(o, cs::BudgetBasis::kExpected).balanced);
}

TEST(Reserve, HighReserveWithdrawsEverything) {
  const cs::Scenario sc = cs::testing::four_task_example();
  const cs::AuctionOutcome o = cs::reserve_price_auction(sc, cs::Bids::truthful(sc), {10.0}, 7);
  for (bool w : o.withdrawn) EXPECT_TRUE(w);
  EXPECT_EQ(o.welfare, 0.0);
  EXPECT_EQ(o.profit(), 0.0);
}

TEST(Reserve, WelfareNeverExceedsUnreservedOptimum) {
  cs::Rng rng(8);
  for (int t = 0; t < 60; ++t) {
    const cs::Scenario sc = cs::testing::random_scenario(rng);
    std::vector<double> sigma(sc.num_items());
    for (double& s : sigma) s = rng.uniform(0.0, 0.5);
    try {
      const cs::AuctionOutcome r = cs::reserve_price_auction(sc, cs::Bids::truthful(sc), sigma, 3);
      const cs::AuctionOutcome f = cs::fractional_vcg(sc, cs::Bids::truthful(sc));
      EXPECT_LE(r.expected_welfare, f.welfare + 1e-9);
    } catch (const cs::DegeneratePolicyError&) {
    }
  }
}

TEST(Reserve, RejectsBadSigma) {
  const cs::Scenario sc = cs::testing::four_task_example();
  EXPECT_THROW(cs::reserve_price_auction(sc, cs::Bids::truthful(sc), {-0.1}, 1), cs::ScenarioError);
  EXPECT_THROW(cs::reserve_price_auction(sc, cs::Bids::truthful(sc), {0.1, 0.2}, 1), cs::ScenarioError);
}

TEST(Truthfulness, VcgSmallSuite) {
  const auto st = cs::testing::deviation_suite(Mechanism::kVcg, 25, 1, {}, 2);
  EXPECT_EQ(st.violations, 0) << st.worst;
}

TEST(Truthfulness, FractionalVcgSmallSuite) {
  const auto st = cs::testing::deviation_suite(Mechanism::kFractionalVcg, 25, 2, {}, 2);
  EXPECT_EQ(st.violations, 0) << st.worst;
}

TEST(Truthfulness, RandomizedUsersSmallSuite) {
  // Users only: their expected utility equals the fractional VCG utility.
  cs::Rng rng(3);
  int n = 0;
  while (n < 20) {
    const cs::Scenario sc = cs::testing::random_scenario(rng);
    cs::testing::Utilities base;
    try {
      base = cs::testing::expected_utilities(Mechanism::kRandomized, sc, cs::Bids::truthful(sc));
    } catch (const std::runtime_error&) {
      continue;
    }
    const cs::AuctionOutcome f = cs::fractional_vcg(sc, cs::Bids::truthful(sc));
    for (int i = 0; i < sc.num_users(); ++i) EXPECT_NEAR(base.users[i], f.expected_user_utilities[i], 1e-9);
    ++n;
  }
}

TEST(Json, OutcomeHasContractFields) {
  const cs::Scenario sc = cs::testing::four_task_example();
  const std::string j = cs::outcome_to_json(sc, cs::vcg(sc, cs::Bids::truthful(sc)));
  for (const char* key : {"\"mechanism\"", "\"alpha\"", "\"beta\"", "\"payments\"", "\"charges\"",
                          "\"profit\"", "\"welfare\"", "\"seed\""}) {
    EXPECT_NE(j.find(key), std::string::npos) << key;
  }
}
