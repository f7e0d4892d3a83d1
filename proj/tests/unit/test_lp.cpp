#include <gtest/gtest.h>

#include <crowdsense/lp.hpp>
#include <crowdsense/rng.hpp>
#include <crowdsense/welfare.hpp>

#include "instances.hpp"
#include "oracles.hpp"

namespace cs = crowdsense;
namespace lp = crowdsense::lp;

TEST(Lp, SingleBoundedVariable) {
  lp::LinearProgram p;
  const int x = p.add_column(1.0, 0.0, 1.0);
  const int r = p.add_row(lp::RowSense::kLessEqual, 0.5);
  p.add_entry(r, x, 1.0);
  const lp::LpSolution s = lp::solve(p);
  ASSERT_EQ(s.status, lp::Status::kOptimal);
  EXPECT_NEAR(s.x[0], 0.5, 1e-12);
  EXPECT_NEAR(s.objective, 0.5, 1e-12);
  EXPECT_NEAR(s.duals[0], 1.0, 1e-12);
}

TEST(Lp, BoundConflictIsInfeasible) {
  lp::LinearProgram p;
  const int x = p.add_column(1.0, 0.0, 1.0);
  const int r = p.add_row(lp::RowSense::kGreaterEqual, 2.0);
  p.add_entry(r, x, 1.0);
  EXPECT_EQ(lp::solve(p).status, lp::Status::kInfeasible);
}

TEST(Lp, EqualityRowsAndMinimization) {
  // min x + 2y  s.t. x + y = 1, x - y >= -0.5, x,y in [0,1]
  lp::LinearProgram p;
  p.objective_sense = lp::Objective::kMinimize;
  const int x = p.add_column(1.0, 0.0, 1.0), y = p.add_column(2.0, 0.0, 1.0);
  const int r0 = p.add_row(lp::RowSense::kEqual, 1.0);
  const int r1 = p.add_row(lp::RowSense::kGreaterEqual, -0.5);
  p.add_entry(r0, x, 1.0);
  p.add_entry(r0, y, 1.0);
  p.add_entry(r1, x, 1.0);
  p.add_entry(r1, y, -1.0);
  const lp::LpSolution s = lp::solve(p);
  ASSERT_EQ(s.status, lp::Status::kOptimal);
  EXPECT_NEAR(s.objective, 1.0, 1e-9);
  EXPECT_NEAR(s.x[0], 1.0, 1e-9);
  EXPECT_NEAR(lp::dual_objective(p, s.duals), s.objective, 1e-9);
}

TEST(Lp, DuplicateEntriesAreSummed) {
  lp::LinearProgram p;
  const int x = p.add_column(1.0, 0.0, 10.0);
  const int r = p.add_row(lp::RowSense::kLessEqual, 3.0);
  p.add_entry(r, x, 1.0);
  p.add_entry(r, x, 2.0);
  EXPECT_NEAR(lp::solve(p).x[0], 1.0, 1e-12);
}

TEST(Lp, RejectsMalformedPrograms) {
  lp::LinearProgram p;
  p.add_column(1.0, 0.0, 1.0);
  p.add_row(lp::RowSense::kLessEqual, 1.0);
  p.add_entry(0, 3, 1.0);
  EXPECT_THROW(lp::solve(p), lp::LpError);
  lp::LinearProgram q;
  q.add_column(1.0, 1.0, 0.0);
  EXPECT_THROW(lp::solve(q), lp::LpError);
  lp::LinearProgram r;
  r.add_column(1.0, 0.0, std::numeric_limits<double>::infinity());
  EXPECT_THROW(lp::solve(r), lp::LpError);
}

TEST(Lp, NoRowsTakesBestBounds) {
  lp::LinearProgram p;
  p.add_column(2.0, -1.0, 3.0);
  p.add_column(-1.0, -2.0, 5.0);
  const lp::LpSolution s = lp::solve(p);
  EXPECT_EQ(s.x, (std::vector<double>{3.0, -2.0}));
  EXPECT_DOUBLE_EQ(s.objective, 8.0);
}

TEST(Lp, CyclicInstanceRelaxation) {
  const cs::Scenario sc = cs::testing::cyclic_example();
  const cs::P1Model m = cs::build_p1(cs::WelfareProblem::truthful(sc));
  const lp::LpSolution s = lp::solve(m.lp);
  ASSERT_EQ(s.status, lp::Status::kOptimal);
  EXPECT_NEAR(s.objective, 1.5, 1e-9);
  for (int c = 0; c < m.lp.num_cols(); ++c) {
    if (m.roles[c].kind == cs::ColumnRole::Kind::kUserAll) EXPECT_NEAR(s.x[c], 0.5, 1e-9);
    if (m.roles[c].kind == cs::ColumnRole::Kind::kTask) EXPECT_NEAR(s.x[c], 1.0, 1e-9);
  }
}

namespace {

lp::LinearProgram random_program(cs::Rng& rng, int n, int m) {
  lp::LinearProgram p;
  p.objective_sense = rng.bernoulli(0.5) ? lp::Objective::kMaximize : lp::Objective::kMinimize;
  for (int j = 0; j < n; ++j) {
    const double lo = std::round(rng.uniform(-2.0, 1.0));
    p.add_column(std::round(rng.uniform(-5.0, 5.0)), lo, lo + 1.0 + std::round(rng.uniform(0.0, 2.0)));
  }
  for (int r = 0; r < m; ++r) {
    const double u = rng.uniform();
    const lp::RowSense sense = u < 0.6 ? lp::RowSense::kLessEqual
                               : u < 0.85 ? lp::RowSense::kGreaterEqual
                                          : lp::RowSense::kEqual;
    p.add_row(sense, std::round(rng.uniform(-3.0, 3.0)));
    for (int j = 0; j < n; ++j) {
      if (rng.bernoulli(0.6)) p.add_entry(r, j, std::round(rng.uniform(-3.0, 3.0)));
    }
  }
  return p;
}

bool complementary(const lp::LinearProgram& p, const lp::LpSolution& s, double tol) {
  std::vector<double> ax(p.num_rows(), 0.0);
  for (const lp::Entry& e : p.entries) ax[e.row] += e.value * s.x[e.col];
  for (int r = 0; r < p.num_rows(); ++r) {
    if (std::abs(s.duals[r]) > tol && std::abs(ax[r] - p.rhs[r]) > tol) return false;
  }
  for (int j = 0; j < p.num_cols(); ++j) {
    const bool at_bound = std::abs(s.x[j] - p.lower[j]) <= tol || std::abs(s.x[j] - p.upper[j]) <= tol;
    if (std::abs(s.reduced_costs[j]) > tol && !at_bound) return false;
  }
  return true;
}

}  // namespace

TEST(Lp, MatchesVertexEnumerationAndStrongDuality) {
  cs::Rng rng(12345);
  int optimal = 0, infeasible = 0;
  for (int t = 0; t < 400; ++t) {
    const int n = 1 + static_cast<int>(rng.below(5));
    const int m = 1 + static_cast<int>(rng.below(5));
    const lp::LinearProgram p = random_program(rng, n, m);
    const lp::LpSolution s = lp::solve(p);
    const cs::testing::VertexResult ref = cs::testing::vertex_enumeration(p);
    ASSERT_EQ(s.status == lp::Status::kOptimal, ref.feasible) << "program " << t;
    if (!ref.feasible) {
      ++infeasible;
      continue;
    }
    ++optimal;
    EXPECT_NEAR(s.objective, ref.objective, 1e-7) << "program " << t;
    EXPECT_NEAR(lp::dual_objective(p, s.duals), s.objective, 1e-6) << "program " << t;
    EXPECT_TRUE(complementary(p, s, 1e-6)) << "program " << t;
  }
  EXPECT_GT(optimal, 100);
  EXPECT_GT(infeasible, 10);
}

TEST(Lp, ResolveIsIdentical) {
  cs::Rng rng(99);
  for (int t = 0; t < 50; ++t) {
    const lp::LinearProgram p = random_program(rng, 8, 6);
    const lp::LpSolution a = lp::solve(p), b = lp::solve(p);
    ASSERT_EQ(a.status, b.status);
    EXPECT_EQ(a.x, b.x);
    EXPECT_EQ(a.duals, b.duals);
    EXPECT_EQ(a.objective, b.objective);
  }
}

TEST(Lp, DegenerateProgramTerminates) {
  // Highly degenerate: many redundant rows through the same vertex.
  lp::LinearProgram p;
  const int n = 10;
  for (int j = 0; j < n; ++j) p.add_column(1.0, 0.0, 1.0);
  for (int r = 0; r < 40; ++r) {
    const int row = p.add_row(lp::RowSense::kLessEqual, 0.0);
    for (int j = 0; j < n; ++j) p.add_entry(row, j, ((r + j) % 3) - 1.0);
  }
  const lp::LpSolution s = lp::solve(p);
  ASSERT_EQ(s.status, lp::Status::kOptimal);
  EXPECT_NEAR(lp::dual_objective(p, s.duals), s.objective, 1e-6);
}

TEST(Lp, StatusNames) {
  EXPECT_EQ(lp::to_string(lp::Status::kOptimal), "optimal");
  EXPECT_EQ(lp::to_string(lp::Status::kInfeasible), "infeasible");
  EXPECT_EQ(lp::to_string(lp::Status::kUnbounded), "unbounded");
}
