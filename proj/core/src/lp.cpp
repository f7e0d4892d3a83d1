#include "crowdsense/lp.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace crowdsense::lp {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

std::string to_string(Status status) {
  switch (status) {
    case Status::kOptimal: return "optimal";
    case Status::kInfeasible: return "infeasible";
    case Status::kUnbounded: return "unbounded";
  }
  return "unknown";
}

int LinearProgram::add_column(double cost, double lo, double hi) {
  objective.push_back(cost);
  lower.push_back(lo);
  upper.push_back(hi);
  return num_cols() - 1;
}

int LinearProgram::add_row(RowSense sense, double rhs_value) {
  row_sense.push_back(sense);
  rhs.push_back(rhs_value);
  return num_rows() - 1;
}

void LinearProgram::add_entry(int row, int col, double value) { entries.push_back({row, col, value}); }

void LinearProgram::check() const {
  const int n = num_cols(), m = num_rows();
  if (static_cast<int>(lower.size()) != n || static_cast<int>(upper.size()) != n) {
    throw LpError("bounds do not match the number of columns");
  }
  if (static_cast<int>(row_sense.size()) != m) throw LpError("row senses do not match the rows");
  for (int j = 0; j < n; ++j) {
    if (!std::isfinite(objective[j])) throw LpError("objective coefficient is not finite");
    if (!std::isfinite(lower[j]) || !std::isfinite(upper[j])) {
      throw LpError("column " + std::to_string(j) + " has an infinite bound");
    }
    if (lower[j] > upper[j]) throw LpError("column " + std::to_string(j) + " has lo > hi");
  }
  for (double b : rhs) {
    if (!std::isfinite(b)) throw LpError("right-hand side is not finite");
  }
  for (const Entry& e : entries) {
    if (e.row < 0 || e.row >= m || e.col < 0 || e.col >= n) {
      throw LpError("matrix entry outside the program's dimensions");
    }
    if (!std::isfinite(e.value)) throw LpError("matrix entry is not finite");
  }
}

namespace {

struct SparseColumn {
  std::vector<std::pair<int, double>> nz;
};

class Simplex {
 public:
  Simplex(const LinearProgram& lp, const SolverOptions& opt) : lp_(lp), opt_(opt) {
    n_ = lp.num_cols();
    m_ = lp.num_rows();
    columns_.resize(n_);
    {
      // Merge duplicate triplets.
      std::vector<std::vector<std::pair<int, double>>> raw(n_);
      for (const Entry& e : lp.entries) raw[e.col].push_back({e.row, e.value});
      for (int j = 0; j < n_; ++j) {
        auto& r = raw[j];
        std::sort(r.begin(), r.end(), [](auto& a, auto& b) { return a.first < b.first; });
        for (auto& [row, v] : r) {
          if (!columns_[j].nz.empty() && columns_[j].nz.back().first == row) {
            columns_[j].nz.back().second += v;
          } else {
            columns_[j].nz.push_back({row, v});
          }
        }
      }
    }
    const double sign = lp.objective_sense == Objective::kMaximize ? -1.0 : 1.0;
    for (int j = 0; j < n_; ++j) {
      cost_.push_back(sign * lp.objective[j]);
      lo_.push_back(lp.lower[j]);
      hi_.push_back(lp.upper[j]);
    }
    for (int i = 0; i < m_; ++i) {
      SparseColumn s;
      s.nz.push_back({i, 1.0});
      columns_.push_back(std::move(s));
      cost_.push_back(0.0);
      switch (lp.row_sense[i]) {
        case RowSense::kLessEqual: lo_.push_back(0.0); hi_.push_back(kInf); break;
        case RowSense::kGreaterEqual: lo_.push_back(-kInf); hi_.push_back(0.0); break;
        case RowSense::kEqual: lo_.push_back(0.0); hi_.push_back(0.0); break;
      }
    }
    max_iter_ = opt.max_iterations > 0 ? opt.max_iterations : 100 * (m_ + n_) + 1000;
  }

  LpSolution run() {
    LpSolution sol;
    const int total_structural = n_ + m_;
    value_.assign(total_structural, 0.0);
    at_upper_.assign(total_structural, false);
    basic_row_.assign(total_structural, -1);
    for (int j = 0; j < n_; ++j) value_[j] = lo_[j];

    // residual r = b - A x_N for the initial slack basis
    std::vector<double> r(lp_.rhs.begin(), lp_.rhs.end());
    for (int j = 0; j < n_; ++j) {
      for (auto [row, v] : columns_[j].nz) r[row] -= v * value_[j];
    }
    basis_.assign(m_, -1);
    std::vector<int> artificials;
    for (int i = 0; i < m_; ++i) {
      const int s = n_ + i;
      const double lo = lo_[s], hi = hi_[s];
      if (r[i] >= lo - opt_.feasibility_tolerance && r[i] <= hi + opt_.feasibility_tolerance) {
        basis_[i] = s;
        basic_row_[s] = i;
        value_[s] = r[i];
      } else {
        // slack rests at 0 (its only finite bound on the violated side)
        value_[s] = 0.0;
        at_upper_[s] = (hi == 0.0 && r[i] > 0.0) ? true : false;
        if (lo_[s] == 0.0 && hi_[s] == 0.0) at_upper_[s] = false;
        const double sgn = r[i] > 0.0 ? 1.0 : -1.0;
        SparseColumn a;
        a.nz.push_back({i, sgn});
        columns_.push_back(std::move(a));
        cost_.push_back(0.0);
        lo_.push_back(0.0);
        hi_.push_back(kInf);
        const int col = static_cast<int>(columns_.size()) - 1;
        value_.push_back(std::abs(r[i]));
        at_upper_.push_back(false);
        basic_row_.push_back(i);
        basis_[i] = col;
        artificials.push_back(col);
      }
    }
    refactor();

    int iterations = 0;
    if (!artificials.empty()) {
      std::vector<double> phase1(columns_.size(), 0.0);
      for (int a : artificials) phase1[a] = 1.0;
      const Status st = iterate(phase1, iterations);
      (void)st;  // phase 1 is bounded below by zero
      double infeas = 0.0;
      for (int a : artificials) infeas += value_[a];
      if (infeas > opt_.feasibility_tolerance * std::max(1.0, static_cast<double>(m_))) {
        sol.status = Status::kInfeasible;
        sol.iterations = iterations;
        return sol;
      }
      for (int a : artificials) {
        hi_[a] = 0.0;
        if (basic_row_[a] < 0) value_[a] = 0.0;
      }
    }
    std::vector<double> phase2(cost_.begin(), cost_.end());
    const Status st = iterate(phase2, iterations);
    sol.iterations = iterations;
    if (st == Status::kUnbounded) {
      sol.status = Status::kUnbounded;
      return sol;
    }

    sol.status = Status::kOptimal;
    sol.x.assign(value_.begin(), value_.begin() + n_);
    for (int j = 0; j < n_; ++j) sol.x[j] = std::clamp(sol.x[j], lo_[j], hi_[j]);
    sol.objective = 0.0;
    for (int j = 0; j < n_; ++j) sol.objective += lp_.objective[j] * sol.x[j];

    const std::vector<double> pi = duals(phase2);
    const double sign = lp_.objective_sense == Objective::kMaximize ? -1.0 : 1.0;
    sol.duals.resize(m_);
    for (int i = 0; i < m_; ++i) sol.duals[i] = sign * pi[i];
    sol.reduced_costs.resize(n_);
    for (int j = 0; j < n_; ++j) {
      double d = lp_.objective[j];
      for (auto [row, v] : columns_[j].nz) d -= v * sol.duals[row];
      sol.reduced_costs[j] = d;
    }
    return sol;
  }

 private:
  void refactor() {
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(m_, m_);
    for (int i = 0; i < m_; ++i) {
      for (auto [row, v] : columns_[basis_[i]].nz) B(row, i) = v;
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(B);
    binv_ = lu.inverse();
    since_refactor_ = 0;
    // x_B = B^{-1} (b - N x_N)
    Eigen::VectorXd rhs(m_);
    for (int i = 0; i < m_; ++i) rhs(i) = lp_.rhs[i];
    for (std::size_t j = 0; j < columns_.size(); ++j) {
      if (basic_row_[j] >= 0) continue;
      if (value_[j] == 0.0) continue;
      for (auto [row, v] : columns_[j].nz) rhs(row) -= v * value_[j];
    }
    const Eigen::VectorXd xb = binv_ * rhs;
    for (int i = 0; i < m_; ++i) value_[basis_[i]] = xb(i);
  }

  std::vector<double> duals(const std::vector<double>& cost) const {
    Eigen::VectorXd cb(m_);
    for (int i = 0; i < m_; ++i) cb(i) = cost[basis_[i]];
    const Eigen::VectorXd pi = binv_.transpose() * cb;
    return std::vector<double>(pi.data(), pi.data() + m_);
  }

  double reduced_cost(int j, const std::vector<double>& cost, const std::vector<double>& pi) const {
    double d = cost[j];
    for (auto [row, v] : columns_[j].nz) d -= v * pi[row];
    return d;
  }

  Status iterate(const std::vector<double>& cost, int& iterations) {
    const int ncols = static_cast<int>(columns_.size());
    const long degenerate_limit = 3L * (m_ + n_);
    long degenerate_run = 0;
    bool bland = false;
    Eigen::VectorXd w(m_);

    while (true) {
      if (iterations >= max_iter_) throw std::runtime_error("simplex iteration limit reached");
      const std::vector<double> pi = duals(cost);

      int enter = -1;
      double best = 0.0, enter_d = 0.0;
      for (int j = 0; j < ncols; ++j) {
        if (basic_row_[j] >= 0 || lo_[j] == hi_[j]) continue;
        const double d = reduced_cost(j, cost, pi);
        const bool improves = at_upper_[j] ? d > opt_.optimality_tolerance
                                           : d < -opt_.optimality_tolerance;
        if (!improves) continue;
        if (bland) {
          enter = j;
          enter_d = d;
          break;
        }
        if (std::abs(d) > best) {
          best = std::abs(d);
          enter = j;
          enter_d = d;
        }
      }
      if (enter < 0) {
        if (since_refactor_ > 0) {
          refactor();
          continue;
        }
        return Status::kOptimal;
      }
      (void)enter_d;

      w.setZero();
      for (auto [row, v] : columns_[enter].nz) w += binv_.col(row) * v;
      const double dir = at_upper_[enter] ? -1.0 : 1.0;

      // Ratio test. Basic i moves by -dir * w_i per unit step.
      double step = hi_[enter] - lo_[enter];
      int leave_row = -1;
      bool leave_to_upper = false;
      double leave_pivot = 0.0;
      for (int i = 0; i < m_; ++i) {
        const double delta = -dir * w(i);
        if (std::abs(delta) <= opt_.pivot_tolerance) continue;
        const int b = basis_[i];
        double limit;
        bool to_upper;
        if (delta < 0.0) {
          if (!std::isfinite(lo_[b])) continue;
          limit = (value_[b] - lo_[b]) / -delta;
          to_upper = false;
        } else {
          if (!std::isfinite(hi_[b])) continue;
          limit = (hi_[b] - value_[b]) / delta;
          to_upper = true;
        }
        limit = std::max(limit, 0.0);
        // A tie with the bound flip keeps the flip.
        bool take = limit < step - 1e-12;
        if (!take && leave_row >= 0 && std::abs(limit - step) <= 1e-12) {
          take = bland ? basis_[i] < basis_[leave_row]
                       : std::abs(w(i)) > std::abs(leave_pivot);
        }
        if (take) {
          step = limit;
          leave_row = i;
          leave_to_upper = to_upper;
          leave_pivot = w(i);
        }
      }
      if (!std::isfinite(step)) return Status::kUnbounded;

      ++iterations;
      degenerate_run = step <= 1e-12 ? degenerate_run + 1 : 0;
      if (degenerate_run > degenerate_limit) bland = true;

      for (int i = 0; i < m_; ++i) value_[basis_[i]] -= step * dir * w(i);
      if (leave_row < 0) {
        // bound flip, basis unchanged
        at_upper_[enter] = !at_upper_[enter];
        value_[enter] = at_upper_[enter] ? hi_[enter] : lo_[enter];
        continue;
      }
      const int leave = basis_[leave_row];
      value_[enter] += dir * step;
      value_[leave] = leave_to_upper ? hi_[leave] : lo_[leave];
      at_upper_[leave] = leave_to_upper;
      basic_row_[leave] = -1;
      basis_[leave_row] = enter;
      basic_row_[enter] = leave_row;
      at_upper_[enter] = false;

      // Gauss-Jordan update of the dense inverse on the pivot row.
      const double piv = w(leave_row);
      binv_.row(leave_row) /= piv;
      for (int i = 0; i < m_; ++i) {
        if (i == leave_row || w(i) == 0.0) continue;
        binv_.row(i) -= w(i) * binv_.row(leave_row);
      }
      if (++since_refactor_ >= opt_.refactor_interval) refactor();
    }
  }

  const LinearProgram& lp_;
  SolverOptions opt_;
  int n_ = 0, m_ = 0, max_iter_ = 0;
  std::vector<SparseColumn> columns_;
  std::vector<double> cost_, lo_, hi_;
  std::vector<double> value_;
  std::vector<bool> at_upper_;
  std::vector<int> basic_row_;
  std::vector<int> basis_;
  Eigen::MatrixXd binv_;
  int since_refactor_ = 0;
};

}  // namespace

LpSolution solve(const LinearProgram& lp, const SolverOptions& options) {
  lp.check();
  if (lp.num_rows() == 0) {
    // Box-constrained: each variable sits at its better bound.
    LpSolution sol;
    sol.status = Status::kOptimal;
    const bool maximize = lp.objective_sense == Objective::kMaximize;
    for (int j = 0; j < lp.num_cols(); ++j) {
      const double c = lp.objective[j];
      const bool high = maximize ? c > 0.0 : c < 0.0;
      sol.x.push_back(high ? lp.upper[j] : lp.lower[j]);
      sol.objective += c * sol.x.back();
    }
    sol.reduced_costs = lp.objective;
    return sol;
  }
  return Simplex(lp, options).run();
}

double dual_objective(const LinearProgram& lp, const std::vector<double>& duals) {
  const bool maximize = lp.objective_sense == Objective::kMaximize;
  double g = 0.0;
  for (int i = 0; i < lp.num_rows(); ++i) g += lp.rhs[i] * duals[i];
  std::vector<double> r(lp.objective.begin(), lp.objective.end());
  for (const Entry& e : lp.entries) r[e.col] -= e.value * duals[e.row];
  for (int j = 0; j < lp.num_cols(); ++j) {
    const double a = r[j] * lp.lower[j], b = r[j] * lp.upper[j];
    g += maximize ? std::max(a, b) : std::min(a, b);
  }
  return g;
}

}  // namespace crowdsense::lp
