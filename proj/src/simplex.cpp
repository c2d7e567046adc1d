#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "efr/relax.hpp"

namespace efr {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kPivotTol = 1e-10;
constexpr double kCostTol = 1e-9;

using TableauMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Bounded-variable primal simplex on a dense tableau. All variables have
// lower bound zero; uppers may be infinite. The tableau stays B^{-1}A
// throughout; `beta` holds the current values of the basic variables.
class Tableau {
 public:
  Tableau(TableauMatrix tableau, Eigen::VectorXd beta, std::vector<int> basis,
          Eigen::VectorXd upper)
      : t_(std::move(tableau)),
        beta_(std::move(beta)),
        basis_(std::move(basis)),
        upper_(std::move(upper)),
        at_upper_(static_cast<size_t>(t_.cols()), 0),
        is_basic_(static_cast<size_t>(t_.cols()), 0) {
    for (int r = 0; r < rows(); ++r) is_basic_[basis_[r]] = 1;
  }

  int rows() const { return static_cast<int>(t_.rows()); }
  int cols() const { return static_cast<int>(t_.cols()); }
  int iterations() const { return iterations_; }
  const std::vector<int>& basis() const { return basis_; }

  void disable(int j) { upper_[j] = 0.0; }

  double variable_value(int j) const {
    if (is_basic_[j]) {
      for (int r = 0; r < rows(); ++r) {
        if (basis_[r] == j) return beta_[r];
      }
    }
    return at_upper_[j] ? upper_[j] : 0.0;
  }

  // Runs Bland-rule simplex for the given maximization objective.
  // Returns false when the problem is unbounded in an improving direction.
  bool maximize(const Eigen::VectorXd& cost) {
    Eigen::VectorXd zrow = reduced_costs(cost);
    const long max_iters = 20000 + 400L * (rows() + cols());
    for (long iter = 0; iter < max_iters; ++iter) {
      int enter = -1;
      int dir = 0;
      for (int j = 0; j < cols(); ++j) {
        if (is_basic_[j] || upper_[j] <= 0.0) continue;
        if (!at_upper_[j] && zrow[j] < -kCostTol) {
          enter = j;
          dir = +1;
          break;
        }
        if (at_upper_[j] && zrow[j] > kCostTol) {
          enter = j;
          dir = -1;
          break;
        }
      }
      if (enter < 0) return true;  // optimal

      // Ratio test: step t moves the entering variable by dir * t.
      double step = std::isfinite(upper_[enter]) ? upper_[enter] : kInf;
      int pivot_row = -1;
      bool leaves_at_upper = false;
      for (int r = 0; r < rows(); ++r) {
        const double a = dir * t_(r, enter);
        double limit;
        bool hits_upper;
        if (a > kPivotTol) {
          limit = std::max(beta_[r], 0.0) / a;
          hits_upper = false;
        } else if (a < -kPivotTol && std::isfinite(upper_[basis_[r]])) {
          limit = std::max(upper_[basis_[r]] - beta_[r], 0.0) / (-a);
          hits_upper = true;
        } else {
          continue;
        }
        if (limit < step - 1e-12 ||
            (limit < step + 1e-12 &&
             (pivot_row < 0 || basis_[r] < basis_[pivot_row]))) {
          step = limit;
          pivot_row = r;
          leaves_at_upper = hits_upper;
        }
      }
      if (!std::isfinite(step)) return false;  // unbounded

      ++iterations_;
      for (int r = 0; r < rows(); ++r) beta_[r] -= dir * step * t_(r, enter);

      if (pivot_row < 0) {
        at_upper_[enter] = !at_upper_[enter];  // bound flip
        continue;
      }

      const int leave = basis_[pivot_row];
      is_basic_[leave] = 0;
      at_upper_[leave] = leaves_at_upper;
      is_basic_[enter] = 1;
      at_upper_[enter] = false;
      basis_[pivot_row] = enter;
      beta_[pivot_row] = (dir > 0 ? 0.0 : upper_[enter]) + dir * step;

      eliminate(pivot_row, enter, zrow);
    }
    throw std::runtime_error("simplex iteration limit exceeded");
  }

  // Pivots a zero-valued basic variable out of row r if any usable column
  // exists; returns false for a redundant row.
  bool pivot_out(int r, int max_col) {
    for (int j = 0; j < max_col; ++j) {
      if (is_basic_[j] || upper_[j] <= 0.0) continue;
      if (std::abs(t_(r, j)) <= 1e-8) continue;
      const int leave = basis_[r];
      is_basic_[leave] = 0;
      at_upper_[leave] = false;
      is_basic_[j] = 1;
      basis_[r] = j;
      beta_[r] = at_upper_[j] ? upper_[j] : 0.0;
      at_upper_[j] = false;
      Eigen::VectorXd dummy = Eigen::VectorXd::Zero(cols());
      eliminate(r, j, dummy);
      return true;
    }
    return false;
  }

 private:
  Eigen::VectorXd reduced_costs(const Eigen::VectorXd& cost) const {
    Eigen::VectorXd zrow = -cost;
    for (int r = 0; r < rows(); ++r) {
      const double cb = cost[basis_[r]];
      if (cb != 0.0) zrow += cb * t_.row(r).transpose();
    }
    return zrow;
  }

  void eliminate(int pivot_row, int enter, Eigen::VectorXd& zrow) {
    t_.row(pivot_row) /= t_(pivot_row, enter);
    t_(pivot_row, enter) = 1.0;
    for (int r = 0; r < rows(); ++r) {
      if (r == pivot_row) continue;
      const double f = t_(r, enter);
      if (f != 0.0) {
        t_.row(r) -= f * t_.row(pivot_row);
        t_(r, enter) = 0.0;
      }
    }
    const double f = zrow[enter];
    if (f != 0.0) {
      zrow -= f * t_.row(pivot_row).transpose();
      zrow[enter] = 0.0;
    }
  }

  TableauMatrix t_;
  Eigen::VectorXd beta_;
  std::vector<int> basis_;
  Eigen::VectorXd upper_;
  std::vector<char> at_upper_;
  std::vector<char> is_basic_;
  int iterations_ = 0;
};

}  // namespace

void LinearProgram::add_row(const Eigen::VectorXd& coef, RowSense s, double b) {
  rows.conservativeResize(rows.rows() + 1, num_vars());
  rows.row(rows.rows() - 1) = coef.transpose();
  rhs.conservativeResize(rhs.size() + 1);
  rhs[rhs.size() - 1] = b;
  sense.push_back(s);
}

LpSolution lp_solve(const LinearProgram& lp) {
  const int n = lp.num_vars();
  const int m = lp.num_rows();
  if (lp.lower.size() && lp.lower.cwiseAbs().maxCoeff() > 0.0) {
    throw std::invalid_argument("lp_solve expects zero lower bounds");
  }

  // Layout: structural | one slack per Le/Ge row | one artificial per row
  // that needs it. Rows are sign-normalized so every right side is >= 0.
  std::vector<int> slack_col(m, -1), art_col(m, -1);
  int cols = n;
  for (int r = 0; r < m; ++r) {
    if (lp.sense[r] != RowSense::Eq) slack_col[r] = cols++;
  }
  std::vector<double> flip(m, 1.0);
  for (int r = 0; r < m; ++r) {
    double b = lp.rhs[r];
    RowSense s = lp.sense[r];
    if (b < 0.0) {
      flip[r] = -1.0;
      b = -b;
      if (s == RowSense::Le) s = RowSense::Ge;
      else if (s == RowSense::Ge) s = RowSense::Le;
    }
    // After normalization a Le row starts feasible with its slack basic;
    // everything else needs an artificial.
    const bool slack_basic = (s == RowSense::Le);
    if (!slack_basic) art_col[r] = cols++;
  }

  TableauMatrix t = TableauMatrix::Zero(m, cols);
  Eigen::VectorXd beta(m);
  Eigen::VectorXd upper = Eigen::VectorXd::Constant(cols, kInf);
  upper.head(n) = lp.upper;
  std::vector<int> basis(m, -1);
  for (int r = 0; r < m; ++r) {
    t.row(r).head(n) = flip[r] * lp.rows.row(r);
    beta[r] = flip[r] * lp.rhs[r];
    if (slack_col[r] >= 0) {
      // slack sign follows the original sense; normalization flips it
      t(r, slack_col[r]) = flip[r] * (lp.sense[r] == RowSense::Le ? 1.0 : -1.0);
    }
    if (art_col[r] >= 0) {
      t(r, art_col[r]) = 1.0;
      basis[r] = art_col[r];
    } else {
      basis[r] = slack_col[r];
    }
  }

  Tableau tab(std::move(t), std::move(beta), std::move(basis), std::move(upper));

  LpSolution out;
  const double scale = std::max(1.0, lp.rhs.size() ? lp.rhs.cwiseAbs().maxCoeff() : 0.0);

  // Phase 1: drive the artificials to zero.
  bool any_artificial = false;
  Eigen::VectorXd phase1 = Eigen::VectorXd::Zero(cols);
  for (int r = 0; r < m; ++r) {
    if (art_col[r] >= 0) {
      phase1[art_col[r]] = -1.0;
      any_artificial = true;
    }
  }
  int first_artificial = cols;
  for (int r = 0; r < m; ++r) {
    if (art_col[r] >= 0) first_artificial = std::min(first_artificial, art_col[r]);
  }
  if (any_artificial) {
    if (!tab.maximize(phase1)) {
      throw std::runtime_error("phase-1 objective reported unbounded");
    }
    double infeas = 0.0;
    for (int r = 0; r < m; ++r) {
      if (art_col[r] >= 0) infeas += tab.variable_value(art_col[r]);
    }
    if (infeas > 1e-9 * scale) {
      out.status = LpSolution::Status::Infeasible;
      for (int r = 0; r < m; ++r) {
        if (art_col[r] >= 0 && tab.variable_value(art_col[r]) > 1e-9 * scale) {
          out.infeasible_rows.push_back(r);
        }
      }
      out.iterations = tab.iterations();
      return out;
    }
    // Lock artificials at zero and pivot basic ones out where possible.
    for (int r = 0; r < m; ++r) {
      if (art_col[r] >= 0) tab.disable(art_col[r]);
    }
    for (int r = 0; r < m; ++r) {
      if (art_col[r] >= 0 && tab.basis()[r] == art_col[r]) tab.pivot_out(r, first_artificial);
    }
  }

  Eigen::VectorXd phase2 = Eigen::VectorXd::Zero(cols);
  phase2.head(n) = lp.objective;
  if (!tab.maximize(phase2)) {
    out.status = LpSolution::Status::Unbounded;
    out.iterations = tab.iterations();
    return out;
  }

  out.status = LpSolution::Status::Optimal;
  out.x.resize(n);
  for (int j = 0; j < n; ++j) out.x[j] = tab.variable_value(j);
  out.value = lp.objective.dot(out.x);
  out.iterations = tab.iterations();
  return out;
}

}  // namespace efr
