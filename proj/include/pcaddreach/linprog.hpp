#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <stdexcept>
#include <vector>

namespace pcaddreach {

inline constexpr double kDefaultLpTol = 1e-9;

enum class LpStatus { Optimal, Infeasible, Unbounded };

/// maximize/minimize objective . x subject to constraint_matrix * x <= constraint_rhs,
/// variables unrestricted in sign.
template <typename Scalar>
struct LinearProgram {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Vector objective;
  Matrix constraint_matrix;
  Vector constraint_rhs;
  bool maximize = true;
};

template <typename Scalar>
struct LpResult {
  LpStatus status = LpStatus::Infeasible;
  Scalar optimal_value = Scalar(0);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> optimizer;
};

namespace detail {

// Dense tableau for phase 1 / phase 2 pivoting. Columns are laid out as
// [x+ (m) | x- (m) | slack (rows) | artificial (n_art) | rhs]; the last row
// holds the reduced costs with -objective_value in its rhs cell.
template <typename Scalar>
class SimplexTableau {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  SimplexTableau(const Matrix& a, const Vector& b, Scalar tol)
      : tol_(tol), rows_(static_cast<int>(a.rows())), m_(static_cast<int>(a.cols())) {
    std::vector<int> needs_artificial;
    for (int i = 0; i < rows_; ++i)
      if (b(i) < Scalar(0)) needs_artificial.push_back(i);
    n_art_ = static_cast<int>(needs_artificial.size());
    cols_ = 2 * m_ + rows_ + n_art_;
    tableau_ = Matrix::Zero(rows_ + 1, cols_ + 1);
    basis_.assign(rows_, -1);

    int art = 0;
    for (int i = 0; i < rows_; ++i) {
      Scalar sign = b(i) < Scalar(0) ? Scalar(-1) : Scalar(1);
      tableau_.row(i).segment(0, m_) = sign * a.row(i);
      tableau_.row(i).segment(m_, m_) = -sign * a.row(i);
      tableau_(i, 2 * m_ + i) = sign;  // slack
      tableau_(i, cols_) = sign * b(i);
      if (sign < Scalar(0)) {
        tableau_(i, 2 * m_ + rows_ + art) = Scalar(1);
        basis_[i] = 2 * m_ + rows_ + art;
        ++art;
      } else {
        basis_[i] = 2 * m_ + i;
      }
    }
  }

  bool needs_phase1() const { return n_art_ > 0; }

  // Runs phase 1; returns false when the constraints are infeasible.
  bool phase1() {
    Vector costs = Vector::Zero(cols_);
    costs.segment(2 * m_ + rows_, n_art_).setConstant(Scalar(-1));
    load_costs(costs);
    run(/*allow_artificial=*/true);
    Scalar attained = -tableau_(rows_, cols_);
    Scalar feas_tol = tol_ * std::max<Scalar>(Scalar(1), rhs_scale());
    if (attained < -feas_tol) return false;
    drive_out_artificials();
    return true;
  }

  // Runs phase 2 for the split objective; returns false when unbounded.
  bool phase2(const Vector& objective) {
    Vector costs = Vector::Zero(cols_);
    costs.segment(0, m_) = objective;
    costs.segment(m_, m_) = -objective;
    load_costs(costs);
    return run(/*allow_artificial=*/false);
  }

  Scalar objective_value() const { return -tableau_(rows_, cols_); }

  Vector solution() const {
    Vector split = Vector::Zero(cols_);
    for (int i = 0; i < rows_; ++i) split(basis_[i]) = tableau_(i, cols_);
    return split.segment(0, m_) - split.segment(m_, m_);
  }

 private:
  Scalar rhs_scale() const {
    return rows_ == 0 ? Scalar(0) : tableau_.col(cols_).head(rows_).cwiseAbs().maxCoeff();
  }

  void load_costs(const Vector& costs) {
    tableau_.row(rows_).setZero();
    tableau_.row(rows_).segment(0, cols_) = costs.transpose();
    for (int i = 0; i < rows_; ++i) {
      Scalar basic_cost = costs(basis_[i]);
      if (basic_cost != Scalar(0)) tableau_.row(rows_) -= basic_cost * tableau_.row(i);
    }
  }

  void pivot(int pivot_row, int pivot_col) {
    tableau_.row(pivot_row) /= tableau_(pivot_row, pivot_col);
    for (int r = 0; r <= rows_; ++r) {
      if (r == pivot_row) continue;
      Scalar factor = tableau_(r, pivot_col);
      if (factor != Scalar(0)) tableau_.row(r) -= factor * tableau_.row(pivot_row);
    }
    basis_[pivot_row] = pivot_col;
  }

  // Bland's rule on both the entering and leaving choice; terminates without
  // cycling.
  bool run(bool allow_artificial) {
    const long max_iterations = 4000 + 200L * (rows_ + cols_);
    int usable_cols = allow_artificial ? cols_ : 2 * m_ + rows_;
    for (long iter = 0; iter < max_iterations; ++iter) {
      int entering = -1;
      for (int j = 0; j < usable_cols; ++j) {
        if (tableau_(rows_, j) > tol_) {
          entering = j;
          break;
        }
      }
      if (entering < 0) return true;  // optimal

      int leaving = -1;
      Scalar best_ratio = Scalar(0);
      for (int i = 0; i < rows_; ++i) {
        Scalar den = tableau_(i, entering);
        if (den <= tol_) continue;
        Scalar ratio = tableau_(i, cols_) / den;
        if (leaving < 0 || ratio < best_ratio - tol_ ||
            (ratio < best_ratio + tol_ && basis_[i] < basis_[leaving])) {
          leaving = i;
          best_ratio = ratio;
        }
      }
      if (leaving < 0) return false;  // unbounded direction
      pivot(leaving, entering);
    }
    throw std::runtime_error("simplex iteration limit exceeded");
  }

  // After a feasible phase 1, replace basic artificials by real columns; a row
  // with no eligible column is redundant and keeps its artificial at zero.
  void drive_out_artificials() {
    int first_artificial = 2 * m_ + rows_;
    for (int i = 0; i < rows_; ++i) {
      if (basis_[i] < first_artificial) continue;
      for (int j = 0; j < first_artificial; ++j) {
        if (std::abs(tableau_(i, j)) > tol_) {
          pivot(i, j);
          break;
        }
      }
    }
  }

  Scalar tol_;
  int rows_;
  int m_;
  int n_art_ = 0;
  int cols_ = 0;
  Matrix tableau_;
  std::vector<int> basis_;
};

}  // namespace detail

/// Exact optimum of a dense LP over free variables. Infeasible and Unbounded
/// are reported through the result status, never thrown.
template <typename Scalar>
LpResult<Scalar> solve(const LinearProgram<Scalar>& lp, Scalar tol = Scalar(kDefaultLpTol)) {
  if (lp.constraint_matrix.rows() != lp.constraint_rhs.size())
    throw std::invalid_argument("linprog: constraint matrix rows != rhs length");
  if (lp.objective.size() != lp.constraint_matrix.cols())
    throw std::invalid_argument("linprog: objective length != constraint matrix columns");

  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  LpResult<Scalar> result;
  const int m = static_cast<int>(lp.objective.size());

  if (lp.constraint_matrix.rows() == 0) {
    if (lp.objective.isZero(Scalar(0))) {
      result.status = LpStatus::Optimal;
      result.optimal_value = Scalar(0);
      result.optimizer = Vector::Zero(m);
    } else {
      result.status = LpStatus::Unbounded;
    }
    return result;
  }

  Vector objective = lp.maximize ? lp.objective : Vector(-lp.objective);
  detail::SimplexTableau<Scalar> tableau(lp.constraint_matrix, lp.constraint_rhs, tol);
  if (tableau.needs_phase1() && !tableau.phase1()) {
    result.status = LpStatus::Infeasible;
    return result;
  }
  if (!tableau.phase2(objective)) {
    result.status = LpStatus::Unbounded;
    return result;
  }
  result.status = LpStatus::Optimal;
  result.optimal_value = lp.maximize ? tableau.objective_value() : -tableau.objective_value();
  result.optimizer = tableau.solution();
  return result;
}

/// Feasibility of constraint_matrix * x <= constraint_rhs over free variables.
template <typename Scalar>
bool feasible(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& constraint_matrix,
              const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& constraint_rhs,
              Scalar tol = Scalar(kDefaultLpTol)) {
  if (constraint_matrix.rows() == 0) return true;
  detail::SimplexTableau<Scalar> tableau(constraint_matrix, constraint_rhs, tol);
  return !tableau.needs_phase1() || tableau.phase1();
}

using LinearProgramd = LinearProgram<double>;
using LpResultd = LpResult<double>;

}  // namespace pcaddreach
