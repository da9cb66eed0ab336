#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "pcaddreach/linprog.hpp"

namespace pcaddreach {

inline constexpr double kMembershipTol = 1e-7;

struct EmptySetError : std::runtime_error {
  EmptySetError() : std::runtime_error("star set predicate is infeasible") {}
};

template <typename Scalar>
struct Box {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  Vector lower;
  Vector upper;

  Eigen::Index dim() const { return lower.size(); }
};

/// Polytope { center + basis * mu : constraint_matrix * mu <= constraint_rhs }.
/// Values are immutable by convention; operations below return new sets.
template <typename Scalar>
struct StarSet {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Vector center;             // d
  Matrix basis;              // d x m
  Matrix constraint_matrix;  // rows x m
  Vector constraint_rhs;     // rows

  Eigen::Index dim() const { return center.size(); }
  Eigen::Index num_generators() const { return basis.cols(); }
  Eigen::Index num_constraints() const { return constraint_matrix.rows(); }
};

enum class BoundsMethod { Lp, Interval };

template <typename Scalar>
StarSet<Scalar> from_box(const Box<Scalar>& box) {
  using Matrix = typename StarSet<Scalar>::Matrix;
  const Eigen::Index d = box.dim();
  if (d == 0) throw std::invalid_argument("from_box: empty box");
  if (((box.upper - box.lower).array() < Scalar(0)).any())
    throw std::invalid_argument("from_box: lower exceeds upper");

  StarSet<Scalar> star;
  star.center = (box.lower + box.upper) / Scalar(2);
  star.basis = Matrix::Identity(d, d);
  star.constraint_matrix.resize(2 * d, d);
  star.constraint_matrix << Matrix::Identity(d, d), -Matrix::Identity(d, d);
  typename StarSet<Scalar>::Vector half = (box.upper - box.lower) / Scalar(2);
  star.constraint_rhs.resize(2 * d);
  star.constraint_rhs << half, half;
  return star;
}

/// Image { W x + u : x in star }; the predicate is untouched.
template <typename Scalar, typename DerivedW, typename DerivedU>
StarSet<Scalar> affine_map(const StarSet<Scalar>& star, const Eigen::MatrixBase<DerivedW>& linear,
                           const Eigen::MatrixBase<DerivedU>& offset) {
  if (linear.cols() != star.dim())
    throw std::invalid_argument("affine_map: matrix columns != star dimension");
  if (offset.size() != linear.rows())
    throw std::invalid_argument("affine_map: offset length != matrix rows");
  StarSet<Scalar> out;
  out.center = linear * star.center + offset;
  out.basis = linear * star.basis;
  out.constraint_matrix = star.constraint_matrix;
  out.constraint_rhs = star.constraint_rhs;
  return out;
}

/// Exact Minkowski sum: generators are concatenated, predicates conjoined.
template <typename Scalar>
StarSet<Scalar> minkowski_sum(const StarSet<Scalar>& a, const StarSet<Scalar>& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("minkowski_sum: dimension mismatch");
  using Matrix = typename StarSet<Scalar>::Matrix;
  const Eigen::Index ma = a.num_generators(), mb = b.num_generators();
  const Eigen::Index ra = a.num_constraints(), rb = b.num_constraints();

  StarSet<Scalar> out;
  out.center = a.center + b.center;
  out.basis.resize(a.dim(), ma + mb);
  out.basis << a.basis, b.basis;
  out.constraint_matrix = Matrix::Zero(ra + rb, ma + mb);
  out.constraint_matrix.topLeftCorner(ra, ma) = a.constraint_matrix;
  out.constraint_matrix.bottomRightCorner(rb, mb) = b.constraint_matrix;
  out.constraint_rhs.resize(ra + rb);
  out.constraint_rhs << a.constraint_rhs, b.constraint_rhs;
  return out;
}

/// Cartesian stacking: centers stacked, bases block-diagonal, predicates conjoined.
template <typename Scalar>
StarSet<Scalar> concatenate(const std::vector<StarSet<Scalar>>& parts) {
  if (parts.empty()) throw std::invalid_argument("concatenate: empty list");
  using Matrix = typename StarSet<Scalar>::Matrix;
  Eigen::Index d = 0, m = 0, rows = 0;
  for (const auto& part : parts) {
    d += part.dim();
    m += part.num_generators();
    rows += part.num_constraints();
  }
  StarSet<Scalar> out;
  out.center.resize(d);
  out.basis = Matrix::Zero(d, m);
  out.constraint_matrix = Matrix::Zero(rows, m);
  out.constraint_rhs.resize(rows);
  Eigen::Index at_d = 0, at_m = 0, at_r = 0;
  for (const auto& part : parts) {
    out.center.segment(at_d, part.dim()) = part.center;
    out.basis.block(at_d, at_m, part.dim(), part.num_generators()) = part.basis;
    out.constraint_matrix.block(at_r, at_m, part.num_constraints(), part.num_generators()) =
        part.constraint_matrix;
    out.constraint_rhs.segment(at_r, part.num_constraints()) = part.constraint_rhs;
    at_d += part.dim();
    at_m += part.num_generators();
    at_r += part.num_constraints();
  }
  return out;
}

template <typename Scalar>
bool is_empty(const StarSet<Scalar>& star, Scalar tol = Scalar(kDefaultLpTol)) {
  return !feasible<Scalar>(star.constraint_matrix, star.constraint_rhs, tol);
}

namespace detail {

// Exact range of (direction . mu) over the predicate, plus base offset.
template <typename Scalar>
std::pair<Scalar, Scalar> predicate_range(const StarSet<Scalar>& star,
                                          const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& direction,
                                          Scalar base, Scalar tol) {
  LinearProgram<Scalar> lp;
  lp.objective = direction;
  lp.constraint_matrix = star.constraint_matrix;
  lp.constraint_rhs = star.constraint_rhs;

  lp.maximize = false;
  auto lo = solve(lp, tol);
  if (lo.status == LpStatus::Infeasible) throw EmptySetError();
  if (lo.status == LpStatus::Unbounded)
    throw std::runtime_error("bounds: star is unbounded along requested direction");
  lp.maximize = true;
  auto hi = solve(lp, tol);
  if (hi.status == LpStatus::Unbounded)
    throw std::runtime_error("bounds: star is unbounded along requested direction");
  return {base + lo.optimal_value, base + hi.optimal_value};
}

}  // namespace detail

/// Range of the i-th output dimension.
template <typename Scalar>
std::pair<Scalar, Scalar> dimension_bounds(const StarSet<Scalar>& star, Eigen::Index i,
                                           Scalar tol = Scalar(kDefaultLpTol)) {
  return detail::predicate_range<Scalar>(star, star.basis.row(i).transpose(), star.center(i), tol);
}

/// Axis-aligned bounding box. Lp is exact per dimension; Interval derives each
/// generator range once and outer-approximates, so it always contains the Lp box.
template <typename Scalar>
Box<Scalar> bounds(const StarSet<Scalar>& star, BoundsMethod method = BoundsMethod::Lp,
                   Scalar tol = Scalar(kDefaultLpTol)) {
  const Eigen::Index d = star.dim();
  Box<Scalar> box;
  box.lower.resize(d);
  box.upper.resize(d);
  if (method == BoundsMethod::Lp) {
    for (Eigen::Index i = 0; i < d; ++i) {
      auto [lo, hi] = dimension_bounds(star, i, tol);
      box.lower(i) = lo;
      box.upper(i) = hi;
    }
    return box;
  }
  const Eigen::Index m = star.num_generators();
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> gen_lo(m), gen_hi(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> unit =
        Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Unit(m, j);
    auto [lo, hi] = detail::predicate_range<Scalar>(star, unit, Scalar(0), tol);
    gen_lo(j) = lo;
    gen_hi(j) = hi;
  }
  for (Eigen::Index i = 0; i < d; ++i) {
    Scalar lo = star.center(i), hi = star.center(i);
    for (Eigen::Index j = 0; j < m; ++j) {
      Scalar v = star.basis(i, j);
      lo += std::min(v * gen_lo(j), v * gen_hi(j));
      hi += std::max(v * gen_lo(j), v * gen_hi(j));
    }
    box.lower(i) = lo;
    box.upper(i) = hi;
  }
  return box;
}

/// Optional cleanup: drop predicate rows that can never bind, judged by
/// interval evaluation of each row over the per-generator LP ranges. Sound
/// (membership unchanged) but not complete.
template <typename Scalar>
StarSet<Scalar> reduce_constraints(const StarSet<Scalar>& star,
                                   Scalar tol = Scalar(kDefaultLpTol)) {
  const Eigen::Index m = star.num_generators();
  const Eigen::Index r = star.num_constraints();
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> gen_lo(m), gen_hi(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    auto [lo, hi] = detail::predicate_range<Scalar>(
        star, Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Unit(m, j), Scalar(0), tol);
    gen_lo(j) = lo;
    gen_hi(j) = hi;
  }
  std::vector<Eigen::Index> kept;
  for (Eigen::Index i = 0; i < r; ++i) {
    Scalar worst = Scalar(0);
    for (Eigen::Index j = 0; j < m; ++j) {
      Scalar v = star.constraint_matrix(i, j);
      worst += std::max(v * gen_lo(j), v * gen_hi(j));
    }
    // rows active anywhere on the bounding box must stay: they carry the dual
    // certificates that keep the generator ranges intact
    const Scalar margin = tol * std::max(Scalar(1), std::abs(star.constraint_rhs(i)));
    if (worst > star.constraint_rhs(i) - margin) kept.push_back(i);
  }
  StarSet<Scalar> out;
  out.center = star.center;
  out.basis = star.basis;
  out.constraint_matrix.resize(static_cast<Eigen::Index>(kept.size()), m);
  out.constraint_rhs.resize(static_cast<Eigen::Index>(kept.size()));
  for (std::size_t i = 0; i < kept.size(); ++i) {
    out.constraint_matrix.row(static_cast<Eigen::Index>(i)) = star.constraint_matrix.row(kept[i]);
    out.constraint_rhs(static_cast<Eigen::Index>(i)) = star.constraint_rhs(kept[i]);
  }
  return out;
}

/// Membership test: feasibility of basis*mu = x - center (split into paired
/// inequalities) conjoined with the predicate, slackened by membership_tol.
template <typename Scalar, typename Derived>
bool contains(const StarSet<Scalar>& star, const Eigen::MatrixBase<Derived>& point,
              Scalar membership_tol = Scalar(kMembershipTol),
              Scalar tol = Scalar(kDefaultLpTol)) {
  if (point.size() != star.dim()) throw std::invalid_argument("contains: point dimension mismatch");
  using Matrix = typename StarSet<Scalar>::Matrix;
  using Vector = typename StarSet<Scalar>::Vector;
  const Eigen::Index d = star.dim(), m = star.num_generators(), r = star.num_constraints();
  Vector target = point.derived() - star.center;
  Matrix a(2 * d + r, m);
  a << star.basis, -star.basis, star.constraint_matrix;
  Vector b(2 * d + r);
  b << target, -target, star.constraint_rhs;
  b.array() += membership_tol;
  return feasible<Scalar>(a, b, tol);
}

using Boxd = Box<double>;
using StarSetd = StarSet<double>;

}  // namespace pcaddreach
