#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "pcaddreach/mlp.hpp"
#include "pcaddreach/star.hpp"

namespace pcaddreach {

enum class ReachMode { Exact, Approx };

struct ReachSettings {
  ReachMode mode = ReachMode::Approx;
  std::size_t max_stars = 4096;
  BoundsMethod approx_bounds = BoundsMethod::Lp;
  double lp_tol = kDefaultLpTol;
};

struct ReachLimitError : std::runtime_error {
  explicit ReachLimitError(std::size_t limit)
      : std::runtime_error("exact reach exceeded " + std::to_string(limit) +
                           " stars; raise max_stars or use approx mode") {}
};

/// Exact ReLU image as a union of stars. Each dimension with a sign-straddling
/// range splits every star into its nonnegative and nonpositive halves; the
/// generator count never changes, only predicate rows accumulate.
template <typename Scalar>
std::vector<StarSet<Scalar>> relu_exact(const StarSet<Scalar>& input,
                                        const ReachSettings& settings = {}) {
  using Vector = typename StarSet<Scalar>::Vector;
  const Scalar tol(settings.lp_tol);
  std::vector<StarSet<Scalar>> stars{input};
  if (is_empty(input, tol)) return {};

  for (Eigen::Index i = 0; i < input.dim(); ++i) {
    std::vector<StarSet<Scalar>> next;
    next.reserve(stars.size());
    for (const auto& star : stars) {
      auto [lo, hi] = dimension_bounds(star, i, tol);
      if (lo >= Scalar(0)) {
        next.push_back(star);
        continue;
      }
      if (hi <= Scalar(0)) {
        StarSet<Scalar> zeroed = star;
        zeroed.basis.row(i).setZero();
        zeroed.center(i) = Scalar(0);
        next.push_back(std::move(zeroed));
        continue;
      }
      Vector row = star.basis.row(i).transpose();

      StarSet<Scalar> keep = star;  // restricted to x_i >= 0
      keep.constraint_matrix.conservativeResize(keep.constraint_matrix.rows() + 1,
                                                Eigen::NoChange);
      keep.constraint_matrix.row(keep.constraint_matrix.rows() - 1) = -row.transpose();
      keep.constraint_rhs.conservativeResize(keep.constraint_rhs.size() + 1);
      keep.constraint_rhs(keep.constraint_rhs.size() - 1) = star.center(i);
      if (!is_empty(keep, tol)) next.push_back(std::move(keep));

      StarSet<Scalar> zero = star;  // restricted to x_i <= 0, output clamped
      zero.constraint_matrix.conservativeResize(zero.constraint_matrix.rows() + 1,
                                                Eigen::NoChange);
      zero.constraint_matrix.row(zero.constraint_matrix.rows() - 1) = row.transpose();
      zero.constraint_rhs.conservativeResize(zero.constraint_rhs.size() + 1);
      zero.constraint_rhs(zero.constraint_rhs.size() - 1) = -star.center(i);
      zero.basis.row(i).setZero();
      zero.center(i) = Scalar(0);
      if (!is_empty(zero, tol)) next.push_back(std::move(zero));

      if (next.size() > settings.max_stars) throw ReachLimitError(settings.max_stars);
    }
    stars = std::move(next);
  }
  return stars;
}

/// List form: exact ReLU image of a union. Empty input lists pass through.
template <typename Scalar>
std::vector<StarSet<Scalar>> relu_exact(const std::vector<StarSet<Scalar>>& inputs,
                                        const ReachSettings& settings = {}) {
  std::vector<StarSet<Scalar>> out;
  for (const auto& star : inputs) {
    auto pieces = relu_exact(star, settings);
    if (out.size() + pieces.size() > settings.max_stars) throw ReachLimitError(settings.max_stars);
    for (auto& piece : pieces) out.push_back(std::move(piece));
  }
  return out;
}

/// Triangle over-approximation: one fresh generator per straddling dimension,
/// constrained by y >= 0, y >= x_i, y <= slope * (x_i - lo) with slope = hi/(hi-lo).
template <typename Scalar>
StarSet<Scalar> relu_approx(const StarSet<Scalar>& input, const ReachSettings& settings = {}) {
  const Scalar tol(settings.lp_tol);
  Box<Scalar> box = bounds(input, settings.approx_bounds, tol);

  StarSet<Scalar> out = input;
  for (Eigen::Index i = 0; i < input.dim(); ++i) {
    const Scalar lo = box.lower(i), hi = box.upper(i);
    if (lo >= Scalar(0)) continue;
    if (hi <= Scalar(0)) {
      out.basis.row(i).setZero();
      out.center(i) = Scalar(0);
      continue;
    }
    const Eigen::Index m = out.num_generators();
    const Eigen::Index r = out.num_constraints();
    const Scalar slope = hi / (hi - lo);

    out.basis.conservativeResize(Eigen::NoChange, m + 1);
    out.basis.col(m).setZero();
    out.constraint_matrix.conservativeResize(r + 3, m + 1);
    out.constraint_matrix.col(m).setZero();
    out.constraint_rhs.conservativeResize(r + 3);

    // y >= 0
    out.constraint_matrix.row(r).setZero();
    out.constraint_matrix(r, m) = Scalar(-1);
    out.constraint_rhs(r) = Scalar(0);
    // y >= x_i: x_i - y <= 0
    out.constraint_matrix.row(r + 1).head(m) = out.basis.row(i).head(m);
    out.constraint_matrix(r + 1, m) = Scalar(-1);
    out.constraint_rhs(r + 1) = -out.center(i);
    // y <= slope * (x_i - lo)
    out.constraint_matrix.row(r + 2).head(m) = -slope * out.basis.row(i).head(m);
    out.constraint_matrix(r + 2, m) = Scalar(1);
    out.constraint_rhs(r + 2) = slope * (out.center(i) - lo);

    out.basis.row(i).setZero();
    out.basis(i, m) = Scalar(1);
    out.center(i) = Scalar(0);
  }
  return out;
}

namespace detail {

template <typename Scalar>
StarSet<Scalar> apply_scaling(const StarSet<Scalar>& star, const AffineScaling<Scalar>& scaling) {
  using Matrix = typename StarSet<Scalar>::Matrix;
  Matrix diag = scaling.scale.asDiagonal();
  return affine_map(star, diag, scaling.offset);
}

}  // namespace detail

/// Image of a star under the full network: input scaling, affine layers with
/// ReLU on every hidden layer, then output scaling. Approx mode yields a
/// single star, exact mode a union.
template <typename Scalar>
std::vector<StarSet<Scalar>> network_reach(const Mlp<Scalar>& net, const StarSet<Scalar>& input,
                                           const ReachSettings& settings = {}) {
  if (input.dim() != net.input_dim())
    throw std::invalid_argument("network_reach: star dimension != network input");

  std::vector<StarSet<Scalar>> stars{detail::apply_scaling(input, net.input_scaling)};
  const std::size_t num_layers = net.weights.size();
  for (std::size_t l = 0; l < num_layers; ++l) {
    std::vector<StarSet<Scalar>> mapped;
    mapped.reserve(stars.size());
    for (const auto& star : stars) mapped.push_back(affine_map(star, net.weights[l], net.biases[l]));
    if (l + 1 == num_layers) {
      stars = std::move(mapped);
      break;
    }
    std::vector<StarSet<Scalar>> activated;
    for (const auto& star : mapped) {
      if (settings.mode == ReachMode::Exact) {
        auto pieces = relu_exact(star, settings);
        if (activated.size() + pieces.size() > settings.max_stars)
          throw ReachLimitError(settings.max_stars);
        for (auto& piece : pieces) activated.push_back(std::move(piece));
      } else {
        activated.push_back(relu_approx(star, settings));
      }
    }
    stars = std::move(activated);
  }
  for (auto& star : stars) star = detail::apply_scaling(star, net.output_scaling);
  return stars;
}

}  // namespace pcaddreach
