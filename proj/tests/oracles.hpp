#pragma once

// Test-only oracles and generators, deliberately independent of the solver
// implementations they cross-check.

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <vector>

#include "pcaddreach/mlp.hpp"
#include "pcaddreach/rng.hpp"
#include "pcaddreach/star.hpp"

namespace oracles {

struct VertexLpResult {
  bool feasible = false;
  double value = 0.0;
  Eigen::VectorXd argmax;
};

// Brute-force LP oracle: max c.x over {Ax <= b} by enumerating every n-subset
// of rows, solving the square active-set system, and keeping feasible vertices.
// Complete whenever the polytope is bounded (callers include box rows).
inline VertexLpResult vertex_lp_max(const Eigen::VectorXd& c, const Eigen::MatrixXd& A,
                                    const Eigen::VectorXd& b, double feas_tol = 1e-7) {
  const Eigen::Index n = c.size();
  const Eigen::Index m = A.rows();
  VertexLpResult best;
  if (m < n) return best;

  std::vector<Eigen::Index> pick(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) pick[static_cast<std::size_t>(i)] = i;
  while (true) {
    Eigen::MatrixXd active(n, n);
    Eigen::VectorXd rhs(n);
    for (Eigen::Index r = 0; r < n; ++r) {
      active.row(r) = A.row(pick[static_cast<std::size_t>(r)]);
      rhs(r) = b(pick[static_cast<std::size_t>(r)]);
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(active);
    if (lu.isInvertible()) {
      Eigen::VectorXd x = lu.solve(rhs);
      if (((A * x - b).array() <= feas_tol).all()) {
        const double v = c.dot(x);
        if (!best.feasible || v > best.value) {
          best.feasible = true;
          best.value = v;
          best.argmax = x;
        }
      }
    }
    Eigen::Index i = n - 1;
    while (i >= 0 && pick[static_cast<std::size_t>(i)] == m - n + i) --i;
    if (i < 0) break;
    ++pick[static_cast<std::size_t>(i)];
    for (Eigen::Index j = i + 1; j < n; ++j)
      pick[static_cast<std::size_t>(j)] = pick[static_cast<std::size_t>(j - 1)] + 1;
  }
  return best;
}

// Uniform rejection sample over the predicate {A mu <= b}: box each mu_j by LP
// once, then resample until feasible. Degenerate (point) predicates hit on the
// first draw because uniform(lo, lo) returns lo exactly.
inline std::optional<Eigen::VectorXd> sample_predicate(const pcaddreach::StarSetd& star,
                                                       pcaddreach::RandomStream& rng,
                                                       int max_tries = 20000) {
  const Eigen::Index m = star.num_generators();
  Eigen::VectorXd lo(m), hi(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const Eigen::VectorXd unit = Eigen::VectorXd::Unit(m, j);
    auto [l, h] = pcaddreach::detail::predicate_range<double>(star, unit, 0.0,
                                                              pcaddreach::kDefaultLpTol);
    lo(j) = l;
    hi(j) = h;
  }
  for (int t = 0; t < max_tries; ++t) {
    Eigen::VectorXd mu(m);
    for (Eigen::Index j = 0; j < m; ++j) mu(j) = rng.uniform(lo(j), hi(j));
    if (star.num_constraints() == 0 ||
        ((star.constraint_matrix * mu - star.constraint_rhs).array() <= 1e-12).all())
      return mu;
  }
  return std::nullopt;
}

inline std::optional<Eigen::VectorXd> sample_point(const pcaddreach::StarSetd& star,
                                                   pcaddreach::RandomStream& rng,
                                                   int max_tries = 20000) {
  auto mu = sample_predicate(star, rng, max_tries);
  if (!mu) return std::nullopt;
  return star.center + star.basis * *mu;
}

// Random dense ReLU net with identity normalizers.
inline pcaddreach::Mlpd random_net(const std::vector<Eigen::Index>& widths,
                                   pcaddreach::RandomStream& rng, double scale = 1.0) {
  pcaddreach::Mlpd net;
  net.layer_widths = widths;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    Eigen::MatrixXd w(widths[l + 1], widths[l]);
    Eigen::VectorXd bvec(widths[l + 1]);
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      for (Eigen::Index cc = 0; cc < w.cols(); ++cc) w(r, cc) = rng.uniform(-scale, scale);
      bvec(r) = rng.uniform(-0.5 * scale, 0.5 * scale);
    }
    net.weights.push_back(std::move(w));
    net.biases.push_back(std::move(bvec));
  }
  net.input_scaling = pcaddreach::identity_scaling<double>(widths.front());
  net.output_scaling = pcaddreach::identity_scaling<double>(widths.back());
  return net;
}

// Independent robust-rank oracle: smallest k >= 1 with k >= (L+1)^2 (delta+tau) / L,
// the (delta+tau) taken as the exact binary rational of the double sum. Uses a
// long-double guess refined by an exact integer predicate scan, a different
// route than the production ceil-division. nullopt when the rank exceeds L.
inline std::optional<long long> robust_rank_oracle(long long count, double delta, double tau) {
  const double x = delta + tau;
  int exponent = 0;
  const double mantissa = std::frexp(x, &exponent);
  const auto mant = static_cast<unsigned __int128>(std::ldexp(mantissa, 53));
  const int shift = 53 - exponent;  // x = mant / 2^shift, shift >= 52 whenever x < 2
  long long rank = 0;
  // numer <= (1e4+1)^2 * 2^53 < 2^81, so any denominator with shift >= 81 already
  // exceeds it (count <= 1e4 is the oracle's domain).
  if (shift >= 81 || mant == 0) {
    rank = 1;
  } else {
    const unsigned __int128 numer =
        static_cast<unsigned __int128>(count + 1) * static_cast<unsigned __int128>(count + 1) *
        mant;
    const unsigned __int128 denom = static_cast<unsigned __int128>(count)
                                    << static_cast<unsigned>(shift);
    const long double guess = (static_cast<long double>(count) + 1.0L) *
                              (1.0L + 1.0L / static_cast<long double>(count)) *
                              static_cast<long double>(x);
    long long k = std::max(1LL, static_cast<long long>(guess) - 4);
    while (static_cast<unsigned __int128>(k) * denom < numer) ++k;
    while (k > 1 && static_cast<unsigned __int128>(k - 1) * denom >= numer) --k;
    rank = k;
  }
  if (rank > count) return std::nullopt;
  return rank;
}

}  // namespace oracles
