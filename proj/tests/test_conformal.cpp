#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "pcaddreach/conformal.hpp"
#include "pcaddreach/rng.hpp"

using namespace pcaddreach;

namespace {

// Synthetic errors drawn from a fixed Gaussian, shaped like a one-segment plan.
std::vector<PredictionError> gaussian_errors(int count, const Eigen::MatrixXd& factor,
                                             const Eigen::VectorXd& mean, RandomStream& rng) {
  std::vector<PredictionError> out;
  out.reserve(static_cast<std::size_t>(count));
  const Eigen::Index d = mean.size();
  for (int i = 0; i < count; ++i) {
    Eigen::VectorXd z(factor.cols());
    for (Eigen::Index j = 0; j < z.size(); ++j) z(j) = rng.normal();
    PredictionError pe;
    pe.segments = {mean + factor * z};
    (void)d;
    out.push_back(std::move(pe));
  }
  return out;
}

}  // namespace

TEST_CASE("robust rank pinned values") {
  CHECK(robust_rank(99, 0.9, 0.05) == 96);
  CHECK(robust_rank(19, 0.9, 0.0) == 19);
  CHECK(robust_rank(1000, 0.9, 0.0) == 902);
  CHECK(robust_rank(1000, 0.9, 0.09) == 992);

  // 0.9 as a double sits just above 9/10, so (10)(10/9)(0.9) exceeds 10 by a
  // few ulps and the exact ceiling is 11 > 9: infeasible, in agreement with
  // the oracle.
  CHECK_FALSE(oracles::robust_rank_oracle(9, 0.9, 0.0).has_value());
  CHECK_THROWS_AS(robust_rank(9, 0.9, 0.0), InfeasibleCalibrationError);
  // Dyadic delta 225/256: (16)(16/15)(225/256) = 15 exactly; a sloppy
  // float ceiling would round the product up to 16 and reject it.
  CHECK(robust_rank(15, 0.87890625, 0.0) == 15);
}

TEST_CASE("robust rank rejects bad inputs") {
  CHECK_THROWS_AS(robust_rank(0, 0.9, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(robust_rank(10, 0.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(robust_rank(10, 1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(robust_rank(10, 0.5, -0.1), std::invalid_argument);
}

TEST_CASE("infeasible calibration reports the needed sample count") {
  // delta + tau < 1: more samples eventually help.
  try {
    robust_rank(10, 0.9, 0.05);
    FAIL("expected InfeasibleCalibrationError");
  } catch (const InfeasibleCalibrationError& e) {
    CHECK(e.required_rank == 12);  // ceil(121 * 0.95 / 10)
    CHECK(e.samples == 10);
    REQUIRE(e.min_feasible_samples.has_value());
    // The reported minimum must itself be feasible, and one less must not be.
    const std::size_t need = *e.min_feasible_samples;
    CHECK_NOTHROW(robust_rank(need, 0.9, 0.05));
    CHECK_THROWS_AS(robust_rank(need - 1, 0.9, 0.05), InfeasibleCalibrationError);
  }

  // delta + tau >= 1: no sample count can ever satisfy the rank bound.
  try {
    robust_rank(10, 0.95, 0.1);
    FAIL("expected InfeasibleCalibrationError");
  } catch (const InfeasibleCalibrationError& e) {
    CHECK(e.required_rank == 13);
    CHECK(e.samples == 10);
    CHECK_FALSE(e.min_feasible_samples.has_value());
  }

  CHECK(min_calibration_size(0.9, 0.05).has_value());
  CHECK_FALSE(min_calibration_size(0.95, 0.1).has_value());
  CHECK_FALSE(min_calibration_size(0.9, 0.15).has_value());
}

TEST_CASE("robust rank equals independent oracle on random tuples") {
  RandomStream rng(314159);
  int feasible_seen = 0, infeasible_seen = 0;
  for (int t = 0; t < 2000; ++t) {
    const auto count = static_cast<std::size_t>(rng.uniform(1.0, 10000.0));
    const double delta = rng.uniform(0.001, 0.999);
    const double tau = rng.uniform(0.0, 0.2);
    auto want = oracles::robust_rank_oracle(static_cast<long long>(count), delta, tau);
    if (want) {
      CHECK(robust_rank(count, delta, tau) == static_cast<std::size_t>(*want));
      ++feasible_seen;
    } else {
      CHECK_THROWS_AS(robust_rank(count, delta, tau), InfeasibleCalibrationError);
      ++infeasible_seen;
    }
  }
  CHECK(feasible_seen > 1000);
  CHECK(infeasible_seen > 20);
}

TEST_CASE("rank is monotone in delta and tau, and symmetric in their sum") {
  CHECK(robust_rank(500, 0.9, 0.02) >= robust_rank(500, 0.85, 0.02));
  CHECK(robust_rank(500, 0.9, 0.05) >= robust_rank(500, 0.9, 0.01));
  CHECK(robust_rank(500, 0.9, 0.05) == robust_rank(500, 0.05, 0.9));
}

TEST_CASE("calibrate picks the rank-th smallest residual") {
  std::vector<double> residuals;
  for (int i = 100; i >= 1; --i) residuals.push_back(static_cast<double>(i));
  auto result = calibrate(residuals, 0.9, 0.0);
  CHECK(result.sample_count == 100);
  CHECK(result.rank == 92);
  CHECK(result.quantile == 92.0);
  CHECK(std::is_sorted(result.sorted_residuals.begin(), result.sorted_residuals.end()));

  CHECK_THROWS_AS(calibrate({1.0, std::nan("")}, 0.9, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(calibrate({}, 0.9, 0.0), std::invalid_argument);
}

TEST_CASE("prediction errors subtract surrogate from truth") {
  auto plan = make_plan(4, {2, 2});
  Trajectory traj;
  traj.initial_state = Eigen::Vector2d(1.0, -1.0);
  traj.states.resize(2, 4);
  traj.states << 1, 2, 3, 4, -1, -2, -3, -4;

  // Zero-weight nets with bias = truth give zero error.
  std::vector<Mlpd> nets;
  for (std::size_t a = 0; a < 2; ++a) {
    Mlpd net;
    net.layer_widths = {2, 4};
    net.weights = {Eigen::MatrixXd::Zero(4, 2)};
    Eigen::VectorXd bias(4);
    const Eigen::Index off = 2 * static_cast<Eigen::Index>(a);
    bias << traj.states(0, off), traj.states(1, off), traj.states(0, off + 1),
        traj.states(1, off + 1);
    net.biases = {bias};
    net.input_scaling = identity_scaling<double>(2);
    net.output_scaling = identity_scaling<double>(4);
    nets.push_back(std::move(net));
  }
  auto pe = prediction_errors(traj, nets, plan);
  REQUIRE(pe.segments.size() == 2);
  CHECK(pe.stacked().cwiseAbs().maxCoeff() == 0.0);

  // Shift one bias: the error appears exactly where the shift was.
  nets[1].biases[0](2) += 0.5;
  auto pe2 = prediction_errors(traj, nets, plan);
  CHECK(pe2.segments[0].cwiseAbs().maxCoeff() == 0.0);
  CHECK(pe2.segments[1](2) == doctest::Approx(-0.5));
  CHECK(pe2.stacked()(6) == doctest::Approx(-0.5));
}

TEST_CASE("pca error model on correlated planar data") {
  RandomStream rng(2718);
  Eigen::MatrixXd factor(2, 2);
  factor << 1.0, 0.0, 1.0, 0.05;  // nearly the y=x line
  Eigen::VectorXd mean(2);
  mean << 0.5, -0.5;
  auto errors = gaussian_errors(4000, factor, mean, rng);
  auto plan = make_uniform_plan(1, 1);
  auto model = fit_error_model(errors, plan, 2);

  REQUIRE(model.active_count() == 1);
  CHECK((model.means[0] - mean).cwiseAbs().maxCoeff() < 0.05);

  // Leading eigenvector is (1,1)/sqrt(2) up to the sign convention (first
  // nonzero entry positive).
  Eigen::VectorXd lead = model.eigvecs[0].col(0);
  CHECK(lead(0) > 0.0);
  CHECK(std::abs(lead(0) - 1.0 / std::sqrt(2.0)) < 0.02);
  CHECK(std::abs(lead(1) - 1.0 / std::sqrt(2.0)) < 0.02);

  // Orthonormal eigenbasis.
  Eigen::MatrixXd gram = model.eigvecs[0].transpose() * model.eigvecs[0];
  CHECK((gram - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-8);

  // map/reconstruct are inverse and training residuals never exceed 1.
  for (int i = 0; i < 200; ++i) {
    Eigen::VectorXd r = map_to_principal(errors[static_cast<std::size_t>(i)], model);
    auto back = reconstruct(r, model);
    CHECK((back.stacked() - errors[static_cast<std::size_t>(i)].stacked())
              .cwiseAbs()
              .maxCoeff() < 1e-9);
    CHECK(residual_pca(r, model) <= 1.0 + 1e-12);
  }
}

TEST_CASE("fit_error_model validates input") {
  auto plan = make_uniform_plan(1, 1);
  CHECK_THROWS_AS(fit_error_model({}, plan, 2), std::invalid_argument);
  PredictionError one;
  one.segments = {Eigen::Vector2d(0, 0)};
  CHECK_THROWS_AS(fit_error_model({one}, plan, 2), std::invalid_argument);
}

TEST_CASE("residual examples") {
  // Hand model: identity eigenvectors, omega = (2,2), zero mean.
  ErrorModel model;
  model.plan = make_uniform_plan(1, 1);
  model.state_dim = 2;
  model.means = {Eigen::VectorXd::Zero(2)};
  model.eigvecs = {Eigen::MatrixXd::Identity(2, 2)};
  model.omega = {Eigen::Vector2d(2.0, 2.0)};

  Eigen::VectorXd r(2);
  r << 1.0, -2.0;
  CHECK(residual_pca(r, model) == doctest::Approx(1.0));
  r << 0.5, 0.5;
  CHECK(residual_pca(r, model) == doctest::Approx(0.25));

  Eigen::VectorXd alpha(2);
  alpha << 0.5, 0.25;
  Eigen::VectorXd pe(2);
  pe << 1.0, -2.0;
  CHECK(residual_baseline(pe, alpha) == doctest::Approx(0.5));
}

TEST_CASE("baseline alpha is the inverse of the per-coordinate max") {
  std::vector<PredictionError> errors(3);
  errors[0].segments = {Eigen::Vector2d(1.0, -0.5)};
  errors[1].segments = {Eigen::Vector2d(-4.0, 0.25)};
  errors[2].segments = {Eigen::Vector2d(2.0, 0.1)};
  auto alpha = fit_baseline_alpha(errors);
  CHECK(alpha(0) == doctest::Approx(0.25));
  CHECK(alpha(1) == doctest::Approx(2.0));

  // Training errors never exceed residual 1 under their own alpha.
  for (const auto& e : errors) CHECK(residual_baseline(e.stacked(), alpha) <= 1.0 + 1e-12);
}

TEST_CASE("hypercube membership matches residual threshold") {
  RandomStream rng(161803);
  Eigen::MatrixXd factor(3, 3);
  factor.setZero();
  factor(0, 0) = 2.0;
  factor(1, 0) = 1.0;
  factor(1, 1) = 0.5;
  factor(2, 2) = 0.1;
  Eigen::VectorXd mean = Eigen::Vector3d(0.1, -0.2, 0.3);
  auto errors = gaussian_errors(500, factor, mean, rng);
  auto plan = make_uniform_plan(1, 1);
  auto model = fit_error_model(errors, plan, 3);

  const double rho_star = 0.5;
  auto cube = inflating_hypercube_pca(model, rho_star, 0);
  CHECK(cube.dim() == 3);

  int below = 0, above = 0;
  auto fresh = gaussian_errors(500, factor, mean, rng);
  for (const auto& e : fresh) {
    Eigen::VectorXd r = map_to_principal(e, model);
    const double rho = residual_pca(r, model);
    const bool inside = contains(cube, e.segments[0]);
    // Guard band wider than the membership LP slack.
    if (rho <= rho_star - 1e-6) {
      CHECK(inside);
      ++below;
    } else if (rho >= rho_star + 1e-6) {
      CHECK_FALSE(inside);
      ++above;
    }
  }
  CHECK(below > 50);
  CHECK(above > 50);

  // Baseline cube: identity basis, half-widths R*/alpha.
  Eigen::VectorXd alpha(2);
  alpha << 0.5, 4.0;
  auto base_cube = inflating_hypercube_baseline(alpha, 2.0);
  auto box = bounds(base_cube);
  CHECK(box.upper(0) == doctest::Approx(4.0));
  CHECK(box.upper(1) == doctest::Approx(0.5));
  CHECK(box.lower(0) == doctest::Approx(-4.0));
}

TEST_CASE("coverage of the conformal quantile on held-out data") {
  // tau = 0: coverage of {rho <= rho*} on fresh residuals concentrates near
  // delta. 3-sigma band around the binomial mean.
  RandomStream rng(1123);
  const int calib = 1000, fresh = 10000;
  std::vector<double> calib_res(calib);
  for (auto& v : calib_res) v = std::abs(rng.normal());
  auto result = calibrate(calib_res, 0.9, 0.0);

  int hits = 0;
  for (int i = 0; i < fresh; ++i)
    if (std::abs(rng.normal()) <= result.quantile) ++hits;
  const double rate = static_cast<double>(hits) / fresh;
  const double band = 3.0 * std::sqrt(0.9 * 0.1 / fresh) + 0.02;  // quantile noise margin
  CHECK(rate >= 0.9 - band);

  // Mildly widened deployment: the delta+tau inflated quantile (99.2nd
  // percentile here) covers N(0, 1.1^2) residuals with a lot of room.
  auto shifted = calibrate(calib_res, 0.95, 0.04);
  int shifted_hits = 0;
  for (int i = 0; i < fresh; ++i)
    if (std::abs(1.1 * rng.normal()) <= shifted.quantile) ++shifted_hits;
  CHECK(static_cast<double>(shifted_hits) / fresh >= 0.94 - 0.015);
}

TEST_CASE("min_calibration_size walks to the boundary") {
  for (double delta : {0.5, 0.9, 0.95, 0.99}) {
    auto need = min_calibration_size(delta, 0.0);
    REQUIRE(need.has_value());
    CHECK_NOTHROW(robust_rank(*need, delta, 0.0));
    if (*need > 1) CHECK_THROWS(robust_rank(*need - 1, delta, 0.0));
  }
  CHECK_FALSE(min_calibration_size(0.5, 0.5).has_value());
}
