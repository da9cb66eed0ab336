#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "oracles.hpp"
#include "pcaddreach/linprog.hpp"
#include "pcaddreach/rng.hpp"

using namespace pcaddreach;

namespace {

LinearProgramd make_lp(const Eigen::VectorXd& c, const Eigen::MatrixXd& A,
                       const Eigen::VectorXd& b, bool maximize = true) {
  LinearProgramd lp;
  lp.objective = c;
  lp.constraint_matrix = A;
  lp.constraint_rhs = b;
  lp.maximize = maximize;
  return lp;
}

}  // namespace

TEST_CASE("interval endpoints") {
  Eigen::MatrixXd a(2, 1);
  a << 1, -1;
  Eigen::VectorXd b(2);
  b << 1, 1;
  Eigen::VectorXd c(1);
  c << 1;

  auto hi = solve(make_lp(c, a, b));
  REQUIRE(hi.status == LpStatus::Optimal);
  CHECK(hi.optimal_value == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(hi.optimizer(0) == doctest::Approx(1.0).epsilon(1e-9));

  auto lo = solve(make_lp(c, a, b, false));
  REQUIRE(lo.status == LpStatus::Optimal);
  CHECK(lo.optimal_value == doctest::Approx(-1.0).epsilon(1e-9));
}

TEST_CASE("box corner") {
  Eigen::MatrixXd a(4, 2);
  a << 1, 0, -1, 0, 0, 1, 0, -1;
  Eigen::VectorXd b = Eigen::VectorXd::Ones(4);
  Eigen::VectorXd c(2);
  c << 1, 1;

  auto r = solve(make_lp(c, a, b));
  REQUIRE(r.status == LpStatus::Optimal);
  CHECK(r.optimal_value == doctest::Approx(2.0).epsilon(1e-9));
  CHECK((r.optimizer - Eigen::Vector2d(1, 1)).norm() < 1e-8);
}

TEST_CASE("contradictory rows are infeasible") {
  Eigen::MatrixXd a(2, 1);
  a << 1, -1;
  Eigen::VectorXd b(2);
  b << -1, -1;  // x <= -1 and x >= 1
  Eigen::VectorXd c(1);
  c << 1;
  CHECK(solve(make_lp(c, a, b)).status == LpStatus::Infeasible);
  CHECK_FALSE(feasible<double>(a, b));
}

TEST_CASE("degenerate vertex") {
  Eigen::MatrixXd a(4, 2);
  a << 1, 1, 1, 0, -1, 0, 0, -1;
  Eigen::VectorXd b(4);
  b << 4, 2, 0, 0;
  Eigen::VectorXd c(2);
  c << 3, 2;

  auto r = solve(make_lp(c, a, b));
  REQUIRE(r.status == LpStatus::Optimal);
  CHECK(r.optimal_value == doctest::Approx(10.0).epsilon(1e-9));
  CHECK((r.optimizer - Eigen::Vector2d(2, 2)).norm() < 1e-8);
}

TEST_CASE("unbounded ray") {
  Eigen::MatrixXd a(1, 1);
  a << -1;
  Eigen::VectorXd b(1);
  b << 0;
  Eigen::VectorXd c(1);
  c << 1;
  CHECK(solve(make_lp(c, a, b)).status == LpStatus::Unbounded);
  // Minimizing along the bounded side is fine.
  CHECK(solve(make_lp(c, a, b, false)).optimal_value == doctest::Approx(0.0));
}

TEST_CASE("no constraints") {
  LinearProgramd lp;
  lp.objective = Eigen::VectorXd::Zero(3);
  lp.constraint_matrix.resize(0, 3);
  lp.constraint_rhs.resize(0);
  auto r = solve(lp);
  CHECK(r.status == LpStatus::Optimal);
  CHECK(r.optimal_value == 0.0);

  lp.objective(1) = 1.0;
  CHECK(solve(lp).status == LpStatus::Unbounded);
}

TEST_CASE("dimension mismatch throws") {
  LinearProgramd lp;
  lp.objective = Eigen::VectorXd::Zero(2);
  lp.constraint_matrix = Eigen::MatrixXd::Zero(1, 3);
  lp.constraint_rhs = Eigen::VectorXd::Zero(1);
  CHECK_THROWS_AS(solve(lp), std::invalid_argument);
  lp.constraint_matrix = Eigen::MatrixXd::Zero(2, 2);
  CHECK_THROWS_AS(solve(lp), std::invalid_argument);
}

TEST_CASE("random LPs match vertex enumeration") {
  RandomStream rng(20240601);
  int optimal_seen = 0, infeasible_seen = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng.uniform(0.0, 3.999));
    const Eigen::Index extra = static_cast<Eigen::Index>(rng.uniform(0.0, 4.999));
    const double box = rng.uniform(0.5, 3.0);

    Eigen::MatrixXd a(2 * n + extra, n);
    Eigen::VectorXd b(2 * n + extra);
    a.setZero();
    for (Eigen::Index i = 0; i < n; ++i) {
      a(2 * i, i) = 1.0;
      a(2 * i + 1, i) = -1.0;
      b(2 * i) = box;
      b(2 * i + 1) = box;
    }
    for (Eigen::Index r = 0; r < extra; ++r) {
      for (Eigen::Index j = 0; j < n; ++j) a(2 * n + r, j) = rng.uniform(-1.0, 1.0);
      b(2 * n + r) = rng.uniform(-1.0, 2.0);
    }
    Eigen::VectorXd c(n);
    for (Eigen::Index j = 0; j < n; ++j) c(j) = rng.uniform(-2.0, 2.0);

    auto got = solve(make_lp(c, a, b));
    auto want = oracles::vertex_lp_max(c, a, b);

    if (want.feasible) {
      REQUIRE(got.status == LpStatus::Optimal);
      CHECK(std::abs(got.optimal_value - want.value) <=
            1e-7 * std::max(1.0, std::abs(want.value)));
      ++optimal_seen;
    } else {
      REQUIRE(got.status == LpStatus::Infeasible);
      ++infeasible_seen;
    }

    if (got.status == LpStatus::Optimal) {
      // Duality sanity: flipping the sense and the sign leaves the value.
      auto flipped = solve(make_lp(Eigen::VectorXd(-c), a, b, false));
      REQUIRE(flipped.status == LpStatus::Optimal);
      CHECK(std::abs(got.optimal_value + flipped.optimal_value) <=
            1e-7 * std::max(1.0, std::abs(got.optimal_value)));

      // Relaxation monotonicity: dropping one non-box row keeps feasibility
      // and can only raise the max (box rows stay, so it stays bounded).
      if (extra > 0) {
        const Eigen::Index drop = 2 * n + static_cast<Eigen::Index>(
                                              rng.uniform(0.0, static_cast<double>(extra) - 1e-9));
        Eigen::MatrixXd a2(a.rows() - 1, n);
        Eigen::VectorXd b2(b.size() - 1);
        Eigen::Index w = 0;
        for (Eigen::Index r = 0; r < a.rows(); ++r) {
          if (r == drop) continue;
          a2.row(w) = a.row(r);
          b2(w) = b(r);
          ++w;
        }
        auto relaxed = solve(make_lp(c, a2, b2));
        REQUIRE(relaxed.status == LpStatus::Optimal);
        CHECK(relaxed.optimal_value >=
              got.optimal_value - 1e-7 * std::max(1.0, std::abs(got.optimal_value)));
      }
    }
  }
  // Both branches must actually occur for the property to mean anything.
  CHECK(optimal_seen > 100);
  CHECK(infeasible_seen > 10);
}

TEST_CASE("feasible agrees with solve status") {
  RandomStream rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index n = 1 + static_cast<Eigen::Index>(rng.uniform(0.0, 2.999));
    Eigen::MatrixXd a(4, n);
    Eigen::VectorXd b(4);
    for (Eigen::Index r = 0; r < 4; ++r) {
      for (Eigen::Index j = 0; j < n; ++j) a(r, j) = rng.uniform(-1.0, 1.0);
      b(r) = rng.uniform(-1.0, 1.0);
    }
    auto st = solve(make_lp(Eigen::VectorXd::Zero(n), a, b)).status;
    CHECK(feasible<double>(a, b) == (st == LpStatus::Optimal));
  }
}
