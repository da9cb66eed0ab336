#include "pcaddreach/systems.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

namespace pcaddreach {

namespace {

double param(const SystemSpec& spec, const std::string& key) {
  auto it = spec.params.find(key);
  if (it == spec.params.end())
    throw std::invalid_argument("system " + spec.name + ": missing parameter " + key);
  return it->second;
}

Boxd make_box(std::initializer_list<double> lower, std::initializer_list<double> upper) {
  Boxd box;
  box.lower = Eigen::Map<const Eigen::VectorXd>(lower.begin(), lower.size());
  box.upper = Eigen::Map<const Eigen::VectorXd>(upper.begin(), upper.size());
  return box;
}

// Hover linearization with cascaded PD loops, Euler-discretized. Spectral
// radius 0.992 at dt = 0.05 with the default gains.
Eigen::MatrixXd quadhover_matrix(const SystemSpec& spec) {
  const double g = param(spec, "gravity");
  const double kp = param(spec, "k_p"), kd = param(spec, "k_d");
  const double ka = param(spec, "k_a"), kr = param(spec, "k_r");
  const double kpz = param(spec, "k_pz"), kdz = param(spec, "k_dz");
  const double dt = param(spec, "dt");

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(12, 12);
  a.block(0, 3, 3, 3).setIdentity();  // position <- velocity
  a(3, 7) = g;                        // pitch tilts x-acceleration
  a(4, 6) = -g;                       // roll tilts y-acceleration
  a(5, 2) = -kpz;
  a(5, 5) = -kdz;
  a.block(6, 9, 3, 3).setIdentity();  // angles <- rates
  a(9, 6) = -ka;
  a(9, 1) = ka * kp / g;
  a(9, 4) = ka * kd / g;
  a(9, 9) = -kr;
  a(10, 7) = -ka;
  a(10, 0) = -ka * kp / g;
  a(10, 3) = -ka * kd / g;
  a(10, 10) = -kr;
  a(11, 8) = -ka;
  a(11, 11) = -kr;
  return Eigen::MatrixXd::Identity(12, 12) + dt * a;
}

}  // namespace

SystemSpec make_system(const std::string& name) {
  SystemSpec spec;
  spec.name = name;
  if (name == "linear2d") {
    spec.state_dim = 2;
    spec.params = {{"scale", 0.9}, {"angle", 0.0}};
    spec.noise_cov = 0.05 * 0.05 * Eigen::MatrixXd::Identity(2, 2);
    spec.initial_box = make_box({0.8, -0.2}, {1.2, 0.2});
    return spec;
  }
  if (name == "vanderpol2d") {
    spec.state_dim = 2;
    spec.params = {{"mu", 1.0}, {"dt", 0.05}};
    spec.noise_cov = 0.01 * 0.01 * Eigen::MatrixXd::Identity(2, 2);
    spec.initial_box = make_box({1.25, 2.25}, {1.55, 2.35});
    return spec;
  }
  if (name == "dubins3d") {
    spec.state_dim = 3;
    spec.params = {{"speed", 1.0}, {"turn_rate", 0.5}, {"dt", 0.1}};
    spec.noise_cov = Eigen::Vector3d(0.02 * 0.02, 0.02 * 0.02, 0.01 * 0.01).asDiagonal();
    spec.initial_box = make_box({-0.1, -0.1, -0.1}, {0.1, 0.1, 0.1});
    return spec;
  }
  if (name == "quadhover12d") {
    spec.state_dim = 12;
    spec.params = {{"gravity", 9.81}, {"k_p", 1.0},  {"k_d", 2.0}, {"k_a", 8.0},
                   {"k_r", 4.0},     {"k_pz", 1.0}, {"k_dz", 2.0}, {"dt", 0.05}};
    Eigen::VectorXd diag(12);
    diag << Eigen::VectorXd::Constant(6, 0.05 * 0.05), Eigen::VectorXd::Constant(6, 0.01 * 0.01);
    spec.noise_cov = diag.asDiagonal();
    Boxd box;
    box.lower = Eigen::VectorXd::Zero(12);
    box.upper = Eigen::VectorXd::Zero(12);
    box.lower.head(3).setConstant(-0.25);
    box.upper.head(3).setConstant(0.25);
    box.lower.segment(3, 3).setConstant(-0.1);
    box.upper.segment(3, 3).setConstant(0.1);
    box.lower.tail(6).setConstant(-0.05);
    box.upper.tail(6).setConstant(0.05);
    spec.initial_box = box;
    return spec;
  }
  throw std::invalid_argument("unknown system: " + name);
}

SystemSpec shift(const SystemSpec& spec, double covariance_scale) {
  if (!(covariance_scale > 0.0))
    throw std::invalid_argument("shift: covariance_scale must be positive");
  SystemSpec out = spec;
  out.noise_cov *= covariance_scale;
  return out;
}

Eigen::VectorXd step_dynamics(const SystemSpec& spec, const Eigen::VectorXd& state) {
  if (state.size() != spec.state_dim)
    throw std::invalid_argument("step_dynamics: state dimension mismatch");
  if (spec.name == "linear2d") {
    const double scale = param(spec, "scale"), angle = param(spec, "angle");
    Eigen::Matrix2d rot;
    rot << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
    return scale * rot * state;
  }
  if (spec.name == "vanderpol2d") {
    const double mu = param(spec, "mu"), dt = param(spec, "dt");
    Eigen::Vector2d next;
    next(0) = state(0) + dt * state(1);
    next(1) = state(1) + dt * (mu * (1.0 - state(0) * state(0)) * state(1) - state(0));
    return next;
  }
  if (spec.name == "dubins3d") {
    const double speed = param(spec, "speed"), turn = param(spec, "turn_rate");
    const double dt = param(spec, "dt");
    Eigen::Vector3d next;
    next(0) = state(0) + dt * speed * std::cos(state(2));
    next(1) = state(1) + dt * speed * std::sin(state(2));
    next(2) = state(2) + dt * turn;
    return next;
  }
  if (spec.name == "quadhover12d") return quadhover_matrix(spec) * state;
  throw std::invalid_argument("unknown system: " + spec.name);
}

Eigen::MatrixXd noise_factor(const Eigen::MatrixXd& cov) {
  if (cov.rows() != cov.cols()) throw std::invalid_argument("noise_factor: covariance not square");
  if (cov.isZero(0.0)) return Eigen::MatrixXd::Zero(cov.rows(), cov.cols());
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success)
    throw std::runtime_error("noise_factor: eigendecomposition failed");
  if ((eig.eigenvalues().array() < -1e-10 * eig.eigenvalues().cwiseAbs().maxCoeff()).any())
    throw std::invalid_argument("noise_factor: covariance is not positive semidefinite");
  Eigen::VectorXd clipped = eig.eigenvalues().cwiseMax(0.0);
  return eig.eigenvectors() * clipped.cwiseSqrt().asDiagonal();
}

Eigen::MatrixXd simulate(const SystemSpec& spec, const Eigen::VectorXd& s0, std::size_t horizon,
                         RandomStream& rng) {
  if (s0.size() != spec.state_dim) throw std::invalid_argument("simulate: s0 dimension mismatch");
  const Eigen::Index n = spec.state_dim;
  const Eigen::MatrixXd factor = noise_factor(spec.noise_cov);
  Eigen::MatrixXd states(n, static_cast<Eigen::Index>(horizon));
  Eigen::VectorXd state = s0;
  Eigen::VectorXd z(n);
  for (std::size_t k = 0; k < horizon; ++k) {
    state = step_dynamics(spec, state);
    for (Eigen::Index i = 0; i < n; ++i) z(i) = rng.normal();
    state += factor * z;
    if (!state.allFinite())
      throw SimulationError("simulate: non-finite state at step " + std::to_string(k + 1) +
                            " of system " + spec.name);
    states.col(static_cast<Eigen::Index>(k)) = state;
  }
  return states;
}

}  // namespace pcaddreach
