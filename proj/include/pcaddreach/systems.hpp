#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>

#include "pcaddreach/rng.hpp"
#include "pcaddreach/star.hpp"

namespace pcaddreach {

struct SimulationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Stochastic difference equation s_{k+1} = f(s_k) + v_k with v_k ~ N(0, noise_cov)
/// and s_0 drawn uniformly from initial_box.
struct SystemSpec {
  std::string name;
  Eigen::Index state_dim = 0;
  std::map<std::string, double> params;
  Eigen::MatrixXd noise_cov;
  Boxd initial_box;
};

/// Built-in systems: linear2d, vanderpol2d, dubins3d, quadhover12d.
SystemSpec make_system(const std::string& name);

/// Deployment variant with the process-noise covariance scaled.
SystemSpec shift(const SystemSpec& spec, double covariance_scale);

/// Deterministic part f of the dynamics.
Eigen::VectorXd step_dynamics(const SystemSpec& spec, const Eigen::VectorXd& state);

/// Factor F with F Fᵀ = cov. Cholesky when positive definite, otherwise an
/// eigendecomposition with negative eigenvalues clipped to zero.
Eigen::MatrixXd noise_factor(const Eigen::MatrixXd& cov);

/// Columns 0..K-1 hold s_1..s_K. Throws SimulationError naming the step on
/// non-finite values.
Eigen::MatrixXd simulate(const SystemSpec& spec, const Eigen::VectorXd& s0, std::size_t horizon,
                         RandomStream& rng);

}  // namespace pcaddreach
