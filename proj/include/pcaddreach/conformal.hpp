#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pcaddreach/dataset.hpp"
#include "pcaddreach/mlp.hpp"
#include "pcaddreach/segment_plan.hpp"
#include "pcaddreach/star.hpp"
#include "pcaddreach/systems.hpp"

namespace pcaddreach {

struct InfeasibleCalibrationError : std::runtime_error {
  InfeasibleCalibrationError(std::size_t rank, std::size_t sample_count,
                             std::optional<std::size_t> min_samples)
      : std::runtime_error(compose(rank, sample_count, min_samples)),
        required_rank(rank),
        samples(sample_count),
        min_feasible_samples(min_samples) {}

  std::size_t required_rank;
  std::size_t samples;
  std::optional<std::size_t> min_feasible_samples;

 private:
  static std::string compose(std::size_t rank, std::size_t sample_count,
                             std::optional<std::size_t> min_samples) {
    std::string msg = "calibration infeasible: required rank " + std::to_string(rank) +
                      " exceeds sample count " + std::to_string(sample_count) + "; ";
    if (min_samples)
      msg += "need at least " + std::to_string(*min_samples) + " calibration samples";
    else
      msg += "no sample count suffices for this delta + tau (>= 1); lower delta or tau";
    return msg;
  }
};

/// Per-segment error vectors for the active segments (q >= plan.first_active,
/// in order). segments[a] has length state_dim * T_{first_active + a}; entries
/// are step-major: index (k-1)*n + l is component l at the k-th step of the
/// segment window.
struct PredictionError {
  std::vector<Eigen::VectorXd> segments;

  Eigen::VectorXd stacked() const;
};

/// True trajectory states minus the surrogate predictions from the initial
/// state. nets[a] is the surrogate of active segment first_active + a.
PredictionError prediction_errors(const Trajectory& trajectory, const std::vector<Mlpd>& nets,
                                  const SegmentPlan& plan);

/// Per active segment: error mean, covariance eigenvectors (descending
/// eigenvalues, deterministic sign), and the scaling omega = per-coordinate
/// max |r| over the training errors, floored globally.
struct ErrorModel {
  SegmentPlan plan;
  Eigen::Index state_dim = 0;
  std::vector<Eigen::VectorXd> means;
  std::vector<Eigen::MatrixXd> eigvecs;
  std::vector<Eigen::VectorXd> omega;

  std::size_t active_count() const { return means.size(); }
  Eigen::Index stacked_dim() const;
};

ErrorModel fit_error_model(const std::vector<PredictionError>& train_errors,
                           const SegmentPlan& plan, Eigen::Index state_dim, unsigned threads = 1);

/// r^q = V^q' (PE^q - mean^q), stacked over active segments.
Eigen::VectorXd map_to_principal(const PredictionError& pe, const ErrorModel& model);

/// Inverse of map_to_principal: PE^q = mean^q + V^q r^q.
PredictionError reconstruct(const Eigen::VectorXd& r, const ErrorModel& model);

/// max_j |r_j| / omega_j over the stacked principal coordinates.
double residual_pca(const Eigen::VectorXd& r, const ErrorModel& model);

/// alpha_j = 1 / (per-coordinate max |R^j| over training errors, floored);
/// operates on stacked active-segment errors.
Eigen::VectorXd fit_baseline_alpha(const std::vector<PredictionError>& train_errors);

/// max_j alpha_j |R^j|.
double residual_baseline(const Eigen::VectorXd& stacked_pe, const Eigen::VectorXd& alpha);

/// ceil((L+1)(1+1/L)(delta+tau)), evaluated exactly over the binary rational
/// delta+tau. Throws InfeasibleCalibrationError when the rank exceeds L.
std::size_t robust_rank(std::size_t sample_count, double delta, double tau);

/// Smallest L for which the rank is feasible, or nullopt when none exists
/// (delta + tau >= 1).
std::optional<std::size_t> min_calibration_size(double delta, double tau);

struct CalibrationResult {
  std::vector<double> sorted_residuals;
  std::size_t rank = 0;     // 1-based index into sorted_residuals
  double quantile = 0.0;    // sorted_residuals[rank - 1]
  double delta = 0.0;
  double tau = 0.0;
  std::size_t sample_count = 0;
};

CalibrationResult calibrate(std::vector<double> residuals, double delta, double tau);

/// Star <mean^q, V^q, |mu_j| <= omega_j rho*> for active segment index a.
StarSetd inflating_hypercube_pca(const ErrorModel& model, double rho_star, std::size_t a);

/// Origin-centered identity-basis star with half-widths R*/alpha_j; alpha is
/// the segment's slice of the stacked baseline scaling.
StarSetd inflating_hypercube_baseline(const Eigen::VectorXd& alpha_segment, double r_star);

}  // namespace pcaddreach
