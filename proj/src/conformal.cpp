#include "pcaddreach/conformal.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

#include "pcaddreach/parallel.hpp"

namespace pcaddreach {

namespace {

constexpr double kScaleFloorRel = 1e-12;
constexpr double kScaleFloorAbs = 1e-300;

Eigen::Index active_stacked_dim(const SegmentPlan& plan, Eigen::Index state_dim) {
  std::size_t total = 0;
  for (std::size_t q = plan.first_active; q < plan.num_segments(); ++q) total += plan.lengths[q];
  return state_dim * static_cast<Eigen::Index>(total);
}

void check_shapes(const PredictionError& pe, const ErrorModel& model) {
  if (pe.segments.size() != model.active_count())
    throw std::invalid_argument("prediction error: segment count mismatch");
  for (std::size_t a = 0; a < pe.segments.size(); ++a)
    if (pe.segments[a].size() != model.means[a].size())
      throw std::invalid_argument("prediction error: segment length mismatch");
}

// Exact ceil(num / (L * 2^s)) for the rank formula, using the identity
// ceil(x / (b c)) = ceil(ceil(x / b) / c).
std::size_t exact_rank(unsigned __int128 num, std::size_t denom, long long s) {
  unsigned __int128 q = (num + denom - 1) / denom;
  if (s <= 0) {
    for (; s < 0 && q <= (static_cast<unsigned __int128>(1) << 126); ++s) q <<= 1;
    return q > static_cast<unsigned __int128>(SIZE_MAX) ? SIZE_MAX
                                                        : static_cast<std::size_t>(q);
  }
  if (s >= 120) return q > 0 ? 1 : 0;
  unsigned __int128 mask = (static_cast<unsigned __int128>(1) << s) - 1;
  unsigned __int128 r = (q >> s) + ((q & mask) != 0 ? 1 : 0);
  return r > static_cast<unsigned __int128>(SIZE_MAX) ? SIZE_MAX : static_cast<std::size_t>(r);
}

std::size_t robust_rank_value(std::size_t sample_count, double delta, double tau) {
  const double x = delta + tau;
  int e = 0;
  const double m = std::frexp(x, &e);
  const auto mant = static_cast<unsigned long long>(std::ldexp(m, 53));
  const long long s = 53 - static_cast<long long>(e);
  const auto lp1 = static_cast<unsigned __int128>(sample_count + 1);
  return exact_rank(lp1 * lp1 * mant, sample_count, s);
}

}  // namespace

Eigen::VectorXd PredictionError::stacked() const {
  Eigen::Index total = 0;
  for (const auto& seg : segments) total += seg.size();
  Eigen::VectorXd out(total);
  Eigen::Index at = 0;
  for (const auto& seg : segments) {
    out.segment(at, seg.size()) = seg;
    at += seg.size();
  }
  return out;
}

PredictionError prediction_errors(const Trajectory& trajectory, const std::vector<Mlpd>& nets,
                                  const SegmentPlan& plan) {
  const std::size_t active = plan.num_segments() - plan.first_active;
  if (nets.size() != active)
    throw std::invalid_argument("prediction_errors: one net per active segment required");
  if (static_cast<std::size_t>(trajectory.states.cols()) < plan.horizon)
    throw std::invalid_argument("prediction_errors: trajectory shorter than the horizon");

  const Eigen::Index n = trajectory.states.rows();
  PredictionError pe;
  pe.segments.resize(active);
  for (std::size_t a = 0; a < active; ++a) {
    const std::size_t q = plan.first_active + a;
    const Eigen::Index len = n * static_cast<Eigen::Index>(plan.lengths[q]);
    Eigen::MatrixXd window = trajectory.states.middleCols(
        static_cast<Eigen::Index>(plan.offsets[q]), static_cast<Eigen::Index>(plan.lengths[q]));
    Eigen::VectorXd truth = Eigen::Map<Eigen::VectorXd>(window.data(), len);
    pe.segments[a] = truth - nets[a].forward(trajectory.initial_state);
  }
  return pe;
}

Eigen::Index ErrorModel::stacked_dim() const { return active_stacked_dim(plan, state_dim); }

ErrorModel fit_error_model(const std::vector<PredictionError>& train_errors,
                           const SegmentPlan& plan, Eigen::Index state_dim, unsigned threads) {
  if (train_errors.size() < 2)
    throw std::invalid_argument("fit_error_model: at least 2 error samples required");
  const std::size_t active = plan.num_segments() - plan.first_active;
  for (const auto& pe : train_errors)
    if (pe.segments.size() != active)
      throw std::invalid_argument("fit_error_model: segment count mismatch");

  ErrorModel model;
  model.plan = plan;
  model.state_dim = state_dim;
  model.means.resize(active);
  model.eigvecs.resize(active);
  model.omega.resize(active);

  const auto count = static_cast<double>(train_errors.size());
  parallel_for(active, threads, [&](std::size_t a) {
    const Eigen::Index dim = train_errors.front().segments[a].size();
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
    for (const auto& pe : train_errors) mean += pe.segments[a];
    mean /= count;

    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(dim, dim);
    for (const auto& pe : train_errors) {
      Eigen::VectorXd centered = pe.segments[a] - mean;
      cov.noalias() += centered * centered.transpose();
    }
    cov /= count;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success)
      throw std::runtime_error("fit_error_model: eigendecomposition failed");
    Eigen::MatrixXd vecs(dim, dim);
    for (Eigen::Index j = 0; j < dim; ++j) {
      Eigen::VectorXd v = eig.eigenvectors().col(dim - 1 - j);
      for (Eigen::Index i = 0; i < dim; ++i) {
        if (std::abs(v(i)) > 1e-12) {
          if (v(i) < 0.0) v = -v;
          break;
        }
      }
      vecs.col(j) = v;
    }
    model.means[a] = std::move(mean);
    model.eigvecs[a] = std::move(vecs);

    Eigen::VectorXd omega = Eigen::VectorXd::Zero(dim);
    for (const auto& pe : train_errors) {
      Eigen::VectorXd r = model.eigvecs[a].transpose() * (pe.segments[a] - model.means[a]);
      omega = omega.cwiseMax(r.cwiseAbs());
    }
    model.omega[a] = std::move(omega);
  });

  double omega_max = 0.0;
  for (const auto& omega : model.omega) omega_max = std::max(omega_max, omega.maxCoeff());
  const double floor = kScaleFloorRel * omega_max + kScaleFloorAbs;
  for (auto& omega : model.omega) omega = omega.cwiseMax(floor);
  return model;
}

Eigen::VectorXd map_to_principal(const PredictionError& pe, const ErrorModel& model) {
  check_shapes(pe, model);
  Eigen::VectorXd r(model.stacked_dim());
  Eigen::Index at = 0;
  for (std::size_t a = 0; a < model.active_count(); ++a) {
    const Eigen::Index dim = model.means[a].size();
    r.segment(at, dim) = model.eigvecs[a].transpose() * (pe.segments[a] - model.means[a]);
    at += dim;
  }
  return r;
}

PredictionError reconstruct(const Eigen::VectorXd& r, const ErrorModel& model) {
  if (r.size() != model.stacked_dim())
    throw std::invalid_argument("reconstruct: coordinate length mismatch");
  PredictionError pe;
  pe.segments.resize(model.active_count());
  Eigen::Index at = 0;
  for (std::size_t a = 0; a < model.active_count(); ++a) {
    const Eigen::Index dim = model.means[a].size();
    pe.segments[a] = model.means[a] + model.eigvecs[a] * r.segment(at, dim);
    at += dim;
  }
  return pe;
}

double residual_pca(const Eigen::VectorXd& r, const ErrorModel& model) {
  if (r.size() != model.stacked_dim())
    throw std::invalid_argument("residual_pca: coordinate length mismatch");
  double rho = 0.0;
  Eigen::Index at = 0;
  for (const auto& omega : model.omega) {
    rho = std::max(rho,
                   (r.segment(at, omega.size()).cwiseAbs().cwiseQuotient(omega)).maxCoeff());
    at += omega.size();
  }
  return rho;
}

Eigen::VectorXd fit_baseline_alpha(const std::vector<PredictionError>& train_errors) {
  if (train_errors.size() < 2)
    throw std::invalid_argument("fit_baseline_alpha: at least 2 error samples required");
  Eigen::VectorXd maxabs = Eigen::VectorXd::Zero(train_errors.front().stacked().size());
  for (const auto& pe : train_errors) maxabs = maxabs.cwiseMax(pe.stacked().cwiseAbs());
  const double floor = kScaleFloorRel * maxabs.maxCoeff() + kScaleFloorAbs;
  return maxabs.cwiseMax(floor).cwiseInverse();
}

double residual_baseline(const Eigen::VectorXd& stacked_pe, const Eigen::VectorXd& alpha) {
  if (stacked_pe.size() != alpha.size())
    throw std::invalid_argument("residual_baseline: length mismatch");
  return stacked_pe.cwiseAbs().cwiseProduct(alpha).maxCoeff();
}

std::size_t robust_rank(std::size_t sample_count, double delta, double tau) {
  if (sample_count < 1) throw std::invalid_argument("robust_rank: sample count must be >= 1");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("robust_rank: delta not in (0,1)");
  if (!(tau >= 0.0)) throw std::invalid_argument("robust_rank: tau must be nonnegative");
  const std::size_t rank = robust_rank_value(sample_count, delta, tau);
  if (rank > sample_count)
    throw InfeasibleCalibrationError(rank, sample_count, min_calibration_size(delta, tau));
  return rank;
}

std::optional<std::size_t> min_calibration_size(double delta, double tau) {
  const double x = delta + tau;
  if (x >= 1.0) return std::nullopt;
  // (L+1)^2 x / L - L is decreasing in L, so feasibility is monotone; start
  // from the analytic root of the relaxed inequality and walk to the boundary.
  const double root = std::sqrt(x);
  auto guess = static_cast<std::size_t>(std::max(1.0, std::ceil(root / (1.0 - root))));
  while (robust_rank_value(guess, delta, tau) > guess) ++guess;
  while (guess > 1 && robust_rank_value(guess - 1, delta, tau) <= guess - 1) --guess;
  return guess;
}

CalibrationResult calibrate(std::vector<double> residuals, double delta, double tau) {
  if (residuals.empty()) throw std::invalid_argument("calibrate: no residuals");
  for (double rho : residuals)
    if (!std::isfinite(rho)) throw std::invalid_argument("calibrate: non-finite residual");
  std::stable_sort(residuals.begin(), residuals.end());

  CalibrationResult result;
  result.sample_count = residuals.size();
  result.delta = delta;
  result.tau = tau;
  result.rank = robust_rank(residuals.size(), delta, tau);
  result.quantile = residuals[result.rank - 1];
  result.sorted_residuals = std::move(residuals);
  return result;
}

StarSetd inflating_hypercube_pca(const ErrorModel& model, double rho_star, std::size_t a) {
  if (rho_star < 0.0) throw std::invalid_argument("inflating_hypercube_pca: negative quantile");
  if (a >= model.active_count())
    throw std::out_of_range("inflating_hypercube_pca: active segment index");
  const Eigen::Index dim = model.means[a].size();
  StarSetd star;
  star.center = model.means[a];
  star.basis = model.eigvecs[a];
  star.constraint_matrix.resize(2 * dim, dim);
  star.constraint_matrix << Eigen::MatrixXd::Identity(dim, dim),
      -Eigen::MatrixXd::Identity(dim, dim);
  Eigen::VectorXd half = model.omega[a] * rho_star;
  star.constraint_rhs.resize(2 * dim);
  star.constraint_rhs << half, half;
  return star;
}

StarSetd inflating_hypercube_baseline(const Eigen::VectorXd& alpha_segment, double r_star) {
  if (r_star < 0.0) throw std::invalid_argument("inflating_hypercube_baseline: negative quantile");
  const Eigen::Index dim = alpha_segment.size();
  StarSetd star;
  star.center = Eigen::VectorXd::Zero(dim);
  star.basis = Eigen::MatrixXd::Identity(dim, dim);
  star.constraint_matrix.resize(2 * dim, dim);
  star.constraint_matrix << Eigen::MatrixXd::Identity(dim, dim),
      -Eigen::MatrixXd::Identity(dim, dim);
  Eigen::VectorXd half = (r_star * alpha_segment.cwiseInverse());
  star.constraint_rhs.resize(2 * dim);
  star.constraint_rhs << half, half;
  return star;
}

}  // namespace pcaddreach
