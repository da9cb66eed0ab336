#include "pcaddreach/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "pcaddreach/conformal.hpp"
#include "pcaddreach/flowpipe.hpp"
#include "pcaddreach/io.hpp"
#include "pcaddreach/parallel.hpp"
#include "pcaddreach/training.hpp"

namespace pcaddreach {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string segment_file_name(std::size_t segment) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "segment_%04zu.json", segment);
  return buf;
}

// Denormalized RMSE of a net over the dataset's held-out tail (the same tail
// train_segment reserves), or over everything when the tail is empty.
double evaluate_rmse(const Mlpd& net, const TrajectoryDataset& dataset, const SegmentPlan& plan,
                     std::size_t q, double validation_fraction) {
  const std::size_t count = dataset.records.size();
  std::size_t val_count = static_cast<std::size_t>(
      static_cast<double>(count) * std::clamp(validation_fraction, 0.0, 1.0));
  if (val_count >= count) val_count = count - 1;
  const std::size_t begin = val_count > 0 ? count - val_count : 0;
  const std::size_t n_eval = val_count > 0 ? val_count : count;

  double sq = 0.0;
  Eigen::Index out_dim = 0;
  for (std::size_t i = begin; i < begin + n_eval; ++i) {
    Eigen::VectorXd truth = stack_segment(dataset.records[i].states, plan, q);
    Eigen::VectorXd pred = net.forward(dataset.records[i].initial_state);
    out_dim = truth.size();
    sq += (pred - truth).squaredNorm();
  }
  return std::sqrt(sq / (static_cast<double>(n_eval) * static_cast<double>(out_dim)));
}

Eigen::VectorXd segment_slice(const Eigen::VectorXd& stacked, const SegmentPlan& plan,
                              Eigen::Index state_dim, std::size_t a) {
  Eigen::Index at = 0;
  for (std::size_t b = 0; b < a; ++b)
    at += state_dim * static_cast<Eigen::Index>(plan.lengths[plan.first_active + b]);
  return stacked.segment(at,
                         state_dim * static_cast<Eigen::Index>(plan.lengths[plan.first_active + a]));
}

}  // namespace

Pipeline::Pipeline(RunConfig config, std::string out_dir, unsigned threads)
    : config_(std::move(config)), out_(std::move(out_dir)), threads_(threads) {
  // the three sampling stages must draw from disjoint substream families
  if (config_.train.base.seed == config_.conformal.seed)
    throw ConfigError("conformal.seed: must differ from train.seed (disjoint datasets)");
  if (config_.validate.seed == config_.train.base.seed ||
      config_.validate.seed == config_.conformal.seed)
    throw ConfigError("validate.seed: must differ from train.seed and conformal.seed");
}

const std::vector<std::string>& Pipeline::phase_names() {
  static const std::vector<std::string> names{"simulate", "train",    "reach", "calibrate",
                                              "inflate",  "validate", "report"};
  return names;
}

std::string Pipeline::train_csv() const { return out_ + "/datasets/train.csv"; }
std::string Pipeline::train_meta() const { return out_ + "/datasets/train.meta.json"; }
std::string Pipeline::calibration_csv() const { return out_ + "/datasets/calibration.csv"; }
std::string Pipeline::calibration_meta() const {
  return out_ + "/datasets/calibration.meta.json";
}
std::string Pipeline::model_path(std::size_t segment) const {
  return out_ + "/models/" + segment_file_name(segment);
}
std::string Pipeline::model_summary() const { return out_ + "/models/summary.json"; }
std::string Pipeline::surrogate_flowpipe_path() const { return out_ + "/flowpipe_surrogate.json"; }
std::string Pipeline::error_model_path() const { return out_ + "/error_model.json"; }
std::string Pipeline::baseline_model_path() const { return out_ + "/baseline_model.json"; }
std::string Pipeline::confident_flowpipe_path() const { return out_ + "/flowpipe_confident.json"; }
std::string Pipeline::secondary_flowpipe_path() const {
  return out_ + "/flowpipe_confident_" + (config_.conformal.residual == "pca" ? "baseline" : "pca") +
         ".json";
}
std::string Pipeline::coverage_path() const { return out_ + "/coverage.json"; }
std::string Pipeline::secondary_coverage_path() const {
  return out_ + "/coverage_" + (config_.conformal.residual == "pca" ? "baseline" : "pca") + ".json";
}
std::string Pipeline::bounds_csv_path() const { return out_ + "/report/bounds.csv"; }
std::string Pipeline::comparison_path() const { return out_ + "/report/comparison.json"; }
std::string Pipeline::timings_path() const { return out_ + "/timings.json"; }

void Pipeline::require_artifact(const std::string& path, const std::string& producing_phase) const {
  if (!fs::exists(path)) throw MissingArtifactError(path, producing_phase);
}

void Pipeline::record_timing(const std::string& phase, double seconds) const {
  json j;
  if (fs::exists(timings_path())) j = io::load_json(timings_path());
  j["threads"] = threads_;
  j["phases"][phase]["seconds"] = seconds;
  io::save_json(j, timings_path());
}

void Pipeline::run_phase(const std::string& name) {
  fs::create_directories(out_);
  const auto start = std::chrono::steady_clock::now();
  if (name == "simulate")
    phase_simulate();
  else if (name == "train")
    phase_train();
  else if (name == "reach")
    phase_reach();
  else if (name == "calibrate")
    phase_calibrate();
  else if (name == "inflate")
    phase_inflate();
  else if (name == "validate")
    phase_validate();
  else if (name == "report")
    phase_report();
  else
    throw ConfigError("unknown phase: " + name);
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
  record_timing(name, elapsed.count());
}

void Pipeline::run_all() {
  for (const auto& name : phase_names()) run_phase(name);
}

void Pipeline::phase_simulate() {
  fs::create_directories(out_ + "/datasets");
  const SystemSpec spec = resolve_system(config_.system);
  const SegmentPlan plan = resolve_plan(config_.plan);

  TrajectoryDataset train = make_dataset(spec, plan.horizon, config_.train.count,
                                         DatasetRole::Train, config_.train.base.seed, threads_);
  io::save_dataset(train, train_csv(), train_meta());

  TrajectoryDataset calib =
      make_dataset(spec, plan.horizon, config_.conformal.calibration_count,
                   DatasetRole::Calibration, config_.conformal.seed, threads_);
  io::save_dataset(calib, calibration_csv(), calibration_meta());
}

void Pipeline::phase_train() {
  require_artifact(train_csv(), "simulate");
  require_artifact(train_meta(), "simulate");
  fs::create_directories(out_ + "/models");

  const TrajectoryDataset dataset = io::load_dataset(train_csv(), train_meta());
  const SegmentPlan plan = resolve_plan(config_.plan);
  const std::size_t active = plan.num_segments() - plan.first_active;
  const std::size_t stride = config_.train.interpolation_stride;

  if (stride > 0) {
    if (active < 2) throw ConfigError("train.interpolation_stride: needs at least 2 segments");
    if ((active - 1) % stride != 0)
      throw ConfigError(
          "train.interpolation_stride: the last active segment must be an anchor "
          "(active segment count minus 1 must be divisible by the stride)");
    for (std::size_t q = plan.first_active; q < plan.num_segments(); ++q)
      if (plan.lengths[q] != plan.lengths[plan.first_active])
        throw ConfigError(
            "train.interpolation_stride: requires equal segment lengths so nets share one "
            "architecture");
  }

  std::vector<std::size_t> anchor_of_active;  // active index -> anchor list position
  std::vector<std::size_t> anchors;           // active indices of trained nets
  for (std::size_t a = 0; a < active; ++a)
    if (stride == 0 || a % stride == 0 || a == active - 1) {
      anchor_of_active.push_back(anchors.size());
      anchors.push_back(a);
    } else {
      anchor_of_active.push_back(SIZE_MAX);
    }

  std::vector<TrainResult> results(anchors.size());
  parallel_for(anchors.size(), threads_, [&](std::size_t i) {
    const std::size_t q = plan.first_active + anchors[i];
    TrainConfig cfg = config_.train.base;
    cfg.seed = config_.train.base.seed ^ static_cast<std::uint64_t>(q);
    results[i] = train_segment(dataset, plan, q, cfg);
  });

  json summary;
  summary["format_version"] = io::kFormatVersion;
  summary["plan"] = io::plan_to_json(plan);
  summary["normalization"] = config_.train.base.normalization == Normalization::PerSegment
                                 ? "per_segment"
                                 : "shared";
  summary["interpolation_stride"] = stride;
  json segments = json::array();
  for (std::size_t a = 0; a < active; ++a) {
    const std::size_t q = plan.first_active + a;
    json entry;
    entry["segment"] = q;
    entry["file"] = segment_file_name(q);
    Mlpd net;
    if (anchor_of_active[a] != SIZE_MAX) {
      const TrainResult& res = results[anchor_of_active[a]];
      net = res.net;
      entry["trained"] = true;
      entry["final_loss"] = res.epoch_losses.empty() ? 0.0 : res.epoch_losses.back();
      entry["validation_rmse"] = res.validation_rmse;
    } else {
      const std::size_t lo = (a / stride) * stride;
      const std::size_t hi = std::min(lo + stride, active - 1);
      const double lambda =
          static_cast<double>(a - lo) / static_cast<double>(hi - lo);
      net = interpolate(results[anchor_of_active[lo]].net, results[anchor_of_active[hi]].net,
                        lambda);
      entry["trained"] = false;
      entry["lambda"] = lambda;
      entry["validation_rmse"] =
          evaluate_rmse(net, dataset, plan, q, config_.train.base.validation_fraction);
    }
    io::save_model(net, model_path(q));
    segments.push_back(std::move(entry));
  }
  summary["segments"] = std::move(segments);
  io::save_json(summary, model_summary());
}

std::vector<Mlpd> Pipeline::load_nets() const {
  require_artifact(model_summary(), "train");
  const SegmentPlan plan = resolve_plan(config_.plan);
  std::vector<Mlpd> nets;
  for (std::size_t q = plan.first_active; q < plan.num_segments(); ++q) {
    require_artifact(model_path(q), "train");
    nets.push_back(io::load_model(model_path(q)));
  }
  return nets;
}

void Pipeline::phase_reach() {
  const SegmentPlan plan = resolve_plan(config_.plan);
  const SystemSpec spec = resolve_system(config_.system);
  const std::vector<Mlpd> nets = load_nets();
  Flowpipe pipe = surrogate_flowpipe(nets, plan, spec.state_dim, spec.initial_box,
                                     config_.reach.settings, threads_);
  io::save_flowpipe(pipe, surrogate_flowpipe_path());
}

void Pipeline::phase_calibrate() {
  require_artifact(calibration_csv(), "simulate");
  require_artifact(calibration_meta(), "simulate");
  const std::vector<Mlpd> nets = load_nets();
  const SegmentPlan plan = resolve_plan(config_.plan);
  const TrajectoryDataset train = io::load_dataset(train_csv(), train_meta());
  const TrajectoryDataset calib = io::load_dataset(calibration_csv(), calibration_meta());

  std::vector<PredictionError> train_errors(train.records.size());
  parallel_for(train.records.size(), threads_, [&](std::size_t i) {
    train_errors[i] = prediction_errors(train.records[i], nets, plan);
  });
  std::vector<PredictionError> calib_errors(calib.records.size());
  parallel_for(calib.records.size(), threads_, [&](std::size_t i) {
    calib_errors[i] = prediction_errors(calib.records[i], nets, plan);
  });

  const bool want_pca = config_.conformal.residual == "pca" || config_.conformal.compare;
  const bool want_baseline =
      config_.conformal.residual == "baseline" || config_.conformal.compare;

  if (want_pca) {
    const ErrorModel model = fit_error_model(train_errors, plan, train.spec.state_dim, threads_);
    std::vector<double> residuals(calib_errors.size());
    parallel_for(calib_errors.size(), threads_, [&](std::size_t i) {
      residuals[i] = residual_pca(map_to_principal(calib_errors[i], model), model);
    });
    const CalibrationResult result =
        calibrate(residuals, config_.conformal.delta, config_.conformal.tau);
    io::save_error_model(model, io::to_meta(result), error_model_path());
  }
  if (want_baseline) {
    const Eigen::VectorXd alpha = fit_baseline_alpha(train_errors);
    std::vector<double> residuals(calib_errors.size());
    parallel_for(calib_errors.size(), threads_, [&](std::size_t i) {
      residuals[i] = residual_baseline(calib_errors[i].stacked(), alpha);
    });
    const CalibrationResult result =
        calibrate(residuals, config_.conformal.delta, config_.conformal.tau);
    io::save_baseline_model(alpha, plan, io::to_meta(result), baseline_model_path());
  }
}

void Pipeline::phase_inflate() {
  require_artifact(surrogate_flowpipe_path(), "reach");
  const Flowpipe surrogate = io::load_flowpipe(surrogate_flowpipe_path());
  const SegmentPlan& plan = surrogate.plan;
  const std::size_t active = surrogate.active_count();

  auto build = [&](const std::string& kind) {
    std::vector<StarSetd> cubes(active);
    double rho_star = 0.0, delta = 0.0, tau = 0.0;
    if (kind == "pca") {
      require_artifact(error_model_path(), "calibrate");
      auto [model, meta] = io::load_error_model(error_model_path());
      for (std::size_t a = 0; a < active; ++a)
        cubes[a] = inflating_hypercube_pca(model, meta.quantile, a);
      rho_star = meta.quantile;
      delta = meta.delta;
      tau = meta.tau;
    } else {
      require_artifact(baseline_model_path(), "calibrate");
      auto [alpha, meta] = io::load_baseline_model(baseline_model_path());
      for (std::size_t a = 0; a < active; ++a)
        cubes[a] = inflating_hypercube_baseline(
            segment_slice(alpha, plan, surrogate.state_dim, a), meta.quantile);
      rho_star = meta.quantile;
      delta = meta.delta;
      tau = meta.tau;
    }
    Flowpipe confident = confident_flowpipe(surrogate, cubes);
    confident.delta = delta;
    confident.tau = tau;
    confident.rho_star = rho_star;
    confident.residual_kind = kind;
    return confident;
  };

  io::save_flowpipe(build(config_.conformal.residual), confident_flowpipe_path());
  if (config_.conformal.compare) {
    const std::string other = config_.conformal.residual == "pca" ? "baseline" : "pca";
    io::save_flowpipe(build(other), secondary_flowpipe_path());
  }
}

void Pipeline::phase_validate() {
  require_artifact(confident_flowpipe_path(), "inflate");
  const SystemSpec deployment =
      shift(resolve_system(config_.system), config_.validate.covariance_scale);

  const Flowpipe confident = io::load_flowpipe(confident_flowpipe_path());
  CoverageReport report = validate_coverage(confident, deployment, config_.validate.trials,
                                            config_.validate.seed, threads_);
  io::save_json(io::coverage_to_json(report), coverage_path());

  if (config_.conformal.compare) {
    require_artifact(secondary_flowpipe_path(), "inflate");
    const Flowpipe secondary = io::load_flowpipe(secondary_flowpipe_path());
    // same seed: both methods are judged on the same deployment trajectories
    CoverageReport other = validate_coverage(secondary, deployment, config_.validate.trials,
                                             config_.validate.seed, threads_);
    io::save_json(io::coverage_to_json(other), secondary_coverage_path());
  }
}

void Pipeline::phase_report() {
  require_artifact(confident_flowpipe_path(), "inflate");
  fs::create_directories(out_ + "/report");
  const Flowpipe confident = io::load_flowpipe(confident_flowpipe_path());
  io::save_bounds_csv(confident, bounds_csv_path());

  if (!config_.conformal.compare) return;

  require_artifact(error_model_path(), "calibrate");
  require_artifact(baseline_model_path(), "calibrate");
  require_artifact(coverage_path(), "validate");
  require_artifact(secondary_coverage_path(), "validate");
  auto [model, pca_meta] = io::load_error_model(error_model_path());
  auto [alpha, base_meta] = io::load_baseline_model(baseline_model_path());

  const SegmentPlan& plan = model.plan;
  json per_segment = json::array();
  double pca_total = 0.0, base_total = 0.0;
  for (std::size_t a = 0; a < model.active_count(); ++a) {
    const double pca_lv = log_volume_from_halfwidths(model.omega[a] * pca_meta.quantile);
    const double base_lv = log_volume_from_halfwidths(
        base_meta.quantile *
        segment_slice(alpha, plan, model.state_dim, a).cwiseInverse());
    per_segment.push_back({{"segment", plan.first_active + a},
                           {"log_volume_pca", pca_lv},
                           {"log_volume_baseline", base_lv}});
    pca_total += pca_lv;
    base_total += base_lv;
  }

  const json pca_cov = io::load_json(config_.conformal.residual == "pca"
                                         ? coverage_path()
                                         : secondary_coverage_path());
  const json base_cov = io::load_json(config_.conformal.residual == "baseline"
                                          ? coverage_path()
                                          : secondary_coverage_path());

  json comparison;
  comparison["format_version"] = io::kFormatVersion;
  comparison["delta"] = config_.conformal.delta;
  comparison["tau"] = config_.conformal.tau;
  comparison["rho_star_pca"] = pca_meta.quantile;
  comparison["r_star_baseline"] = base_meta.quantile;
  comparison["log_volume_pca"] = pca_total;
  comparison["log_volume_baseline"] = base_total;
  comparison["log_volume_difference"] = pca_total - base_total;
  comparison["volume_ratio"] = std::exp(pca_total - base_total);
  comparison["coverage_pca"] = pca_cov.at("coverage");
  comparison["coverage_baseline"] = base_cov.at("coverage");
  comparison["per_segment"] = std::move(per_segment);
  io::save_json(comparison, comparison_path());
}

}  // namespace pcaddreach
