#include "pcaddreach/config.hpp"

#include <fstream>
#include <set>

namespace pcaddreach {

namespace {

using nlohmann::json;

const json& require(const json& j, const std::string& key, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path + ": expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw ConfigError(path + "." + key + ": missing required key");
  return *it;
}

template <typename T>
T get_as(const json& j, const std::string& path, const char* kind) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw ConfigError(path + ": expected " + kind);
  }
}

double get_number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path + ": expected a number");
  return j.get<double>();
}

std::size_t get_count(const json& j, const std::string& path) {
  if (!j.is_number_unsigned()) throw ConfigError(path + ": expected a nonnegative integer");
  return j.get<std::size_t>();
}

std::uint64_t get_seed(const json& j, const std::string& path) {
  if (!j.is_number_unsigned()) throw ConfigError(path + ": expected an unsigned integer seed");
  return j.get<std::uint64_t>();
}

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path + ": expected an object");
  for (const auto& [key, value] : j.items())
    if (known.find(key) == known.end()) throw ConfigError(path + "." + key + ": unknown key");
}

Eigen::MatrixXd parse_noise_cov(const json& j, const std::string& path) {
  reject_unknown(j, {"diag", "full"}, path);
  if (j.contains("diag")) {
    auto diag = get_as<std::vector<double>>(j.at("diag"), path + ".diag", "an array of numbers");
    Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(diag.data(),
                                                          static_cast<Eigen::Index>(diag.size()));
    return v.asDiagonal();
  }
  if (j.contains("full")) {
    auto rows = get_as<std::vector<std::vector<double>>>(j.at("full"), path + ".full",
                                                         "an array of number arrays");
    const auto n = rows.size();
    Eigen::MatrixXd m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t r = 0; r < n; ++r) {
      if (rows[r].size() != n) throw ConfigError(path + ".full: matrix must be square");
      for (std::size_t c = 0; c < n; ++c)
        m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
    return m;
  }
  throw ConfigError(path + ": expected either diag or full");
}

Boxd parse_box(const json& j, const std::string& path) {
  reject_unknown(j, {"lower", "upper"}, path);
  auto lower = get_as<std::vector<double>>(require(j, "lower", path), path + ".lower",
                                           "an array of numbers");
  auto upper = get_as<std::vector<double>>(require(j, "upper", path), path + ".upper",
                                           "an array of numbers");
  if (lower.size() != upper.size()) throw ConfigError(path + ": lower/upper length mismatch");
  Boxd box;
  box.lower = Eigen::Map<const Eigen::VectorXd>(lower.data(),
                                                static_cast<Eigen::Index>(lower.size()));
  box.upper = Eigen::Map<const Eigen::VectorXd>(upper.data(),
                                                static_cast<Eigen::Index>(upper.size()));
  return box;
}

SystemConfig parse_system(const json& j) {
  reject_unknown(j, {"name", "params", "noise_cov", "initial_box"}, "system");
  SystemConfig cfg;
  cfg.name = get_as<std::string>(require(j, "name", "system"), "system.name", "a string");
  if (j.contains("params")) {
    if (!j.at("params").is_object()) throw ConfigError("system.params: expected an object");
    for (const auto& [key, value] : j.at("params").items())
      cfg.param_overrides[key] = get_number(value, "system.params." + key);
  }
  if (j.contains("noise_cov")) cfg.noise_cov = parse_noise_cov(j.at("noise_cov"), "system.noise_cov");
  if (j.contains("initial_box")) cfg.initial_box = parse_box(j.at("initial_box"), "system.initial_box");
  return cfg;
}

PlanConfig parse_plan(const json& j) {
  reject_unknown(j, {"horizon", "segment_length", "lengths", "start_step"}, "plan");
  PlanConfig cfg;
  cfg.horizon = get_count(require(j, "horizon", "plan"), "plan.horizon");
  if (cfg.horizon == 0) throw ConfigError("plan.horizon: must be positive");
  if (j.contains("lengths")) {
    if (j.contains("segment_length"))
      throw ConfigError("plan.segment_length: conflicts with plan.lengths");
    cfg.lengths = get_as<std::vector<std::size_t>>(j.at("lengths"), "plan.lengths",
                                                   "an array of positive integers");
  } else {
    std::size_t t = 1;
    if (j.contains("segment_length"))
      t = get_count(j.at("segment_length"), "plan.segment_length");
    if (t == 0 || cfg.horizon % t != 0)
      throw ConfigError("plan.segment_length: must divide the horizon");
    cfg.lengths.assign(cfg.horizon / t, t);
  }
  if (j.contains("start_step")) cfg.start_step = get_count(j.at("start_step"), "plan.start_step");
  if (cfg.start_step < 1 || cfg.start_step > cfg.horizon)
    throw ConfigError("plan.start_step: outside 1..horizon");
  return cfg;
}

TrainSection parse_train(const json& j) {
  reject_unknown(j,
                 {"count", "seed", "hidden_widths", "epochs", "learning_rate", "batch_size",
                  "validation_fraction", "normalization", "interpolation_stride"},
                 "train");
  TrainSection cfg;
  cfg.count = get_count(require(j, "count", "train"), "train.count");
  if (cfg.count == 0) throw ConfigError("train.count: must be positive");
  cfg.base.seed = get_seed(require(j, "seed", "train"), "train.seed");
  if (j.contains("hidden_widths"))
    cfg.base.hidden_widths = get_as<std::vector<Eigen::Index>>(
        j.at("hidden_widths"), "train.hidden_widths", "an array of positive integers");
  if (j.contains("epochs")) cfg.base.epochs = get_count(j.at("epochs"), "train.epochs");
  if (j.contains("learning_rate"))
    cfg.base.learning_rate = get_number(j.at("learning_rate"), "train.learning_rate");
  if (j.contains("batch_size"))
    cfg.base.batch_size = get_count(j.at("batch_size"), "train.batch_size");
  if (j.contains("validation_fraction"))
    cfg.base.validation_fraction =
        get_number(j.at("validation_fraction"), "train.validation_fraction");
  if (j.contains("normalization")) {
    const auto mode = get_as<std::string>(j.at("normalization"), "train.normalization", "a string");
    if (mode == "per_segment")
      cfg.base.normalization = Normalization::PerSegment;
    else if (mode == "shared")
      cfg.base.normalization = Normalization::SharedComponents;
    else
      throw ConfigError("train.normalization: expected per_segment or shared");
  }
  if (j.contains("interpolation_stride"))
    cfg.interpolation_stride =
        get_count(j.at("interpolation_stride"), "train.interpolation_stride");
  if (cfg.interpolation_stride > 0 && cfg.base.normalization != Normalization::SharedComponents)
    throw ConfigError(
        "train.interpolation_stride: requires train.normalization = shared so anchor nets have "
        "identical normalizers");
  return cfg;
}

ReachSection parse_reach(const json& j) {
  reject_unknown(j, {"mode", "max_stars", "approx_bounds"}, "reach");
  ReachSection cfg;
  if (j.contains("mode")) {
    const auto mode = get_as<std::string>(j.at("mode"), "reach.mode", "a string");
    if (mode == "exact")
      cfg.settings.mode = ReachMode::Exact;
    else if (mode == "approx")
      cfg.settings.mode = ReachMode::Approx;
    else
      throw ConfigError("reach.mode: expected exact or approx");
  }
  if (j.contains("max_stars"))
    cfg.settings.max_stars = get_count(j.at("max_stars"), "reach.max_stars");
  if (j.contains("approx_bounds")) {
    const auto method =
        get_as<std::string>(j.at("approx_bounds"), "reach.approx_bounds", "a string");
    if (method == "lp")
      cfg.settings.approx_bounds = BoundsMethod::Lp;
    else if (method == "interval")
      cfg.settings.approx_bounds = BoundsMethod::Interval;
    else
      throw ConfigError("reach.approx_bounds: expected lp or interval");
  }
  return cfg;
}

ConformalSection parse_conformal(const json& j) {
  reject_unknown(j, {"delta", "tau", "residual", "calibration_count", "seed", "compare"},
                 "conformal");
  ConformalSection cfg;
  cfg.delta = get_number(require(j, "delta", "conformal"), "conformal.delta");
  if (!(cfg.delta > 0.0 && cfg.delta < 1.0))
    throw ConfigError("conformal.delta: must lie in (0,1)");
  cfg.tau = get_number(require(j, "tau", "conformal"), "conformal.tau");
  if (cfg.tau < 0.0) throw ConfigError("conformal.tau: must be nonnegative");
  if (j.contains("residual")) {
    cfg.residual = get_as<std::string>(j.at("residual"), "conformal.residual", "a string");
    if (cfg.residual != "pca" && cfg.residual != "baseline")
      throw ConfigError("conformal.residual: expected pca or baseline");
  }
  cfg.calibration_count =
      get_count(require(j, "calibration_count", "conformal"), "conformal.calibration_count");
  if (cfg.calibration_count == 0) throw ConfigError("conformal.calibration_count: must be positive");
  cfg.seed = get_seed(require(j, "seed", "conformal"), "conformal.seed");
  if (j.contains("compare"))
    cfg.compare = get_as<bool>(j.at("compare"), "conformal.compare", "a boolean");
  return cfg;
}

ValidateSection parse_validate(const json& j) {
  reject_unknown(j, {"trials", "seed", "covariance_scale"}, "validate");
  ValidateSection cfg;
  cfg.trials = get_count(require(j, "trials", "validate"), "validate.trials");
  if (cfg.trials == 0) throw ConfigError("validate.trials: must be positive");
  cfg.seed = get_seed(require(j, "seed", "validate"), "validate.seed");
  if (j.contains("covariance_scale")) {
    cfg.covariance_scale = get_number(j.at("covariance_scale"), "validate.covariance_scale");
    if (!(cfg.covariance_scale > 0.0))
      throw ConfigError("validate.covariance_scale: must be positive");
  }
  return cfg;
}

}  // namespace

RunConfig parse_config(const json& j) {
  reject_unknown(j, {"system", "plan", "train", "reach", "conformal", "validate", "notes"},
                 "config");
  RunConfig cfg;
  cfg.system = parse_system(require(j, "system", "config"));
  cfg.plan = parse_plan(require(j, "plan", "config"));
  cfg.train = parse_train(require(j, "train", "config"));
  if (j.contains("reach")) cfg.reach = parse_reach(j.at("reach"));
  cfg.conformal = parse_conformal(require(j, "conformal", "config"));
  cfg.validate = parse_validate(require(j, "validate", "config"));
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("malformed JSON in " + path + ": " + e.what());
  }
  return parse_config(j);
}

SystemSpec resolve_system(const SystemConfig& cfg) {
  SystemSpec spec = make_system(cfg.name);
  for (const auto& [key, value] : cfg.param_overrides) {
    if (spec.params.find(key) == spec.params.end())
      throw ConfigError("system.params." + key + ": unknown parameter for " + cfg.name);
    spec.params[key] = value;
  }
  if (cfg.noise_cov) {
    if (cfg.noise_cov->rows() != spec.state_dim)
      throw ConfigError("system.noise_cov: dimension does not match the state");
    spec.noise_cov = *cfg.noise_cov;
  }
  if (cfg.initial_box) {
    if (cfg.initial_box->dim() != spec.state_dim)
      throw ConfigError("system.initial_box: dimension does not match the state");
    if (((cfg.initial_box->upper - cfg.initial_box->lower).array() < 0.0).any())
      throw ConfigError("system.initial_box: lower exceeds upper");
    spec.initial_box = *cfg.initial_box;
  }
  return spec;
}

SegmentPlan resolve_plan(const PlanConfig& cfg) {
  try {
    return make_plan(cfg.horizon, cfg.lengths, cfg.start_step);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("plan: ") + e.what());
  }
}

}  // namespace pcaddreach
