#pragma once

#include <json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "pcaddreach/relu_reach.hpp"
#include "pcaddreach/segment_plan.hpp"
#include "pcaddreach/systems.hpp"
#include "pcaddreach/training.hpp"

namespace pcaddreach {

/// Schema violation; the message names the offending key path.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SystemConfig {
  std::string name;
  std::map<std::string, double> param_overrides;
  std::optional<Eigen::MatrixXd> noise_cov;
  std::optional<Boxd> initial_box;
};

struct PlanConfig {
  std::size_t horizon = 0;
  std::vector<std::size_t> lengths;  // resolved from a scalar or a list
  std::size_t start_step = 1;
};

struct TrainSection {
  std::size_t count = 0;
  TrainConfig base;
  std::size_t interpolation_stride = 0;  // 0 trains every active segment
};

struct ReachSection {
  ReachSettings settings;
};

struct ConformalSection {
  double delta = 0.0;
  double tau = 0.0;
  std::string residual = "pca";  // or "baseline"
  std::size_t calibration_count = 0;
  std::uint64_t seed = 0;
  bool compare = false;
};

struct ValidateSection {
  std::size_t trials = 0;
  std::uint64_t seed = 0;
  double covariance_scale = 1.0;
};

struct RunConfig {
  SystemConfig system;
  PlanConfig plan;
  TrainSection train;
  ReachSection reach;
  ConformalSection conformal;
  ValidateSection validate;
};

RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::string& path);

/// Built-in system with the config's overrides applied.
SystemSpec resolve_system(const SystemConfig& cfg);
SegmentPlan resolve_plan(const PlanConfig& cfg);

}  // namespace pcaddreach
