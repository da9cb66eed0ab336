#pragma once

#include <json.hpp>

#include <cstdint>
#include <string>
#include <utility>

#include "pcaddreach/conformal.hpp"
#include "pcaddreach/dataset.hpp"
#include "pcaddreach/flowpipe.hpp"
#include "pcaddreach/mlp.hpp"
#include "pcaddreach/segment_plan.hpp"
#include "pcaddreach/star.hpp"
#include "pcaddreach/systems.hpp"

namespace pcaddreach::io {

inline constexpr int kFormatVersion = 1;

/// Calibration metadata stored alongside fitted error models.
struct CalibrationMeta {
  std::size_t sample_count = 0;
  double delta = 0.0;
  double tau = 0.0;
  std::size_t rank = 0;
  double quantile = 0.0;
};

CalibrationMeta to_meta(const CalibrationResult& result);

nlohmann::json star_to_json(const StarSetd& star);
StarSetd star_from_json(const nlohmann::json& j);

nlohmann::json plan_to_json(const SegmentPlan& plan);
SegmentPlan plan_from_json(const nlohmann::json& j);

nlohmann::json system_to_json(const SystemSpec& spec);
SystemSpec system_from_json(const nlohmann::json& j);

nlohmann::json model_to_json(const Mlpd& net);
Mlpd model_from_json(const nlohmann::json& j);
void save_model(const Mlpd& net, const std::string& path);
Mlpd load_model(const std::string& path);

/// CSV with header traj_id,k,x1,...,xn (the k=0 row holds s0) plus a JSON
/// sidecar carrying spec, seed, role, and shape. Doubles are written in
/// shortest round-trip form, so reload is bit-exact.
void save_dataset(const TrajectoryDataset& dataset, const std::string& csv_path,
                  const std::string& meta_path);
TrajectoryDataset load_dataset(const std::string& csv_path, const std::string& meta_path);

void save_error_model(const ErrorModel& model, const CalibrationMeta& meta,
                      const std::string& path);
std::pair<ErrorModel, CalibrationMeta> load_error_model(const std::string& path);

void save_baseline_model(const Eigen::VectorXd& alpha, const SegmentPlan& plan,
                         const CalibrationMeta& meta, const std::string& path);
std::pair<Eigen::VectorXd, CalibrationMeta> load_baseline_model(const std::string& path);

void save_flowpipe(const Flowpipe& flowpipe, const std::string& path);
Flowpipe load_flowpipe(const std::string& path);

nlohmann::json coverage_to_json(const CoverageReport& report);

/// Per-step per-dimension union bounds of the flowpipe stars, CSV with
/// header k,dim,lower,upper; one row per (active step, state dimension).
void save_bounds_csv(const Flowpipe& flowpipe, const std::string& path);

/// dump(2) with sorted keys and a trailing newline; parents must exist.
void save_json(const nlohmann::json& j, const std::string& path);
nlohmann::json load_json(const std::string& path);

}  // namespace pcaddreach::io
