#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <cstddef>
#include <string>
#include <vector>

#include "pcaddreach/systems.hpp"

namespace pcaddreach {

enum class DatasetRole { Train, Calibration, Validation };

std::string to_string(DatasetRole role);
DatasetRole dataset_role_from_string(const std::string& text);

struct Trajectory {
  Eigen::VectorXd initial_state;
  Eigen::MatrixXd states;  // n x K, column k-1 holds s_k
};

struct TrajectoryDataset {
  SystemSpec spec;
  std::size_t horizon = 0;
  DatasetRole role = DatasetRole::Train;
  std::uint64_t seed = 0;
  std::vector<Trajectory> records;
};

/// count i.i.d. records: record i uses the RNG substream derived from
/// (seed, i), so generation order and thread count do not matter.
TrajectoryDataset make_dataset(const SystemSpec& spec, std::size_t horizon, std::size_t count,
                               DatasetRole role, std::uint64_t seed, unsigned threads = 1);

}  // namespace pcaddreach
