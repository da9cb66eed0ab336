#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <cstddef>
#include <vector>

#include "pcaddreach/dataset.hpp"
#include "pcaddreach/mlp.hpp"
#include "pcaddreach/segment_plan.hpp"

namespace pcaddreach {

/// PerSegment: z-score statistics of each segment's own targets.
/// SharedComponents: one statistic per state component, pooled over every
/// step of the horizon and tiled across the segment. All segments of equal
/// length then carry identical normalizers, which parameter interpolation
/// between segment nets requires.
enum class Normalization { PerSegment, SharedComponents };

struct TrainConfig {
  std::vector<Eigen::Index> hidden_widths{16};
  std::size_t epochs = 200;
  double learning_rate = 1e-3;
  std::size_t batch_size = 128;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double validation_fraction = 0.1;
  std::uint64_t seed = 0;
  Normalization normalization = Normalization::PerSegment;
};

struct TrainResult {
  Mlpd net;
  std::vector<double> epoch_losses;  // mean normalized-space MSE per epoch
  double validation_rmse = 0.0;      // raw units, held-out records
};

/// Fit the segment-q surrogate s0 -> (s_{t_q+1}, ..., s_{t_q+T_q}) stacked
/// step-major. The last floor(count * validation_fraction) records are held
/// out; normalizers come from the fitting subset only. Deterministic given
/// cfg.seed.
TrainResult train_segment(const TrajectoryDataset& dataset, const SegmentPlan& plan, std::size_t q,
                          const TrainConfig& cfg);

}  // namespace pcaddreach
