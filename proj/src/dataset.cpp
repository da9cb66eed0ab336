#include "pcaddreach/dataset.hpp"

#include <stdexcept>

#include "pcaddreach/parallel.hpp"

namespace pcaddreach {

std::string to_string(DatasetRole role) {
  switch (role) {
    case DatasetRole::Train: return "train";
    case DatasetRole::Calibration: return "calibration";
    case DatasetRole::Validation: return "validation";
  }
  throw std::logic_error("unknown dataset role");
}

DatasetRole dataset_role_from_string(const std::string& text) {
  if (text == "train") return DatasetRole::Train;
  if (text == "calibration") return DatasetRole::Calibration;
  if (text == "validation") return DatasetRole::Validation;
  throw std::invalid_argument("unknown dataset role: " + text);
}

TrajectoryDataset make_dataset(const SystemSpec& spec, std::size_t horizon, std::size_t count,
                               DatasetRole role, std::uint64_t seed, unsigned threads) {
  if (count == 0) throw std::invalid_argument("make_dataset: count must be at least 1");
  if (horizon == 0) throw std::invalid_argument("make_dataset: horizon must be at least 1");

  TrajectoryDataset dataset;
  dataset.spec = spec;
  dataset.horizon = horizon;
  dataset.role = role;
  dataset.seed = seed;
  dataset.records.resize(count);

  const Eigen::Index n = spec.state_dim;
  parallel_for(count, threads, [&](std::size_t i) {
    RandomStream rng(substream_seed(seed, i));
    Trajectory& rec = dataset.records[i];
    rec.initial_state.resize(n);
    for (Eigen::Index d = 0; d < n; ++d)
      rec.initial_state(d) = rng.uniform(spec.initial_box.lower(d), spec.initial_box.upper(d));
    rec.states = simulate(spec, rec.initial_state, horizon, rng);
  });
  return dataset;
}

}  // namespace pcaddreach
