#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "pcaddreach/config.hpp"

namespace pcaddreach {

struct MissingArtifactError : std::runtime_error {
  MissingArtifactError(const std::string& path, const std::string& producing_phase)
      : std::runtime_error("missing artifact " + path + "; run the '" + producing_phase +
                           "' phase first") {}
};

/// Config-driven orchestration. Every phase reads its inputs from the output
/// directory and writes its own artifacts there, so `run` and manual phase
/// chaining produce identical files. All artifacts except timings.json are
/// byte-deterministic for a fixed config, independent of the thread count.
class Pipeline {
 public:
  Pipeline(RunConfig config, std::string out_dir, unsigned threads);

  void run_phase(const std::string& name);
  void run_all();

  static const std::vector<std::string>& phase_names();

  // artifact paths under the output directory
  std::string train_csv() const;
  std::string train_meta() const;
  std::string calibration_csv() const;
  std::string calibration_meta() const;
  std::string model_path(std::size_t segment) const;
  std::string model_summary() const;
  std::string surrogate_flowpipe_path() const;
  std::string error_model_path() const;
  std::string baseline_model_path() const;
  std::string confident_flowpipe_path() const;
  std::string secondary_flowpipe_path() const;  // compare mode, the other method
  std::string coverage_path() const;
  std::string secondary_coverage_path() const;
  std::string bounds_csv_path() const;
  std::string comparison_path() const;
  std::string timings_path() const;

 private:
  void phase_simulate();
  void phase_train();
  void phase_reach();
  void phase_calibrate();
  void phase_inflate();
  void phase_validate();
  void phase_report();

  std::vector<Mlpd> load_nets() const;
  void require_artifact(const std::string& path, const std::string& producing_phase) const;
  void record_timing(const std::string& phase, double seconds) const;

  RunConfig config_;
  std::string out_;
  unsigned threads_;
};

}  // namespace pcaddreach
