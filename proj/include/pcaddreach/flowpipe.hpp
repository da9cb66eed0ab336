#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "pcaddreach/conformal.hpp"
#include "pcaddreach/mlp.hpp"
#include "pcaddreach/relu_reach.hpp"
#include "pcaddreach/segment_plan.hpp"
#include "pcaddreach/star.hpp"
#include "pcaddreach/systems.hpp"

namespace pcaddreach {

enum class FlowpipeKind { Surrogate, Confident };

std::string to_string(FlowpipeKind kind);
std::string to_string(ReachMode mode);

/// Per-active-segment star unions over s0 in the initial box. Exact mode
/// yields several stars per segment, approx mode exactly one. Confident
/// flowpipes also record the inflating hypercubes and calibration metadata.
struct Flowpipe {
  FlowpipeKind kind = FlowpipeKind::Surrogate;
  SegmentPlan plan;
  Eigen::Index state_dim = 0;
  ReachMode mode = ReachMode::Approx;
  std::vector<std::vector<StarSetd>> segments;  // index a <-> segment first_active + a

  // confident-only metadata
  double delta = std::numeric_limits<double>::quiet_NaN();
  double tau = std::numeric_limits<double>::quiet_NaN();
  double rho_star = std::numeric_limits<double>::quiet_NaN();
  std::string residual_kind;  // "pca" or "baseline"
  std::vector<StarSetd> hypercubes;

  std::size_t active_count() const { return segments.size(); }
};

/// Reach every active segment net over the initial box; nets[a] serves
/// segment plan.first_active + a.
Flowpipe surrogate_flowpipe(const std::vector<Mlpd>& nets, const SegmentPlan& plan,
                            Eigen::Index state_dim, const Boxd& initial_box,
                            const ReachSettings& settings, unsigned threads = 1);

/// Minkowski-add hypercubes[a] to every star of segment a.
Flowpipe confident_flowpipe(const Flowpipe& surrogate, const std::vector<StarSetd>& hypercubes);

/// Column-major stack of the segment's window of a simulated state matrix.
Eigen::VectorXd stack_segment(const Eigen::MatrixXd& states, const SegmentPlan& plan,
                              std::size_t q);

/// True when every active segment's stacked states lie in that segment's
/// star union.
bool trajectory_in_flowpipe(const Flowpipe& flowpipe, const Trajectory& trajectory,
                            double membership_tol = kMembershipTol);

struct CoverageReport {
  std::size_t trials = 0;
  std::size_t hits = 0;
  double coverage = 0.0;
  double delta = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::size_t> segment_violations;   // per active segment
  std::vector<std::size_t> first_violation;      // histogram over active segments
};

/// Monte-Carlo membership of fresh deployment trajectories; trial i uses the
/// RNG substream (seed, i).
CoverageReport validate_coverage(const Flowpipe& flowpipe, const SystemSpec& deployment,
                                 std::size_t trials, std::uint64_t seed, unsigned threads = 1);

/// Sum of log(2 h_j); -inf when any edge collapses.
double log_volume_from_halfwidths(const Eigen::VectorXd& halfwidths);

/// Cross-segment concatenation; requires one star per segment (approx mode).
StarSetd concatenated_star(const Flowpipe& flowpipe);

}  // namespace pcaddreach
