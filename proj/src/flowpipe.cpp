#include "pcaddreach/flowpipe.hpp"

#include <cmath>
#include <stdexcept>

#include "pcaddreach/parallel.hpp"
#include "pcaddreach/rng.hpp"

namespace pcaddreach {

std::string to_string(FlowpipeKind kind) {
  return kind == FlowpipeKind::Surrogate ? "surrogate" : "confident";
}

std::string to_string(ReachMode mode) { return mode == ReachMode::Exact ? "exact" : "approx"; }

Flowpipe surrogate_flowpipe(const std::vector<Mlpd>& nets, const SegmentPlan& plan,
                            Eigen::Index state_dim, const Boxd& initial_box,
                            const ReachSettings& settings, unsigned threads) {
  const std::size_t active = plan.num_segments() - plan.first_active;
  if (nets.size() != active)
    throw std::invalid_argument("surrogate_flowpipe: one net per active segment required");
  if (initial_box.dim() != state_dim)
    throw std::invalid_argument("surrogate_flowpipe: initial box dimension mismatch");

  Flowpipe pipe;
  pipe.kind = FlowpipeKind::Surrogate;
  pipe.plan = plan;
  pipe.state_dim = state_dim;
  pipe.mode = settings.mode;
  pipe.segments.resize(active);
  const StarSetd input = from_box(initial_box);
  parallel_for(active, threads,
               [&](std::size_t a) { pipe.segments[a] = network_reach(nets[a], input, settings); });
  return pipe;
}

Flowpipe confident_flowpipe(const Flowpipe& surrogate, const std::vector<StarSetd>& hypercubes) {
  if (surrogate.kind != FlowpipeKind::Surrogate)
    throw std::invalid_argument("confident_flowpipe: input must be a surrogate flowpipe");
  if (hypercubes.size() != surrogate.active_count())
    throw std::invalid_argument("confident_flowpipe: one hypercube per active segment required");

  Flowpipe pipe = surrogate;
  pipe.kind = FlowpipeKind::Confident;
  pipe.hypercubes = hypercubes;
  for (std::size_t a = 0; a < pipe.segments.size(); ++a) {
    if (hypercubes[a].dim() != static_cast<Eigen::Index>(surrogate.plan.segment_dim(
                                   static_cast<std::size_t>(surrogate.state_dim),
                                   surrogate.plan.first_active + a)))
      throw std::invalid_argument("confident_flowpipe: hypercube dimension mismatch");
    for (auto& star : pipe.segments[a]) star = minkowski_sum(star, hypercubes[a]);
  }
  return pipe;
}

Eigen::VectorXd stack_segment(const Eigen::MatrixXd& states, const SegmentPlan& plan,
                              std::size_t q) {
  Eigen::MatrixXd window = states.middleCols(static_cast<Eigen::Index>(plan.offsets[q]),
                                             static_cast<Eigen::Index>(plan.lengths[q]));
  return Eigen::Map<Eigen::VectorXd>(window.data(), window.size());
}

bool trajectory_in_flowpipe(const Flowpipe& flowpipe, const Trajectory& trajectory,
                            double membership_tol) {
  for (std::size_t a = 0; a < flowpipe.active_count(); ++a) {
    const std::size_t q = flowpipe.plan.first_active + a;
    Eigen::VectorXd x = stack_segment(trajectory.states, flowpipe.plan, q);
    bool inside = false;
    for (const auto& star : flowpipe.segments[a])
      if (contains(star, x, membership_tol)) {
        inside = true;
        break;
      }
    if (!inside) return false;
  }
  return true;
}

CoverageReport validate_coverage(const Flowpipe& flowpipe, const SystemSpec& deployment,
                                 std::size_t trials, std::uint64_t seed, unsigned threads) {
  if (trials == 0) throw std::invalid_argument("validate_coverage: trials must be >= 1");
  const std::size_t active = flowpipe.active_count();
  const Eigen::Index n = deployment.state_dim;
  if (n != flowpipe.state_dim)
    throw std::invalid_argument("validate_coverage: system dimension mismatch");

  // slot per trial: bitmask of violated segments would cap at 64; store flags
  std::vector<std::vector<char>> violated(trials);
  parallel_for(trials, threads, [&](std::size_t i) {
    RandomStream rng(substream_seed(seed, i));
    Eigen::VectorXd s0(n);
    for (Eigen::Index d = 0; d < n; ++d)
      s0(d) = rng.uniform(deployment.initial_box.lower(d), deployment.initial_box.upper(d));
    Eigen::MatrixXd states = simulate(deployment, s0, flowpipe.plan.horizon, rng);

    std::vector<char> flags(active, 0);
    for (std::size_t a = 0; a < active; ++a) {
      const std::size_t q = flowpipe.plan.first_active + a;
      Eigen::VectorXd x = stack_segment(states, flowpipe.plan, q);
      bool inside = false;
      for (const auto& star : flowpipe.segments[a])
        if (contains(star, x)) {
          inside = true;
          break;
        }
      if (!inside) flags[a] = 1;
    }
    violated[i] = std::move(flags);
  });

  CoverageReport report;
  report.trials = trials;
  report.delta = flowpipe.delta;
  report.segment_violations.assign(active, 0);
  report.first_violation.assign(active, 0);
  for (std::size_t i = 0; i < trials; ++i) {
    bool any = false;
    for (std::size_t a = 0; a < active; ++a) {
      if (!violated[i][a]) continue;
      report.segment_violations[a] += 1;
      if (!any) report.first_violation[a] += 1;
      any = true;
    }
    if (!any) report.hits += 1;
  }
  report.coverage = static_cast<double>(report.hits) / static_cast<double>(trials);
  return report;
}

double log_volume_from_halfwidths(const Eigen::VectorXd& halfwidths) {
  double total = 0.0;
  for (Eigen::Index j = 0; j < halfwidths.size(); ++j) {
    if (halfwidths(j) <= 0.0) return -std::numeric_limits<double>::infinity();
    total += std::log(2.0 * halfwidths(j));
  }
  return total;
}

StarSetd concatenated_star(const Flowpipe& flowpipe) {
  std::vector<StarSetd> parts;
  parts.reserve(flowpipe.active_count());
  for (const auto& segment : flowpipe.segments) {
    if (segment.size() != 1)
      throw std::invalid_argument(
          "concatenated_star: segments must hold exactly one star (approx mode)");
    parts.push_back(segment.front());
  }
  return concatenate(parts);
}

}  // namespace pcaddreach
