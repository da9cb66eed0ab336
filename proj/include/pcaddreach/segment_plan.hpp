#pragma once

#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace pcaddreach {

/// Partition of the horizon 1..K into contiguous segments. Segment q covers
/// steps offsets[q] + 1 .. offsets[q] + lengths[q] (1-based steps), and
/// first_active is the first segment whose window reaches start_step.
struct SegmentPlan {
  std::size_t horizon = 0;
  std::vector<std::size_t> lengths;
  std::vector<std::size_t> offsets;
  std::size_t first_active = 0;

  std::size_t num_segments() const { return lengths.size(); }
  std::size_t segment_dim(std::size_t state_dim, std::size_t q) const {
    return state_dim * lengths[q];
  }
};

inline SegmentPlan make_plan(std::size_t horizon, std::vector<std::size_t> lengths,
                             std::size_t start_step = 1) {
  if (horizon == 0) throw std::invalid_argument("segment plan: horizon must be positive");
  if (lengths.empty()) throw std::invalid_argument("segment plan: no segments");
  for (std::size_t t : lengths)
    if (t == 0) throw std::invalid_argument("segment plan: zero-length segment");
  const std::size_t total = std::accumulate(lengths.begin(), lengths.end(), std::size_t{0});
  if (total != horizon)
    throw std::invalid_argument("segment plan: segment lengths must sum to the horizon");
  if (start_step < 1 || start_step > horizon)
    throw std::invalid_argument("segment plan: start_step outside 1..horizon");

  SegmentPlan plan;
  plan.horizon = horizon;
  plan.lengths = std::move(lengths);
  plan.offsets.resize(plan.lengths.size());
  std::size_t at = 0;
  for (std::size_t q = 0; q < plan.lengths.size(); ++q) {
    plan.offsets[q] = at;
    at += plan.lengths[q];
  }
  plan.first_active = 0;
  for (std::size_t q = 0; q < plan.lengths.size(); ++q) {
    if (plan.offsets[q] + plan.lengths[q] >= start_step) {
      plan.first_active = q;
      break;
    }
  }
  return plan;
}

inline SegmentPlan make_uniform_plan(std::size_t horizon, std::size_t segment_length = 1,
                                     std::size_t start_step = 1) {
  if (segment_length == 0) throw std::invalid_argument("segment plan: zero-length segment");
  if (horizon % segment_length != 0)
    throw std::invalid_argument("segment plan: horizon not divisible by segment length");
  return make_plan(horizon, std::vector<std::size_t>(horizon / segment_length, segment_length),
                   start_step);
}

}  // namespace pcaddreach
