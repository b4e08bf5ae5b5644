#pragma once

#include <cstdint>
#include <vector>

namespace entdist {

struct TimeTag {
  std::int64_t timestamp_ps = 0;  // event time, integer picoseconds
  std::uint32_t channel = 0;      // detector channel id
};

// One detector channel's event record. Tags may run past the nominal
// acquisition length (late arrivals are retained), so duration_ps always
// covers the last tag.
struct TagStream {
  std::uint32_t channel = 0;
  std::int64_t resolution_ps = 1;            // timestamp quantum
  std::int64_t duration_ps = 0;              // acquisition span
  std::vector<std::int64_t> timestamps_ps;   // nondecreasing, nonnegative
};

// Throws std::invalid_argument naming the violated invariant:
// sortedness, nonnegativity, duration cover, resolution multiples.
void validate_stream(const TagStream& stream);

// Non-paralyzable dead time: drops tags closer than dead_time_ps after the
// last accepted tag. No-op for dead_time_ps <= 0.
void apply_dead_time(std::vector<std::int64_t>& timestamps_ps, double dead_time_ps);

}  // namespace entdist
