#include "entdist/tags.hpp"

#include <stdexcept>
#include <string>

namespace entdist {

void validate_stream(const TagStream& stream) {
  if (stream.resolution_ps < 1) {
    throw std::invalid_argument("stream.resolution_ps must be at least 1");
  }
  if (stream.duration_ps < 0) {
    throw std::invalid_argument("stream.duration_ps must be nonnegative");
  }
  std::int64_t previous = 0;
  for (std::size_t i = 0; i < stream.timestamps_ps.size(); ++i) {
    const std::int64_t t = stream.timestamps_ps[i];
    if (t < 0) {
      throw std::invalid_argument("stream timestamp at index " + std::to_string(i) +
                                  " is negative");
    }
    if (i > 0 && t < previous) {
      throw std::invalid_argument("stream timestamps not nondecreasing at index " +
                                  std::to_string(i));
    }
    if (t % stream.resolution_ps != 0) {
      throw std::invalid_argument("stream timestamp at index " + std::to_string(i) +
                                  " is not a multiple of resolution_ps");
    }
    if (t > stream.duration_ps) {
      throw std::invalid_argument("stream timestamp at index " + std::to_string(i) +
                                  " exceeds duration_ps");
    }
    previous = t;
  }
}

void apply_dead_time(std::vector<std::int64_t>& timestamps_ps, double dead_time_ps) {
  if (dead_time_ps <= 0 || timestamps_ps.empty()) return;
  std::size_t kept = 1;
  std::int64_t last_accepted = timestamps_ps[0];
  for (std::size_t i = 1; i < timestamps_ps.size(); ++i) {
    if (static_cast<double>(timestamps_ps[i] - last_accepted) >= dead_time_ps) {
      timestamps_ps[kept++] = timestamps_ps[i];
      last_accepted = timestamps_ps[i];
    }
  }
  timestamps_ps.resize(kept);
}

}  // namespace entdist
