#pragma once

#include <cstdint>
#include <vector>

namespace entdist {

struct Histogram {
  std::int64_t offset_ps = 0;        // delay of the left edge of bin 0
  std::int64_t bin_width_ps = 1;     // bin width
  std::vector<std::int64_t> counts;  // per-bin counts
};

void validate_histogram(const Histogram& hist);

// Center of bin i in delay units.
double histogram_bin_center_ps(const Histogram& hist, std::size_t i);

// Full width at half maximum of the tallest feature: linear interpolation
// between the half-maximum crossings on either side of the global peak,
// measured against a zero baseline. A single isolated bin reports one
// bin width; a flat histogram has no peak and is rejected.
double histogram_fwhm(const Histogram& hist);

}  // namespace entdist
