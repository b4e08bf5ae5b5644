#include "entdist/histogram.hpp"

#include <algorithm>
#include <stdexcept>

namespace entdist {

void validate_histogram(const Histogram& hist) {
  if (hist.bin_width_ps < 1) {
    throw std::invalid_argument("histogram: bin_width_ps must be >= 1");
  }
  if (hist.counts.empty()) {
    throw std::invalid_argument("histogram: counts must hold at least one bin");
  }
  for (std::int64_t c : hist.counts) {
    if (c < 0) throw std::invalid_argument("histogram: counts must be nonnegative");
  }
}

double histogram_bin_center_ps(const Histogram& hist, std::size_t i) {
  return static_cast<double>(hist.offset_ps) +
         (static_cast<double>(i) + 0.5) * static_cast<double>(hist.bin_width_ps);
}

double histogram_fwhm(const Histogram& hist) {
  validate_histogram(hist);
  const auto& c = hist.counts;
  const auto [min_it, max_it] = std::minmax_element(c.begin(), c.end());
  if (*min_it == *max_it) {
    throw std::invalid_argument("histogram_fwhm: no peak (all counts equal)");
  }
  const std::size_t p = static_cast<std::size_t>(max_it - c.begin());
  const double half = static_cast<double>(*max_it) / 2.0;
  const double width = static_cast<double>(hist.bin_width_ps);

  // Walk outward from the peak; interpolate the crossing between the last bin
  // at or above half maximum and the first bin below it. If a side never
  // drops below half, the crossing clamps to that side's outermost center.
  double left = histogram_bin_center_ps(hist, 0);
  for (std::size_t i = p; i-- > 0;) {
    const double lo = static_cast<double>(c[i]);
    if (lo < half) {
      const double hi = static_cast<double>(c[i + 1]);
      left = histogram_bin_center_ps(hist, i) + (half - lo) / (hi - lo) * width;
      break;
    }
  }
  double right = histogram_bin_center_ps(hist, c.size() - 1);
  for (std::size_t i = p + 1; i < c.size(); ++i) {
    const double lo = static_cast<double>(c[i]);
    if (lo < half) {
      const double hi = static_cast<double>(c[i - 1]);
      right = histogram_bin_center_ps(hist, i) - (half - lo) / (hi - lo) * width;
      break;
    }
  }
  return right - left;
}

}  // namespace entdist
