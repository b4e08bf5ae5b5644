#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "entdist/histogram.hpp"
#include "entdist/physics.hpp"
#include "entdist/tags.hpp"

namespace entdist {

// Raised when a delay search finds no bin significantly above the accidental floor.
struct no_peak_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DelaySearchSpec {
  std::int64_t min_delay_ps = -1'000'000'000;  // search range lower edge
  std::int64_t max_delay_ps = 1'000'000'000;   // search range upper edge
  std::int64_t coarse_bin_ps = 1'000'000;      // first-stage bin width
  int refine_factor = 16;                      // bin shrink per refinement round
  std::int64_t final_bin_ps = 1;               // last-stage bin width
};

void validate_delay_spec(const DelaySearchSpec& spec);

// Default shifted-window offset for accidental estimation at a given window.
std::int64_t default_accidental_offset_ps(std::int64_t window_ps);

// Pair-difference histogram: bin k counts pairs with
// t_b - t_a in [offset + k*w, offset + (k+1)*w), offset = center - half_range.
// Exact, via one sorted two-pointer sweep; cost is linear in tags plus pairs
// inside the lag range.
Histogram cross_correlate(const TagStream& a, const TagStream& b, std::int64_t center_delay_ps,
                          std::int64_t half_range_ps, std::int64_t bin_width_ps);

// Same histogram computed from per-bin occupancies with segmented FFT
// correlation. Bins are aligned to absolute multiples of the bin width and a
// pair lands in bin floor(t_b/w) - floor(t_a/w), i.e. within one bin of its
// exact lag bin. Used for wide coarse searches where the direct sweep would
// touch too many pairs; cost is independent of the pair count.
Histogram cross_correlate_fft(const TagStream& a, const TagStream& b, std::int64_t center_delay_ps,
                              std::int64_t half_range_ps, std::int64_t bin_width_ps);

// Hierarchical delay search: coarse lag histogram over the full range, then
// repeated re-histogramming around the running peak at bin/refine_factor down
// to final_bin, finishing with a floor-subtracted centroid over the
// above-half-maximum region of the last histogram. Throws no_peak_error when
// the coarse maximum is not 5 sigma above the accidental floor.
double find_delay(const TagStream& a, const TagStream& b, const DelaySearchSpec& spec = {});

// Greedy earliest-first one-to-one matching; tags pair when
// |t_b - t_a - delay| <= window/2 and each tag is used at most once.
// Accidentals are counted identically at delay + offset*k for
// k = 1..accidental_windows.
CoincidenceResult count_coincidences(const TagStream& a, const TagStream& b, double delay_ps,
                                     std::int64_t window_ps, std::int64_t accidental_offset_ps,
                                     int accidental_windows = 1);

struct WindowCarRow {
  std::int64_t window_ps = 0;  // evaluated coincidence window
  CoincidenceResult result;    // counts at that window
};

// One count_coincidences evaluation per window (ascending). A zero
// accidental_offset_ps selects the default offset rule per window.
std::vector<WindowCarRow> car_vs_window(const TagStream& a, const TagStream& b, double delay_ps,
                                        const std::vector<std::int64_t>& windows_ps,
                                        std::int64_t accidental_offset_ps = 0,
                                        int accidental_windows = 1);

}  // namespace entdist
