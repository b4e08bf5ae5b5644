#include "entdist/correlate.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <memory>
#include <numeric>
#include <string>

#include <fftw3.h>

namespace entdist {

namespace {

void require_sorted(const TagStream& stream, const char* which) {
  if (!std::is_sorted(stream.timestamps_ps.begin(), stream.timestamps_ps.end())) {
    throw std::invalid_argument(std::string("correlate: stream ") + which +
                                " must be sorted by timestamp");
  }
}

std::int64_t floor_div(std::int64_t x, std::int64_t d) {
  std::int64_t q = x / d;
  if ((x % d) != 0 && ((x < 0) != (d < 0))) --q;
  return q;
}

std::int64_t bin_count(std::int64_t lo, std::int64_t hi, std::int64_t width) {
  return (hi - lo + width - 1) / width;
}

// Mean lag of the integer timestamps covered by bin k, assuming a locally
// flat density: left edge plus (w-1)/2.
double bin_lag(const Histogram& h, std::size_t k) {
  return static_cast<double>(h.offset_ps) +
         static_cast<double>(k) * static_cast<double>(h.bin_width_ps) +
         static_cast<double>(h.bin_width_ps - 1) / 2.0;
}

void accumulate_direct(const std::vector<std::int64_t>& ta, const std::vector<std::int64_t>& tb,
                       Histogram& h) {
  const std::int64_t lo = h.offset_ps;
  const std::int64_t width = h.bin_width_ps;
  const std::int64_t span = width * static_cast<std::int64_t>(h.counts.size());
  std::size_t j0 = 0;
  for (std::int64_t t : ta) {
    const std::int64_t wlo = t + lo;
    const std::int64_t whi = wlo + span;
    while (j0 < tb.size() && tb[j0] < wlo) ++j0;
    for (std::size_t j = j0; j < tb.size() && tb[j] < whi; ++j) {
      ++h.counts[static_cast<std::size_t>((tb[j] - wlo) / width)];
    }
  }
}

Histogram lag_histogram_direct(const TagStream& a, const TagStream& b, std::int64_t lo,
                               std::int64_t nbins, std::int64_t width) {
  Histogram h;
  h.offset_ps = lo;
  h.bin_width_ps = width;
  h.counts.assign(static_cast<std::size_t>(std::max<std::int64_t>(nbins, 1)), 0);
  accumulate_direct(a.timestamps_ps, b.timestamps_ps, h);
  return h;
}

struct FftwPlanDeleter {
  void operator()(fftw_plan_s* p) const { fftw_destroy_plan(p); }
};
struct FftwFreeDeleter {
  void operator()(void* p) const { fftw_free(p); }
};

// Segmented (overlap-save) binned correlation: occupancy vectors A over the
// a-bins and B over the shifted b-bins are cross-correlated one FFT segment
// at a time, so memory stays bounded regardless of stream span.
Histogram lag_histogram_fft(const TagStream& a, const TagStream& b, std::int64_t lmin,
                            std::int64_t nlags, std::int64_t width) {
  Histogram h;
  h.offset_ps = lmin * width;
  h.bin_width_ps = width;
  h.counts.assign(static_cast<std::size_t>(std::max<std::int64_t>(nlags, 1)), 0);
  const auto& ta = a.timestamps_ps;
  const auto& tb = b.timestamps_ps;
  if (ta.empty() || tb.empty()) return h;

  const std::int64_t L = static_cast<std::int64_t>(h.counts.size());
  std::int64_t n = 1 << 18;
  while (n < 2 * L && n < (1 << 23)) n <<= 1;
  if (n < 2 * L) {
    throw std::invalid_argument("cross_correlate_fft: lag range too wide for the segmented transform");
  }
  const std::int64_t seg = n - L + 1;  // a-bins consumed per segment

  using Real = std::unique_ptr<double[], FftwFreeDeleter>;
  using Cplx = std::unique_ptr<fftw_complex[], FftwFreeDeleter>;
  const std::size_t nc = static_cast<std::size_t>(n / 2 + 1);
  Real a_real(fftw_alloc_real(static_cast<std::size_t>(n)));
  Real b_real(fftw_alloc_real(static_cast<std::size_t>(n)));
  Cplx a_spec(fftw_alloc_complex(nc));
  Cplx b_spec(fftw_alloc_complex(nc));
  if (!a_real || !b_real || !a_spec || !b_spec) throw std::bad_alloc();

  std::unique_ptr<fftw_plan_s, FftwPlanDeleter> plan_a(
      fftw_plan_dft_r2c_1d(static_cast<int>(n), a_real.get(), a_spec.get(), FFTW_ESTIMATE));
  std::unique_ptr<fftw_plan_s, FftwPlanDeleter> plan_b(
      fftw_plan_dft_r2c_1d(static_cast<int>(n), b_real.get(), b_spec.get(), FFTW_ESTIMATE));
  std::unique_ptr<fftw_plan_s, FftwPlanDeleter> plan_inv(
      fftw_plan_dft_c2r_1d(static_cast<int>(n), b_spec.get(), b_real.get(), FFTW_ESTIMATE));
  if (!plan_a || !plan_b || !plan_inv) throw std::runtime_error("fftw plan creation failed");

  const std::int64_t a_bin_first = floor_div(ta.front(), width);
  const std::int64_t a_bin_last = floor_div(ta.back(), width);
  std::size_t ia = 0;
  for (std::int64_t m0 = a_bin_first; m0 <= a_bin_last; m0 += seg) {
    std::memset(a_real.get(), 0, sizeof(double) * static_cast<std::size_t>(n));
    const std::int64_t a_end_ps = (m0 + seg) * width;
    const std::size_t ia_begin = ia;
    while (ia < ta.size() && ta[ia] < a_end_ps) {
      a_real[static_cast<std::size_t>(floor_div(ta[ia], width) - m0)] += 1.0;
      ++ia;
    }
    if (ia == ia_begin) continue;  // no a tags in this segment

    std::memset(b_real.get(), 0, sizeof(double) * static_cast<std::size_t>(n));
    const std::int64_t b_bin0 = m0 + lmin;
    const std::int64_t b_lo_ps = b_bin0 * width;
    const std::int64_t b_hi_ps = (b_bin0 + n) * width;
    auto jb = std::lower_bound(tb.begin(), tb.end(), b_lo_ps);
    bool b_any = false;
    for (; jb != tb.end() && *jb < b_hi_ps; ++jb) {
      b_real[static_cast<std::size_t>(floor_div(*jb, width) - b_bin0)] += 1.0;
      b_any = true;
    }
    if (!b_any) continue;

    fftw_execute(plan_a.get());
    fftw_execute(plan_b.get());
    for (std::size_t k = 0; k < nc; ++k) {
      const double ar = a_spec[k][0], ai = a_spec[k][1];
      const double br = b_spec[k][0], bi = b_spec[k][1];
      b_spec[k][0] = ar * br + ai * bi;  // conj(A) * B
      b_spec[k][1] = ar * bi - ai * br;
    }
    fftw_execute(plan_inv.get());
    const double scale = 1.0 / static_cast<double>(n);
    for (std::int64_t j = 0; j < L; ++j) {
      h.counts[static_cast<std::size_t>(j)] += std::llround(b_real[static_cast<std::size_t>(j)] * scale);
    }
  }
  return h;
}

// Expected pairs inside the lag range if the streams were uncorrelated; used
// to pick the direct sweep vs the binned transform.
double estimated_pair_ops(const TagStream& a, const TagStream& b, std::int64_t range_ps) {
  if (a.timestamps_ps.empty() || b.timestamps_ps.empty()) return 0.0;
  const double span_b = static_cast<double>(
      std::max<std::int64_t>(b.duration_ps, b.timestamps_ps.back() - b.timestamps_ps.front() + 1));
  const double rate_b = static_cast<double>(b.timestamps_ps.size()) / std::max(span_b, 1.0);
  return static_cast<double>(a.timestamps_ps.size()) * rate_b * static_cast<double>(range_ps);
}

// Expected uncorrelated pairs per lag bin for two Poisson streams with the
// observed extents and mean rates. The lag support overlap is a piecewise
// linear trapezoid in the lag, so the per-bin expectation is an exact
// segment-wise integral.
struct LagEnvelope {
  double a0 = 0.0, a1 = 0.0;  // extent of stream a
  double b0 = 0.0, b1 = 0.0;  // extent of stream b
  double rate_a = 0.0;        // tags per ps
  double rate_b = 0.0;

  double overlap(double lag) const {
    return std::max(0.0, std::min(a1, b1 - lag) - std::max(a0, b0 - lag));
  }

  double expected(double lag_lo, double lag_hi) const {
    // Integrate overlap() over [lag_lo, lag_hi], splitting at its kinks.
    double cuts[6] = {lag_lo, lag_hi, b0 - a1, b0 - a0, b1 - a1, b1 - a0};
    for (double& c : cuts) c = std::clamp(c, lag_lo, lag_hi);
    std::sort(std::begin(cuts), std::end(cuts));
    double integral = 0.0;
    for (int i = 0; i + 1 < 6; ++i) {
      integral += (cuts[i + 1] - cuts[i]) * 0.5 * (overlap(cuts[i]) + overlap(cuts[i + 1]));
    }
    return rate_a * rate_b * integral;
  }
};

LagEnvelope make_envelope(const TagStream& a, const TagStream& b) {
  LagEnvelope e;
  e.a0 = static_cast<double>(a.timestamps_ps.front());
  e.a1 = static_cast<double>(a.timestamps_ps.back());
  e.b0 = static_cast<double>(b.timestamps_ps.front());
  e.b1 = static_cast<double>(b.timestamps_ps.back());
  e.rate_a = static_cast<double>(a.timestamps_ps.size()) / std::max(e.a1 - e.a0, 1.0);
  e.rate_b = static_cast<double>(b.timestamps_ps.size()) / std::max(e.b1 - e.b0, 1.0);
  return e;
}

// Smallest count that a Poisson(lambda) bin reaches with probability at most
// alpha_bin, using the geometric upper bound on the tail
// P(X >= k) <= pmf(k) (k+1)/(k+1-lambda) for k > lambda. Floored at 3 so a
// couple of stray pairs never pass as a peak.
std::int64_t significance_threshold(double lambda, double alpha_bin) {
  std::int64_t k = std::max<std::int64_t>(
      3, static_cast<std::int64_t>(std::ceil(lambda + 4.0 * std::sqrt(lambda))));
  if (lambda <= 0.0) return k;
  double log_pmf = -lambda + static_cast<double>(k) * std::log(lambda) -
                   std::lgamma(static_cast<double>(k) + 1.0);
  while (true) {
    const double kp1 = static_cast<double>(k) + 1.0;
    const double tail_bound = std::exp(log_pmf) * kp1 / (kp1 - lambda);
    if (tail_bound <= alpha_bin) return k;
    ++k;
    log_pmf += std::log(lambda) - std::log(static_cast<double>(k));
  }
}

struct PeakCheck {
  bool significant = false;
  std::size_t argmax = 0;     // most significant bin
  std::int64_t total = 0;     // pairs in the whole histogram
};

// A bin is a peak candidate when its count clears the Bonferroni-corrected
// Poisson threshold over its own expected accidental level; among candidates
// the one with the largest excess wins.
PeakCheck locate_peak(const Histogram& h, const LagEnvelope& envelope) {
  PeakCheck p;
  const double alpha_bin = 2.8665e-7 / static_cast<double>(h.counts.size());  // one-sided 5 sigma
  double best_excess = 0.0;
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    p.total += h.counts[i];
    if (h.counts[i] < 3) continue;
    const double lo = static_cast<double>(h.offset_ps) +
                      static_cast<double>(i) * static_cast<double>(h.bin_width_ps);
    const double lambda = envelope.expected(lo, lo + static_cast<double>(h.bin_width_ps));
    // The threshold never sits below lambda + 4 sqrt(lambda); skip the exact
    // tail walk for bins that cannot reach it.
    if (static_cast<double>(h.counts[i]) < lambda + 4.0 * std::sqrt(lambda)) continue;
    if (h.counts[i] < significance_threshold(lambda, alpha_bin)) continue;
    const double excess = static_cast<double>(h.counts[i]) - lambda;
    if (!p.significant || excess > best_excess) {
      p.significant = true;
      p.argmax = i;
      best_excess = excess;
    }
  }
  return p;
}

// Floor-subtracted centroid of the peak. The integration region comes from a
// moving-average smoothed copy of the histogram: take the smoothed profile's
// above-half-maximum span and pad it by its own width on each side. Smoothing
// keeps a single sparse bin from truncating the span, and the padded region
// covers the full peak so the centroid keeps the counts' location precision
// without picking up empty-wing noise at long lever arms. A peak confined to
// one bin still yields that bin exactly.
double peak_centroid(const Histogram& h) {
  const auto it = std::max_element(h.counts.begin(), h.counts.end());
  const std::size_t argmax = static_cast<std::size_t>(it - h.counts.begin());
  const std::size_t n = h.counts.size();
  double floor = 0.0;
  if (n >= 8) {
    std::int64_t sum = 0;
    std::int64_t used = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (i >= n / 4 && i < n - n / 4) continue;  // outer quarters only
      sum += h.counts[i];
      ++used;
    }
    floor = used > 0 ? static_cast<double>(sum) / static_cast<double>(used) : 0.0;
  }
  // Centered moving average; the prefix-sum form keeps it O(n).
  const std::size_t m = std::max<std::size_t>(1, n / 64);
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    prefix[i + 1] = prefix[i] + static_cast<double>(h.counts[i]);
  }
  auto smoothed = [&](std::size_t i) {
    const std::size_t lo = i >= m / 2 ? i - m / 2 : 0;
    const std::size_t hi = std::min(n, i + (m + 1) / 2);
    return (prefix[hi] - prefix[lo]) / static_cast<double>(hi - lo) - floor;
  };
  std::size_t peak = argmax;
  double peak_level = smoothed(argmax);
  for (std::size_t i = 0; i < n; ++i) {
    const double s = smoothed(i);
    if (s > peak_level) {
      peak_level = s;
      peak = i;
    }
  }
  const double half_level = peak_level / 2.0;
  std::size_t lo = peak;
  while (lo > 0 && smoothed(lo - 1) >= half_level) --lo;
  std::size_t hi = peak;
  while (hi + 1 < n && smoothed(hi + 1) >= half_level) ++hi;
  const std::size_t width = hi - lo + 1;
  lo = lo >= width ? lo - width : 0;
  hi = std::min(n - 1, hi + width);
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = lo; i <= hi; ++i) {
    const double w = static_cast<double>(h.counts[i]) - floor;
    if (w <= 0.0) continue;
    num += w * bin_lag(h, i);
    den += w;
  }
  return den > 0.0 ? num / den : bin_lag(h, argmax);
}

}  // namespace

void validate_delay_spec(const DelaySearchSpec& spec) {
  if (spec.min_delay_ps > spec.max_delay_ps) {
    throw std::invalid_argument("delay search: min_delay_ps must not exceed max_delay_ps");
  }
  if (spec.coarse_bin_ps < 1 || spec.final_bin_ps < 1) {
    throw std::invalid_argument("delay search: bin widths must be >= 1 ps");
  }
  if (spec.final_bin_ps > spec.coarse_bin_ps) {
    throw std::invalid_argument("delay search: final_bin_ps must not exceed coarse_bin_ps");
  }
  if (spec.refine_factor < 2) {
    throw std::invalid_argument("delay search: refine_factor must be >= 2");
  }
}

std::int64_t default_accidental_offset_ps(std::int64_t window_ps) {
  return std::max<std::int64_t>(100 * window_ps, 10'000);
}

Histogram cross_correlate(const TagStream& a, const TagStream& b, std::int64_t center_delay_ps,
                          std::int64_t half_range_ps, std::int64_t bin_width_ps) {
  if (bin_width_ps < 1) throw std::invalid_argument("cross_correlate: bin_width_ps must be >= 1");
  if (half_range_ps < bin_width_ps) {
    throw std::invalid_argument("cross_correlate: half_range_ps must be >= bin_width_ps");
  }
  require_sorted(a, "a");
  require_sorted(b, "b");
  const std::int64_t lo = center_delay_ps - half_range_ps;
  const std::int64_t nbins = bin_count(lo, center_delay_ps + half_range_ps, bin_width_ps);
  return lag_histogram_direct(a, b, lo, nbins, bin_width_ps);
}

Histogram cross_correlate_fft(const TagStream& a, const TagStream& b, std::int64_t center_delay_ps,
                              std::int64_t half_range_ps, std::int64_t bin_width_ps) {
  if (bin_width_ps < 1) throw std::invalid_argument("cross_correlate: bin_width_ps must be >= 1");
  if (half_range_ps < bin_width_ps) {
    throw std::invalid_argument("cross_correlate: half_range_ps must be >= bin_width_ps");
  }
  require_sorted(a, "a");
  require_sorted(b, "b");
  const std::int64_t lmin = floor_div(center_delay_ps - half_range_ps, bin_width_ps);
  const std::int64_t lmax = floor_div(center_delay_ps + half_range_ps - 1, bin_width_ps);
  return lag_histogram_fft(a, b, lmin, lmax - lmin + 1, bin_width_ps);
}

double find_delay(const TagStream& a, const TagStream& b, const DelaySearchSpec& spec) {
  validate_delay_spec(spec);
  require_sorted(a, "a");
  require_sorted(b, "b");
  if (a.timestamps_ps.empty() || b.timestamps_ps.empty()) {
    throw no_peak_error("find_delay: no significant peak (empty stream)");
  }

  const std::int64_t range = spec.max_delay_ps - spec.min_delay_ps + 1;
  const bool use_fft = estimated_pair_ops(a, b, range) > 1e9;
  const LagEnvelope envelope = make_envelope(a, b);

  // A genuine coincidence peak is much narrower than the coarse bin, so its
  // contrast over the flat accidental level grows as the bin shrinks. Retry
  // at progressively finer coarse bins before giving up.
  Histogram h;
  PeakCheck p;
  std::int64_t coarse = spec.coarse_bin_ps;
  for (int scale = 0; scale < 3; ++scale) {
    if (use_fft) {
      const std::int64_t lmin = floor_div(spec.min_delay_ps, coarse);
      const std::int64_t lmax = floor_div(spec.max_delay_ps, coarse);
      h = lag_histogram_fft(a, b, lmin, lmax - lmin + 1, coarse);
    } else {
      h = lag_histogram_direct(a, b, spec.min_delay_ps,
                               bin_count(spec.min_delay_ps, spec.max_delay_ps + 1, coarse),
                               coarse);
    }
    p = locate_peak(h, envelope);
    if (p.significant) break;
    if (p.total <= 0) throw no_peak_error("find_delay: no significant peak (no pairs in range)");
    const std::int64_t next = std::max(spec.final_bin_ps, coarse / spec.refine_factor);
    if (next == coarse) break;
    if (use_fft && 2 * (range / next + 1) > (std::int64_t{1} << 23)) break;  // transform cap
    coarse = next;
  }
  if (!p.significant) {
    throw no_peak_error(
        "find_delay: no significant peak (no bin clears 5 sigma over its accidental level)");
  }

  double estimate = bin_lag(h, p.argmax);
  std::int64_t bin = h.bin_width_ps;
  while (bin > spec.final_bin_ps) {
    const std::int64_t next = std::max(spec.final_bin_ps, bin / spec.refine_factor);
    const std::int64_t half = std::max(4 * bin, 512 * next);
    const std::int64_t center = static_cast<std::int64_t>(std::llround(estimate));
    std::int64_t lo = std::max(spec.min_delay_ps, center - half);
    std::int64_t hi = std::min(spec.max_delay_ps + 1, center + half);
    if (hi <= lo) hi = lo + next;
    h = lag_histogram_direct(a, b, lo, bin_count(lo, hi, next), next);
    const auto it = std::max_element(h.counts.begin(), h.counts.end());
    if (*it <= 0) throw no_peak_error("find_delay: no significant peak (lost during refinement)");
    estimate = bin_lag(h, static_cast<std::size_t>(it - h.counts.begin()));
    bin = next;
  }
  return peak_centroid(h);
}

CoincidenceResult count_coincidences(const TagStream& a, const TagStream& b, double delay_ps,
                                     std::int64_t window_ps, std::int64_t accidental_offset_ps,
                                     int accidental_windows) {
  if (window_ps <= 0) throw std::invalid_argument("count_coincidences: window_ps must be positive");
  if (accidental_offset_ps <= window_ps) {
    throw std::invalid_argument(
        "count_coincidences: accidental_offset_ps must exceed window_ps (windows would overlap)");
  }
  if (accidental_windows < 1) {
    throw std::invalid_argument("count_coincidences: accidental_windows must be >= 1");
  }
  require_sorted(a, "a");
  require_sorted(b, "b");

  const double half = static_cast<double>(window_ps) / 2.0;
  const auto& ta = a.timestamps_ps;
  const auto& tb = b.timestamps_ps;
  auto matched = [&](double shift) {
    std::int64_t n = 0;
    std::size_t i = 0, j = 0;
    while (i < ta.size() && j < tb.size()) {
      const double d = static_cast<double>(tb[j]) - static_cast<double>(ta[i]) - shift;
      if (d < -half) {
        ++j;
      } else if (d > half) {
        ++i;
      } else {
        ++n;
        ++i;
        ++j;
      }
    }
    return n;
  };

  CoincidenceResult r;
  r.coincidences = matched(delay_ps);
  r.accidental_windows = accidental_windows;
  for (int k = 1; k <= accidental_windows; ++k) {
    r.accidentals_total += matched(delay_ps + static_cast<double>(accidental_offset_ps) * k);
  }
  r.accidentals = static_cast<double>(r.accidentals_total) / accidental_windows;
  r.window_ps = static_cast<double>(window_ps);
  r.delay_ps = delay_ps;
  const std::int64_t span = std::max(
      {a.duration_ps, b.duration_ps, ta.empty() ? std::int64_t{0} : ta.back(),
       tb.empty() ? std::int64_t{0} : tb.back()});
  r.integration_s = static_cast<double>(span) * 1e-12;
  r.car = car_with_floor(r.coincidences, r.accidentals_total, accidental_windows, &r.car_lower_bound);
  return r;
}

std::vector<WindowCarRow> car_vs_window(const TagStream& a, const TagStream& b, double delay_ps,
                                        const std::vector<std::int64_t>& windows_ps,
                                        std::int64_t accidental_offset_ps, int accidental_windows) {
  if (windows_ps.empty()) throw std::invalid_argument("car_vs_window: windows_ps must be nonempty");
  for (std::size_t i = 0; i < windows_ps.size(); ++i) {
    if (windows_ps[i] <= 0) throw std::invalid_argument("car_vs_window: windows must be positive");
    if (i > 0 && windows_ps[i] <= windows_ps[i - 1]) {
      throw std::invalid_argument("car_vs_window: windows must be ascending");
    }
  }
  std::vector<WindowCarRow> rows;
  rows.reserve(windows_ps.size());
  for (std::int64_t w : windows_ps) {
    const std::int64_t offset =
        accidental_offset_ps > 0 ? accidental_offset_ps : default_accidental_offset_ps(w);
    rows.push_back({w, count_coincidences(a, b, delay_ps, w, offset, accidental_windows)});
  }
  return rows;
}

}  // namespace entdist
