#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "entdist/correlate.hpp"
#include "entdist/rng.hpp"

using namespace entdist;

namespace {

TagStream make_stream(std::vector<std::int64_t> tags, std::uint32_t channel = 0) {
  TagStream s;
  s.channel = channel;
  s.timestamps_ps = std::move(tags);
  s.duration_ps = s.timestamps_ps.empty() ? 0 : s.timestamps_ps.back();
  return s;
}

TagStream poisson_stream(double rate_cps, double duration_s, std::uint64_t seed,
                         const char* label) {
  RandomStream rng(seed, label, 0);
  std::vector<std::int64_t> tags;
  double t = 0.0;
  const double end = duration_s * 1e12;
  const double rate_per_ps = rate_cps * 1e-12;
  while (true) {
    t += rng.exponential(rate_per_ps);
    if (t >= end) break;
    tags.push_back(std::llround(t));
  }
  TagStream s = make_stream(std::move(tags));
  s.duration_ps = static_cast<std::int64_t>(end);
  return s;
}

TagStream sorted_uniform_stream(std::size_t n, std::int64_t span, RandomStream& rng) {
  std::vector<std::int64_t> tags(n);
  for (auto& t : tags) t = static_cast<std::int64_t>(rng.uniform_index(std::uint64_t(span)));
  std::sort(tags.begin(), tags.end());
  return make_stream(std::move(tags));
}

// O(N^2) reference for the greedy earliest-first one-to-one matching.
std::int64_t brute_coincidences(const TagStream& a, const TagStream& b, double delay,
                                std::int64_t window) {
  const double half = static_cast<double>(window) / 2.0;
  std::vector<bool> used(b.timestamps_ps.size(), false);
  std::int64_t n = 0;
  for (std::int64_t t : a.timestamps_ps) {
    for (std::size_t j = 0; j < b.timestamps_ps.size(); ++j) {
      if (used[j]) continue;
      const double d = static_cast<double>(b.timestamps_ps[j]) - static_cast<double>(t) - delay;
      if (d < -half) continue;
      if (d > half) break;
      used[j] = true;
      ++n;
      break;
    }
  }
  return n;
}

std::int64_t floor_div_ref(std::int64_t x, std::int64_t d) {
  std::int64_t q = x / d;
  if ((x % d) != 0 && ((x < 0) != (d < 0))) --q;
  return q;
}

// O(N^2) reference for the exact-lag histogram binning.
Histogram brute_hist(const TagStream& a, const TagStream& b, std::int64_t center,
                     std::int64_t half_range, std::int64_t bin) {
  Histogram h;
  h.offset_ps = center - half_range;
  h.bin_width_ps = bin;
  const std::int64_t nbins = (2 * half_range + bin - 1) / bin;
  h.counts.assign(static_cast<std::size_t>(nbins), 0);
  const std::int64_t span = nbins * bin;
  for (std::int64_t ta : a.timestamps_ps) {
    for (std::int64_t tb : b.timestamps_ps) {
      const std::int64_t d = tb - ta;
      if (d >= h.offset_ps && d < h.offset_ps + span) {
        ++h.counts[static_cast<std::size_t>((d - h.offset_ps) / bin)];
      }
    }
  }
  return h;
}

// O(N^2) reference for the binned-occupancy rule used by the FFT path:
// a pair lands in bin floor(tb/w) - floor(ta/w).
Histogram brute_fft_hist(const TagStream& a, const TagStream& b, std::int64_t center,
                         std::int64_t half_range, std::int64_t bin) {
  Histogram h;
  const std::int64_t lmin = floor_div_ref(center - half_range, bin);
  const std::int64_t lmax = floor_div_ref(center + half_range - 1, bin);
  h.offset_ps = lmin * bin;
  h.bin_width_ps = bin;
  h.counts.assign(static_cast<std::size_t>(lmax - lmin + 1), 0);
  for (std::int64_t ta : a.timestamps_ps) {
    for (std::int64_t tb : b.timestamps_ps) {
      const std::int64_t lag = floor_div_ref(tb, bin) - floor_div_ref(ta, bin);
      if (lag >= lmin && lag <= lmax) ++h.counts[static_cast<std::size_t>(lag - lmin)];
    }
  }
  return h;
}

}  // namespace

TEST_CASE("coincidence window is inclusive of both edges") {
  TagStream a = make_stream({0, 100, 10000});
  TagStream b = make_stream({10, 130, 50000});
  auto r50 = count_coincidences(a, b, 0.0, 50, 10000);
  // Gaps 10 and 30: only the first fits |d| <= 25.
  CHECK(r50.coincidences == 1);
  CHECK(r50.accidentals_total == 0);
  CHECK(r50.car_lower_bound);
  CHECK(r50.car == doctest::Approx(1.0));
  auto r100 = count_coincidences(a, b, 0.0, 100, 10000);
  CHECK(r100.coincidences == 2);

  // |d| exactly window/2 matches.
  auto edge = count_coincidences(make_stream({1000}), make_stream({1025}), 0.0, 50, 10000);
  CHECK(edge.coincidences == 1);
  auto just_out = count_coincidences(make_stream({1000}), make_stream({1025}), 0.0, 49, 10000);
  CHECK(just_out.coincidences == 0);
}

TEST_CASE("delay shifts the matching window") {
  TagStream a = make_stream({1000});
  TagStream b = make_stream({46000});
  CHECK(count_coincidences(a, b, 45000.0, 60, 10000).coincidences == 1);
  CHECK(count_coincidences(a, b, 0.0, 60, 10000).coincidences == 0);
  // Fractional delays are honored.
  CHECK(count_coincidences(a, b, 44970.5, 60, 10000).coincidences == 1);
  CHECK(count_coincidences(a, b, 44969.4, 60, 10000).coincidences == 0);
}

TEST_CASE("matching is one-to-one and earliest-first") {
  // One b tag cannot serve two a tags.
  CHECK(count_coincidences(make_stream({0, 10}), make_stream({5}), 0.0, 100, 10000).coincidences == 1);
  // Earliest-first pairing keeps both matches alive; pairing 100 with 140
  // would strand the 60 tag.
  CHECK(count_coincidences(make_stream({100, 160}), make_stream({60, 140}), 0.0, 100, 10000)
            .coincidences == 2);
}

TEST_CASE("shift invariance") {
  RandomStream rng(3, "test.shift", 0);
  TagStream a = sorted_uniform_stream(400, 100000, rng);
  TagStream b = sorted_uniform_stream(500, 100000, rng);
  auto base = count_coincidences(a, b, 250.0, 80, 10000, 3);
  TagStream b_shifted = b;
  for (auto& t : b_shifted.timestamps_ps) t += 777777;
  b_shifted.duration_ps += 777777;
  auto shifted = count_coincidences(a, b_shifted, 250.0 + 777777.0, 80, 10000, 3);
  CHECK(shifted.coincidences == base.coincidences);
  CHECK(shifted.accidentals_total == base.accidentals_total);
}

TEST_CASE("result bookkeeping fields") {
  TagStream a = make_stream({0, 1000});
  a.duration_ps = 5000000;
  TagStream b = make_stream({10, 990});
  b.duration_ps = 2000000;
  auto r = count_coincidences(a, b, 0.0, 60, 7000, 4);
  CHECK(r.window_ps == doctest::Approx(60.0));
  CHECK(r.delay_ps == doctest::Approx(0.0));
  CHECK(r.accidental_windows == 4);
  CHECK(r.integration_s == doctest::Approx(5e-6));  // longest stream span
  CHECK(r.coincidences == 2);
  CHECK(r.accidentals == doctest::Approx(double(r.accidentals_total) / 4.0));
}

TEST_CASE("count_coincidences validates its inputs") {
  TagStream a = make_stream({0, 10});
  TagStream b = make_stream({5});
  CHECK_THROWS_AS(count_coincidences(a, b, 0.0, 0, 1000), std::invalid_argument);
  // Offset windows may not overlap the signal window.
  CHECK_THROWS_AS(count_coincidences(a, b, 0.0, 200, 200), std::invalid_argument);
  CHECK_THROWS_AS(count_coincidences(a, b, 0.0, 200, 1000, 0), std::invalid_argument);
  TagStream bad = make_stream({10, 5, 20});
  CHECK_THROWS_AS(count_coincidences(bad, b, 0.0, 10, 1000), std::invalid_argument);
}

TEST_CASE("randomized equivalence against the quadratic references") {
  RandomStream rng(17, "test.brute", 0);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t na = static_cast<std::size_t>(rng.uniform_index(300));
    const std::size_t nb = static_cast<std::size_t>(rng.uniform_index(300));
    TagStream a = sorted_uniform_stream(na, 200000, rng);
    TagStream b = sorted_uniform_stream(nb, 200000, rng);
    const std::int64_t window = 1 + static_cast<std::int64_t>(rng.uniform_index(4000));
    const double delay = std::floor(rng.uniform(-10000.0, 10000.0));
    const std::int64_t offset = window + 1 + static_cast<std::int64_t>(rng.uniform_index(5000));
    const int k_windows = 1 + static_cast<int>(rng.uniform_index(4));

    auto fast = count_coincidences(a, b, delay, window, offset, k_windows);
    CHECK(fast.coincidences == brute_coincidences(a, b, delay, window));
    std::int64_t brute_acc = 0;
    for (int k = 1; k <= k_windows; ++k) {
      brute_acc += brute_coincidences(a, b, delay + double(offset) * k, window);
    }
    CHECK(fast.accidentals_total == brute_acc);

    const std::int64_t bin = 1 + static_cast<std::int64_t>(rng.uniform_index(500));
    const std::int64_t half = bin + static_cast<std::int64_t>(rng.uniform_index(20000));
    const std::int64_t center = static_cast<std::int64_t>(rng.uniform(-30000.0, 30000.0));
    Histogram fast_h = cross_correlate(a, b, center, half, bin);
    Histogram ref_h = brute_hist(a, b, center, half, bin);
    REQUIRE(fast_h.counts.size() == ref_h.counts.size());
    CHECK(fast_h.offset_ps == ref_h.offset_ps);
    CHECK(fast_h.counts == ref_h.counts);
  }
}

TEST_CASE("fft path matches its binned-occupancy rule exactly") {
  RandomStream rng(29, "test.fft", 0);
  for (std::int64_t bin : {std::int64_t{1}, std::int64_t{16}, std::int64_t{1000}}) {
    TagStream a = sorted_uniform_stream(3000, 2000000, rng);
    TagStream b = sorted_uniform_stream(3000, 2000000, rng);
    const std::int64_t center = 5000;
    const std::int64_t half = 60000;
    Histogram fft_h = cross_correlate_fft(a, b, center, half, bin);
    Histogram ref_h = brute_fft_hist(a, b, center, half, bin);
    REQUIRE(fft_h.counts.size() == ref_h.counts.size());
    CHECK(fft_h.offset_ps == ref_h.offset_ps);
    CHECK(fft_h.counts == ref_h.counts);
    // Bin width 1 also matches the exact-lag histogram.
    if (bin == 1) {
      Histogram direct_h = cross_correlate(a, b, center, half, bin);
      CHECK(fft_h.counts == direct_h.counts);
    }
  }
}

TEST_CASE("find_delay recovers exact integer shifts") {
  TagStream a = poisson_stream(1.0e6, 0.02, 5, "test.delay.a");
  REQUIRE(a.timestamps_ps.size() > 15000);

  // Zero delay on identical streams.
  CHECK(find_delay(a, a) == doctest::Approx(0.0).epsilon(1e-12));

  TagStream b = a;
  for (auto& t : b.timestamps_ps) t += 12345;
  b.duration_ps += 12345;
  CHECK(find_delay(a, b) == doctest::Approx(12345.0).epsilon(1e-12));

  // Negative delays are found too.
  TagStream c = a;
  for (auto& t : c.timestamps_ps) t += 98765;
  c.duration_ps += 98765;
  CHECK(find_delay(c, a) == doctest::Approx(-98765.0).epsilon(1e-12));
}

TEST_CASE("find_delay narrows its search range") {
  TagStream a = poisson_stream(2.0e6, 0.01, 6, "test.range.a");
  TagStream b = a;
  for (auto& t : b.timestamps_ps) t += 5000000;
  b.duration_ps += 5000000;
  DelaySearchSpec spec;
  spec.min_delay_ps = 4000000;
  spec.max_delay_ps = 6000000;
  spec.coarse_bin_ps = 100000;
  CHECK(find_delay(a, b, spec) == doctest::Approx(5000000.0).epsilon(1e-12));
}

TEST_CASE("find_delay rejects uncorrelated streams") {
  TagStream a = poisson_stream(1.0e7, 0.01, 7, "test.nopeak.a");
  TagStream b = poisson_stream(1.0e7, 0.01, 8, "test.nopeak.b");
  CHECK_THROWS_AS(find_delay(a, b), no_peak_error);
  CHECK_THROWS_AS(find_delay(a, make_stream({})), no_peak_error);
  CHECK_THROWS_AS(find_delay(make_stream({}), b), no_peak_error);
}

TEST_CASE("delay search spec validation") {
  DelaySearchSpec bad;
  bad.min_delay_ps = 10;
  bad.max_delay_ps = -10;
  CHECK_THROWS_AS(validate_delay_spec(bad), std::invalid_argument);
  bad = DelaySearchSpec{};
  bad.refine_factor = 1;
  CHECK_THROWS_AS(validate_delay_spec(bad), std::invalid_argument);
  bad = DelaySearchSpec{};
  bad.final_bin_ps = bad.coarse_bin_ps * 2;
  CHECK_THROWS_AS(validate_delay_spec(bad), std::invalid_argument);
}

TEST_CASE("default accidental offset rule") {
  CHECK(default_accidental_offset_ps(60) == 10000);
  CHECK(default_accidental_offset_ps(200) == 20000);
  CHECK(default_accidental_offset_ps(1) == 10000);
}

TEST_CASE("car_vs_window mirrors individual counting calls") {
  RandomStream rng(31, "test.carwin", 0);
  TagStream a = sorted_uniform_stream(2000, 5000000, rng);
  TagStream b = sorted_uniform_stream(2000, 5000000, rng);
  std::vector<std::int64_t> windows = {20, 60, 200, 1000};
  auto rows = car_vs_window(a, b, 100.0, windows, 0, 2);
  REQUIRE(rows.size() == 4);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].window_ps == windows[i]);
    auto direct = count_coincidences(a, b, 100.0, windows[i],
                                     default_accidental_offset_ps(windows[i]), 2);
    CHECK(rows[i].result.coincidences == direct.coincidences);
    CHECK(rows[i].result.accidentals_total == direct.accidentals_total);
  }
  CHECK_THROWS_AS(car_vs_window(a, b, 0.0, {}, 0, 1), std::invalid_argument);
  CHECK_THROWS_AS(car_vs_window(a, b, 0.0, {60, 20}, 0, 1), std::invalid_argument);
}
