#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "entdist/fit.hpp"
#include "entdist/rng.hpp"

using namespace entdist;

namespace {

constexpr double kPi = 3.14159265358979323846;

std::vector<double> sweep_angles(int n) {
  std::vector<double> angles;
  for (int i = 0; i < n; ++i) angles.push_back(180.0 * i / n);
  return angles;
}

std::vector<double> cosine_counts(const std::vector<double>& angles, double amplitude,
                                  double visibility, double phase_deg, double floor) {
  std::vector<double> counts;
  for (double a : angles) {
    counts.push_back(amplitude * (1.0 + visibility * std::cos(4.0 * a * kPi / 180.0 -
                                                              phase_deg * kPi / 180.0)) +
                     floor);
  }
  return counts;
}

}  // namespace

TEST_CASE("noiseless curves are recovered exactly") {
  auto angles = sweep_angles(8);
  auto counts = cosine_counts(angles, 1000.0, 0.933, 120.0, 0.0);
  VisibilityFit fit = fit_visibility(angles, counts);
  CHECK(fit.amplitude == doctest::Approx(1000.0).epsilon(1e-9));
  CHECK(fit.visibility == doctest::Approx(0.933).epsilon(1e-9));
  CHECK(fit.raw_visibility == doctest::Approx(0.933).epsilon(1e-9));
  CHECK(fit.phase_deg == doctest::Approx(120.0).epsilon(1e-9));
  CHECK(fit.residual_rms == doctest::Approx(0.0).scale(1.0).epsilon(1e-6));
  CHECK_FALSE(fit.nonphysical);
}

TEST_CASE("a known accidental floor is subtracted before the contrast is formed") {
  auto angles = sweep_angles(9);
  auto counts = cosine_counts(angles, 500.0, 0.9, -45.0, 125.0);
  VisibilityFit with_floor = fit_visibility(angles, counts, 125.0);
  CHECK(with_floor.amplitude == doctest::Approx(500.0).epsilon(1e-9));
  CHECK(with_floor.visibility == doctest::Approx(0.9).epsilon(1e-9));
  CHECK(with_floor.offset_floor == doctest::Approx(125.0));
  // Ignoring the floor dilutes the visibility by A / (A + floor).
  VisibilityFit diluted = fit_visibility(angles, counts, 0.0);
  CHECK(diluted.visibility == doctest::Approx(0.9 * 500.0 / 625.0).epsilon(1e-9));
}

TEST_CASE("count scaling does not change the visibility") {
  auto angles = sweep_angles(12);
  auto counts = cosine_counts(angles, 80.0, 0.75, 30.0, 0.0);
  auto scaled = counts;
  for (auto& c : scaled) c *= 10.0;
  double v1 = fit_visibility(angles, counts).visibility;
  double v2 = fit_visibility(angles, scaled).visibility;
  CHECK(v1 == doctest::Approx(v2).epsilon(1e-9));
}

TEST_CASE("underdetermined sweeps are rejected") {
  std::vector<double> three_angles = {0.0, 22.5, 45.0};
  std::vector<double> counts = {10.0, 5.0, 1.0};
  CHECK_THROWS_WITH_AS(fit_visibility(three_angles, counts),
                       doctest::Contains("underdetermined"), std::invalid_argument);
  // Repeats of the same angles do not add information.
  std::vector<double> repeated_angles = {0.0, 22.5, 45.0, 0.0, 22.5, 45.0};
  std::vector<double> repeated_counts = {10.0, 5.0, 1.0, 10.0, 5.0, 1.0};
  CHECK_THROWS_AS(fit_visibility(repeated_angles, repeated_counts), std::invalid_argument);
  CHECK_THROWS_AS(fit_visibility({0.0, 22.5}, {1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("nonphysical fits are flagged and clamped") {
  auto angles = sweep_angles(8);
  // Ripple larger than the mean: raw visibility above 1.
  std::vector<double> counts;
  for (double a : angles) {
    counts.push_back(std::max(0.0, 100.0 + 150.0 * std::cos(4.0 * a * kPi / 180.0)));
  }
  VisibilityFit fit = fit_visibility(angles, counts);
  CHECK(fit.nonphysical);
  CHECK(fit.visibility <= 1.0);
  CHECK(fit.raw_visibility > 1.0);
}

TEST_CASE("poisson noise keeps the estimate unbiased within uncertainty") {
  auto angles = sweep_angles(9);
  RandomStream rng(41, "test.fit.noise", 0);
  const double true_v = 0.9;
  int covered = 0;
  double v_sum = 0.0;
  const int trials = 200;
  for (int t = 0; t < trials; ++t) {
    auto expected = cosine_counts(angles, 2000.0, true_v, 60.0, 0.0);
    std::vector<double> noisy;
    for (double mean : expected) {
      // Gaussian approximation of a Poisson count at these means.
      noisy.push_back(std::max(0.0, std::floor(mean + rng.gaussian(0.0, std::sqrt(mean)) + 0.5)));
    }
    VisibilityFit fit = fit_visibility(angles, noisy);
    v_sum += fit.visibility;
    REQUIRE(fit.visibility_sigma > 0.0);
    if (std::abs(fit.visibility - true_v) < 3.0 * fit.visibility_sigma) ++covered;
  }
  CHECK(std::abs(v_sum / trials - true_v) < 0.01);
  // 3 sigma coverage should hold in nearly every trial.
  CHECK(covered >= trials - 8);
}

TEST_CASE("fit rejects mismatched input sizes") {
  CHECK_THROWS_AS(fit_visibility({0.0, 22.5, 45.0, 67.5}, {1.0, 2.0}), std::invalid_argument);
}
