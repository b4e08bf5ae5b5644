#pragma once

#include <vector>

namespace entdist {

struct VisibilityFit {
  double amplitude = 0.0;         // A in counts
  double visibility = 0.0;        // V clamped to [0, 1]
  double raw_visibility = 0.0;    // V before clamping
  double phase_deg = 0.0;         // cosine phase in degrees
  double offset_floor = 0.0;      // constant floor in counts
  double residual_rms = 0.0;      // unweighted rms residual in counts
  double visibility_sigma = 0.0;  // 1 sigma on V from Poisson count weights
  bool nonphysical = false;       // raw amplitude or visibility left its range
};

// Weighted least-squares fit of C(theta) = A (1 + V cos(4 theta pi/180 - phi))
// + floor via linear regression on {1, cos 4theta, sin 4theta}; weights are
// 1/max(count, 1). The constant term cannot separate A from floor, so floor
// is taken as known (0 by default) and A absorbs the rest. Requires at least
// 4 distinct angles.
VisibilityFit fit_visibility(const std::vector<double>& angles_deg,
                             const std::vector<double>& counts, double known_floor = 0.0);

}  // namespace entdist
