#include "entdist/fit.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace entdist {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Solve the symmetric 3x3 system M x = r by Gaussian elimination with
// partial pivoting; M is overwritten.
void solve3(double m[3][3], double r[3], double x[3]) {
  int order[3] = {0, 1, 2};
  for (int col = 0; col < 3; ++col) {
    int pivot = col;
    for (int row = col + 1; row < 3; ++row) {
      if (std::abs(m[order[row]][col]) > std::abs(m[order[pivot]][col])) pivot = row;
    }
    std::swap(order[col], order[pivot]);
    const double diag = m[order[col]][col];
    if (std::abs(diag) < 1e-300) {
      throw std::invalid_argument("fit_visibility: underdetermined (degenerate normal equations)");
    }
    for (int row = col + 1; row < 3; ++row) {
      const double f = m[order[row]][col] / diag;
      for (int k = col; k < 3; ++k) m[order[row]][k] -= f * m[order[col]][k];
      r[order[row]] -= f * r[order[col]];
    }
  }
  for (int col = 2; col >= 0; --col) {
    double s = r[order[col]];
    for (int k = col + 1; k < 3; ++k) s -= m[order[col]][k] * x[k];
    x[col] = s / m[order[col]][col];
  }
}

// Inverse of a symmetric positive definite 3x3 matrix via adjugate.
bool invert3(const double m[3][3], double inv[3][3]) {
  const double det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
                     m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
                     m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  if (std::abs(det) < 1e-300) return false;
  const double d = 1.0 / det;
  inv[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) * d;
  inv[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) * d;
  inv[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) * d;
  inv[1][0] = inv[0][1];
  inv[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) * d;
  inv[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) * d;
  inv[2][0] = inv[0][2];
  inv[2][1] = inv[1][2];
  inv[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * d;
  return true;
}

}  // namespace

VisibilityFit fit_visibility(const std::vector<double>& angles_deg,
                             const std::vector<double>& counts, double known_floor) {
  if (angles_deg.size() != counts.size()) {
    throw std::invalid_argument("fit_visibility: angles and counts must have equal length");
  }
  std::set<double> distinct(angles_deg.begin(), angles_deg.end());
  if (distinct.size() < 4) {
    throw std::invalid_argument("fit_visibility: underdetermined (need >= 4 distinct angles)");
  }

  // Normal equations for C = b0 + b1 cos4t + b2 sin4t with Poisson weights.
  double m[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
  double r[3] = {0, 0, 0};
  const std::size_t n = angles_deg.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double t = 4.0 * angles_deg[i] * kPi / 180.0;
    const double x[3] = {1.0, std::cos(t), std::sin(t)};
    const double w = 1.0 / std::max(counts[i], 1.0);
    for (int p = 0; p < 3; ++p) {
      for (int q = 0; q < 3; ++q) m[p][q] += w * x[p] * x[q];
      r[p] += w * x[p] * counts[i];
    }
  }
  double cov_in[3][3];
  for (int p = 0; p < 3; ++p) {
    for (int q = 0; q < 3; ++q) cov_in[p][q] = m[p][q];
  }
  double beta[3];
  solve3(m, r, beta);

  VisibilityFit fit;
  fit.offset_floor = known_floor;
  fit.amplitude = beta[0] - known_floor;
  const double ripple = std::hypot(beta[1], beta[2]);
  fit.phase_deg = ripple > 0.0 ? std::atan2(beta[2], beta[1]) * 180.0 / kPi : 0.0;
  if (fit.amplitude > 0.0) {
    fit.raw_visibility = ripple / fit.amplitude;
  } else {
    fit.raw_visibility = 0.0;
    fit.nonphysical = true;
    fit.amplitude = std::max(fit.amplitude, 0.0);
  }
  fit.visibility = std::clamp(fit.raw_visibility, 0.0, 1.0);
  if (fit.raw_visibility > 1.0) fit.nonphysical = true;

  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = 4.0 * angles_deg[i] * kPi / 180.0;
    const double model = beta[0] + beta[1] * std::cos(t) + beta[2] * std::sin(t);
    ss += (counts[i] - model) * (counts[i] - model);
  }
  fit.residual_rms = std::sqrt(ss / static_cast<double>(n));

  // Delta method on V = |(b1, b2)| / (b0 - floor); with 1/variance weights
  // the parameter covariance is the inverse of the normal matrix.
  double cov[3][3];
  if (invert3(cov_in, cov) && fit.amplitude > 0.0 && ripple > 0.0) {
    const double a = fit.amplitude;
    const double g[3] = {-ripple / (a * a), beta[1] / (ripple * a), beta[2] / (ripple * a)};
    double var = 0.0;
    for (int p = 0; p < 3; ++p) {
      for (int q = 0; q < 3; ++q) var += g[p] * cov[p][q] * g[q];
    }
    fit.visibility_sigma = var > 0.0 ? std::sqrt(var) : 0.0;
  }
  return fit;
}

}  // namespace entdist
