#include "entdist/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "entdist/engine.hpp"
#include "entdist/source.hpp"

namespace entdist {

namespace {

// Antiderivative of the standard normal CDF, G(u) = u Phi(u) + phi(u).
double normal_cdf_integral(double u) {
  if (u > 40.0) return u;
  if (u < -40.0) return 0.0;
  const double pdf = 0.3989422804014327 * std::exp(-0.5 * u * u);
  const double cdf = 0.5 * std::erfc(-u / std::sqrt(2.0));
  return u * cdf + pdf;
}

// Probability that a pair lag falls within +-half of the peak center when the
// lag is spread by a residual-dispersion box of full width `box` convolved
// with Gaussian jitter of deviation `sigma`.
double window_capture_fraction(double box, double sigma, double half) {
  if (half <= 0.0) return 0.0;
  if (box <= 1e-9 && sigma <= 1e-9) return 1.0;
  if (sigma <= 1e-9) return std::min(1.0, 2.0 * half / box);
  if (box <= 1e-9) return std::erf(half / (sigma * std::sqrt(2.0)));
  auto edge_integral = [&](double h) {
    return sigma * (normal_cdf_integral((h + box / 2.0) / sigma) -
                    normal_cdf_integral((h - box / 2.0) / sigma));
  };
  return (edge_integral(half) - edge_integral(-half)) / box;
}

// Lag shift per nm of signal detuning left after all dispersive elements;
// energy matching maps signal detuning onto the idler arm with the squared
// wavelength-ratio lever.
double residual_lag_slope_ps_per_nm(const ExperimentConfig& config) {
  double signal_arm =
      config.signal_fiber.dispersion_ps_per_nm_km * config.signal_fiber.length_km;
  double idler_arm = config.idler_fiber.dispersion_ps_per_nm_km * config.idler_fiber.length_km;
  if (config.dcm) {
    (config.dcm->arm == DcmArm::signal ? signal_arm : idler_arm) +=
        config.dcm->dcm.total_dispersion_ps_per_nm;
  }
  const double matched = matched_idler_wavelength_nm(config.source.pump_wavelength_nm,
                                                     config.source.signal_center_nm);
  const double lever = (matched / config.source.signal_center_nm) *
                       (matched / config.source.signal_center_nm);
  return signal_arm + lever * idler_arm;
}

}  // namespace

LinkBudget link_budget(double source_rate_pairs_per_s, double signal_path_db, double idler_path_db,
                       double signal_efficiency, double idler_efficiency, double signal_noise_cps,
                       double idler_noise_cps) {
  if (source_rate_pairs_per_s < 0) throw std::invalid_argument("link_budget: rate must be >= 0");
  if (signal_path_db < 0 || idler_path_db < 0) {
    throw std::invalid_argument("link_budget: losses must be >= 0");
  }
  if (signal_efficiency < 0 || signal_efficiency > 1 || idler_efficiency < 0 ||
      idler_efficiency > 1) {
    throw std::invalid_argument("link_budget: efficiencies must lie in [0, 1]");
  }
  LinkBudget budget;
  budget.signal_loss_db = signal_path_db;
  budget.idler_loss_db = idler_path_db;
  budget.total_loss_db = signal_path_db + idler_path_db;
  const double t_s = attenuate_rate(1.0, signal_path_db) * signal_efficiency;
  const double t_i = attenuate_rate(1.0, idler_path_db) * idler_efficiency;
  budget.coincidence_rate_cps = source_rate_pairs_per_s * t_s * t_i;
  budget.signal_singles_cps = source_rate_pairs_per_s * t_s + signal_noise_cps;
  budget.idler_singles_cps = source_rate_pairs_per_s * t_i + idler_noise_cps;
  return budget;
}

BudgetReport budget_report(const ExperimentConfig& config) {
  validate_config(config);
  const LinkScalars scalars = link_scalars(config);
  BudgetReport report;
  report.signal_fiber_db =
      config.signal_fiber.length_km * config.signal_fiber.attenuation_db_per_km;
  report.idler_fiber_db = config.idler_fiber.length_km * config.idler_fiber.attenuation_db_per_km;
  if (config.dcm) {
    (config.dcm->arm == DcmArm::signal ? report.signal_dcm_db : report.idler_dcm_db) =
        config.dcm->dcm.insertion_loss_db;
  }
  report.signal_total_db = report.signal_fiber_db + report.signal_dcm_db;
  report.idler_total_db = report.idler_fiber_db + report.idler_dcm_db;
  report.total_db = report.signal_total_db + report.idler_total_db;
  report.pair_rate_cps = scalars.pair_rate_cps;
  report.signal_singles_cps = scalars.expected_signal_singles_cps;
  report.idler_singles_cps = scalars.expected_idler_singles_cps;
  // Predicted rate inside the coincidence window: both photons detected, both
  // analyzers passed, and the pair lag inside the window around the peak.
  const WernerState state{scalars.state_visibility};
  const double joint =
      coincidence_probability(state, config.signal_analyzer, config.idler_analyzer);
  const double box =
      std::abs(residual_lag_slope_ps_per_nm(config)) * config.source.filter_bandwidth_nm;
  const double jitter = std::hypot(config.signal_detector.jitter_sigma_ps,
                                   config.idler_detector.jitter_sigma_ps);
  const double capture = window_capture_fraction(box, jitter, config.window_ps / 2.0);
  report.coincidence_rate_cps = scalars.expected_both_detected_cps * joint * capture;
  report.accidentals_cps =
      expected_accidentals(report.signal_singles_cps, report.idler_singles_cps, config.window_ps);
  if (report.accidentals_cps > 0.0) {
    report.car = report.coincidence_rate_cps / report.accidentals_cps;
    report.fidelity_bound = car_to_fidelity(report.car);
  } else {
    report.car = 0.0;
    report.fidelity_bound = 1.0;
  }
  return report;
}

std::vector<ChannelScanRow> scan_wavelength_channels(const ChannelScanParams& params,
                                                     const std::vector<double>& detunings_nm) {
  if (params.peak_pair_rate_cps < 0 || params.pump_leak_cps < 0 || params.dark_cps < 0) {
    throw std::invalid_argument("channel scan: rates must be >= 0");
  }
  if (params.envelope_sigma_nm <= 0 || params.window_ps <= 0 || params.integration_s <= 0) {
    throw std::invalid_argument("channel scan: scales must be positive");
  }
  for (std::size_t i = 0; i < detunings_nm.size(); ++i) {
    if (detunings_nm[i] <= 0) throw std::invalid_argument("channel scan: detunings must be > 0");
    if (i > 0 && detunings_nm[i] <= detunings_nm[i - 1]) {
      throw std::invalid_argument("channel scan: detunings must be ascending");
    }
  }
  std::vector<ChannelScanRow> rows;
  rows.reserve(detunings_nm.size());
  for (double d : detunings_nm) {
    ChannelScanRow row;
    row.detuning_nm = d;
    const double u = d / params.envelope_sigma_nm;
    row.pair_rate_cps = params.peak_pair_rate_cps * std::exp(-u * u);
    const double extinction_db = std::min(
        params.extinction_cap_db, params.extinction_base_db + params.extinction_slope_db_per_nm * d);
    const double leak = attenuate_rate(params.pump_leak_cps, extinction_db);
    row.noise_cps = leak + params.dark_cps;
    const double singles = row.pair_rate_cps + row.noise_cps;
    const double accidental_counts =
        expected_accidentals(singles, singles, params.window_ps) * params.integration_s;
    row.car = row.pair_rate_cps * params.integration_s / std::max(accidental_counts, 1.0);
    rows.push_back(row);
  }
  return rows;
}

ExperimentReport experiment_report(const std::vector<BasisCurve>& curves, double integration_s,
                                   const CoincidenceResult* car_result) {
  if (integration_s <= 0) throw std::invalid_argument("experiment_report: integration_s must be > 0");
  const BasisCurve* by_basis[4] = {nullptr, nullptr, nullptr, nullptr};  // H V D A
  for (const auto& curve : curves) {
    if (curve.basis == "H") by_basis[0] = &curve;
    else if (curve.basis == "V") by_basis[1] = &curve;
    else if (curve.basis == "D") by_basis[2] = &curve;
    else if (curve.basis == "A") by_basis[3] = &curve;
    else throw std::invalid_argument("experiment_report: unknown basis label " + curve.basis);
  }
  if (!by_basis[0] || !by_basis[2]) {
    throw std::invalid_argument("experiment_report: insufficient bases (H and D curves required)");
  }

  ExperimentReport report;
  VisibilityFit fit_of[4];
  for (const auto& curve : curves) {
    report.fits.push_back(fit_visibility(curve.angles_deg, curve.counts));
  }
  {
    std::size_t k = 0;
    for (const auto& curve : curves) {
      for (int b = 0; b < 4; ++b) {
        if (by_basis[b] == &curve) fit_of[b] = report.fits[k];
      }
      ++k;
    }
  }

  auto pair_mean = [&](int first, int second, double& sigma_out) {
    if (by_basis[first] && by_basis[second]) {
      sigma_out = 0.5 * std::hypot(fit_of[first].visibility_sigma, fit_of[second].visibility_sigma);
      return 0.5 * (fit_of[first].visibility + fit_of[second].visibility);
    }
    const int present = by_basis[first] ? first : second;
    sigma_out = fit_of[present].visibility_sigma;
    return fit_of[present].visibility;
  };
  double sigma_hv = 0.0;
  double sigma_da = 0.0;
  report.visibility_hv = pair_mean(0, 1, sigma_hv);
  report.visibility_da = pair_mean(2, 3, sigma_da);
  report.fidelity = fidelity_from_visibilities(report.visibility_hv, report.visibility_da);
  // F = 1/4 + 3 (v_hv + v_da) / 8, so each visibility contributes 3/8.
  report.fidelity_sigma = 0.375 * std::hypot(sigma_hv, sigma_da);

  double peak_counts = 0.0;
  for (const auto& fit : report.fits) {
    peak_counts =
        std::max(peak_counts, fit.amplitude * (1.0 + fit.visibility) + fit.offset_floor);
  }
  report.pair_rate_cps = peak_counts / integration_s;

  if (car_result) {
    report.car = car_result->car;
    report.car_fidelity_bound = car_to_fidelity(car_result->car);
  }
  return report;
}

}  // namespace entdist
