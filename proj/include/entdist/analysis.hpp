#pragma once

#include <string>
#include <vector>

#include "entdist/config.hpp"
#include "entdist/fit.hpp"
#include "entdist/physics.hpp"

namespace entdist {

struct LinkBudget {
  double signal_loss_db = 0.0;        // total signal-arm loss
  double idler_loss_db = 0.0;         // total idler-arm loss
  double total_loss_db = 0.0;         // both arms combined
  double coincidence_rate_cps = 0.0;  // pairs surviving both arms and detectors
  double signal_singles_cps = 0.0;    // one-arm survivors plus noise
  double idler_singles_cps = 0.0;
};

// Pure link arithmetic: coincidences = rate x 10^(-(Ls+Li)/10) x eta_s x
// eta_i; singles per arm use that arm's loss only, plus a lumped noise rate
// already referred to the detector.
LinkBudget link_budget(double source_rate_pairs_per_s, double signal_path_db, double idler_path_db,
                       double signal_efficiency, double idler_efficiency,
                       double signal_noise_cps = 0.0, double idler_noise_cps = 0.0);

// Per-arm loss breakdown and expected rates for one configured run.
struct BudgetReport {
  double signal_fiber_db = 0.0;
  double signal_dcm_db = 0.0;
  double idler_fiber_db = 0.0;
  double idler_dcm_db = 0.0;
  double signal_total_db = 0.0;
  double idler_total_db = 0.0;
  double total_db = 0.0;
  double pair_rate_cps = 0.0;           // emitted pairs per second
  double signal_singles_cps = 0.0;      // expected singles incl. analyzer, darks, background
  double idler_singles_cps = 0.0;
  double coincidence_rate_cps = 0.0;    // detected pair rate before windowing/projection
  double accidentals_cps = 0.0;         // from the expected singles at the config window
  double car = 0.0;                     // detected pairs over accidentals
  double fidelity_bound = 0.0;          // CAR-implied ceiling
};
BudgetReport budget_report(const ExperimentConfig& config);

struct ChannelScanParams {
  double peak_pair_rate_cps = 100.0;        // detected pair rate at zero detuning
  double envelope_sigma_nm = 20.0;          // Gaussian phase-matching envelope scale
  double pump_leak_cps = 1e12;              // pump photons per second before filtering
  double extinction_base_db = 30.0;         // filter extinction at zero detuning
  double extinction_slope_db_per_nm = 7.0;  // extinction growth per nm of detuning
  double extinction_cap_db = 100.0;         // extinction ceiling
  double dark_cps = 120.0;                  // per-detector dark rate
  double window_ps = 60.0;                  // coincidence window for the CAR column
  double integration_s = 10.0;              // assumed measurement time
};

struct ChannelScanRow {
  double detuning_nm = 0.0;    // channel separation from the pump
  double pair_rate_cps = 0.0;  // detected coincidence rate
  double noise_cps = 0.0;      // singles noise: filtered pump leakage plus darks
  double car = 0.0;            // coincidences over accidentals (floored at one count)
};

// Channel-selection study: pair rate from the phase-matching envelope, noise
// singles from pump leakage attenuated by the filter extinction curve, CAR
// from the accidentals those singles imply. Accidental counts are floored at
// one observed count, so the CAR is a lower bound where accidentals vanish.
std::vector<ChannelScanRow> scan_wavelength_channels(const ChannelScanParams& params,
                                                     const std::vector<double>& detunings_nm);

struct BasisCurve {
  std::string basis;               // fixed-arm basis label: H, V, D or A
  std::vector<double> angles_deg;  // swept analyzer angles
  std::vector<double> counts;      // coincidence counts per angle
};

struct ExperimentReport {
  double pair_rate_cps = 0.0;       // peak fitted coincidence rate
  double visibility_hv = 0.0;       // H/V-curve visibility (mean when both present)
  double visibility_da = 0.0;       // D/A-curve visibility
  double fidelity = 0.0;            // from the two visibilities
  double fidelity_sigma = 0.0;      // propagated fit uncertainty
  double car = 0.0;                 // from the supplied coincidence result, if any
  double car_fidelity_bound = 0.0;  // CAR-implied ceiling, if any
  std::vector<VisibilityFit> fits;  // per-curve fits in input order
};

// Summary across basis sweeps; requires at least the H and the D curve.
// integration_s converts fitted peak counts to a rate; a coincidence result,
// when given, adds the CAR and its fidelity bound.
ExperimentReport experiment_report(const std::vector<BasisCurve>& curves, double integration_s,
                                   const CoincidenceResult* car_result = nullptr);

}  // namespace entdist
