#pragma once

#include <cstdint>
#include <string>

namespace entdist {

// One-parameter mixture of the |HH>+|VV> Bell state with white noise.
struct WernerState {
  double visibility = 1.0;  // V in [0, 1]
};

enum class Basis {
  h,           // HWP 0 deg
  v,           // HWP 45 deg
  d,           // HWP 22.5 deg
  a,           // HWP 67.5 deg
  free_angle,  // arbitrary HWP angle
  none,        // no projection: every photon passes (monitor port)
};

struct AnalyzerSetting {
  Basis basis = Basis::h;
  double hwp_deg = 0.0;  // half-wave plate angle, degrees
  double qwp_deg = 0.0;  // quarter-wave plate angle; must be 0 in all formulas
};

// Canonical analyzer for a named basis.
AnalyzerSetting make_analyzer(Basis basis);
// Analyzer at an arbitrary HWP angle.
AnalyzerSetting make_analyzer_free(double hwp_deg);
std::string basis_name(Basis basis);
Basis basis_from_name(const std::string& name);
void validate_analyzer(const AnalyzerSetting& analyzer);

struct FiberSpec {
  double length_km = 0.0;              // span length
  double attenuation_db_per_km = 0.0;  // propagation loss
  double dispersion_ps_per_nm_km = 0.0;  // chromatic dispersion at the reference wavelength
  double reference_wavelength_nm = 1550.0;  // wavelength with zero differential delay
  double base_delay_ps = 0.0;          // group delay at the reference wavelength
  double background_cps = 0.0;         // stray/noise photon rate at the fiber output
  double drift_deg_per_hour = 0.0;     // slow polarization rotation rate
};
void validate_fiber(const FiberSpec& fiber);

struct DcmSpec {
  double total_dispersion_ps_per_nm = 0.0;  // lumped dispersion, signed
  double insertion_loss_db = 0.0;           // module loss
  double reference_wavelength_nm = 1550.0;  // wavelength with zero differential delay
};
void validate_dcm(const DcmSpec& dcm);

struct DetectorSpec {
  double efficiency = 1.0;       // detection probability in [0, 1]
  double jitter_sigma_ps = 0.0;  // Gaussian timing noise, one detector
  double dark_cps = 0.0;         // dark count rate
  double dead_time_ps = 0.0;     // minimum spacing after an accepted tag
  std::int64_t resolution_ps = 1;  // timestamp quantum
};
void validate_detector(const DetectorSpec& detector);

struct CoincidenceResult {
  std::int64_t coincidences = 0;      // matched pairs in the signal window
  std::int64_t accidentals_total = 0; // matched pairs summed over all offset windows
  int accidental_windows = 1;         // number of offset windows averaged
  double accidentals = 0.0;           // per-window mean accidentals
  double window_ps = 0.0;             // full coincidence window width
  double delay_ps = 0.0;              // delay applied to stream b
  double integration_s = 0.0;         // overlapped acquisition time
  double car = 0.0;                   // coincidences over mean accidentals
  bool car_lower_bound = false;       // true when no accidentals were observed
};

struct JointOutcomeDistribution {
  double pass_pass = 0.0;
  double pass_fail = 0.0;
  double fail_pass = 0.0;
  double fail_fail = 0.0;
};

// Probability that both photons exit the transmitted analyzer ports,
// P = (1 + V cos(4 (theta_s - theta_i) pi/180)) / 4 for projective bases.
double coincidence_probability(const WernerState& state, const AnalyzerSetting& signal,
                               const AnalyzerSetting& idler);

// All four transmitted/reflected outcome probabilities; sums to 1, marginals 1/2.
JointOutcomeDistribution joint_outcome_distribution(const WernerState& state,
                                                    const AnalyzerSetting& signal,
                                                    const AnalyzerSetting& idler);

// Fidelity bound CAR/(CAR+1).
double car_to_fidelity(double car);

// Overlap of a Werner state with the Bell state, (1 + 3V)/4.
double werner_fidelity(const WernerState& state);

// Differential arrival spread bandwidth x dispersion x length.
double dispersion_spread(double bandwidth_nm, double dispersion_ps_per_nm_km, double length_km);

// rate x 10^(-loss/10).
double attenuate_rate(double rate_cps, double loss_db);

// Uncorrelated coincidence rate S_a S_b tau.
double expected_accidentals(double singles_a_cps, double singles_b_cps, double window_ps);

// Werner fidelity of the mean visibility, (1 + 3 (v_hv + v_da)/2) / 4.
double fidelity_from_visibilities(double v_hv, double v_da);

// CAR with the estimator floor: coincidences / max(mean accidentals, 1/windows).
double car_with_floor(std::int64_t coincidences, std::int64_t accidentals_total,
                      int accidental_windows, bool* lower_bound);

}  // namespace entdist
