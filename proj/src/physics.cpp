#include "entdist/physics.hpp"

#include <cmath>
#include <stdexcept>

namespace entdist {

namespace {

constexpr double kPi = 3.14159265358979323846;

double canonical_hwp_deg(Basis basis) {
  switch (basis) {
    case Basis::h: return 0.0;
    case Basis::v: return 45.0;
    case Basis::d: return 22.5;
    case Basis::a: return 67.5;
    default: return 0.0;
  }
}

bool is_named_basis(Basis basis) {
  return basis == Basis::h || basis == Basis::v || basis == Basis::d || basis == Basis::a;
}

void validate_state(const WernerState& state) {
  if (!(state.visibility >= 0.0 && state.visibility <= 1.0)) {
    throw std::invalid_argument("state.visibility must lie in [0, 1]");
  }
}

}  // namespace

AnalyzerSetting make_analyzer(Basis basis) {
  if (basis == Basis::free_angle) {
    throw std::invalid_argument("free-angle analyzer requires an explicit hwp angle");
  }
  return AnalyzerSetting{basis, canonical_hwp_deg(basis), 0.0};
}

AnalyzerSetting make_analyzer_free(double hwp_deg) {
  if (!std::isfinite(hwp_deg)) throw std::invalid_argument("analyzer hwp angle must be finite");
  return AnalyzerSetting{Basis::free_angle, hwp_deg, 0.0};
}

std::string basis_name(Basis basis) {
  switch (basis) {
    case Basis::h: return "H";
    case Basis::v: return "V";
    case Basis::d: return "D";
    case Basis::a: return "A";
    case Basis::free_angle: return "free";
    case Basis::none: return "none";
  }
  throw std::invalid_argument("unknown basis");
}

Basis basis_from_name(const std::string& name) {
  if (name == "H") return Basis::h;
  if (name == "V") return Basis::v;
  if (name == "D") return Basis::d;
  if (name == "A") return Basis::a;
  if (name == "free") return Basis::free_angle;
  if (name == "none") return Basis::none;
  throw std::invalid_argument("analyzer basis must be one of H, V, D, A, free, none");
}

void validate_analyzer(const AnalyzerSetting& analyzer) {
  if (!std::isfinite(analyzer.hwp_deg) || !std::isfinite(analyzer.qwp_deg)) {
    throw std::invalid_argument("analyzer angles must be finite");
  }
  if (analyzer.qwp_deg != 0.0) {
    throw std::invalid_argument("analyzer qwp angle must be 0");
  }
  if (is_named_basis(analyzer.basis)) {
    double canonical = canonical_hwp_deg(analyzer.basis);
    double delta = std::fmod(analyzer.hwp_deg - canonical, 90.0);
    if (delta < 0) delta += 90.0;
    if (std::min(delta, 90.0 - delta) > 1e-9) {
      throw std::invalid_argument("named-basis analyzer hwp angle must match its basis modulo 90 degrees");
    }
  }
}

double coincidence_probability(const WernerState& state, const AnalyzerSetting& signal,
                               const AnalyzerSetting& idler) {
  return joint_outcome_distribution(state, signal, idler).pass_pass;
}

JointOutcomeDistribution joint_outcome_distribution(const WernerState& state,
                                                    const AnalyzerSetting& signal,
                                                    const AnalyzerSetting& idler) {
  validate_state(state);
  validate_analyzer(signal);
  validate_analyzer(idler);
  const bool signal_open = signal.basis == Basis::none;
  const bool idler_open = idler.basis == Basis::none;
  if (signal_open && idler_open) return {1.0, 0.0, 0.0, 0.0};
  if (signal_open) return {0.5, 0.5, 0.0, 0.0};
  if (idler_open) return {0.5, 0.0, 0.5, 0.0};
  const double cos_term =
      state.visibility * std::cos(4.0 * (signal.hwp_deg - idler.hwp_deg) * kPi / 180.0);
  const double correlated = 0.25 * (1.0 + cos_term);
  const double anticorrelated = 0.25 * (1.0 - cos_term);
  return {correlated, anticorrelated, anticorrelated, correlated};
}

double car_to_fidelity(double car) {
  if (!(car >= 0.0)) throw std::invalid_argument("car must be nonnegative");
  return car / (car + 1.0);
}

double werner_fidelity(const WernerState& state) {
  validate_state(state);
  return (1.0 + 3.0 * state.visibility) / 4.0;
}

double dispersion_spread(double bandwidth_nm, double dispersion_ps_per_nm_km, double length_km) {
  if (bandwidth_nm < 0 || length_km < 0) {
    throw std::invalid_argument("dispersion_spread arguments must be nonnegative");
  }
  return bandwidth_nm * dispersion_ps_per_nm_km * length_km;
}

double attenuate_rate(double rate_cps, double loss_db) {
  if (rate_cps < 0) throw std::invalid_argument("rate must be nonnegative");
  if (loss_db < 0) throw std::invalid_argument("loss must be nonnegative");
  return rate_cps * std::pow(10.0, -loss_db / 10.0);
}

double expected_accidentals(double singles_a_cps, double singles_b_cps, double window_ps) {
  if (singles_a_cps < 0 || singles_b_cps < 0 || window_ps < 0) {
    throw std::invalid_argument("expected_accidentals arguments must be nonnegative");
  }
  return singles_a_cps * singles_b_cps * window_ps * 1e-12;
}

double fidelity_from_visibilities(double v_hv, double v_da) {
  if (!(v_hv >= 0.0 && v_hv <= 1.0 && v_da >= 0.0 && v_da <= 1.0)) {
    throw std::invalid_argument("visibilities must lie in [0, 1]");
  }
  return (1.0 + 3.0 * (v_hv + v_da) / 2.0) / 4.0;
}

double car_with_floor(std::int64_t coincidences, std::int64_t accidentals_total,
                      int accidental_windows, bool* lower_bound) {
  if (coincidences < 0 || accidentals_total < 0 || accidental_windows < 1) {
    throw std::invalid_argument("car inputs must be nonnegative with at least one window");
  }
  if (lower_bound != nullptr) *lower_bound = accidentals_total == 0;
  const double floored_total = static_cast<double>(std::max<std::int64_t>(accidentals_total, 1));
  return static_cast<double>(coincidences) * static_cast<double>(accidental_windows) / floored_total;
}

void validate_fiber(const FiberSpec& fiber) {
  if (fiber.length_km < 0) throw std::invalid_argument("fiber.length_km must be nonnegative");
  if (fiber.attenuation_db_per_km < 0) {
    throw std::invalid_argument("fiber.attenuation_db_per_km must be nonnegative");
  }
  if (fiber.base_delay_ps < 0) throw std::invalid_argument("fiber.base_delay_ps must be nonnegative");
  if (fiber.background_cps < 0) throw std::invalid_argument("fiber.background_cps must be nonnegative");
  if (fiber.drift_deg_per_hour < 0) {
    throw std::invalid_argument("fiber.drift_deg_per_hour must be nonnegative");
  }
  if (fiber.reference_wavelength_nm <= 0) {
    throw std::invalid_argument("fiber.reference_wavelength_nm must be positive");
  }
}

void validate_dcm(const DcmSpec& dcm) {
  if (dcm.insertion_loss_db < 0) throw std::invalid_argument("dcm.insertion_loss_db must be nonnegative");
  if (dcm.reference_wavelength_nm <= 0) {
    throw std::invalid_argument("dcm.reference_wavelength_nm must be positive");
  }
}

void validate_detector(const DetectorSpec& detector) {
  if (!(detector.efficiency >= 0.0 && detector.efficiency <= 1.0)) {
    throw std::invalid_argument("detector.efficiency must lie in [0, 1]");
  }
  if (detector.jitter_sigma_ps < 0) throw std::invalid_argument("detector.jitter_sigma_ps must be nonnegative");
  if (detector.dark_cps < 0) throw std::invalid_argument("detector.dark_cps must be nonnegative");
  if (detector.dead_time_ps < 0) throw std::invalid_argument("detector.dead_time_ps must be nonnegative");
  if (detector.resolution_ps < 1) throw std::invalid_argument("detector.resolution_ps must be at least 1");
}

}  // namespace entdist
