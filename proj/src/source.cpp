#include "entdist/source.hpp"

#include <cmath>
#include <stdexcept>

#include "entdist/rng.hpp"

namespace entdist {

double matched_idler_wavelength_nm(double pump_nm, double signal_nm) {
  if (pump_nm <= 0 || signal_nm <= 0) {
    throw std::invalid_argument("wavelengths must be positive");
  }
  const double inverse = 2.0 / pump_nm - 1.0 / signal_nm;
  if (inverse <= 0) {
    throw std::invalid_argument("signal wavelength has no frequency-matched idler partner");
  }
  return 1.0 / inverse;
}

void validate_source(const SourceSpec& source) {
  if (source.pump_power_mw < 0) throw std::invalid_argument("source.pump_power_mw must be nonnegative");
  if (source.brightness_pairs_per_s_mw2 < 0) {
    throw std::invalid_argument("source.brightness_pairs_per_s_mw2 must be nonnegative");
  }
  if (source.pump_wavelength_nm <= 0 || source.signal_center_nm <= 0 || source.idler_center_nm <= 0) {
    throw std::invalid_argument("source wavelengths must be positive");
  }
  if (source.filter_bandwidth_nm < 0) {
    throw std::invalid_argument("source.filter_bandwidth_nm must be nonnegative");
  }
  if (!(source.intrinsic_visibility >= 0.0 && source.intrinsic_visibility <= 1.0)) {
    throw std::invalid_argument("source.intrinsic_visibility must lie in [0, 1]");
  }
  if (source.noise_floor_cps < 0) throw std::invalid_argument("source.noise_floor_cps must be nonnegative");
  const double matched = matched_idler_wavelength_nm(source.pump_wavelength_nm, source.signal_center_nm);
  if (std::abs(matched - source.idler_center_nm) > 0.1) {
    throw std::invalid_argument(
        "source channel centers violate frequency matching about the pump by more than 0.1 nm");
  }
}

double pair_rate(const SourceSpec& source) {
  return source.brightness_pairs_per_s_mw2 * source.pump_power_mw * source.pump_power_mw;
}

double effective_visibility(const SourceSpec& source, double window_ps) {
  if (!(window_ps >= 0)) throw std::invalid_argument("window_ps must be nonnegative");
  const double mu = pair_rate(source) * window_ps * 1e-12;
  return source.intrinsic_visibility / (1.0 + mu);
}

std::vector<PairEvent> generate_pairs(const SourceSpec& source, double duration_s,
                                      std::uint64_t seed) {
  validate_source(source);
  if (!(duration_s > 0)) throw std::invalid_argument("duration_s must be positive");
  const double rate = pair_rate(source);
  std::vector<PairEvent> events;
  if (rate <= 0) return events;
  events.reserve(static_cast<std::size_t>(rate * duration_s * 1.05) + 16);
  RandomStream stream(seed, "source.pairs", 0);
  const double duration_ps = duration_s * 1e12;
  const double rate_per_ps = rate * 1e-12;
  const double half_band = source.filter_bandwidth_nm / 2.0;
  double t = stream.exponential(rate_per_ps);
  while (t < duration_ps) {
    PairEvent event;
    event.emit_time_ps = t;
    event.signal_wavelength_nm =
        stream.uniform(source.signal_center_nm - half_band, source.signal_center_nm + half_band);
    event.idler_wavelength_nm =
        matched_idler_wavelength_nm(source.pump_wavelength_nm, event.signal_wavelength_nm);
    events.push_back(event);
    t += stream.exponential(rate_per_ps);
  }
  return events;
}

}  // namespace entdist
