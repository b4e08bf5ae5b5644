#pragma once

#include <cstdint>
#include <vector>

namespace entdist {

struct SourceSpec {
  double pump_power_mw = 0.0;              // continuous-wave pump power
  double brightness_pairs_per_s_mw2 = 0.0; // pair rate per squared pump power
  double pump_wavelength_nm = 1550.12;
  double signal_center_nm = 1539.37;       // signal filter channel center
  double idler_center_nm = 1561.01;        // idler filter channel center
  double filter_bandwidth_nm = 0.8;        // top-hat filter width, both channels
  double intrinsic_visibility = 1.0;       // source visibility before multi-pair penalty
  double noise_floor_cps = 0.0;            // lumped source-side noise per arm
};

struct PairEvent {
  double emit_time_ps = 0.0;
  double signal_wavelength_nm = 0.0;
  double idler_wavelength_nm = 0.0;
};

// Idler wavelength matching the pump and signal in frequency:
// 1/idler = 2/pump - 1/signal.
double matched_idler_wavelength_nm(double pump_nm, double signal_nm);

// Throws when a field is out of range or the channel centers do not satisfy
// frequency matching about the pump within 0.1 nm.
void validate_source(const SourceSpec& source);

// brightness x pump^2.
double pair_rate(const SourceSpec& source);

// Multi-pair penalty V0 / (1 + mu), mu = pair_rate x window.
double effective_visibility(const SourceSpec& source, double window_ps);

// Homogeneous Poisson emission over [0, duration); signal wavelength uniform
// over the filter band, idler wavelength from frequency matching.
std::vector<PairEvent> generate_pairs(const SourceSpec& source, double duration_s,
                                      std::uint64_t seed);

}  // namespace entdist
