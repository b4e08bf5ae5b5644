#pragma once

#include <cstdint>
#include <vector>

#include "entdist/physics.hpp"
#include "entdist/source.hpp"

namespace entdist {

enum class Arm { signal, idler };

// One photon of a pair while it propagates through an arm.
struct ArmEvent {
  std::uint64_t pair_index = 0;  // position in the emitted pair sequence
  double time_ps = 0.0;          // current arrival time
  double wavelength_nm = 0.0;
};

// Fractional power transmission of a loss in dB.
double transmission(double loss_db);

// Splits emitted pairs into one arm's photon list.
std::vector<ArmEvent> to_arm_events(const std::vector<PairEvent>& pairs, Arm arm);

// Bernoulli survival at the fiber's total loss; survivors gain
// base_delay + dispersion x length x (wavelength - reference).
std::vector<ArmEvent> apply_fiber(const std::vector<ArmEvent>& events, const FiberSpec& fiber,
                                  std::uint64_t seed);

// Bernoulli survival at the insertion loss; survivors gain
// total_dispersion x (wavelength - reference).
std::vector<ArmEvent> apply_dcm(const std::vector<ArmEvent>& events, const DcmSpec& dcm,
                                std::uint64_t seed);

// Slow polarization rotation at time t: drift_rate x t(hours).
double drift_angle_deg(double drift_deg_per_hour, double time_ps);

// Per-event extra analyzer rotation from the fiber's polarization drift,
// evaluated at each event's current arrival time.
std::vector<double> apply_polarization_drift(const std::vector<ArmEvent>& events,
                                             const FiberSpec& fiber);

}  // namespace entdist
