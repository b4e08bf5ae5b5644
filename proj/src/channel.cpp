#include "entdist/channel.hpp"

#include <cmath>

#include "entdist/rng.hpp"

namespace entdist {

double transmission(double loss_db) { return std::pow(10.0, -loss_db / 10.0); }

std::vector<ArmEvent> to_arm_events(const std::vector<PairEvent>& pairs, Arm arm) {
  std::vector<ArmEvent> events;
  events.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const PairEvent& pair = pairs[i];
    events.push_back(ArmEvent{
        static_cast<std::uint64_t>(i), pair.emit_time_ps,
        arm == Arm::signal ? pair.signal_wavelength_nm : pair.idler_wavelength_nm});
  }
  return events;
}

std::vector<ArmEvent> apply_fiber(const std::vector<ArmEvent>& events, const FiberSpec& fiber,
                                  std::uint64_t seed) {
  validate_fiber(fiber);
  const double survive = transmission(fiber.length_km * fiber.attenuation_db_per_km);
  const double slope_ps_per_nm = fiber.dispersion_ps_per_nm_km * fiber.length_km;
  RandomStream stream(seed, "channel.fiber", 0);
  std::vector<ArmEvent> survivors;
  survivors.reserve(events.size());
  for (const ArmEvent& event : events) {
    if (survive < 1.0 && stream.uniform() >= survive) continue;
    ArmEvent moved = event;
    moved.time_ps += fiber.base_delay_ps +
                     slope_ps_per_nm * (event.wavelength_nm - fiber.reference_wavelength_nm);
    survivors.push_back(moved);
  }
  return survivors;
}

std::vector<ArmEvent> apply_dcm(const std::vector<ArmEvent>& events, const DcmSpec& dcm,
                                std::uint64_t seed) {
  validate_dcm(dcm);
  const double survive = transmission(dcm.insertion_loss_db);
  RandomStream stream(seed, "channel.dcm", 0);
  std::vector<ArmEvent> survivors;
  survivors.reserve(events.size());
  for (const ArmEvent& event : events) {
    if (survive < 1.0 && stream.uniform() >= survive) continue;
    ArmEvent moved = event;
    moved.time_ps +=
        dcm.total_dispersion_ps_per_nm * (event.wavelength_nm - dcm.reference_wavelength_nm);
    survivors.push_back(moved);
  }
  return survivors;
}

double drift_angle_deg(double drift_deg_per_hour, double time_ps) {
  return drift_deg_per_hour * time_ps * 1e-12 / 3600.0;
}

std::vector<double> apply_polarization_drift(const std::vector<ArmEvent>& events,
                                             const FiberSpec& fiber) {
  validate_fiber(fiber);
  std::vector<double> rotations;
  rotations.reserve(events.size());
  for (const ArmEvent& event : events) {
    rotations.push_back(drift_angle_deg(fiber.drift_deg_per_hour, event.time_ps));
  }
  return rotations;
}

}  // namespace entdist
