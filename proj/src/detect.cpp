#include "entdist/detect.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "entdist/rng.hpp"

namespace entdist {

namespace {

double drift_at(const std::vector<double>& drift, std::size_t index) {
  return drift.empty() ? 0.0 : drift[index];
}

double pass_marginal(const AnalyzerSetting& analyzer) {
  return analyzer.basis == Basis::none ? 1.0 : 0.5;
}

void append_poisson_uniform(std::vector<double>& times, double rate_cps, double span_ps,
                            RandomStream& stream) {
  if (rate_cps <= 0 || span_ps <= 0) return;
  const double rate_per_ps = rate_cps * 1e-12;
  double t = stream.exponential(rate_per_ps);
  while (t < span_ps) {
    times.push_back(t);
    t += stream.exponential(rate_per_ps);
  }
}

TagStream finish_stream(std::vector<double>& arrival_times, const DetectArmInput& arm,
                        double acquisition_span_ps) {
  TagStream stream;
  stream.channel = arm.channel;
  stream.resolution_ps = arm.detector.resolution_ps;
  stream.timestamps_ps.reserve(arrival_times.size());
  for (double t : arrival_times) {
    const std::int64_t quantized =
        std::llround(t / static_cast<double>(arm.detector.resolution_ps)) *
        arm.detector.resolution_ps;
    if (quantized < 0) continue;  // jitter can push tags before the time origin
    stream.timestamps_ps.push_back(quantized);
  }
  std::sort(stream.timestamps_ps.begin(), stream.timestamps_ps.end());
  apply_dead_time(stream.timestamps_ps, arm.detector.dead_time_ps);
  std::int64_t last = stream.timestamps_ps.empty() ? 0 : stream.timestamps_ps.back();
  stream.duration_ps = std::max(static_cast<std::int64_t>(std::ceil(acquisition_span_ps)), last);
  validate_stream(stream);
  return stream;
}

}  // namespace

std::pair<TagStream, TagStream> detect(const DetectArmInput& signal, const DetectArmInput& idler,
                                       const WernerState& state, double acquisition_span_ps,
                                       std::uint64_t seed) {
  validate_analyzer(signal.analyzer);
  validate_analyzer(idler.analyzer);
  validate_detector(signal.detector);
  validate_detector(idler.detector);
  if (signal.channel == idler.channel) {
    throw std::invalid_argument("detector arms must use distinct channel ids");
  }
  if (!signal.drift_deg.empty() && signal.drift_deg.size() != signal.events.size()) {
    throw std::invalid_argument("signal drift vector length must match its event list");
  }
  if (!idler.drift_deg.empty() && idler.drift_deg.size() != idler.events.size()) {
    throw std::invalid_argument("idler drift vector length must match its event list");
  }

  RandomStream fate(seed, "detect.fate", 0);
  RandomStream signal_noise(seed, "detect.signal", 0);
  RandomStream idler_noise(seed, "detect.idler", 0);

  std::vector<double> signal_times;
  std::vector<double> idler_times;
  signal_times.reserve(signal.events.size());
  idler_times.reserve(idler.events.size());

  auto emit = [](const ArmEvent& event, const DetectArmInput& arm, RandomStream& noise,
                 std::vector<double>& times) {
    if (noise.uniform() >= arm.detector.efficiency) return;
    double t = event.time_ps;
    if (arm.detector.jitter_sigma_ps > 0) t = noise.gaussian(t, arm.detector.jitter_sigma_ps);
    times.push_back(t);
  };

  // Photons of the same pair share one analyzer-outcome draw; lone survivors
  // use the exact 1/2 marginal of the Werner state.
  std::size_t si = 0;
  std::size_t ii = 0;
  while (si < signal.events.size() || ii < idler.events.size()) {
    const bool signal_ready = si < signal.events.size();
    const bool idler_ready = ii < idler.events.size();
    if (signal_ready &&
        (!idler_ready || signal.events[si].pair_index < idler.events[ii].pair_index)) {
      if (fate.uniform() < pass_marginal(signal.analyzer)) {
        emit(signal.events[si], signal, signal_noise, signal_times);
      }
      ++si;
    } else if (idler_ready &&
               (!signal_ready || idler.events[ii].pair_index < signal.events[si].pair_index)) {
      if (fate.uniform() < pass_marginal(idler.analyzer)) {
        emit(idler.events[ii], idler, idler_noise, idler_times);
      }
      ++ii;
    } else {
      auto rotated = [](AnalyzerSetting setting, double extra_deg) {
        if (setting.basis == Basis::none || extra_deg == 0.0) return setting;
        setting.hwp_deg += extra_deg;
        setting.basis = Basis::free_angle;
        return setting;
      };
      const JointOutcomeDistribution joint = joint_outcome_distribution(
          state, rotated(signal.analyzer, drift_at(signal.drift_deg, si)),
          rotated(idler.analyzer, drift_at(idler.drift_deg, ii)));
      const double draw = fate.uniform();
      const bool signal_passes = draw < joint.pass_pass + joint.pass_fail;
      const bool idler_passes =
          draw < joint.pass_pass || (draw >= joint.pass_pass + joint.pass_fail &&
                                     draw < joint.pass_pass + joint.pass_fail + joint.fail_pass);
      if (signal_passes) emit(signal.events[si], signal, signal_noise, signal_times);
      if (idler_passes) emit(idler.events[ii], idler, idler_noise, idler_times);
      ++si;
      ++ii;
    }
  }

  RandomStream signal_darks(seed, "detect.signal.darks", 0);
  RandomStream idler_darks(seed, "detect.idler.darks", 0);
  RandomStream signal_background(seed, "detect.signal.background", 0);
  RandomStream idler_background(seed, "detect.idler.background", 0);
  append_poisson_uniform(signal_times, signal.detector.dark_cps, acquisition_span_ps, signal_darks);
  append_poisson_uniform(idler_times, idler.detector.dark_cps, acquisition_span_ps, idler_darks);
  append_poisson_uniform(signal_times,
                         signal.background_at_detector_cps * signal.detector.efficiency,
                         acquisition_span_ps, signal_background);
  append_poisson_uniform(idler_times, idler.background_at_detector_cps * idler.detector.efficiency,
                         acquisition_span_ps, idler_background);

  return {finish_stream(signal_times, signal, acquisition_span_ps),
          finish_stream(idler_times, idler, acquisition_span_ps)};
}

}  // namespace entdist
