#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "entdist/channel.hpp"
#include "entdist/physics.hpp"
#include "entdist/tags.hpp"

namespace entdist {

// One arm's input to the detection stage.
struct DetectArmInput {
  std::vector<ArmEvent> events;          // surviving photons, emission order
  std::vector<double> drift_deg;         // per-event analyzer rotation; empty means zero
  AnalyzerSetting analyzer;
  DetectorSpec detector;
  std::uint32_t channel = 0;
  // Uncorrelated photon rate arriving at the detector input; thinned by the
  // detector efficiency here and injected after the analyzer (no 1/2 split).
  double background_at_detector_cps = 0.0;
};

// Reference detection stage: joint analyzer outcome per pair (photons of the
// same pair_index are correlated through the Werner state), efficiency
// thinning, Gaussian jitter, quantization, dark and background merging, dead
// time, sorted output. Darks and background cover [0, acquisition_span_ps].
std::pair<TagStream, TagStream> detect(const DetectArmInput& signal, const DetectArmInput& idler,
                                       const WernerState& state, double acquisition_span_ps,
                                       std::uint64_t seed);

}  // namespace entdist
