#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "entdist/physics.hpp"
#include "entdist/source.hpp"

namespace entdist {

enum class DcmArm { signal, idler };

struct DcmPlacement {
  DcmArm arm = DcmArm::idler;
  DcmSpec dcm;
};

// Full description of one simulated run. Units are embedded in the key names
// of the JSON form to keep them out of the code paths.
struct ExperimentConfig {
  std::string name;                    // scenario label
  double duration_s = 1.0;             // emission window
  std::uint64_t seed = 1;              // master random seed
  double window_ps = 200.0;            // coincidence window (full width)
  double accidental_offset_ps = 0.0;   // 0 resolves to max(100 x window, 10 ns)
  int accidental_windows = 1;          // offset windows averaged for accidentals
  double depolarization = 1.0;         // extra visibility factor for slow polarization scrambling
  bool subtract_accidentals = false;   // visibility fits subtract the measured accidental floor
  SourceSpec source;
  FiberSpec signal_fiber;
  FiberSpec idler_fiber;
  std::optional<DcmPlacement> dcm;
  DetectorSpec signal_detector;
  DetectorSpec idler_detector;
  AnalyzerSetting signal_analyzer;
  AnalyzerSetting idler_analyzer;
};

// Resolved accidental offset (applies the default rule).
double resolved_accidental_offset_ps(const ExperimentConfig& config);

// Parses and validates; error messages name the violated invariant.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);
void validate_config(const ExperimentConfig& config);

// Canonical JSON form (sorted keys, resolved defaults); identical configs
// serialize identically.
std::string canonical_json(const ExperimentConfig& config);

// FNV-1a hash of the canonical form, as fixed-width hex.
std::string config_hash(const ExperimentConfig& config);

}  // namespace entdist
