#pragma once

#include "entdist/config.hpp"
#include "entdist/tags.hpp"

namespace entdist {

struct EngineResult {
  TagStream signal;
  TagStream idler;
};

// Channel ids used by every simulated run.
inline constexpr std::uint32_t kSignalChannel = 0;
inline constexpr std::uint32_t kIdlerChannel = 1;

// End-to-end simulation of one configured run.
//
// The source/fiber/DCM/analyzer/detector chain collapses analytically into
// independent Poisson tag categories (pairs with both photons detected, lone
// detected photons per arm, darks, background); only events that produce tags
// are ever drawn, which keeps deployed-loss configs tractable. Each category
// is generated in fixed 1 s wall-clock shards with random streams addressed
// by (seed, category, shard), so output is byte-identical for any thread
// count.
EngineResult run_experiment(const ExperimentConfig& config, int threads = 1);

// Analyzer pass probability of a lone photon (1/2 for projective bases, 1 for
// an open "none" analyzer); the Werner marginal is angle-independent.
double analyzer_marginal(const AnalyzerSetting& analyzer);

// Derived per-run scalars, exposed for reporting and calibration.
struct LinkScalars {
  double pair_rate_cps = 0.0;          // emitted pairs per second
  double state_visibility = 0.0;       // effective visibility incl. depolarization
  double signal_path_loss_db = 0.0;    // fiber plus any DCM on the signal arm
  double idler_path_loss_db = 0.0;
  double signal_q = 0.0;               // path transmission x detector efficiency
  double idler_q = 0.0;
  double signal_background_det_cps = 0.0;  // uncorrelated photons at the detector input
  double idler_background_det_cps = 0.0;
  double expected_signal_singles_cps = 0.0;
  double expected_idler_singles_cps = 0.0;
  double expected_both_detected_cps = 0.0;  // pairs surviving both paths and detectors
};
LinkScalars link_scalars(const ExperimentConfig& config);

}  // namespace entdist
