#include "entdist/engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "entdist/channel.hpp"
#include "entdist/rng.hpp"

namespace entdist {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kShardPs = 1e12;

struct ArmModel {
  double base_delay_ps = 0.0;
  double fiber_slope_ps_per_nm = 0.0;
  double fiber_ref_nm = 0.0;
  double dcm_slope_ps_per_nm = 0.0;
  double dcm_ref_nm = 0.0;
  double jitter_sigma_ps = 0.0;
  double resolution_ps = 1.0;
  double q = 1.0;                 // path transmission x detector efficiency
  double dark_cps = 0.0;
  double background_tag_cps = 0.0;  // background after transmission and efficiency
  double drift_deg_per_hour = 0.0;
  double marginal = 0.5;
  double hwp_deg = 0.0;
  bool open = false;              // "none" analyzer: no projection
  double dead_time_ps = 0.0;
};

struct EngineModel {
  std::uint64_t seed = 0;
  double duration_ps = 0.0;
  double acq_span_ps = 0.0;
  double visibility = 1.0;
  double pump_nm = 0.0;
  double band_lo_nm = 0.0;
  double band_hi_nm = 0.0;
  double rate_both_cps = 0.0;
  double rate_lone_signal_cps = 0.0;
  double rate_lone_idler_cps = 0.0;
  ArmModel signal;
  ArmModel idler;
};

double arm_arrival_ps(const ArmModel& arm, double emit_ps, double wavelength_nm) {
  return emit_ps + arm.base_delay_ps +
         arm.fiber_slope_ps_per_nm * (wavelength_nm - arm.fiber_ref_nm) +
         arm.dcm_slope_ps_per_nm * (wavelength_nm - arm.dcm_ref_nm);
}

void push_tag(std::vector<std::int64_t>& tags, const ArmModel& arm, double time_ps) {
  const std::int64_t quantized =
      std::llround(time_ps / arm.resolution_ps) * static_cast<std::int64_t>(arm.resolution_ps);
  if (quantized >= 0) tags.push_back(quantized);
}

struct ShardOutput {
  std::vector<std::int64_t> signal;
  std::vector<std::int64_t> idler;
};

// Spread of one arm's arrival displacement across the filter band plus jitter
// tails; bounds how far pair-derived tags stray from emission order.
double arm_displacement_span_ps(const ArmModel& arm, double band_lo, double band_hi) {
  const double at_lo = arm_arrival_ps(arm, 0.0, band_lo);
  const double at_hi = arm_arrival_ps(arm, 0.0, band_hi);
  return std::abs(at_hi - at_lo) + 8.0 * arm.jitter_sigma_ps;
}

void run_shard(const EngineModel& model, std::uint64_t shard, ShardOutput& out) {
  const double start = static_cast<double>(shard) * kShardPs;
  const double emit_end = std::min(start + kShardPs, model.duration_ps);
  const double noise_end = std::min(start + kShardPs, model.acq_span_ps);
  const double rad = kPi / 180.0;

  std::vector<std::int64_t>& sig = out.signal;
  std::vector<std::int64_t>& idl = out.idler;
  const std::size_t sig_pairs_begin = sig.size();
  const std::size_t idl_pairs_begin = idl.size();
  std::size_t sig_lone_begin = sig_pairs_begin;
  std::size_t idl_lone_begin = idl_pairs_begin;

  if (emit_end > start) {
    {  // pairs with both photons surviving path loss and detection
      RandomStream rs(model.seed, "pairs.both", shard);
      const double rate = model.rate_both_cps * 1e-12;
      if (rate > 0) {
        double t = start + rs.exponential(rate);
        while (t < emit_end) {
          const double lam_s = rs.uniform(model.band_lo_nm, model.band_hi_nm);
          const double lam_i = matched_idler_wavelength_nm(model.pump_nm, lam_s);
          double arr_s = arm_arrival_ps(model.signal, t, lam_s);
          double arr_i = arm_arrival_ps(model.idler, t, lam_i);
          // Analyzer outcome; drift rotates each arm's analyzer at its own
          // arrival time.
          double pass_pass;
          double pass_fail;
          double fail_pass;
          if (model.signal.open && model.idler.open) {
            pass_pass = 1.0;
            pass_fail = 0.0;
            fail_pass = 0.0;
          } else if (model.signal.open) {
            pass_pass = 0.5;
            pass_fail = 0.5;
            fail_pass = 0.0;
          } else if (model.idler.open) {
            pass_pass = 0.5;
            pass_fail = 0.0;
            fail_pass = 0.5;
          } else {
            const double theta_s =
                model.signal.hwp_deg + drift_angle_deg(model.signal.drift_deg_per_hour, arr_s);
            const double theta_i =
                model.idler.hwp_deg + drift_angle_deg(model.idler.drift_deg_per_hour, arr_i);
            const double c = model.visibility * std::cos(4.0 * (theta_s - theta_i) * rad);
            pass_pass = 0.25 * (1.0 + c);
            pass_fail = 0.25 * (1.0 - c);
            fail_pass = pass_fail;
          }
          if (model.signal.jitter_sigma_ps > 0) {
            arr_s = rs.gaussian(arr_s, model.signal.jitter_sigma_ps);
          }
          if (model.idler.jitter_sigma_ps > 0) {
            arr_i = rs.gaussian(arr_i, model.idler.jitter_sigma_ps);
          }
          const double u = rs.uniform();
          const bool tag_s = u < pass_pass + pass_fail;
          const bool tag_i =
              u < pass_pass || (u >= pass_pass + pass_fail && u < pass_pass + pass_fail + fail_pass);
          if (tag_s) push_tag(sig, model.signal, arr_s);
          if (tag_i) push_tag(idl, model.idler, arr_i);
          t += rs.exponential(rate);
        }
      }
    }
    sig_lone_begin = sig.size();
    idl_lone_begin = idl.size();
    {  // lone detected signal photons (partner lost); analyzer marginal folded in
      RandomStream rs(model.seed, "pairs.lone_signal", shard);
      const double rate = model.rate_lone_signal_cps * 1e-12;
      if (rate > 0) {
        double t = start + rs.exponential(rate);
        while (t < emit_end) {
          const double lam_s = rs.uniform(model.band_lo_nm, model.band_hi_nm);
          double arr = arm_arrival_ps(model.signal, t, lam_s);
          if (model.signal.jitter_sigma_ps > 0) {
            arr = rs.gaussian(arr, model.signal.jitter_sigma_ps);
          }
          push_tag(sig, model.signal, arr);
          t += rs.exponential(rate);
        }
      }
    }
    {  // lone detected idler photons
      RandomStream rs(model.seed, "pairs.lone_idler", shard);
      const double rate = model.rate_lone_idler_cps * 1e-12;
      if (rate > 0) {
        double t = start + rs.exponential(rate);
        while (t < emit_end) {
          const double lam_s = rs.uniform(model.band_lo_nm, model.band_hi_nm);
          const double lam_i = matched_idler_wavelength_nm(model.pump_nm, lam_s);
          double arr = arm_arrival_ps(model.idler, t, lam_i);
          if (model.idler.jitter_sigma_ps > 0) {
            arr = rs.gaussian(arr, model.idler.jitter_sigma_ps);
          }
          push_tag(idl, model.idler, arr);
          t += rs.exponential(rate);
        }
      }
    }
  }

  const std::size_t sig_noise_begin = sig.size();
  const std::size_t idl_noise_begin = idl.size();

  // Darks and uncorrelated background are homogeneous Poisson processes; a
  // timing-jitter shift leaves them invariant, so they are drawn directly at
  // their final rates without jitter draws.
  auto append_noise = [&](std::vector<std::int64_t>& tags, const ArmModel& arm, double rate_cps,
                          const char* label) {
    if (rate_cps <= 0 || noise_end <= start) return;
    RandomStream rs(model.seed, label, shard);
    const double rate = rate_cps * 1e-12;
    double t = start + rs.exponential(rate);
    while (t < noise_end) {
      push_tag(tags, arm, t);
      t += rs.exponential(rate);
    }
  };
  append_noise(sig, model.signal, model.signal.dark_cps, "noise.signal.dark");
  const std::size_t sig_bg_begin = sig.size();
  append_noise(sig, model.signal, model.signal.background_tag_cps, "noise.signal.background");
  append_noise(idl, model.idler, model.idler.dark_cps, "noise.idler.dark");
  const std::size_t idl_bg_begin = idl.size();
  append_noise(idl, model.idler, model.idler.background_tag_cps, "noise.idler.background");

  // Each pair category is generated in emission order, so within one run a
  // tag strays from its sorted slot only by the dispersion-plus-jitter
  // displacement span. Runs from different categories overlap in time, so
  // they must never share one insertion pass: restore order within each run,
  // then merge the runs. Noise runs are exactly sorted already.
  const double span_s = arm_displacement_span_ps(model.signal, model.band_lo_nm, model.band_hi_nm);
  const double span_i = arm_displacement_span_ps(model.idler, model.band_lo_nm, model.band_hi_nm);
  const bool near_both_s = span_s * model.rate_both_cps * 1e-12 < 64.0;
  const bool near_lone_s = span_s * model.rate_lone_signal_cps * 1e-12 < 64.0;
  const bool near_both_i = span_i * model.rate_both_cps * 1e-12 < 64.0;
  const bool near_lone_i = span_i * model.rate_lone_idler_cps * 1e-12 < 64.0;

  // Near-sorted insertion when few tags fall inside the displacement span;
  // otherwise hand the run to std::sort.
  auto sort_run = [](std::vector<std::int64_t>::iterator first,
                     std::vector<std::int64_t>::iterator last, bool near) {
    if (std::is_sorted(first, last)) return;
    if (!near) {
      std::sort(first, last);
      return;
    }
    for (auto it = first + 1; it < last; ++it) {
      std::int64_t value = *it;
      auto hole = it;
      while (hole != first && *(hole - 1) > value) {
        *hole = *(hole - 1);
        --hole;
      }
      *hole = value;
    }
  };

  // Each channel holds four runs: [pairs_begin, lone_begin) coincident pairs,
  // [lone_begin, noise_begin) lone photons, [noise_begin, bg_begin) darks,
  // [bg_begin, end) background.
  auto merge_channel = [&sort_run](std::vector<std::int64_t>& v, std::size_t pairs_begin,
                                   std::size_t lone_begin, std::size_t noise_begin,
                                   std::size_t bg_begin, bool near_both, bool near_lone) {
    auto pair_first = v.begin() + static_cast<std::ptrdiff_t>(pairs_begin);
    auto lone_first = v.begin() + static_cast<std::ptrdiff_t>(lone_begin);
    auto noise_first = v.begin() + static_cast<std::ptrdiff_t>(noise_begin);
    auto bg_first = v.begin() + static_cast<std::ptrdiff_t>(bg_begin);
    sort_run(pair_first, lone_first, near_both);
    sort_run(lone_first, noise_first, near_lone);
    std::inplace_merge(pair_first, lone_first, noise_first);
    std::inplace_merge(noise_first, bg_first, v.end());
    std::inplace_merge(pair_first, noise_first, v.end());
  };
  merge_channel(sig, sig_pairs_begin, sig_lone_begin, sig_noise_begin, sig_bg_begin, near_both_s,
                near_lone_s);
  merge_channel(idl, idl_pairs_begin, idl_lone_begin, idl_noise_begin, idl_bg_begin, near_both_i,
                near_lone_i);
}

EngineModel build_model(const ExperimentConfig& config) {
  validate_config(config);
  EngineModel model;
  model.seed = config.seed;
  model.duration_ps = config.duration_s * 1e12;
  model.pump_nm = config.source.pump_wavelength_nm;
  model.band_lo_nm = config.source.signal_center_nm - config.source.filter_bandwidth_nm / 2.0;
  model.band_hi_nm = config.source.signal_center_nm + config.source.filter_bandwidth_nm / 2.0;
  model.visibility =
      effective_visibility(config.source, config.window_ps) * config.depolarization;

  const LinkScalars scalars = link_scalars(config);
  const double rate = scalars.pair_rate_cps;
  const double q_s = scalars.signal_q;
  const double q_i = scalars.idler_q;

  auto fill_arm = [&](ArmModel& arm, const FiberSpec& fiber, const DetectorSpec& detector,
                      const AnalyzerSetting& analyzer, bool has_dcm, const DcmSpec& dcm,
                      double background_det_cps) {
    arm.base_delay_ps = fiber.base_delay_ps;
    arm.fiber_slope_ps_per_nm = fiber.dispersion_ps_per_nm_km * fiber.length_km;
    arm.fiber_ref_nm = fiber.reference_wavelength_nm;
    arm.dcm_slope_ps_per_nm = has_dcm ? dcm.total_dispersion_ps_per_nm : 0.0;
    arm.dcm_ref_nm = has_dcm ? dcm.reference_wavelength_nm : arm.fiber_ref_nm;
    arm.jitter_sigma_ps = detector.jitter_sigma_ps;
    arm.resolution_ps = static_cast<double>(detector.resolution_ps);
    arm.dark_cps = detector.dark_cps;
    arm.background_tag_cps = background_det_cps * detector.efficiency;
    arm.drift_deg_per_hour = fiber.drift_deg_per_hour;
    arm.marginal = analyzer_marginal(analyzer);
    arm.open = analyzer.basis == Basis::none;
    arm.hwp_deg = analyzer.hwp_deg;
    arm.dead_time_ps = detector.dead_time_ps;
  };

  const bool dcm_on_signal = config.dcm && config.dcm->arm == DcmArm::signal;
  const bool dcm_on_idler = config.dcm && config.dcm->arm == DcmArm::idler;
  const DcmSpec empty_dcm;
  fill_arm(model.signal, config.signal_fiber, config.signal_detector, config.signal_analyzer,
           dcm_on_signal, dcm_on_signal ? config.dcm->dcm : empty_dcm,
           scalars.signal_background_det_cps);
  fill_arm(model.idler, config.idler_fiber, config.idler_detector, config.idler_analyzer,
           dcm_on_idler, dcm_on_idler ? config.dcm->dcm : empty_dcm,
           scalars.idler_background_det_cps);
  model.signal.q = q_s;
  model.idler.q = q_i;

  model.rate_both_cps = rate * q_s * q_i;
  model.rate_lone_signal_cps = rate * q_s * (1.0 - q_i) * model.signal.marginal;
  model.rate_lone_idler_cps = rate * (1.0 - q_s) * q_i * model.idler.marginal;

  const double band_lo_i = matched_idler_wavelength_nm(model.pump_nm, model.band_hi_nm);
  const double band_hi_i = matched_idler_wavelength_nm(model.pump_nm, model.band_lo_nm);
  auto arm_delay_max = [&](const ArmModel& arm, double lo, double hi) {
    const double at_lo = arm_arrival_ps(arm, 0.0, lo);
    const double at_hi = arm_arrival_ps(arm, 0.0, hi);
    return std::max(at_lo, at_hi) + 6.0 * arm.jitter_sigma_ps;
  };
  const double tail = std::max(
      arm_delay_max(model.signal, model.band_lo_nm, model.band_hi_nm),
      arm_delay_max(model.idler, band_lo_i, band_hi_i));
  model.acq_span_ps = model.duration_ps + std::max(0.0, tail);
  return model;
}

void assemble_stream(TagStream& stream, std::vector<ShardOutput>& shards, bool signal_side,
                     std::uint32_t channel, std::int64_t resolution_ps, double dead_time_ps,
                     double acq_span_ps) {
  std::size_t total = 0;
  for (const ShardOutput& shard : shards) {
    total += signal_side ? shard.signal.size() : shard.idler.size();
  }
  std::vector<std::int64_t>& out = stream.timestamps_ps;
  out.clear();
  out.reserve(total);
  std::vector<std::size_t> boundaries;
  boundaries.reserve(shards.size());
  for (ShardOutput& shard : shards) {
    std::vector<std::int64_t>& part = signal_side ? shard.signal : shard.idler;
    boundaries.push_back(out.size());
    out.insert(out.end(), part.begin(), part.end());
    part.clear();
    part.shrink_to_fit();
  }
  // Shard blocks are internally sorted; arrivals spill only into the adjacent
  // block (delays are far shorter than the shard length), so one bounded
  // merge per boundary restores global order.
  for (std::size_t b = 1; b < boundaries.size(); ++b) {
    const std::size_t begin = boundaries[b];
    const std::size_t end = b + 1 < boundaries.size() ? boundaries[b + 1] : out.size();
    if (begin == 0 || begin >= out.size() || begin == end) continue;
    if (out[begin - 1] <= out[begin]) continue;
    auto block_first = out.begin() + static_cast<std::ptrdiff_t>(begin);
    auto block_last = out.begin() + static_cast<std::ptrdiff_t>(end);
    auto lo = std::lower_bound(out.begin(), block_first, *block_first);
    auto hi = std::upper_bound(block_first, block_last, *(block_first - 1));
    std::inplace_merge(lo, block_first, hi);
  }
  apply_dead_time(out, dead_time_ps);
  stream.channel = channel;
  stream.resolution_ps = resolution_ps;
  const std::int64_t last = out.empty() ? 0 : out.back();
  stream.duration_ps = std::max(static_cast<std::int64_t>(std::ceil(acq_span_ps)), last);
  validate_stream(stream);
}

}  // namespace

double analyzer_marginal(const AnalyzerSetting& analyzer) {
  return analyzer.basis == Basis::none ? 1.0 : 0.5;
}

LinkScalars link_scalars(const ExperimentConfig& config) {
  validate_config(config);
  LinkScalars scalars;
  scalars.pair_rate_cps = pair_rate(config.source);
  scalars.state_visibility =
      effective_visibility(config.source, config.window_ps) * config.depolarization;

  const double fiber_loss_s =
      config.signal_fiber.length_km * config.signal_fiber.attenuation_db_per_km;
  const double fiber_loss_i =
      config.idler_fiber.length_km * config.idler_fiber.attenuation_db_per_km;
  const double dcm_loss_s =
      config.dcm && config.dcm->arm == DcmArm::signal ? config.dcm->dcm.insertion_loss_db : 0.0;
  const double dcm_loss_i =
      config.dcm && config.dcm->arm == DcmArm::idler ? config.dcm->dcm.insertion_loss_db : 0.0;
  scalars.signal_path_loss_db = fiber_loss_s + dcm_loss_s;
  scalars.idler_path_loss_db = fiber_loss_i + dcm_loss_i;
  scalars.signal_q = transmission(scalars.signal_path_loss_db) * config.signal_detector.efficiency;
  scalars.idler_q = transmission(scalars.idler_path_loss_db) * config.idler_detector.efficiency;

  // Fiber background enters at the fiber output and passes any downstream
  // DCM; source-side noise traverses the full path.
  scalars.signal_background_det_cps =
      config.signal_fiber.background_cps * transmission(dcm_loss_s) +
      config.source.noise_floor_cps * transmission(scalars.signal_path_loss_db);
  scalars.idler_background_det_cps =
      config.idler_fiber.background_cps * transmission(dcm_loss_i) +
      config.source.noise_floor_cps * transmission(scalars.idler_path_loss_db);

  const double marginal_s = analyzer_marginal(config.signal_analyzer);
  const double marginal_i = analyzer_marginal(config.idler_analyzer);
  scalars.expected_signal_singles_cps =
      scalars.pair_rate_cps * scalars.signal_q * marginal_s + config.signal_detector.dark_cps +
      scalars.signal_background_det_cps * config.signal_detector.efficiency;
  scalars.expected_idler_singles_cps =
      scalars.pair_rate_cps * scalars.idler_q * marginal_i + config.idler_detector.dark_cps +
      scalars.idler_background_det_cps * config.idler_detector.efficiency;
  scalars.expected_both_detected_cps = scalars.pair_rate_cps * scalars.signal_q * scalars.idler_q;
  return scalars;
}

EngineResult run_experiment(const ExperimentConfig& config, int threads) {
  if (threads < 1) throw std::invalid_argument("threads must be at least 1");
  const EngineModel model = build_model(config);
  const std::uint64_t shard_count = static_cast<std::uint64_t>(
      std::max(1.0, std::ceil(model.acq_span_ps / kShardPs)));
  std::vector<ShardOutput> shards(shard_count);

  if (threads == 1 || shard_count == 1) {
    for (std::uint64_t k = 0; k < shard_count; ++k) run_shard(model, k, shards[k]);
  } else {
    std::atomic<std::uint64_t> next{0};
    auto worker = [&]() {
      while (true) {
        const std::uint64_t k = next.fetch_add(1);
        if (k >= shard_count) break;
        run_shard(model, k, shards[k]);
      }
    };
    std::vector<std::thread> pool;
    const int worker_count = std::min<int>(threads, static_cast<int>(shard_count));
    pool.reserve(static_cast<std::size_t>(worker_count));
    for (int w = 0; w < worker_count; ++w) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  EngineResult result;
  assemble_stream(result.signal, shards, true, kSignalChannel,
                  config.signal_detector.resolution_ps, config.signal_detector.dead_time_ps,
                  model.acq_span_ps);
  assemble_stream(result.idler, shards, false, kIdlerChannel,
                  config.idler_detector.resolution_ps, config.idler_detector.dead_time_ps,
                  model.acq_span_ps);
  return result;
}

}  // namespace entdist
