#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "entdist/analysis.hpp"
#include "entdist/config.hpp"
#include "entdist/correlate.hpp"
#include "entdist/engine.hpp"
#include "entdist/fit.hpp"
#include "entdist/qtag.hpp"
#include "entdist/rng.hpp"

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitNoPeak = 1;
constexpr int kExitInvalid = 2;

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::string format_number(double v) {
  std::ostringstream s;
  s << std::setprecision(15) << v;
  return s.str();
}

json coincidence_json(const entdist::CoincidenceResult& r) {
  json j;
  j["coincidences"] = r.coincidences;
  j["accidentals"] = r.accidentals;
  j["accidentals_total"] = r.accidentals_total;
  j["accidental_windows"] = r.accidental_windows;
  j["window_ps"] = r.window_ps;
  j["delay_ps"] = r.delay_ps;
  j["integration_s"] = r.integration_s;
  j["car"] = r.car;
  j["car_lower_bound"] = r.car_lower_bound;
  return j;
}

void print_coincidence_record(std::ostream& out, const entdist::CoincidenceResult& r) {
  out << "coincidences " << r.coincidences << "\n"
      << "accidentals " << format_number(r.accidentals) << "\n"
      << "window_ps " << format_number(r.window_ps) << "\n"
      << "delay_ps " << format_number(r.delay_ps) << "\n"
      << "integration_s " << format_number(r.integration_s) << "\n"
      << "car " << format_number(r.car) << "\n"
      << "car_lower_bound " << (r.car_lower_bound ? 1 : 0) << "\n";
}

struct SimulateArgs {
  std::string config_path;
  std::string output_prefix;
  std::int64_t seed = -1;      // <0 keeps the config seed
  double duration_s = 0.0;     // <=0 keeps the config duration
  int threads = 1;
};

int run_simulate(const SimulateArgs& args) {
  entdist::ExperimentConfig config = entdist::load_config(args.config_path);
  if (args.seed >= 0) config.seed = static_cast<std::uint64_t>(args.seed);
  if (args.duration_s > 0.0) config.duration_s = args.duration_s;
  entdist::validate_config(config);

  const entdist::EngineResult result = entdist::run_experiment(config, args.threads);
  const std::string signal_path = args.output_prefix + ".signal.qtag";
  const std::string idler_path = args.output_prefix + ".idler.qtag";
  entdist::write_qtag(signal_path, result.signal);
  entdist::write_qtag(idler_path, result.idler);

  json prov;
  prov["config"] = json::parse(entdist::canonical_json(config));
  prov["config_hash"] = entdist::config_hash(config);
  prov["seed"] = config.seed;
  prov["threads"] = args.threads;
  prov["signal_tags"] = result.signal.timestamps_ps.size();
  prov["idler_tags"] = result.idler.timestamps_ps.size();
  prov["signal_file"] = signal_path;
  prov["idler_file"] = idler_path;
  write_text_file(args.output_prefix + ".provenance.json", prov.dump(2) + "\n");

  std::cout << "signal_tags " << result.signal.timestamps_ps.size() << "\n"
            << "idler_tags " << result.idler.timestamps_ps.size() << "\n"
            << "config_hash " << entdist::config_hash(config) << "\n"
            << "seed " << config.seed << "\n";
  return kExitOk;
}

struct AnalyzeArgs {
  std::string a_path;
  std::string b_path;
  std::string delay = "auto";  // picoseconds or "auto"
  std::int64_t window_ps = 200;
  std::int64_t offset_ps = 0;  // 0 resolves to the default rule
  int accidental_windows = 1;
  std::int64_t search_min_ps = -1'000'000'000;
  std::int64_t search_max_ps = 1'000'000'000;
  std::int64_t coarse_bin_ps = 1'000'000;
  int refine_factor = 16;
  std::int64_t final_bin_ps = 1;
  std::string histogram_path;
  std::int64_t hist_half_range_ps = 2000;
  std::int64_t hist_bin_ps = 10;
  std::string output_path;
};

int run_analyze(const AnalyzeArgs& args) {
  const entdist::TagStream a = entdist::read_qtag(args.a_path);
  const entdist::TagStream b = entdist::read_qtag(args.b_path);

  double delay_ps = 0.0;
  if (args.delay == "auto") {
    entdist::DelaySearchSpec spec;
    spec.min_delay_ps = args.search_min_ps;
    spec.max_delay_ps = args.search_max_ps;
    spec.coarse_bin_ps = args.coarse_bin_ps;
    spec.refine_factor = args.refine_factor;
    spec.final_bin_ps = args.final_bin_ps;
    delay_ps = entdist::find_delay(a, b, spec);
  } else {
    delay_ps = std::stod(args.delay);
  }

  const std::int64_t offset =
      args.offset_ps > 0 ? args.offset_ps : entdist::default_accidental_offset_ps(args.window_ps);
  const entdist::CoincidenceResult result = entdist::count_coincidences(
      a, b, delay_ps, args.window_ps, offset, args.accidental_windows);
  print_coincidence_record(std::cout, result);

  if (!args.histogram_path.empty()) {
    const entdist::Histogram hist =
        entdist::cross_correlate(a, b, std::llround(delay_ps), args.hist_half_range_ps,
                                 args.hist_bin_ps);
    std::ostringstream csv;
    csv << "delay_ps,counts\n";
    for (std::size_t i = 0; i < hist.counts.size(); ++i) {
      csv << format_number(entdist::histogram_bin_center_ps(hist, i)) << "," << hist.counts[i]
          << "\n";
    }
    write_text_file(args.histogram_path, csv.str());
  }

  if (!args.output_path.empty()) {
    json params;
    params["a"] = args.a_path;
    params["b"] = args.b_path;
    params["delay"] = args.delay;
    params["window_ps"] = args.window_ps;
    params["accidental_offset_ps"] = offset;
    params["accidental_windows"] = args.accidental_windows;
    json out = coincidence_json(result);
    out["config_hash"] = entdist::fnv1a64_hex(params.dump());
    out["seed"] = 0;  // analysis is deterministic; no random stream involved
    write_text_file(args.output_path, out.dump(2) + "\n");
  }
  return kExitOk;
}

struct VisibilityArgs {
  std::string config_path;
  std::string output_prefix;
  std::string bases = "H,V,D,A";
  double step_deg = 22.5;
  double dwell_s = 0.0;  // <=0 keeps the config duration
  std::int64_t seed = -1;
  int threads = 1;
};

std::vector<std::string> split_bases(const std::string& csv) {
  std::vector<std::string> out;
  std::string token;
  std::istringstream in(csv);
  while (std::getline(in, token, ',')) {
    if (!token.empty()) out.push_back(token);
  }
  return out;
}

int run_visibility(const VisibilityArgs& args) {
  entdist::ExperimentConfig base_config = entdist::load_config(args.config_path);
  if (args.seed >= 0) base_config.seed = static_cast<std::uint64_t>(args.seed);
  if (args.dwell_s > 0.0) base_config.duration_s = args.dwell_s;
  entdist::validate_config(base_config);
  if (args.step_deg <= 0.0 || std::abs(std::remainder(180.0, args.step_deg)) > 1e-9) {
    throw std::invalid_argument("visibility: step must divide 180 degrees");
  }
  const std::vector<std::string> bases = split_bases(args.bases);
  if (bases.empty()) throw std::invalid_argument("visibility: no bases given");

  std::vector<double> angles;
  for (double angle = 0.0; angle <= 180.0 + 1e-9; angle += args.step_deg) angles.push_back(angle);

  const std::int64_t window = std::llround(base_config.window_ps);
  const std::int64_t offset = std::llround(entdist::resolved_accidental_offset_ps(base_config));

  bool have_delay = false;
  double delay_ps = 0.0;
  entdist::CoincidenceResult peak_result;
  std::vector<entdist::BasisCurve> curves;
  std::vector<std::string> curve_csv;
  for (std::size_t bi = 0; bi < bases.size(); ++bi) {
    entdist::BasisCurve curve;
    curve.basis = bases[bi];
    std::ostringstream csv;
    csv << "angle_deg,counts\n";
    for (std::size_t ai = 0; ai < angles.size(); ++ai) {
      entdist::ExperimentConfig config = base_config;
      config.signal_analyzer = entdist::make_analyzer(entdist::basis_from_name(bases[bi]));
      config.idler_analyzer = entdist::make_analyzer_free(angles[ai]);
      // Independent per-point seed derived from the master seed and the
      // point's position in the sweep.
      std::uint64_t mix = base_config.seed ^ entdist::fnv1a64(bases[bi]);
      mix ^= 0x9e3779b97f4a7c15ull * (ai + 1);
      config.seed = entdist::splitmix64(mix);

      const entdist::EngineResult sim = entdist::run_experiment(config, args.threads);
      if (!have_delay) {
        delay_ps = entdist::find_delay(sim.idler, sim.signal);
        have_delay = true;
      }
      const entdist::CoincidenceResult r = entdist::count_coincidences(
          sim.idler, sim.signal, delay_ps, window, offset, base_config.accidental_windows);
      double counts = static_cast<double>(r.coincidences);
      if (base_config.subtract_accidentals) counts = std::max(0.0, counts - r.accidentals);
      curve.angles_deg.push_back(angles[ai]);
      curve.counts.push_back(counts);
      csv << format_number(angles[ai]) << "," << format_number(counts) << "\n";
      if (r.coincidences > peak_result.coincidences) peak_result = r;
    }
    curves.push_back(curve);
    curve_csv.push_back(csv.str());
  }

  const entdist::ExperimentReport report =
      entdist::experiment_report(curves, base_config.duration_s, &peak_result);

  for (std::size_t bi = 0; bi < bases.size(); ++bi) {
    write_text_file(args.output_prefix + "." + bases[bi] + ".csv", curve_csv[bi]);
  }
  json out;
  out["config_hash"] = entdist::config_hash(base_config);
  out["seed"] = base_config.seed;
  out["delay_ps"] = delay_ps;
  out["pair_rate_cps"] = report.pair_rate_cps;
  out["visibility_hv"] = report.visibility_hv;
  out["visibility_da"] = report.visibility_da;
  out["fidelity"] = report.fidelity;
  out["fidelity_sigma"] = report.fidelity_sigma;
  out["car"] = report.car;
  out["car_fidelity_bound"] = report.car_fidelity_bound;
  for (std::size_t bi = 0; bi < bases.size(); ++bi) {
    json f;
    f["basis"] = bases[bi];
    f["amplitude"] = report.fits[bi].amplitude;
    f["visibility"] = report.fits[bi].visibility;
    f["raw_visibility"] = report.fits[bi].raw_visibility;
    f["phase_deg"] = report.fits[bi].phase_deg;
    f["offset_floor"] = report.fits[bi].offset_floor;
    f["residual_rms"] = report.fits[bi].residual_rms;
    f["visibility_sigma"] = report.fits[bi].visibility_sigma;
    f["nonphysical"] = report.fits[bi].nonphysical;
    out["fits"].push_back(f);
  }
  write_text_file(args.output_prefix + ".report.json", out.dump(2) + "\n");

  std::cout << "delay_ps " << format_number(delay_ps) << "\n"
            << "pair_rate_cps " << format_number(report.pair_rate_cps) << "\n"
            << "visibility_hv " << format_number(report.visibility_hv) << "\n"
            << "visibility_da " << format_number(report.visibility_da) << "\n"
            << "fidelity " << format_number(report.fidelity) << "\n"
            << "fidelity_sigma " << format_number(report.fidelity_sigma) << "\n"
            << "car " << format_number(report.car) << "\n";
  return kExitOk;
}

struct BudgetArgs {
  std::string config_path;
  std::string output_path;
};

int run_budget(const BudgetArgs& args) {
  const entdist::ExperimentConfig config = entdist::load_config(args.config_path);
  const entdist::BudgetReport report = entdist::budget_report(config);
  std::cout << "signal_fiber_db " << format_number(report.signal_fiber_db) << "\n"
            << "signal_dcm_db " << format_number(report.signal_dcm_db) << "\n"
            << "signal_total_db " << format_number(report.signal_total_db) << "\n"
            << "idler_fiber_db " << format_number(report.idler_fiber_db) << "\n"
            << "idler_dcm_db " << format_number(report.idler_dcm_db) << "\n"
            << "idler_total_db " << format_number(report.idler_total_db) << "\n"
            << "total_db " << format_number(report.total_db) << "\n"
            << "pair_rate_cps " << format_number(report.pair_rate_cps) << "\n"
            << "signal_singles_cps " << format_number(report.signal_singles_cps) << "\n"
            << "idler_singles_cps " << format_number(report.idler_singles_cps) << "\n"
            << "coincidence_rate_cps " << format_number(report.coincidence_rate_cps) << "\n"
            << "accidentals_cps " << format_number(report.accidentals_cps) << "\n"
            << "car " << format_number(report.car) << "\n"
            << "fidelity_bound " << format_number(report.fidelity_bound) << "\n";
  if (!args.output_path.empty()) {
    json out;
    out["config_hash"] = entdist::config_hash(config);
    out["seed"] = config.seed;
    out["signal_fiber_db"] = report.signal_fiber_db;
    out["signal_dcm_db"] = report.signal_dcm_db;
    out["signal_total_db"] = report.signal_total_db;
    out["idler_fiber_db"] = report.idler_fiber_db;
    out["idler_dcm_db"] = report.idler_dcm_db;
    out["idler_total_db"] = report.idler_total_db;
    out["total_db"] = report.total_db;
    out["pair_rate_cps"] = report.pair_rate_cps;
    out["signal_singles_cps"] = report.signal_singles_cps;
    out["idler_singles_cps"] = report.idler_singles_cps;
    out["coincidence_rate_cps"] = report.coincidence_rate_cps;
    out["accidentals_cps"] = report.accidentals_cps;
    out["car"] = report.car;
    out["fidelity_bound"] = report.fidelity_bound;
    write_text_file(args.output_path, out.dump(2) + "\n");
  }
  return kExitOk;
}

struct ScanArgs {
  double min_nm = 1.0;
  double max_nm = 30.0;
  double step_nm = 1.0;
  double pump_leak_cps = -1.0;  // <0 keeps the default
  double window_ps = 60.0;
  double integration_s = 10.0;
  std::string output_path;
};

int run_scan(const ScanArgs& args) {
  if (args.min_nm < 1.0 || args.max_nm > 30.0 || args.min_nm > args.max_nm) {
    throw std::invalid_argument("scan-wavelength: detuning range must lie within 1-30 nm");
  }
  if (args.step_nm <= 0.0) throw std::invalid_argument("scan-wavelength: step must be positive");
  entdist::ChannelScanParams params;
  if (args.pump_leak_cps >= 0.0) params.pump_leak_cps = args.pump_leak_cps;
  params.window_ps = args.window_ps;
  params.integration_s = args.integration_s;
  std::vector<double> detunings;
  for (double d = args.min_nm; d <= args.max_nm + 1e-9; d += args.step_nm) detunings.push_back(d);
  const auto rows = entdist::scan_wavelength_channels(params, detunings);

  std::ostringstream csv;
  csv << "detuning_nm,pair_rate_cps,noise_cps,car\n";
  for (const auto& row : rows) {
    csv << format_number(row.detuning_nm) << "," << format_number(row.pair_rate_cps) << ","
        << format_number(row.noise_cps) << "," << format_number(row.car) << "\n";
  }
  std::cout << csv.str();
  if (!args.output_path.empty()) write_text_file(args.output_path, csv.str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"entangled-pair fiber link simulator and time-tag analyzer"};
  app.require_subcommand(1);

  SimulateArgs sim_args;
  auto* sim = app.add_subcommand("simulate", "run one configured experiment, write tag files");
  sim->add_option("--config", sim_args.config_path, "experiment config (JSON)")->required();
  sim->add_option("--output", sim_args.output_prefix, "output path prefix")->required();
  sim->add_option("--seed", sim_args.seed, "override the config seed");
  sim->add_option("--duration", sim_args.duration_s, "override the config duration (s)");
  sim->add_option("--threads", sim_args.threads, "worker threads (results are thread-count independent)");

  AnalyzeArgs an_args;
  auto* an = app.add_subcommand("analyze", "delay search and coincidence counting on two tag files");
  an->add_option("--a", an_args.a_path, "first tag file (reference)")->required();
  an->add_option("--b", an_args.b_path, "second tag file; delay is t_b - t_a")->required();
  an->add_option("--delay", an_args.delay, "delay in ps, or 'auto' to search");
  an->add_option("--window", an_args.window_ps, "coincidence window, full width (ps)");
  an->add_option("--offset", an_args.offset_ps, "accidental window offset (ps), 0 = auto");
  an->add_option("--accidental-windows", an_args.accidental_windows, "offset windows averaged");
  an->add_option("--search-min", an_args.search_min_ps, "delay search lower edge (ps)");
  an->add_option("--search-max", an_args.search_max_ps, "delay search upper edge (ps)");
  an->add_option("--coarse-bin", an_args.coarse_bin_ps, "delay search first-stage bin (ps)");
  an->add_option("--refine-factor", an_args.refine_factor, "delay search bin shrink factor");
  an->add_option("--final-bin", an_args.final_bin_ps, "delay search last-stage bin (ps)");
  an->add_option("--histogram", an_args.histogram_path, "write a lag histogram CSV around the delay");
  an->add_option("--hist-half-range", an_args.hist_half_range_ps, "histogram half range (ps)");
  an->add_option("--hist-bin", an_args.hist_bin_ps, "histogram bin width (ps)");
  an->add_option("--output", an_args.output_path, "write the result record as JSON");

  VisibilityArgs vis_args;
  auto* vis = app.add_subcommand("visibility", "per-basis analyzer sweeps, fits and fidelity");
  vis->add_option("--config", vis_args.config_path, "experiment config (JSON)")->required();
  vis->add_option("--output", vis_args.output_prefix, "output path prefix")->required();
  vis->add_option("--bases", vis_args.bases, "comma list from H,V,D,A fixed on the signal arm");
  vis->add_option("--step", vis_args.step_deg, "swept-analyzer step (deg), must divide 180");
  vis->add_option("--dwell", vis_args.dwell_s, "integration per sweep point (s)");
  vis->add_option("--seed", vis_args.seed, "override the config seed");
  vis->add_option("--threads", vis_args.threads, "worker threads");

  BudgetArgs bud_args;
  auto* bud = app.add_subcommand("budget", "loss breakdown and expected rates for a config");
  bud->add_option("--config", bud_args.config_path, "experiment config (JSON)")->required();
  bud->add_option("--output", bud_args.output_path, "write the budget as JSON");

  ScanArgs scan_args;
  auto* scan = app.add_subcommand("scan-wavelength", "channel detuning study: rate, noise, CAR");
  scan->add_option("--min", scan_args.min_nm, "minimum detuning (nm)");
  scan->add_option("--max", scan_args.max_nm, "maximum detuning (nm)");
  scan->add_option("--step", scan_args.step_nm, "detuning step (nm)");
  scan->add_option("--pump-leak", scan_args.pump_leak_cps, "pump leakage before filtering (cps)");
  scan->add_option("--window", scan_args.window_ps, "coincidence window for the CAR column (ps)");
  scan->add_option("--integration", scan_args.integration_s, "assumed measurement time (s)");
  scan->add_option("--output", scan_args.output_path, "write the table as CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (sim->parsed()) return run_simulate(sim_args);
    if (an->parsed()) return run_analyze(an_args);
    if (vis->parsed()) return run_visibility(vis_args);
    if (bud->parsed()) return run_budget(bud_args);
    if (scan->parsed()) return run_scan(scan_args);
  } catch (const entdist::no_peak_error& e) {
    std::cerr << e.what() << "\n";
    return kExitNoPeak;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kExitInvalid;
  }
  return kExitInvalid;
}
