#include "entdist/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "entdist/rng.hpp"

namespace entdist {

namespace {

using nlohmann::json;

double get_number(const json& node, const std::string& key, double fallback, bool required) {
  if (!node.contains(key)) {
    if (required) throw std::invalid_argument("config missing required field: " + key);
    return fallback;
  }
  if (!node[key].is_number()) throw std::invalid_argument("config field must be a number: " + key);
  return node[key].get<double>();
}

AnalyzerSetting parse_analyzer(const json& node, const std::string& label) {
  if (!node.is_object()) throw std::invalid_argument("config field must be an object: " + label);
  if (!node.contains("basis")) {
    throw std::invalid_argument("config missing required field: " + label + ".basis");
  }
  const Basis basis = basis_from_name(node["basis"].get<std::string>());
  AnalyzerSetting setting;
  if (basis == Basis::free_angle) {
    setting = make_analyzer_free(get_number(node, "hwp_deg", 0.0, true));
  } else {
    setting = make_analyzer(basis);
    if (node.contains("hwp_deg")) setting.hwp_deg = node["hwp_deg"].get<double>();
  }
  setting.qwp_deg = get_number(node, "qwp_deg", 0.0, false);
  return setting;
}

FiberSpec parse_fiber(const json& node, const std::string& label) {
  if (!node.is_object()) throw std::invalid_argument("config field must be an object: " + label);
  FiberSpec fiber;
  fiber.length_km = get_number(node, "length_km", 0.0, true);
  fiber.attenuation_db_per_km = get_number(node, "attenuation_db_per_km", 0.0, false);
  fiber.dispersion_ps_per_nm_km = get_number(node, "dispersion_ps_per_nm_km", 0.0, false);
  fiber.reference_wavelength_nm = get_number(node, "reference_wavelength_nm", 1550.0, false);
  fiber.base_delay_ps = get_number(node, "base_delay_ps", 0.0, false);
  fiber.background_cps = get_number(node, "background_cps", 0.0, false);
  fiber.drift_deg_per_hour = get_number(node, "drift_deg_per_hour", 0.0, false);
  return fiber;
}

DetectorSpec parse_detector(const json& node, const std::string& label) {
  if (!node.is_object()) throw std::invalid_argument("config field must be an object: " + label);
  DetectorSpec detector;
  detector.efficiency = get_number(node, "efficiency", 1.0, true);
  detector.jitter_sigma_ps = get_number(node, "jitter_sigma_ps", 0.0, false);
  detector.dark_cps = get_number(node, "dark_cps", 0.0, false);
  detector.dead_time_ps = get_number(node, "dead_time_ps", 0.0, false);
  detector.resolution_ps =
      static_cast<std::int64_t>(get_number(node, "resolution_ps", 1.0, false));
  return detector;
}

json analyzer_json(const AnalyzerSetting& setting) {
  json node;
  node["basis"] = basis_name(setting.basis);
  node["hwp_deg"] = setting.hwp_deg;
  node["qwp_deg"] = setting.qwp_deg;
  return node;
}

json fiber_json(const FiberSpec& fiber) {
  json node;
  node["length_km"] = fiber.length_km;
  node["attenuation_db_per_km"] = fiber.attenuation_db_per_km;
  node["dispersion_ps_per_nm_km"] = fiber.dispersion_ps_per_nm_km;
  node["reference_wavelength_nm"] = fiber.reference_wavelength_nm;
  node["base_delay_ps"] = fiber.base_delay_ps;
  node["background_cps"] = fiber.background_cps;
  node["drift_deg_per_hour"] = fiber.drift_deg_per_hour;
  return node;
}

json detector_json(const DetectorSpec& detector) {
  json node;
  node["efficiency"] = detector.efficiency;
  node["jitter_sigma_ps"] = detector.jitter_sigma_ps;
  node["dark_cps"] = detector.dark_cps;
  node["dead_time_ps"] = detector.dead_time_ps;
  node["resolution_ps"] = detector.resolution_ps;
  return node;
}

}  // namespace

double resolved_accidental_offset_ps(const ExperimentConfig& config) {
  if (config.accidental_offset_ps > 0) return config.accidental_offset_ps;
  return std::max(100.0 * config.window_ps, 10000.0);
}

ExperimentConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& error) {
    throw std::invalid_argument(std::string("config is not valid JSON: ") + error.what());
  }
  if (!root.is_object()) throw std::invalid_argument("config root must be an object");

  ExperimentConfig config;
  config.name = root.value("name", std::string{});
  config.duration_s = get_number(root, "duration_s", 1.0, true);
  config.seed = static_cast<std::uint64_t>(get_number(root, "seed", 1.0, false));
  config.window_ps = get_number(root, "window_ps", 200.0, true);
  config.accidental_offset_ps = get_number(root, "accidental_offset_ps", 0.0, false);
  config.accidental_windows =
      static_cast<int>(get_number(root, "accidental_windows", 1.0, false));
  config.depolarization = get_number(root, "depolarization", 1.0, false);
  config.subtract_accidentals = root.value("subtract_accidentals", false);

  if (!root.contains("source")) throw std::invalid_argument("config missing required field: source");
  const json& source = root["source"];
  config.source.pump_power_mw = get_number(source, "pump_power_mw", 0.0, true);
  config.source.brightness_pairs_per_s_mw2 =
      get_number(source, "brightness_pairs_per_s_mw2", 0.0, true);
  config.source.pump_wavelength_nm = get_number(source, "pump_wavelength_nm", 1550.12, false);
  config.source.signal_center_nm = get_number(source, "signal_center_nm", 1539.37, false);
  config.source.idler_center_nm = get_number(source, "idler_center_nm", 1561.01, false);
  config.source.filter_bandwidth_nm = get_number(source, "filter_bandwidth_nm", 0.8, false);
  config.source.intrinsic_visibility = get_number(source, "intrinsic_visibility", 1.0, false);
  config.source.noise_floor_cps = get_number(source, "noise_floor_cps", 0.0, false);

  if (root.contains("signal_fiber")) {
    config.signal_fiber = parse_fiber(root["signal_fiber"], "signal_fiber");
  }
  if (root.contains("idler_fiber")) {
    config.idler_fiber = parse_fiber(root["idler_fiber"], "idler_fiber");
  }

  if (root.contains("dcm") && !root["dcm"].is_null()) {
    const json& dcm = root["dcm"];
    DcmPlacement placement;
    const std::string arm = dcm.value("arm", std::string("idler"));
    if (arm == "signal") {
      placement.arm = DcmArm::signal;
    } else if (arm == "idler") {
      placement.arm = DcmArm::idler;
    } else {
      throw std::invalid_argument("dcm.arm must be \"signal\" or \"idler\"");
    }
    placement.dcm.total_dispersion_ps_per_nm =
        get_number(dcm, "total_dispersion_ps_per_nm", 0.0, true);
    placement.dcm.insertion_loss_db = get_number(dcm, "insertion_loss_db", 0.0, true);
    placement.dcm.reference_wavelength_nm = get_number(
        dcm, "reference_wavelength_nm",
        placement.arm == DcmArm::signal ? config.source.signal_center_nm
                                        : config.source.idler_center_nm,
        false);
    config.dcm = placement;
  }

  if (!root.contains("detectors")) {
    throw std::invalid_argument("config missing required field: detectors");
  }
  const json& detectors = root["detectors"];
  if (!detectors.contains("signal") || !detectors.contains("idler")) {
    throw std::invalid_argument("config detectors must define both signal and idler");
  }
  config.signal_detector = parse_detector(detectors["signal"], "detectors.signal");
  config.idler_detector = parse_detector(detectors["idler"], "detectors.idler");

  if (root.contains("analyzers")) {
    const json& analyzers = root["analyzers"];
    if (!analyzers.contains("signal") || !analyzers.contains("idler")) {
      throw std::invalid_argument("config analyzers must define both signal and idler");
    }
    config.signal_analyzer = parse_analyzer(analyzers["signal"], "analyzers.signal");
    config.idler_analyzer = parse_analyzer(analyzers["idler"], "analyzers.idler");
  }

  validate_config(config);
  return config;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream input(path, std::ios::binary);
  if (!input) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream buffer;
  buffer << input.rdbuf();
  return parse_config(buffer.str());
}

void validate_config(const ExperimentConfig& config) {
  if (!(config.duration_s > 0)) throw std::invalid_argument("duration_s must be positive");
  if (!(config.window_ps > 0)) throw std::invalid_argument("window_ps must be positive");
  if (config.accidental_offset_ps < 0) {
    throw std::invalid_argument("accidental_offset_ps must be nonnegative");
  }
  const double offset = resolved_accidental_offset_ps(config);
  if (offset <= config.window_ps) {
    throw std::invalid_argument("accidental_offset_ps must exceed window_ps (windows would overlap)");
  }
  if (config.accidental_windows < 1) {
    throw std::invalid_argument("accidental_windows must be at least 1");
  }
  if (!(config.depolarization >= 0.0 && config.depolarization <= 1.0)) {
    throw std::invalid_argument("depolarization must lie in [0, 1]");
  }
  validate_source(config.source);
  validate_fiber(config.signal_fiber);
  validate_fiber(config.idler_fiber);
  if (config.dcm) validate_dcm(config.dcm->dcm);
  validate_detector(config.signal_detector);
  validate_detector(config.idler_detector);
  validate_analyzer(config.signal_analyzer);
  validate_analyzer(config.idler_analyzer);
}

std::string canonical_json(const ExperimentConfig& config) {
  json root;
  root["name"] = config.name;
  root["duration_s"] = config.duration_s;
  root["seed"] = config.seed;
  root["window_ps"] = config.window_ps;
  root["accidental_offset_ps"] = resolved_accidental_offset_ps(config);
  root["accidental_windows"] = config.accidental_windows;
  root["depolarization"] = config.depolarization;
  root["subtract_accidentals"] = config.subtract_accidentals;
  json source;
  source["pump_power_mw"] = config.source.pump_power_mw;
  source["brightness_pairs_per_s_mw2"] = config.source.brightness_pairs_per_s_mw2;
  source["pump_wavelength_nm"] = config.source.pump_wavelength_nm;
  source["signal_center_nm"] = config.source.signal_center_nm;
  source["idler_center_nm"] = config.source.idler_center_nm;
  source["filter_bandwidth_nm"] = config.source.filter_bandwidth_nm;
  source["intrinsic_visibility"] = config.source.intrinsic_visibility;
  source["noise_floor_cps"] = config.source.noise_floor_cps;
  root["source"] = source;
  root["signal_fiber"] = fiber_json(config.signal_fiber);
  root["idler_fiber"] = fiber_json(config.idler_fiber);
  if (config.dcm) {
    json dcm;
    dcm["arm"] = config.dcm->arm == DcmArm::signal ? "signal" : "idler";
    dcm["total_dispersion_ps_per_nm"] = config.dcm->dcm.total_dispersion_ps_per_nm;
    dcm["insertion_loss_db"] = config.dcm->dcm.insertion_loss_db;
    dcm["reference_wavelength_nm"] = config.dcm->dcm.reference_wavelength_nm;
    root["dcm"] = dcm;
  }
  json detectors;
  detectors["signal"] = detector_json(config.signal_detector);
  detectors["idler"] = detector_json(config.idler_detector);
  root["detectors"] = detectors;
  json analyzers;
  analyzers["signal"] = analyzer_json(config.signal_analyzer);
  analyzers["idler"] = analyzer_json(config.idler_analyzer);
  root["analyzers"] = analyzers;
  return root.dump();
}

std::string config_hash(const ExperimentConfig& config) {
  const std::uint64_t hash = fnv1a64(canonical_json(config));
  char buffer[17];
  std::snprintf(buffer, sizeof(buffer), "%016llx", static_cast<unsigned long long>(hash));
  return std::string(buffer);
}

}  // namespace entdist
