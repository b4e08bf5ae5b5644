#include <sys/wait.h>

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"

#include "entdist/qtag.hpp"
#include "entdist/rng.hpp"
#include "entdist/tags.hpp"

using namespace entdist;

namespace {

namespace fs = std::filesystem;

fs::path scratch_dir() {
  auto dir = fs::temp_directory_path() / "entdist_cli_tests";
  fs::create_directories(dir);
  return dir;
}

std::string scratch(const std::string& name) { return (scratch_dir() / name).string(); }

std::string preset(const std::string& name) {
  return std::string(ENTDIST_PRESET_DIR) + "/" + name + ".json";
}

struct CliRun {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

CliRun run_cli(const std::string& args) {
  const std::string out_path = scratch("stdout.txt");
  const std::string err_path = scratch("stderr.txt");
  const std::string command = std::string("\"") + ENTDIST_CLI_PATH + "\" " + args + " > \"" +
                              out_path + "\" 2> \"" + err_path + "\"";
  const int status = std::system(command.c_str());
  CliRun run;
  run.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  run.out = slurp(out_path);
  run.err = slurp(err_path);
  return run;
}

// Extracts "key value" lines from the plain-text reports.
std::string report_value(const std::string& text, const std::string& key) {
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind(key + " ", 0) == 0) return line.substr(key.size() + 1);
  }
  return {};
}

TagStream even_grid_stream(std::uint32_t channel, std::int64_t count, std::int64_t spacing,
                           std::int64_t shift) {
  TagStream stream;
  stream.channel = channel;
  for (std::int64_t i = 0; i < count; ++i) stream.timestamps_ps.push_back(i * spacing + shift);
  stream.duration_ps = stream.timestamps_ps.back() + 1;
  return stream;
}

}  // namespace

TEST_CASE("simulate writes tag files and a provenance record") {
  const std::string prefix = scratch("sim8k");
  CliRun run = run_cli("simulate --config \"" + preset("local-8k") + "\" --output \"" + prefix +
                       "\" --duration 1");
  REQUIRE(run.exit_code == 0);

  TagStream signal = read_qtag(prefix + ".signal.qtag");
  TagStream idler = read_qtag(prefix + ".idler.qtag");
  CHECK(signal.channel == 0);
  CHECK(idler.channel == 1);
  CHECK(signal.timestamps_ps.size() > 1000);
  CHECK(idler.timestamps_ps.size() > 1000);

  nlohmann::json prov = nlohmann::json::parse(slurp(prefix + ".provenance.json"));
  CHECK(prov["seed"].get<std::uint64_t>() == 1);
  CHECK(prov["config_hash"].get<std::string>().size() == 16);
  CHECK(prov["signal_tags"].get<std::size_t>() == signal.timestamps_ps.size());
  CHECK(prov["idler_tags"].get<std::size_t>() == idler.timestamps_ps.size());
  CHECK(prov["config"]["window_ps"].get<double>() == doctest::Approx(200.0));

  // stdout mirrors the headline numbers.
  CHECK(report_value(run.out, "signal_tags") == std::to_string(signal.timestamps_ps.size()));
  CHECK(report_value(run.out, "seed") == "1");
}

TEST_CASE("simulate is reproducible byte for byte") {
  const std::string first = scratch("rep_a");
  const std::string second = scratch("rep_b");
  REQUIRE(run_cli("simulate --config \"" + preset("local-8k") + "\" --output \"" + first +
                  "\" --duration 0.2 --seed 7")
              .exit_code == 0);
  REQUIRE(run_cli("simulate --config \"" + preset("local-8k") + "\" --output \"" + second +
                  "\" --duration 0.2 --seed 7")
              .exit_code == 0);
  CHECK(slurp(first + ".signal.qtag") == slurp(second + ".signal.qtag"));
  CHECK(slurp(first + ".idler.qtag") == slurp(second + ".idler.qtag"));

  const std::string third = scratch("rep_c");
  REQUIRE(run_cli("simulate --config \"" + preset("local-8k") + "\" --output \"" + third +
                  "\" --duration 0.2 --seed 8")
              .exit_code == 0);
  CHECK(slurp(first + ".signal.qtag") != slurp(third + ".signal.qtag"));
}

TEST_CASE("analyze counts coincidences at an explicit delay") {
  TagStream a;
  a.channel = 0;
  a.timestamps_ps = {0, 1000, 5000};
  a.duration_ps = 5000;
  TagStream b;
  b.channel = 1;
  b.timestamps_ps = {10, 1030, 15000};
  b.duration_ps = 15000;
  const std::string a_path = scratch("an_a.qtag");
  const std::string b_path = scratch("an_b.qtag");
  write_qtag(a_path, a);
  write_qtag(b_path, b);

  const std::string json_path = scratch("an_out.json");
  CliRun run = run_cli("analyze --a \"" + a_path + "\" --b \"" + b_path +
                       "\" --delay 0 --window 60 --output \"" + json_path + "\"");
  REQUIRE(run.exit_code == 0);
  // Matches: (0,10) and (1000,1030); (5000,15000) sits in the offset window
  // at the default 10 ns spacing instead.
  CHECK(report_value(run.out, "coincidences") == "2");
  CHECK(report_value(run.out, "car") == "2");
  CHECK(report_value(run.out, "car_lower_bound") == "0");

  nlohmann::json out = nlohmann::json::parse(slurp(json_path));
  CHECK(out["coincidences"].get<std::int64_t>() == 2);
  CHECK(out["accidentals_total"].get<std::int64_t>() == 1);
  CHECK(out["accidental_windows"].get<int>() == 1);
  CHECK(out["window_ps"].get<double>() == doctest::Approx(60.0));
  CHECK(out["delay_ps"].get<double>() == doctest::Approx(0.0).scale(1.0));
  CHECK(out["integration_s"].get<double>() == doctest::Approx(1.5e-8).epsilon(1e-12));
  CHECK(out["car"].get<double>() == doctest::Approx(2.0));
  CHECK_FALSE(out["car_lower_bound"].get<bool>());
  CHECK(out["seed"].get<int>() == 0);
  CHECK(out["config_hash"].get<std::string>().size() == 16);
}

TEST_CASE("analyze searches out the delay on its own") {
  RandomStream rng(11, "test.cli.delay", 0);
  TagStream a;
  a.channel = 0;
  std::int64_t t = 0;
  for (int i = 0; i < 500; ++i) {
    t += static_cast<std::int64_t>(rng.exponential(1.0 / 2000.0)) + 1;
    a.timestamps_ps.push_back(t);
  }
  a.duration_ps = t + 1;
  TagStream b = a;
  b.channel = 1;
  for (auto& ts : b.timestamps_ps) ts += 123;
  b.duration_ps += 123;
  const std::string a_path = scratch("auto_a.qtag");
  const std::string b_path = scratch("auto_b.qtag");
  write_qtag(a_path, a);
  write_qtag(b_path, b);

  CliRun run = run_cli("analyze --a \"" + a_path + "\" --b \"" + b_path +
                       "\" --delay auto --window 20 --search-min -5000 --search-max 5000 " +
                       "--coarse-bin 100");
  REQUIRE(run.exit_code == 0);
  CHECK(report_value(run.out, "coincidences") == "500");
  CHECK(report_value(run.out, "delay_ps") == "123");
}

TEST_CASE("analyze writes the lag histogram around the delay") {
  TagStream a = even_grid_stream(0, 500, 1000, 0);
  TagStream b = even_grid_stream(1, 500, 1000, 123);
  const std::string a_path = scratch("hist_a.qtag");
  const std::string b_path = scratch("hist_b.qtag");
  write_qtag(a_path, a);
  write_qtag(b_path, b);

  const std::string hist_path = scratch("hist.csv");
  CliRun run = run_cli("analyze --a \"" + a_path + "\" --b \"" + b_path +
                       "\" --delay 123 --window 20 --histogram \"" + hist_path +
                       "\" --hist-half-range 400 --hist-bin 10");
  REQUIRE(run.exit_code == 0);
  CHECK(report_value(run.out, "coincidences") == "500");

  std::istringstream csv(slurp(hist_path));
  std::string line;
  REQUIRE(std::getline(csv, line));
  CHECK(line == "delay_ps,counts");
  std::int64_t total = 0;
  double best_center = 0.0;
  std::int64_t best_count = -1;
  int rows = 0;
  while (std::getline(csv, line)) {
    const auto comma = line.find(',');
    REQUIRE(comma != std::string::npos);
    const double center = std::stod(line.substr(0, comma));
    const std::int64_t count = std::stoll(line.substr(comma + 1));
    total += count;
    if (count > best_count) {
      best_count = count;
      best_center = center;
    }
    ++rows;
  }
  CHECK(rows >= 80);
  // Every pair lies at lag 123; nothing else falls within the half range.
  CHECK(total == 500);
  CHECK(std::abs(best_center - 123.0) <= 10.0);
}

TEST_CASE("analyze exits with the no-peak code on uncorrelated input") {
  RandomStream rng(5, "test.cli.uncorrelated", 0);
  auto make_sparse = [&](std::uint32_t channel) {
    TagStream stream;
    stream.channel = channel;
    std::int64_t t = 0;
    for (int i = 0; i < 200; ++i) {
      t += static_cast<std::int64_t>(rng.exponential(1.0 / 2e5)) + 1;
      stream.timestamps_ps.push_back(t);
    }
    stream.duration_ps = t + 1;
    return stream;
  };
  const std::string a_path = scratch("uncorr_a.qtag");
  const std::string b_path = scratch("uncorr_b.qtag");
  write_qtag(a_path, make_sparse(0));
  write_qtag(b_path, make_sparse(1));

  CliRun run = run_cli("analyze --a \"" + a_path + "\" --b \"" + b_path + "\" --delay auto");
  CHECK(run.exit_code == 1);
  CHECK(run.err.find("no significant peak") != std::string::npos);
}

TEST_CASE("analyze rejects corrupt tag files with a byte offset") {
  TagStream a = even_grid_stream(0, 4, 100, 0);
  const std::string path = scratch("corrupt.qtag");
  write_qtag(path, a);
  // Flip a reserved byte in the first record.
  std::fstream file(path, std::ios::binary | std::ios::in | std::ios::out);
  file.seekp(24 + 12);
  char nine = 9;
  file.write(&nine, 1);
  file.close();

  CliRun run = run_cli("analyze --a \"" + path + "\" --b \"" + path + "\" --delay 0");
  CHECK(run.exit_code == 2);
  CHECK(run.err.find("at byte 24") != std::string::npos);
  CHECK(run.err.find("reserved") != std::string::npos);
}

TEST_CASE("budget prints the loss breakdown for a preset") {
  const std::string out_path = scratch("budget.json");
  CliRun run =
      run_cli("budget --config \"" + preset("93km") + "\" --output \"" + out_path + "\"");
  REQUIRE(run.exit_code == 0);
  nlohmann::json out = nlohmann::json::parse(slurp(out_path));
  CHECK(out["signal_total_db"].get<double>() == doctest::Approx(35.4).epsilon(1e-9));
  CHECK(out["idler_total_db"].get<double>() == doctest::Approx(4.3).epsilon(1e-9));
  CHECK(out["total_db"].get<double>() == doctest::Approx(39.7).epsilon(1e-9));
  CHECK(out["signal_singles_cps"].get<double>() == doctest::Approx(4.8e3).epsilon(1e-6));
  CHECK(out["idler_singles_cps"].get<double>() == doctest::Approx(5.6e6).epsilon(1e-6));
  CHECK(report_value(run.out, "total_db") != "");
}

TEST_CASE("scan-wavelength emits the channel table") {
  const std::string out_path = scratch("scan.csv");
  CliRun run = run_cli("scan-wavelength --output \"" + out_path + "\"");
  REQUIRE(run.exit_code == 0);
  CHECK(run.out == slurp(out_path));

  std::istringstream csv(run.out);
  std::string line;
  REQUIRE(std::getline(csv, line));
  CHECK(line == "detuning_nm,pair_rate_cps,noise_cps,car");
  int rows = 0;
  while (std::getline(csv, line)) {
    if (!line.empty()) ++rows;
  }
  CHECK(rows == 30);

  CliRun leak_free = run_cli("scan-wavelength --min 1 --max 5 --pump-leak 0");
  REQUIRE(leak_free.exit_code == 0);
  // darks only: the noise column is constant at the default dark rate.
  std::istringstream csv2(leak_free.out);
  std::getline(csv2, line);
  while (std::getline(csv2, line)) {
    if (line.empty()) continue;
    std::size_t first = line.find(',');
    std::size_t second = line.find(',', first + 1);
    std::size_t third = line.find(',', second + 1);
    CHECK(std::stod(line.substr(second + 1, third - second - 1)) == doctest::Approx(120.0));
  }
}

TEST_CASE("visibility runs basis sweeps end to end") {
  const std::string prefix = scratch("vis8k");
  CliRun run = run_cli("visibility --config \"" + preset("local-8k") + "\" --output \"" + prefix +
                       "\" --bases H,D --step 22.5 --dwell 0.05");
  REQUIRE(run.exit_code == 0);

  nlohmann::json report = nlohmann::json::parse(slurp(prefix + ".report.json"));
  CHECK(report["fits"].size() == 2);
  CHECK(report["fits"][0]["basis"].get<std::string>() == "H");
  CHECK(report["fits"][1]["basis"].get<std::string>() == "D");
  CHECK(report["visibility_hv"].get<double>() > 0.8);
  CHECK(report["visibility_da"].get<double>() > 0.8);
  CHECK(report["fidelity"].get<double>() > 0.8);
  CHECK(report["fidelity"].get<double>() <= 1.0);
  CHECK(report["car"].get<double>() > 1.0);
  CHECK(report["config_hash"].get<std::string>().size() == 16);

  for (const char* basis : {"H", "D"}) {
    std::istringstream csv(slurp(prefix + "." + std::string(basis) + ".csv"));
    std::string line;
    REQUIRE(std::getline(csv, line));
    CHECK(line == "angle_deg,counts");
    int rows = 0;
    while (std::getline(csv, line)) {
      if (!line.empty()) ++rows;
    }
    CHECK(rows == 9);  // 0 to 180 in 22.5 degree steps
  }
  CHECK(report_value(run.out, "fidelity") != "");
}

TEST_CASE("bad invocations exit with the invalid-usage code") {
  CHECK(run_cli("analyze").exit_code == 2);                       // missing required options
  CHECK(run_cli("nonsense").exit_code == 2);                      // unknown subcommand
  CHECK(run_cli("").exit_code == 2);                              // missing subcommand
  CHECK(run_cli("simulate --config missing.json --output x").exit_code == 2);
  CHECK(run_cli("scan-wavelength --min 0.5").exit_code == 2);     // outside the 1-30 nm grid
  CHECK(run_cli("--help").exit_code == 0);
}
