#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

// Drives the installed-style binary exactly as a user would: through a shell,
// checking exit codes and the bytes it writes.

namespace {

namespace fs = std::filesystem;

const std::string kCli = SQUEEZELAB_CLI_PATH;
const std::string kScenarioDir = SQUEEZELAB_SCENARIO_DIR;
const fs::path kWork = "/tmp/squeezelab_cli_test";

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE_MESSAGE(in.good(), "missing file: ", path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void spit(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  REQUIRE(out.good());
  out << text;
}

// Runs `prefix cli args` under the shell; returns the exit code and captures
// combined stdout/stderr.
int run_cli(const std::string& args, std::string* output = nullptr,
            const std::string& env_prefix = "") {
  const fs::path log = kWork / "last_output.txt";
  fs::create_directories(kWork);
  const std::string cmd =
      env_prefix + kCli + " " + args + " > " + log.string() + " 2>&1";
  const int raw = std::system(cmd.c_str());
  if (output != nullptr) *output = slurp(log);
  REQUIRE(raw != -1);
  REQUIRE(WIFEXITED(raw));
  return WEXITSTATUS(raw);
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = kWork / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string scenario(const std::string& name) {
  return (fs::path(kScenarioDir) / name).string();
}

// Small, fast open-loop scenario used for determinism checks (about 0.1 s of
// wall time per run).
std::string fast_scan_path() {
  static const fs::path path = [] {
    const fs::path p = kWork / "fast_scan.json";
    spit(p, R"({
  "cavity": {
    "round_trip_length_m": 12.0,
    "output_coupler_transmission": 0.023,
    "input_coupler_transmission": 0.0008,
    "intracavity_loss": 0.0008,
    "pump_gain_ratio": 0.35
  },
  "detector": {"dark_noise_below_shot_db": 16.0},
  "disturbance": {
    "pzt": {"resonance_hz": 2000.0, "quality_factor": 20.0,
            "dc_gain_rad_per_v": 0.1}
  },
  "instrument": {
    "zero_span": {"center_frequency_hz": 5.0e4,
                  "resolution_bandwidth_hz": 2.0e4,
                  "video_bandwidth_hz": 2000.0,
                  "sweep_time_s": 0.5}
  },
  "run": {"mode": "scan", "duration_s": 0.5, "scale_factor": 1.0,
          "sample_rate_hz": 1.0e6, "ramp_rate_rad_s": 12.566370614359172,
          "trace_decimation": 500, "seed": 4}
})");
    return p;
  }();
  return path.string();
}

// A servo run whose controller gains are zero never acquires.
std::string never_lock_path() {
  static const fs::path path = [] {
    const fs::path p = kWork / "never_lock.json";
    spit(p, R"({
  "cavity": {"pump_gain_ratio": 0.18},
  "budget": {"quantum_efficiency": 0.95},
  "detector": {"dark_noise_below_shot_db": 16.0},
  "disturbance": {
    "pzt": {"resonance_hz": 19000.0, "quality_factor": 20.0,
            "dc_gain_rad_per_v": 0.123}
  },
  "instrument": {
    "zero_span": {"center_frequency_hz": 2.0e6,
                  "resolution_bandwidth_hz": 3.0e5,
                  "video_bandwidth_hz": 3.0e4},
    "lock_in": {"mod_frequency_hz": 35010.0, "mod_amplitude_v": 1.95,
                "output_lpf_cutoff_hz": 600.0},
    "pid": {"kp": 0.0, "ki": 0.0, "output_min_v": -20.0, "output_max_v": 20.0}
  },
  "run": {"mode": "lock_squeeze", "duration_s": 0.02,
          "initial_phase_rad": 1.2, "seed": 3,
          "spectrum_segment_length": 1024}
})");
    return p;
  }();
  return path.string();
}

}  // namespace

TEST_CASE("version and help exit cleanly") {
  std::string out;
  CHECK(run_cli("--version", &out) == 0);
  CHECK(out.find("squeezelab") != std::string::npos);
  CHECK(run_cli("--help", &out) == 0);
  CHECK(out.find("scan") != std::string::npos);
  CHECK(out.find("lock") != std::string::npos);
}

TEST_CASE("shipped scenarios validate") {
  for (const char* name :
       {"audio_lock.json", "mhz_scan.json", "coherent_reference.json"}) {
    std::string out;
    const int rc = run_cli("validate " + scenario(name), &out);
    INFO(name, ": ", out);
    CHECK(rc == 0);
    CHECK(out.rfind("ok", 0) == 0);
    CHECK(out.find("hash=") != std::string::npos);
  }
}

TEST_CASE("usage, schema, and physics failures map to distinct exit codes") {
  std::string out;
  CHECK(run_cli("", &out) == 2);                    // missing subcommand
  CHECK(run_cli("scan", &out) == 2);                // missing scenario argument
  CHECK(run_cli("scan --bogus-flag x", &out) == 2); // unknown option
  CHECK(run_cli("validate /tmp/squeezelab_cli_test/no_such.json", &out) == 2);
  CHECK(out.find("cannot open") != std::string::npos);

  const fs::path bad_json = kWork / "bad.json";
  spit(bad_json, "{ this is not json");
  CHECK(run_cli("validate " + bad_json.string(), &out) == 2);
  CHECK(out.find("not valid JSON") != std::string::npos);

  const fs::path bad_phys = kWork / "bad_phys.json";
  spit(bad_phys, R"({"cavity": {},
    "instrument": {"zero_span": {"center_frequency_hz": 1e6,
      "resolution_bandwidth_hz": 1e5, "video_bandwidth_hz": 10.0}},
    "run": {"mode": "scan", "duration_s": -1.0}})");
  CHECK(run_cli("validate " + bad_phys.string(), &out) == 3);
  CHECK(out.find("physics error") != std::string::npos);
}

TEST_CASE("scan outputs are byte-deterministic per seed and move with it") {
  const auto dir_a = fresh_dir("scan_a");
  const auto dir_b = fresh_dir("scan_b");
  const auto dir_c = fresh_dir("scan_c");
  const std::string base = "scan " + fast_scan_path() + " --output-dir ";
  REQUIRE(run_cli(base + dir_a.string() + " --seed 4") == 0);
  REQUIRE(run_cli(base + dir_b.string() + " --seed 4") == 0);
  REQUIRE(run_cli(base + dir_c.string() + " --seed 5") == 0);

  for (const char* f : {"scan_trace.csv", "scan_summary.json", "manifest.json"}) {
    CHECK_MESSAGE(slurp(dir_a / f) == slurp(dir_b / f), "differs: ", f);
  }
  CHECK(slurp(dir_a / "scan_trace.csv") != slurp(dir_c / "scan_trace.csv"));
  CHECK(slurp(dir_a / "manifest.json") != slurp(dir_c / "manifest.json"));

  const std::string trace = slurp(dir_a / "scan_trace.csv");
  CHECK(trace.rfind("time_s,value", 0) == 0);
  // 0.5 s at 1 MHz decimated by 500 -> 1000 rows plus the header.
  CHECK(std::count(trace.begin(), trace.end(), '\n') == 1001);
}

TEST_CASE("seed precedence: flag beats environment beats file") {
  const auto dir_env = fresh_dir("seed_env");
  const auto dir_flag = fresh_dir("seed_flag");
  const auto dir_file = fresh_dir("seed_file");
  const std::string base = "scan " + fast_scan_path() + " --output-dir ";

  REQUIRE(run_cli(base + dir_env.string(), nullptr, "SQUEEZELAB_SEED=7 ") == 0);
  CHECK(slurp(dir_env / "manifest.json").find("\"seed\": 7") != std::string::npos);

  REQUIRE(run_cli(base + dir_flag.string() + " --seed 9", nullptr,
                  "SQUEEZELAB_SEED=7 ") == 0);
  CHECK(slurp(dir_flag / "manifest.json").find("\"seed\": 9") !=
        std::string::npos);

  REQUIRE(run_cli(base + dir_file.string()) == 0);
  CHECK(slurp(dir_file / "manifest.json").find("\"seed\": 4") !=
        std::string::npos);

  std::string out;
  CHECK(run_cli("validate " + fast_scan_path(), &out,
                "SQUEEZELAB_SEED=banana ") == 2);
  CHECK(out.find("SQUEEZELAB_SEED") != std::string::npos);
}

TEST_CASE("closed-loop run writes records, spectra, artifacts, and summary") {
  const auto dir = fresh_dir("lock_run");
  std::string out;
  const int rc = run_cli(
      "lock " + scenario("audio_lock.json") + " --output-dir " + dir.string(),
      &out);
  INFO(out);
  REQUIRE(rc == 0);
  CHECK(out.find("acquired") != std::string::npos);

  for (const char* f :
       {"lock_phase.csv", "lock_error.csv", "lock_difference.csv",
        "lock_spectrum.csv", "lock_artifacts.csv", "lock_summary.json",
        "manifest.json"}) {
    CHECK_MESSAGE(fs::exists(dir / f), "missing output: ", f);
  }
  const std::string summary = slurp(dir / "lock_summary.json");
  CHECK(summary.find("\"verdict\": \"locked\"") != std::string::npos);
  CHECK(slurp(dir / "lock_spectrum.csv")
            .rfind("frequency_hz,value,value_db_rel_snl", 0) == 0);
  CHECK(slurp(dir / "lock_phase.csv").rfind("time_s,value", 0) == 0);
}

TEST_CASE("never-acquired lock exits 4 but still writes diagnostics") {
  const auto dir = fresh_dir("lock_never");
  std::string out;
  const int rc = run_cli(
      "lock " + never_lock_path() + " --output-dir " + dir.string(), &out);
  CHECK(rc == 4);
  CHECK(out.find("never") != std::string::npos);
  CHECK(fs::exists(dir / "lock_summary.json"));
  CHECK(slurp(dir / "lock_summary.json").find("\"verdict\": \"never\"") !=
        std::string::npos);
  CHECK(fs::exists(dir / "lock_phase.csv"));
}

TEST_CASE("budget, spectrum, and poincare write their documented outputs") {
  const auto dir_b = fresh_dir("budget");
  std::string out;
  REQUIRE(run_cli("budget " + scenario("audio_lock.json") +
                      " --antisqueezing-db 7.0 --output-dir " + dir_b.string(),
                  &out) == 0);
  const std::string budget = slurp(dir_b / "budget.json");
  CHECK(budget.find("\"total_efficiency\"") != std::string::npos);
  CHECK(budget.find("\"pump_gain_ratio\"") != std::string::npos);

  const auto dir_s = fresh_dir("spectrum");
  REQUIRE(run_cli("spectrum " + scenario("coherent_reference.json") +
                      " --points 20 --output-dir " + dir_s.string(),
                  &out) == 0);
  const std::string spec = slurp(dir_s / "spectrum.csv");
  CHECK(spec.rfind("frequency_hz,v_minus,v_plus,v_minus_db,v_plus_db", 0) == 0);
  CHECK(std::count(spec.begin(), spec.end(), '\n') == 21);

  const auto dir_p = fresh_dir("poincare");
  REQUIRE(run_cli("poincare " + scenario("audio_lock.json") +
                      " --samples 50 --output-dir " + dir_p.string(),
                  &out) == 0);
  CHECK(slurp(dir_p / "poincare.json").find("semi_axes_rel_shot") !=
        std::string::npos);
  const std::string cloud = slurp(dir_p / "poincare_cloud.csv");
  CHECK(std::count(cloud.begin(), cloud.end(), '\n') == 51);
}
