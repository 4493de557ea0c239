#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <fstream>
#include <string>

#include "squeezelab/errors.hpp"
#include "squeezelab/lock.hpp"
#include "squeezelab/scenario.hpp"
#include "squeezelab/types.hpp"

using namespace squeezelab;

namespace {

// Minimal valid open-loop scenario; every optional section left to defaults.
const char* kScanBase = R"({
  "cavity": {"pump_gain_ratio": 0.3},
  "instrument": {
    "zero_span": {
      "center_frequency_hz": 2.0e6,
      "resolution_bandwidth_hz": 1.0e5,
      "video_bandwidth_hz": 100.0
    }
  },
  "run": {"mode": "scan", "duration_s": 0.01}
})";

// Full closed-loop scenario exercising every scaled field. The desk-scale
// factor is spliced in so the same lab-unit content can be loaded at
// different scales.
std::string lock_text(const std::string& scale) {
  return std::string(R"({
  "cavity": {
    "round_trip_length_m": 0.12,
    "output_coupler_transmission": 0.023,
    "input_coupler_transmission": 0.0008,
    "intracavity_loss": 0.0008,
    "pump_input_transmission": 0.196,
    "pump_gain_ratio": 0.18
  },
  "noise_inputs": {"loss_plus": 15.0},
  "budget": {
    "quantum_efficiency": 0.95,
    "escape_efficiency": 0.9664,
    "propagation_efficiency": 0.99,
    "visibility": 0.997,
    "escape_included_upstream": true
  },
  "detector": {
    "dark_noise_below_shot_db": 16.0,
    "cmrr_db": 45.0,
    "saturation_power_w": 0.0025,
    "lo_power_w": 0.002,
    "wavelength_m": 7.95e-7
  },
  "disturbance": {
    "linear_drift_rad_s": 0.2,
    "random_walk_rad2_s": 0.05,
    "sinusoids": [
      {"frequency_hz": 1000.0, "amplitude_rad": 0.01, "phase_rad": 0.3}
    ],
    "pzt": {
      "resonance_hz": 19000.0,
      "quality_factor": 20.0,
      "dc_gain_rad_per_v": 0.123,
      "quadratic_coeff": 0.001
    },
    "carrier_leakage": 0.05,
    "pzt_drive_tone_v": 0.01
  },
  "instrument": {
    "zero_span": {
      "center_frequency_hz": 2.0e6,
      "resolution_bandwidth_hz": 3.0e5,
      "video_bandwidth_hz": 3.0e4,
      "sweep_time_s": 0.1
    },
    "lock_in": {
      "mod_frequency_hz": 35010.0,
      "mod_amplitude_v": 1.95,
      "output_lpf_cutoff_hz": 600.0
    },
    "pid": {"kp": 5.39, "ki": 1016.0, "kd": 0.001,
            "output_min_v": -20.0, "output_max_v": 20.0}
  },
  "run": {
    "mode": "lock_squeeze",
    "duration_s": 0.05,
    "seed": 7,
    "scale_factor": )") +
         scale + R"(,
    "sample_rate_hz": 1.0e8,
    "initial_phase_rad": 0.8,
    "servo_decimation": 100,
    "spectrum_segment_length": 4096,
    "spectrum_settle_s": 0.01,
    "trace_decimation": 5000,
    "output_dir": "out"
  }
})";
}

}  // namespace

TEST_CASE("minimal scenario loads with documented defaults") {
  const auto sc = scenario::from_json_text(kScanBase, "inline.json");
  const lock::LockScenario& e = sc.lock;

  CHECK(sc.scale_factor == 10.0);
  CHECK(e.frequency_scale == 10.0);
  CHECK(sc.source_path == "inline.json");
  CHECK(sc.output_dir == ".");
  CHECK(sc.content_hash == scenario::fnv1a_hex(kScanBase));

  // Working units: lab rates divided by the scale, durations stretched by it.
  CHECK(e.sample_rate_hz == doctest::Approx(1.0e7).epsilon(1e-12));
  CHECK(e.duration_s == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(e.zero_span.center_frequency_hz == doctest::Approx(2.0e5).epsilon(1e-12));
  CHECK(e.seed == 1);
  CHECK(e.servo_decimation == 100);
  CHECK(e.trace_decimation == 10000);
  CHECK(e.spectrum_segment_length == 8192);
  CHECK(e.spectrum_settle_s == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(e.mode == lock::LockMode::kScan);

  // All noise ports default to vacuum.
  CHECK(e.noise.seed_plus.constant_value() == 1.0);
  CHECK(e.noise.loss_minus.constant_value() == 1.0);
  CHECK(e.noise.pump_plus.constant_value() == 1.0);
  CHECK(e.noise.detuning.constant_value() == 0.0);

  // Unit budget and a quiet default detector.
  CHECK(e.budget.quantum_efficiency == 1.0);
  CHECK(e.budget.escape_included_upstream == false);

  // The actuator resonance default is a lab value too, so it lands scaled.
  CHECK(e.disturbance.pzt.resonance_hz == doctest::Approx(1.9e3).epsilon(1e-12));

  // The pump ratio is applied against the loaded total decay rate.
  CHECK(e.params.epsilon / e.params.kappa_a() == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("desk scaling slows every rate and stretches every duration") {
  const auto s1 = scenario::from_json_text(lock_text("1.0"));
  const auto s10 = scenario::from_json_text(lock_text("10.0"));
  const lock::LockScenario& a = s1.lock;
  const lock::LockScenario& b = s10.lock;

  // Rates and frequencies: scale-1 values are exactly ten times faster.
  const double r = 10.0;
  CHECK(a.params.kappa_out_a == doctest::Approx(r * b.params.kappa_out_a).epsilon(1e-12));
  CHECK(a.params.kappa_in_a == doctest::Approx(r * b.params.kappa_in_a).epsilon(1e-12));
  CHECK(a.params.kappa_loss_a == doctest::Approx(r * b.params.kappa_loss_a).epsilon(1e-12));
  CHECK(a.params.kappa_b == doctest::Approx(r * b.params.kappa_b).epsilon(1e-12));
  CHECK(a.params.epsilon == doctest::Approx(r * b.params.epsilon).epsilon(1e-12));
  CHECK(a.sample_rate_hz == doctest::Approx(r * b.sample_rate_hz).epsilon(1e-12));
  CHECK(a.zero_span.center_frequency_hz ==
        doctest::Approx(r * b.zero_span.center_frequency_hz).epsilon(1e-12));
  CHECK(a.zero_span.resolution_bandwidth_hz ==
        doctest::Approx(r * b.zero_span.resolution_bandwidth_hz).epsilon(1e-12));
  CHECK(a.zero_span.video_bandwidth_hz ==
        doctest::Approx(r * b.zero_span.video_bandwidth_hz).epsilon(1e-12));
  CHECK(a.lock_in.mod_frequency_hz ==
        doctest::Approx(r * b.lock_in.mod_frequency_hz).epsilon(1e-12));
  CHECK(a.lock_in.output_lpf_cutoff_hz ==
        doctest::Approx(r * b.lock_in.output_lpf_cutoff_hz).epsilon(1e-12));
  CHECK(a.disturbance.linear_drift_rad_s ==
        doctest::Approx(r * b.disturbance.linear_drift_rad_s).epsilon(1e-12));
  CHECK(a.disturbance.random_walk_rad2_s ==
        doctest::Approx(r * b.disturbance.random_walk_rad2_s).epsilon(1e-12));
  CHECK(a.disturbance.sinusoids.at(0).frequency_hz ==
        doctest::Approx(r * b.disturbance.sinusoids.at(0).frequency_hz).epsilon(1e-12));
  CHECK(a.disturbance.pzt.resonance_hz ==
        doctest::Approx(r * b.disturbance.pzt.resonance_hz).epsilon(1e-12));

  // Durations stretch; dimensionless settings pass through untouched.
  CHECK(b.duration_s == doctest::Approx(r * a.duration_s).epsilon(1e-12));
  CHECK(b.spectrum_settle_s == doctest::Approx(r * a.spectrum_settle_s).epsilon(1e-12));
  CHECK(b.zero_span.sweep_time_s ==
        doctest::Approx(r * a.zero_span.sweep_time_s).epsilon(1e-12));
  CHECK(a.lock_in.mod_amplitude == b.lock_in.mod_amplitude);
  CHECK(a.initial_phase_rad == b.initial_phase_rad);
  CHECK(a.carrier_leakage == b.carrier_leakage);
  CHECK(a.pzt_drive_tone_v == b.pzt_drive_tone_v);

  // Controller gains keep the loop dynamics invariant: the proportional term
  // is dimensionless, the integral gain is a rate, the derivative a time.
  CHECK(a.pid.kp == b.pid.kp);
  CHECK(a.pid.ki == doctest::Approx(r * b.pid.ki).epsilon(1e-12));
  CHECK(b.pid.kd == doctest::Approx(r * a.pid.kd).epsilon(1e-12));
  CHECK(a.pid.output_min == b.pid.output_min);
  CHECK(a.pid.output_max == b.pid.output_max);

  // Dimensionless physics is scale-invariant.
  const double esc1 = a.params.kappa_out_a / (a.params.kappa_out_a + a.params.kappa_loss_a);
  const double esc10 = b.params.kappa_out_a / (b.params.kappa_out_a + b.params.kappa_loss_a);
  CHECK(esc1 == doctest::Approx(esc10).epsilon(1e-14));
  CHECK(esc1 == doctest::Approx(0.023 / (0.023 + 0.0008)).epsilon(1e-12));
  CHECK(a.params.epsilon / a.params.kappa_a() ==
        doctest::Approx(b.params.epsilon / b.params.kappa_a()).epsilon(1e-14));

  // Both land in a runnable state.
  CHECK(a.mode == lock::LockMode::kLockSqueeze);
  CHECK(b.mode == lock::LockMode::kLockSqueeze);
  CHECK(s1.lo_power_w == 0.002);
  CHECK(s1.wavelength_m == doctest::Approx(7.95e-7).epsilon(1e-15));
  CHECK(s1.output_dir == "out");
  CHECK(b.seed == 7);
}

TEST_CASE("unknown keys are rejected with their JSON path") {
  CHECK_THROWS_WITH_AS(
      scenario::from_json_text(R"({"mystery": 1})"),
      "$: unknown key \"mystery\"", SchemaError);

  CHECK_THROWS_WITH_AS(
      scenario::from_json_text(R"({
        "cavity": {"finesse": 1000},
        "instrument": {"zero_span": {"center_frequency_hz": 1e6,
          "resolution_bandwidth_hz": 1e5, "video_bandwidth_hz": 10.0}},
        "run": {"mode": "scan", "duration_s": 0.01}
      })"),
      "$.cavity: unknown key \"finesse\"", SchemaError);

  CHECK_THROWS_WITH_AS(
      scenario::from_json_text(R"({
        "cavity": {},
        "instrument": {"zero_span": {"center_frequency_hz": 1e6,
          "resolution_bandwidth_hz": 1e5, "video_bandwidth_hz": 10.0,
          "span_hz": 0.0}},
        "run": {"mode": "scan", "duration_s": 0.01}
      })"),
      "$.instrument.zero_span: unknown key \"span_hz\"", SchemaError);

  CHECK_THROWS_WITH_AS(
      scenario::from_json_text(R"({
        "cavity": {},
        "disturbance": {"pzt": {"resonance_hz": 19e3, "travel_um": 3.0}},
        "instrument": {"zero_span": {"center_frequency_hz": 1e6,
          "resolution_bandwidth_hz": 1e5, "video_bandwidth_hz": 10.0}},
        "run": {"mode": "scan", "duration_s": 0.01}
      })"),
      "$.disturbance.pzt: unknown key \"travel_um\"", SchemaError);

  CHECK_THROWS_WITH_AS(
      scenario::from_json_text(R"({
        "cavity": {},
        "disturbance": {"sinusoids": [{"frequency_hz": 50.0,
          "amplitude_rad": 0.1, "color": "mains"}]},
        "instrument": {"zero_span": {"center_frequency_hz": 1e6,
          "resolution_bandwidth_hz": 1e5, "video_bandwidth_hz": 10.0}},
        "run": {"mode": "scan", "duration_s": 0.01}
      })"),
      "$.disturbance.sinusoids[0]: unknown key \"color\"", SchemaError);
}

TEST_CASE("type mismatches are rejected with their JSON path") {
  CHECK_THROWS_WITH_AS(
      scenario::from_json_text(R"({
        "cavity": {},
        "instrument": {"zero_span": {"center_frequency_hz": 1e6,
          "resolution_bandwidth_hz": 1e5, "video_bandwidth_hz": 10.0}},
        "run": {"mode": "scan", "duration_s": "fast"}
      })"),
      "$.run.duration_s: expected a number", SchemaError);

  CHECK_THROWS_WITH_AS(
      scenario::from_json_text(R"({
        "cavity": {},
        "instrument": {"zero_span": {"center_frequency_hz": 1e6,
          "resolution_bandwidth_hz": 1e5, "video_bandwidth_hz": 10.0}},
        "run": {"mode": "scan", "duration_s": 0.01, "seed": -3}
      })"),
      "$.run.seed: expected a non-negative integer", SchemaError);

  CHECK_THROWS_WITH_AS(
      scenario::from_json_text(R"({
        "cavity": {},
        "budget": {"escape_included_upstream": 1},
        "instrument": {"zero_span": {"center_frequency_hz": 1e6,
          "resolution_bandwidth_hz": 1e5, "video_bandwidth_hz": 10.0}},
        "run": {"mode": "scan", "duration_s": 0.01}
      })"),
      "$.budget.escape_included_upstream: expected a boolean", SchemaError);

  CHECK_THROWS_WITH_AS(
      scenario::from_json_text(R"({
        "cavity": [],
        "instrument": {"zero_span": {"center_frequency_hz": 1e6,
          "resolution_bandwidth_hz": 1e5, "video_bandwidth_hz": 10.0}},
        "run": {"mode": "scan", "duration_s": 0.01}
      })"),
      "$.cavity: expected an object", SchemaError);

  CHECK_THROWS_WITH_AS(
      scenario::from_json_text(R"({
        "cavity": {},
        "disturbance": {"sinusoids": {"frequency_hz": 50.0}},
        "instrument": {"zero_span": {"center_frequency_hz": 1e6,
          "resolution_bandwidth_hz": 1e5, "video_bandwidth_hz": 10.0}},
        "run": {"mode": "scan", "duration_s": 0.01}
      })"),
      "$.disturbance.sinusoids: expected an array", SchemaError);

  CHECK_THROWS_WITH_AS(
      scenario::from_json_text(R"({
        "cavity": {},
        "instrument": {"zero_span": {"center_frequency_hz": 1e6,
          "resolution_bandwidth_hz": 1e5, "video_bandwidth_hz": 10.0}},
        "run": {"mode": "wobble", "duration_s": 0.01}
      })"),
      "$.run.mode: mode must be one of \"scan\", \"lock_squeeze\", "
      "\"lock_antisqueeze\"",
      SchemaError);

  CHECK_THROWS_AS(scenario::from_json_text("[1, 2, 3]"), SchemaError);
  CHECK_THROWS_AS(scenario::from_json_text("{not json"), SchemaError);
}

TEST_CASE("missing required pieces are named precisely") {
  CHECK_THROWS_WITH_AS(
      scenario::from_json_text(R"({"cavity": {}, "instrument": {
        "zero_span": {"center_frequency_hz": 1e6,
          "resolution_bandwidth_hz": 1e5, "video_bandwidth_hz": 10.0}}})"),
      "$: missing required section \"run\"", SchemaError);

  CHECK_THROWS_WITH_AS(
      scenario::from_json_text(R"({"instrument": {
        "zero_span": {"center_frequency_hz": 1e6,
          "resolution_bandwidth_hz": 1e5, "video_bandwidth_hz": 10.0}},
        "run": {"mode": "scan", "duration_s": 0.01}})"),
      "$: missing required section \"cavity\"", SchemaError);

  CHECK_THROWS_WITH_AS(
      scenario::from_json_text(
          R"({"cavity": {}, "run": {"mode": "scan", "duration_s": 0.01}})"),
      "$: missing required section \"instrument\"", SchemaError);

  CHECK_THROWS_WITH_AS(
      scenario::from_json_text(R"({"cavity": {}, "instrument": {},
        "run": {"mode": "scan", "duration_s": 0.01}})"),
      "$.instrument: missing required section \"zero_span\"", SchemaError);

  CHECK_THROWS_WITH_AS(
      scenario::from_json_text(R"({"cavity": {}, "instrument": {
        "zero_span": {"resolution_bandwidth_hz": 1e5,
          "video_bandwidth_hz": 10.0}},
        "run": {"mode": "scan", "duration_s": 0.01}})"),
      "$.instrument.zero_span: missing required key \"center_frequency_hz\"",
      SchemaError);

  CHECK_THROWS_WITH_AS(
      scenario::from_json_text(R"({"cavity": {}, "instrument": {
        "zero_span": {"center_frequency_hz": 1e6,
          "resolution_bandwidth_hz": 1e5, "video_bandwidth_hz": 10.0}},
        "run": {"duration_s": 0.01}})"),
      "$.run: missing required key \"mode\"", SchemaError);

  // A servo run needs its demodulator and controller.
  CHECK_THROWS_WITH_AS(
      scenario::from_json_text(R"({"cavity": {"pump_gain_ratio": 0.2},
        "instrument": {"zero_span": {"center_frequency_hz": 1e6,
          "resolution_bandwidth_hz": 1e5, "video_bandwidth_hz": 10.0},
          "pid": {"kp": 1.0}},
        "run": {"mode": "lock_squeeze", "duration_s": 0.01}})"),
      "$.instrument: missing required section \"lock_in\" for a lock run",
      SchemaError);

  CHECK_THROWS_WITH_AS(
      scenario::from_json_text(R"({"cavity": {"pump_gain_ratio": 0.2},
        "instrument": {"zero_span": {"center_frequency_hz": 1e6,
          "resolution_bandwidth_hz": 1e5, "video_bandwidth_hz": 10.0},
          "lock_in": {"mod_frequency_hz": 3.5e4, "mod_amplitude_v": 1.0,
            "output_lpf_cutoff_hz": 600.0}},
        "run": {"mode": "lock_squeeze", "duration_s": 0.01}})"),
      "$.instrument: missing required section \"pid\" for a lock run",
      SchemaError);

  CHECK_THROWS_WITH_AS(
      scenario::from_json_text(R"({"cavity": {}, "instrument": {
        "zero_span": {"center_frequency_hz": 1e6,
          "resolution_bandwidth_hz": 1e5, "video_bandwidth_hz": 10.0}},
        "run": {"mode": "scan", "duration_s": 0.01, "scale_factor": 0.0}})"),
      "$.run.scale_factor: must be > 0", SchemaError);
}

TEST_CASE("explicit demodulation phase disables the automatic calibration") {
  std::string with_phase = lock_text("10.0");
  const std::string needle = "\"mod_frequency_hz\": 35010.0,";
  const auto pos = with_phase.find(needle);
  REQUIRE(pos != std::string::npos);
  with_phase.insert(pos + needle.size(), "\n      \"demod_phase_rad\": -0.75,");

  const auto manual = scenario::from_json_text(with_phase);
  CHECK(manual.lock.auto_demod_phase == false);
  CHECK(manual.lock.lock_in.demod_phase_rad == doctest::Approx(-0.75).epsilon(1e-15));

  const auto automatic = scenario::from_json_text(lock_text("10.0"));
  CHECK(automatic.lock.auto_demod_phase == true);
}

TEST_CASE("structurally valid but unphysical values raise physics errors") {
  // Negative duration passes the schema but fails the engine validators.
  CHECK_THROWS_AS(scenario::from_json_text(R"({
        "cavity": {},
        "instrument": {"zero_span": {"center_frequency_hz": 1e6,
          "resolution_bandwidth_hz": 1e5, "video_bandwidth_hz": 10.0}},
        "run": {"mode": "scan", "duration_s": -0.5}
      })"),
                  PhysicsError);

  // Video bandwidth wider than the resolution bandwidth.
  CHECK_THROWS_AS(scenario::from_json_text(R"({
        "cavity": {},
        "instrument": {"zero_span": {"center_frequency_hz": 1e6,
          "resolution_bandwidth_hz": 1e4, "video_bandwidth_hz": 1e5}},
        "run": {"mode": "scan", "duration_s": 0.01}
      })"),
                  PhysicsError);

  // A mirror cannot transmit more than all of the light.
  CHECK_THROWS_AS(scenario::from_json_text(R"({
        "cavity": {"output_coupler_transmission": 1.5},
        "instrument": {"zero_span": {"center_frequency_hz": 1e6,
          "resolution_bandwidth_hz": 1e5, "video_bandwidth_hz": 10.0}},
        "run": {"mode": "scan", "duration_s": 0.01}
      })"),
                  PhysicsError);
}

TEST_CASE("content hashing is stable and byte-sensitive") {
  // Reference vectors for 64-bit FNV-1a.
  CHECK(scenario::fnv1a_hex("") == "cbf29ce484222325");
  CHECK(scenario::fnv1a_hex("a") == "af63dc4c8601ec8c");

  const std::string text = lock_text("10.0");
  CHECK(scenario::from_json_text(text).content_hash == scenario::fnv1a_hex(text));
  std::string tweaked = text;
  tweaked.back() = ' ';  // any byte change must move the hash
  CHECK(scenario::fnv1a_hex(tweaked) != scenario::fnv1a_hex(text));
}

TEST_CASE("file loading matches in-memory parsing and reports open failures") {
  const std::string path = "/tmp/squeezelab_scenario_roundtrip.json";
  const std::string text = lock_text("10.0");
  {
    std::ofstream out(path, std::ios::binary);
    REQUIRE(out.good());
    out << text;
  }
  const auto from_file = scenario::load_file(path);
  const auto from_text = scenario::from_json_text(text, path);
  CHECK(from_file.content_hash == from_text.content_hash);
  CHECK(from_file.source_path == path);
  CHECK(from_file.lock.params.kappa_out_a ==
        doctest::Approx(from_text.lock.params.kappa_out_a).epsilon(1e-15));
  std::remove(path.c_str());

  CHECK_THROWS_WITH_AS(
      scenario::load_file("/tmp/definitely_not_present_scenario.json"),
      "cannot open scenario file: /tmp/definitely_not_present_scenario.json",
      SchemaError);
}
