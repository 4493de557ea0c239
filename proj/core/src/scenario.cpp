#include "squeezelab/scenario.hpp"

#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>

#include "json.hpp"

#include "squeezelab/errors.hpp"

namespace squeezelab::scenario {
namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw SchemaError(path + ": " + what);
}

void check_keys(const json& obj, const std::string& path,
                std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* key : allowed) {
      if (it.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) fail(path, "unknown key \"" + it.key() + "\"");
  }
}

const json* find_object(const json& parent, const std::string& path,
                        const char* key) {
  if (!parent.contains(key)) return nullptr;
  const json& node = parent.at(key);
  if (!node.is_object()) fail(path + "." + key, "expected an object");
  return &node;
}

const json& require_object(const json& parent, const std::string& path,
                           const char* key) {
  const json* node = find_object(parent, path, key);
  if (node == nullptr) fail(path, std::string("missing required section \"") + key + '"');
  return *node;
}

double get_num(const json& obj, const std::string& path, const char* key,
               double fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number()) fail(path + "." + key, "expected a number");
  return v.get<double>();
}

double require_num(const json& obj, const std::string& path, const char* key) {
  if (!obj.contains(key)) fail(path, std::string("missing required key \"") + key + '"');
  const json& v = obj.at(key);
  if (!v.is_number()) fail(path + "." + key, "expected a number");
  return v.get<double>();
}

bool get_bool(const json& obj, const std::string& path, const char* key,
              bool fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_boolean()) fail(path + "." + key, "expected a boolean");
  return v.get<bool>();
}

std::uint64_t get_u64(const json& obj, const std::string& path, const char* key,
                      std::uint64_t fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_unsigned()) fail(path + "." + key, "expected a non-negative integer");
  return v.get<std::uint64_t>();
}

std::string get_str(const json& obj, const std::string& path, const char* key,
                    const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_string()) fail(path + "." + key, "expected a string");
  return v.get<std::string>();
}

lock::LockMode parse_mode(const std::string& text, const std::string& path) {
  if (text == "scan") return lock::LockMode::kScan;
  if (text == "lock_squeeze") return lock::LockMode::kLockSqueeze;
  if (text == "lock_antisqueeze") return lock::LockMode::kLockAntisqueeze;
  fail(path, "mode must be one of \"scan\", \"lock_squeeze\", \"lock_antisqueeze\"");
}

}  // namespace

std::uint64_t fnv1a(const void* data, std::size_t size) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t hash = 14695981039346656037ULL;
  for (std::size_t i = 0; i < size; ++i) {
    hash ^= bytes[i];
    hash *= 1099511628211ULL;
  }
  return hash;
}

std::string fnv1a_hex(const std::string& text) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a(text.data(), text.size())));
  return buf;
}

Scenario from_json_text(const std::string& text, const std::string& source_path) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("scenario is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw SchemaError("$: scenario root must be an object");
  check_keys(root, "$",
             {"cavity", "noise_inputs", "budget", "detector", "disturbance",
              "instrument", "run"});

  Scenario out;
  out.source_path = source_path;
  out.content_hash = fnv1a_hex(text);
  lock::LockScenario& eng = out.lock;

  // ---- run: establishes the mode and the desk-scale factor -----------------
  const json& run = require_object(root, "$", "run");
  check_keys(run, "$.run",
             {"mode", "duration_s", "seed", "scale_factor", "output_dir",
              "sample_rate_hz", "initial_phase_rad", "ramp_rate_rad_s",
              "servo_decimation", "spectrum_segment_length", "trace_decimation",
              "spectrum_settle_s"});
  if (!run.contains("mode")) fail("$.run", "missing required key \"mode\"");
  eng.mode = parse_mode(get_str(run, "$.run", "mode", ""), "$.run.mode");

  const double scale = get_num(run, "$.run", "scale_factor", 10.0);
  if (scale <= 0.0) fail("$.run.scale_factor", "must be > 0");
  out.scale_factor = scale;
  eng.frequency_scale = scale;

  eng.duration_s = require_num(run, "$.run", "duration_s") * scale;
  eng.sample_rate_hz = get_num(run, "$.run", "sample_rate_hz", 1e8) / scale;
  eng.seed = get_u64(run, "$.run", "seed", 1);
  eng.initial_phase_rad = get_num(run, "$.run", "initial_phase_rad", 0.0);
  eng.ramp_rate_rad_s = get_num(run, "$.run", "ramp_rate_rad_s", 0.0) / scale;
  eng.servo_decimation =
      static_cast<std::size_t>(get_u64(run, "$.run", "servo_decimation", 100));
  eng.trace_decimation =
      static_cast<std::size_t>(get_u64(run, "$.run", "trace_decimation", 10000));
  eng.spectrum_segment_length = static_cast<std::size_t>(
      get_u64(run, "$.run", "spectrum_segment_length", 8192));
  eng.spectrum_settle_s = get_num(run, "$.run", "spectrum_settle_s", 0.01) * scale;
  out.output_dir = get_str(run, "$.run", "output_dir", ".");

  // ---- cavity: mirror set, losses, and pump drive ---------------------------
  const json& cav = require_object(root, "$", "cavity");
  check_keys(cav, "$.cavity",
             {"round_trip_length_m", "output_coupler_transmission",
              "input_coupler_transmission", "intracavity_loss",
              "pump_input_transmission", "pump_gain_ratio", "pump_alpha"});
  opo::CavityGeometry geometry;
  geometry.round_trip_length_m =
      get_num(cav, "$.cavity", "round_trip_length_m", geometry.round_trip_length_m);
  geometry.output_coupler_transmission =
      get_num(cav, "$.cavity", "output_coupler_transmission",
              geometry.output_coupler_transmission);
  geometry.input_coupler_transmission =
      get_num(cav, "$.cavity", "input_coupler_transmission",
              geometry.input_coupler_transmission);
  geometry.intracavity_loss =
      get_num(cav, "$.cavity", "intracavity_loss", geometry.intracavity_loss);
  geometry.pump_input_transmission =
      get_num(cav, "$.cavity", "pump_input_transmission",
              geometry.pump_input_transmission);
  eng.params = opo::decay_rates_from_geometry(geometry);
  eng.params.kappa_out_a /= scale;
  eng.params.kappa_in_a /= scale;
  eng.params.kappa_loss_a /= scale;
  eng.params.kappa_b /= scale;
  eng.params.kappa_in_b /= scale;
  const double gain_ratio = get_num(cav, "$.cavity", "pump_gain_ratio", 0.0);
  eng.params.beta = 1.0;
  eng.params.epsilon = gain_ratio * eng.params.kappa_a();
  eng.params.alpha = get_num(cav, "$.cavity", "pump_alpha", 0.0);

  // ---- noise_inputs: variances of the fields entering each port ------------
  if (const json* ni = find_object(root, "$", "noise_inputs")) {
    check_keys(*ni, "$.noise_inputs",
               {"seed_plus", "seed_minus", "loss_plus", "loss_minus",
                "vacuum_plus", "vacuum_minus", "pump_plus", "pump_minus",
                "detuning"});
    const std::string p = "$.noise_inputs";
    eng.noise.seed_plus = get_num(*ni, p, "seed_plus", 1.0);
    eng.noise.seed_minus = get_num(*ni, p, "seed_minus", 1.0);
    eng.noise.loss_plus = get_num(*ni, p, "loss_plus", 1.0);
    eng.noise.loss_minus = get_num(*ni, p, "loss_minus", 1.0);
    eng.noise.vacuum_plus = get_num(*ni, p, "vacuum_plus", 1.0);
    eng.noise.vacuum_minus = get_num(*ni, p, "vacuum_minus", 1.0);
    eng.noise.pump_plus = get_num(*ni, p, "pump_plus", 1.0);
    eng.noise.pump_minus = get_num(*ni, p, "pump_minus", 1.0);
    eng.noise.detuning = get_num(*ni, p, "detuning", 0.0);
  }

  // ---- budget: detection efficiency chain ----------------------------------
  if (const json* b = find_object(root, "$", "budget")) {
    check_keys(*b, "$.budget",
               {"quantum_efficiency", "escape_efficiency",
                "propagation_efficiency", "visibility",
                "escape_included_upstream"});
    const std::string p = "$.budget";
    eng.budget.quantum_efficiency = get_num(*b, p, "quantum_efficiency", 1.0);
    eng.budget.escape_efficiency = get_num(*b, p, "escape_efficiency", 1.0);
    eng.budget.propagation_efficiency =
        get_num(*b, p, "propagation_efficiency", 1.0);
    eng.budget.visibility = get_num(*b, p, "visibility", 1.0);
    eng.budget.escape_included_upstream =
        get_bool(*b, p, "escape_included_upstream", false);
  }

  // ---- detector: electronics and local oscillator ---------------------------
  if (const json* det = find_object(root, "$", "detector")) {
    check_keys(*det, "$.detector",
               {"dark_noise_below_shot_db", "cmrr_db", "saturation_power_w",
                "lo_power_w", "wavelength_m"});
    const std::string p = "$.detector";
    eng.detector.dark_noise_below_shot_db =
        get_num(*det, p, "dark_noise_below_shot_db",
                eng.detector.dark_noise_below_shot_db);
    eng.detector.cmrr_db = get_num(*det, p, "cmrr_db", eng.detector.cmrr_db);
    eng.detector.saturation_power_w =
        get_num(*det, p, "saturation_power_w", eng.detector.saturation_power_w);
    out.lo_power_w = get_num(*det, p, "lo_power_w", 0.0);
    out.wavelength_m = get_num(*det, p, "wavelength_m", 795e-9);
  }

  // ---- disturbance: ambient phase noise and the actuator plant -------------
  if (const json* dis = find_object(root, "$", "disturbance")) {
    check_keys(*dis, "$.disturbance",
               {"linear_drift_rad_s", "random_walk_rad2_s", "sinusoids", "pzt",
                "carrier_leakage", "pzt_drive_tone_v"});
    const std::string p = "$.disturbance";
    eng.disturbance.linear_drift_rad_s =
        get_num(*dis, p, "linear_drift_rad_s", 0.0) / scale;
    eng.disturbance.random_walk_rad2_s =
        get_num(*dis, p, "random_walk_rad2_s", 0.0) / scale;
    if (dis->contains("sinusoids")) {
      const json& sines = dis->at("sinusoids");
      if (!sines.is_array()) fail(p + ".sinusoids", "expected an array");
      for (std::size_t i = 0; i < sines.size(); ++i) {
        const std::string sp = p + ".sinusoids[" + std::to_string(i) + "]";
        const json& s = sines.at(i);
        if (!s.is_object()) fail(sp, "expected an object");
        check_keys(s, sp, {"frequency_hz", "amplitude_rad", "phase_rad"});
        sim::SinusoidSpec spec;
        spec.frequency_hz = require_num(s, sp, "frequency_hz") / scale;
        spec.amplitude_rad = require_num(s, sp, "amplitude_rad");
        spec.phase_rad = get_num(s, sp, "phase_rad", 0.0);
        eng.disturbance.sinusoids.push_back(spec);
      }
    }
    if (const json* pzt = find_object(*dis, p, "pzt")) {
      const std::string zp = p + ".pzt";
      check_keys(*pzt, zp,
                 {"resonance_hz", "quality_factor", "dc_gain_rad_per_v",
                  "quadratic_coeff"});
      eng.disturbance.pzt.resonance_hz =
          get_num(*pzt, zp, "resonance_hz", eng.disturbance.pzt.resonance_hz * scale) /
          scale;
      eng.disturbance.pzt.quality_factor =
          get_num(*pzt, zp, "quality_factor", eng.disturbance.pzt.quality_factor);
      eng.disturbance.pzt.dc_gain_rad_per_v =
          get_num(*pzt, zp, "dc_gain_rad_per_v",
                  eng.disturbance.pzt.dc_gain_rad_per_v);
      eng.disturbance.pzt.quadratic_coeff =
          get_num(*pzt, zp, "quadratic_coeff", 0.0);
    } else {
      eng.disturbance.pzt.resonance_hz /= scale;
    }
    eng.carrier_leakage = get_num(*dis, p, "carrier_leakage", 0.0);
    eng.pzt_drive_tone_v = get_num(*dis, p, "pzt_drive_tone_v", 0.0);
  } else {
    eng.disturbance.pzt.resonance_hz /= scale;
  }

  // ---- instrument: analyzer, demodulator, and controller --------------------
  const json& inst = require_object(root, "$", "instrument");
  check_keys(inst, "$.instrument", {"zero_span", "lock_in", "pid"});
  {
    const json& zs = require_object(inst, "$.instrument", "zero_span");
    const std::string p = "$.instrument.zero_span";
    check_keys(zs, p,
               {"center_frequency_hz", "resolution_bandwidth_hz",
                "video_bandwidth_hz", "sweep_time_s"});
    eng.zero_span.center_frequency_hz =
        require_num(zs, p, "center_frequency_hz") / scale;
    eng.zero_span.resolution_bandwidth_hz =
        require_num(zs, p, "resolution_bandwidth_hz") / scale;
    eng.zero_span.video_bandwidth_hz =
        require_num(zs, p, "video_bandwidth_hz") / scale;
    eng.zero_span.sweep_time_s = get_num(zs, p, "sweep_time_s", 1.0) * scale;
  }
  const bool needs_servo = eng.mode != lock::LockMode::kScan;
  if (const json* li = find_object(inst, "$.instrument", "lock_in")) {
    const std::string p = "$.instrument.lock_in";
    check_keys(*li, p,
               {"mod_frequency_hz", "mod_amplitude_v", "demod_phase_rad",
                "output_lpf_cutoff_hz"});
    eng.lock_in.mod_frequency_hz = require_num(*li, p, "mod_frequency_hz") / scale;
    eng.lock_in.mod_amplitude = require_num(*li, p, "mod_amplitude_v");
    eng.lock_in.output_lpf_cutoff_hz =
        require_num(*li, p, "output_lpf_cutoff_hz") / scale;
    if (li->contains("demod_phase_rad")) {
      eng.lock_in.demod_phase_rad = get_num(*li, p, "demod_phase_rad", 0.0);
      eng.auto_demod_phase = false;
    } else {
      eng.auto_demod_phase = true;
    }
  } else if (needs_servo) {
    fail("$.instrument", "missing required section \"lock_in\" for a lock run");
  }
  if (const json* pid = find_object(inst, "$.instrument", "pid")) {
    const std::string p = "$.instrument.pid";
    check_keys(*pid, p, {"kp", "ki", "kd", "output_min_v", "output_max_v"});
    eng.pid.kp = get_num(*pid, p, "kp", 0.0);
    eng.pid.ki = get_num(*pid, p, "ki", 0.0) / scale;
    eng.pid.kd = get_num(*pid, p, "kd", 0.0) * scale;
    eng.pid.output_min = get_num(*pid, p, "output_min_v", -1.0);
    eng.pid.output_max = get_num(*pid, p, "output_max_v", 1.0);
  } else if (needs_servo) {
    fail("$.instrument", "missing required section \"pid\" for a lock run");
  }

  eng.validate();
  return out;
}

Scenario load_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError("cannot open scenario file: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return from_json_text(buffer.str(), path);
}

}  // namespace squeezelab::scenario
