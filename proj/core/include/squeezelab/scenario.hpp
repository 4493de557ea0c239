#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "squeezelab/lock.hpp"

namespace squeezelab::scenario {

// A scenario file describes a run in lab units; loading converts it into the
// engine's slowed-down working units (rates divided by run.scale_factor,
// durations multiplied by it, controller gains rescaled so the loop dynamics
// are preserved) and keeps enough bookkeeping to stamp output manifests.
struct Scenario {
  lock::LockScenario lock;  // ready-to-run engine configuration
  double scale_factor = 1.0;
  std::string output_dir = ".";
  std::string source_path;   // empty when built programmatically
  std::string content_hash;  // FNV-1a of the raw file bytes, hex

  // Local-oscillator quantities used by the polarimetry outputs.
  double lo_power_w = 0.0;
  double wavelength_m = 795e-9;
};

// Parse, validate, and scale a scenario. Structural problems (bad JSON,
// unknown or mistyped keys, missing sections) throw SchemaError with the JSON
// path of the offender; physically inconsistent values throw PhysicsError
// from the component validators.
Scenario load_file(const std::string& path);
Scenario from_json_text(const std::string& text,
                        const std::string& source_path = "");

// 64-bit FNV-1a, used for scenario content hashes in run manifests.
std::uint64_t fnv1a(const void* data, std::size_t size);
std::string fnv1a_hex(const std::string& text);

}  // namespace squeezelab::scenario
