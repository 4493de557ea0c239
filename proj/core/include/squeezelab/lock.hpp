#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "squeezelab/detect.hpp"
#include "squeezelab/dsp.hpp"
#include "squeezelab/opo.hpp"
#include "squeezelab/sim.hpp"
#include "squeezelab/types.hpp"

namespace squeezelab::lock {

// The servo locks the measurement phase to a noise-power extremum: the
// squeezed quadrature (theta = 0 mod pi), the anti-squeezed one (pi/2 mod pi),
// or no servo at all (open-loop phase ramp).
enum class LockMode { kScan, kLockSqueeze, kLockAntisqueeze };

enum class LockVerdict { kLocked, kLost, kNever };

const char* to_string(LockMode mode);
const char* to_string(LockVerdict verdict);

// Complete description of one closed-loop (or scan) run. All rates and
// frequencies are in the engine's working units; when a run was desk-scaled
// from lab values, frequency_scale carries the factor used so outputs can be
// labeled in lab units again (frequencies multiplied, times divided; variance
// levels are scale-invariant).
struct LockScenario {
  opo::CavityParams params;
  opo::NoiseInputs noise;
  detect::EfficiencyBudget budget;
  detect::DetectorModel detector;
  sim::DisturbanceModel disturbance;  // ambient phase noise + PZT plant
  dsp::ZeroSpanConfig zero_span;      // in-loop band-power monitor
  dsp::LockInConfig lock_in;          // mod_amplitude = dither drive in volts
  dsp::PidConfig pid;                 // sign is derived from mode, not taken from here

  LockMode mode = LockMode::kLockSqueeze;
  double duration_s = 1.0;
  double sample_rate_hz = 0.0;
  std::uint64_t seed = 1;
  double initial_phase_rad = 0.0;
  double ramp_rate_rad_s = 0.0;  // scan mode
  std::size_t servo_decimation = 100;    // full rate -> servo rate divisor
  std::size_t trace_decimation = 10000;  // full rate -> scan-trace divisor
  std::size_t spectrum_segment_length = 8192;
  double spectrum_settle_s = 0.1;  // post-acquisition wait before spectra/residual
  double carrier_leakage = 0.0;    // fringe-offset carrier amplitude in the difference signal
  double pzt_drive_tone_v = 0.0;   // ambient pickup on the PZT drive at its resonance
  bool auto_demod_phase = true;    // derive the demodulation phase from the chain model
  double frequency_scale = 1.0;    // desk-scale factor for relabeling outputs

  void validate() const;
};

struct LockResult {
  LockVerdict verdict = LockVerdict::kNever;
  double lock_acquired_at_s = -1.0;  // first qualifying acquisition; < 0 = none
  double residual_phase_rms_rad = 0.0;
  std::string diagnostic;            // non-empty when the loop failed or diverged
  double plateau_prediction_db = 0.0;  // static chain prediction at the lock point
  double demod_phase_rad = 0.0;        // demodulation phase actually used

  TimeSeries phase_trajectory;   // true phase at the servo rate, whole run
  TimeSeries error_signal;       // demodulated error at the servo rate, whole run
  TimeSeries difference_signal;  // decimated detected photocurrent (locked window,
                                 // or the whole run when lock was never held)
  Spectrum locked_spectrum;      // dark-subtracted, relative to shot noise; empty
                                 // unless the lock held long enough
};

// Static dither-lock characteristic: the settled demodulated output as a
// function of the standing phase, for the scenario's dither depth and detected
// variances at the zero-span center. Proportional to (V+ - V-) sin(2 theta)
// for small dither; identically zero without variance asymmetry.
struct ErrorCurve {
  std::vector<double> theta_rad;
  std::vector<double> value;
};

ErrorCurve error_signal_curve(const LockScenario& scenario,
                              const std::vector<double>& theta_grid);

// Peak phase excursion (rad) the dither drive produces through the PZT plant.
double dither_depth_rad(const LockScenario& scenario);

// Phase accumulated by the dither tone through the sensing chain (PZT plant,
// band-power envelope, video filter, servo-path decimation filter); used as
// the demodulation phase when auto_demod_phase is set.
double calibrated_demod_phase(const LockScenario& scenario);

// Closed-loop run. Acquisition is declared when the phase distance to the
// target (mod pi) stays below the capture window for 10 consecutive dither
// periods; the lock is lost when it stays outside for more than 100 periods.
// Deterministic per (scenario, seed). Divergent actuation yields verdict
// kNever with a diagnostic instead of throwing.
LockResult run_lock(const LockScenario& scenario);

// Open-loop scan: theta = initial phase + ramp_rate * t + disturbance, no
// dither, no feedback. Returns the calibrated zero-span band power decimated
// to the trace rate, labeled in lab units when the scenario was desk-scaled.
TimeSeries run_scan(const LockScenario& scenario, double ramp_rate_rad_s);

// Welch spectrum of the stored locked difference signal without dark-noise
// subtraction, so injected-tone and plant-resonance artifacts stay visible.
// Requires verdict kLocked.
Spectrum locked_spectrum_with_artifacts(const LockResult& result,
                                        const LockScenario& scenario);

// Acquisition window around the lock point (rad, distance mod pi).
inline constexpr double kCaptureWindowRad = 0.2;

}  // namespace squeezelab::lock
