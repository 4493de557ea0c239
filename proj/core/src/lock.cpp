#include "squeezelab/lock.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include "squeezelab/errors.hpp"
#include "squeezelab/rng.hpp"

namespace squeezelab::lock {
namespace {

using std::complex;

// RNG stream for detection-stage noise (loss-port vacuum + electronic dark
// noise), disjoint from the cavity field streams and the disturbance walk.
constexpr std::uint64_t kStreamDetect = 33;

void require(bool ok, const std::string& message) {
  if (!ok) throw PhysicsError(message);
}

struct DetectedPair {
  double plus = 1.0;
  double minus = 1.0;
};

// Quadrature variances at the zero-span center frequency after the
// detection-efficiency budget (dark noise excluded).
DetectedPair detected_pair(const LockScenario& sc) {
  const double omega = kTwoPi * sc.zero_span.center_frequency_hz;
  const QuadraturePair v = opo::output_variance_pair(sc.params, sc.noise, omega);
  const double eta = sc.budget.total();
  return {detect::apply_loss(v.plus, eta), detect::apply_loss(v.minus, eta)};
}

double dark_noise_linear(const LockScenario& sc) {
  return from_db(-sc.detector.dark_noise_below_shot_db);
}

double lock_target_rad(LockMode mode) {
  return mode == LockMode::kLockAntisqueeze ? 0.25 * kTwoPi : 0.0;
}

// Distance from theta to the nearest phase congruent to target (mod pi).
double phase_distance(double theta, double target) {
  return std::abs(std::remainder(theta - target, 0.5 * kTwoPi));
}

// Response of the video filter recursion y += coeff * (x - y):
// H(z) = coeff / (1 - (1 - coeff) z^-1).
complex<double> one_pole_response(double coeff, double f, double fs) {
  const complex<double> z_inv = std::polar(1.0, -kTwoPi * f / fs);
  return coeff / (1.0 - (1.0 - coeff) * z_inv);
}

// Transfer seen by a slow modulation of the band power through the square-law
// detector: the modulation sidebands ride on the banded noise, and the
// detector's baseband image of them is weighted by the correlation between
// bandpass responses offset by the modulation frequency.
complex<double> envelope_transfer(const dsp::BiquadCascade& bandpass, double f_mod,
                                  double center_hz, double rbw_hz, double fs) {
  constexpr int kPoints = 2048;
  const double lo = center_hz - 6.0 * rbw_hz;
  const double hi = center_hz + 6.0 * rbw_hz;
  complex<double> num = 0.0;
  double den = 0.0;
  for (int i = 0; i < kPoints; ++i) {
    const double f = lo + (hi - lo) * (i + 0.5) / kPoints;
    const complex<double> h = bandpass.response(f, fs);
    num += h * std::conj(bandpass.response(f - f_mod, fs));
    den += std::norm(h);
  }
  if (den <= 0.0) return 1.0;
  return num / den;
}

void relabel(TimeSeries& ts, double scale) {
  ts.sample_rate *= scale;
  ts.start_time /= scale;
}

void relabel(Spectrum& sp, double scale) {
  for (double& f : sp.frequency_hz) f *= scale;
}

}  // namespace

const char* to_string(LockMode mode) {
  switch (mode) {
    case LockMode::kScan: return "scan";
    case LockMode::kLockSqueeze: return "lock_squeeze";
    case LockMode::kLockAntisqueeze: return "lock_antisqueeze";
  }
  return "unknown";
}

const char* to_string(LockVerdict verdict) {
  switch (verdict) {
    case LockVerdict::kLocked: return "locked";
    case LockVerdict::kLost: return "lost";
    case LockVerdict::kNever: return "never";
  }
  return "unknown";
}

void LockScenario::validate() const {
  params.validate();
  noise.validate();
  budget.validate();
  detector.validate();
  disturbance.validate();
  zero_span.validate();
  require(sample_rate_hz > 0.0, "lock: sample_rate_hz must be > 0");
  require(duration_s > 0.0, "lock: duration_s must be > 0");
  require(servo_decimation >= 1, "lock: servo_decimation must be >= 1");
  require(trace_decimation >= 1, "lock: trace_decimation must be >= 1");
  require(spectrum_segment_length >= 16,
          "lock: spectrum_segment_length must be >= 16");
  require(spectrum_settle_s >= 0.0, "lock: spectrum_settle_s must be >= 0");
  require(carrier_leakage >= 0.0, "lock: carrier_leakage must be >= 0");
  require(pzt_drive_tone_v >= 0.0, "lock: pzt_drive_tone_v must be >= 0");
  require(frequency_scale > 0.0, "lock: frequency_scale must be > 0");
  if (mode != LockMode::kScan) {
    lock_in.validate();
    pid.validate();
    const double fs_servo = sample_rate_hz / static_cast<double>(servo_decimation);
    require(fs_servo >= 20.0 * lock_in.mod_frequency_hz,
            "lock: servo rate must give at least 20 samples per dither period");
  }
}

double dither_depth_rad(const LockScenario& sc) {
  if (sc.lock_in.mod_amplitude == 0.0) return 0.0;
  require(sc.lock_in.mod_frequency_hz > 0.0,
          "dither_depth: modulation frequency must be > 0");
  dsp::Biquad plant = sim::pzt_filter(sc.disturbance.pzt, sc.sample_rate_hz);
  return sc.lock_in.mod_amplitude *
         std::abs(plant.response(sc.lock_in.mod_frequency_hz, sc.sample_rate_hz));
}

double calibrated_demod_phase(const LockScenario& sc) {
  const double fs = sc.sample_rate_hz;
  const double f_mod = sc.lock_in.mod_frequency_hz;
  require(f_mod > 0.0, "demod calibration: modulation frequency must be > 0");

  dsp::Biquad plant = sim::pzt_filter(sc.disturbance.pzt, fs);
  double phase = std::arg(plant.response(f_mod, fs));

  const dsp::BiquadCascade bandpass = dsp::butterworth_bandpass(
      sc.zero_span.center_frequency_hz, sc.zero_span.resolution_bandwidth_hz, fs);
  phase += std::arg(envelope_transfer(bandpass, f_mod,
                                      sc.zero_span.center_frequency_hz,
                                      sc.zero_span.resolution_bandwidth_hz, fs));

  const dsp::OnePoleLowpass video(sc.zero_span.video_bandwidth_hz, fs);
  phase += std::arg(one_pole_response(video.coeff, f_mod, fs));

  if (sc.servo_decimation > 1) {
    const double fs_servo = fs / static_cast<double>(sc.servo_decimation);
    const dsp::BiquadCascade aa = dsp::butterworth_lowpass(8, 0.4 * fs_servo, fs);
    phase += std::arg(aa.response(f_mod, fs));
  }
  return phase;
}

ErrorCurve error_signal_curve(const LockScenario& sc,
                              const std::vector<double>& theta_grid) {
  sc.validate();
  ErrorCurve curve;
  curve.theta_rad = theta_grid;
  curve.value.assign(theta_grid.size(), 0.0);

  const double delta = dither_depth_rad(sc);
  if (delta == 0.0) return curve;  // no dither, no error signal

  const DetectedPair det = detected_pair(sc);
  // Settled first-harmonic amplitude of the band power under a phase dither
  // of depth delta: e(theta0) = (1/pi) * integral of V(theta0 + delta sin u)
  // * sin u over one period. Midpoint rule is spectrally accurate here.
  constexpr int kQuadraturePoints = 128;
  for (std::size_t i = 0; i < theta_grid.size(); ++i) {
    double acc = 0.0;
    for (int k = 0; k < kQuadraturePoints; ++k) {
      const double u = kTwoPi * (k + 0.5) / kQuadraturePoints;
      const double v = detect::homodyne_variance(det.plus, det.minus,
                                                 theta_grid[i] + delta * std::sin(u));
      acc += v * std::sin(u);
    }
    curve.value[i] = 2.0 * acc / kQuadraturePoints;
  }
  return curve;
}

LockResult run_lock(const LockScenario& sc) {
  sc.validate();
  require(sc.mode != LockMode::kScan, "run_lock: scenario mode must be a lock mode");

  const double fs = sc.sample_rate_hz;
  const std::size_t decim = sc.servo_decimation;
  const double fs_servo = fs / static_cast<double>(decim);
  const double dt_servo = static_cast<double>(decim) / fs;
  const auto total = static_cast<std::size_t>(std::llround(sc.duration_s * fs));
  require(total >= decim, "run_lock: run too short for even one servo sample");
  const double target = lock_target_rad(sc.mode);
  const double eta = sc.budget.total();
  const double sqrt_eta = std::sqrt(eta);
  const double v_dark = dark_noise_linear(sc);
  const double sigma_det = std::sqrt((1.0 - eta) + v_dark);

  LockResult result;
  {
    const QuadraturePair v0 = opo::output_variance_pair(sc.params, sc.noise, 0.0);
    const double lock_point_variance =
        sc.mode == LockMode::kLockAntisqueeze ? v0.plus : v0.minus;
    result.plateau_prediction_db = to_db(detect::apply_loss(lock_point_variance, eta));
  }

  // Sensing front end.
  sim::SimConfig qcfg;
  qcfg.params = sc.params;
  qcfg.noise = sc.noise;
  qcfg.duration_s = sc.duration_s;
  qcfg.sample_rate_hz = fs;
  qcfg.rng_seed = sc.seed;
  sim::QuadratureGenerator gen(qcfg);
  sim::DisturbanceGenerator dist(sc.disturbance, fs, sc.seed);
  Rng det_rng(sc.seed, kStreamDetect);

  dsp::ZeroSpanDetector zs(sc.zero_span, fs);
  dsp::StreamingDecimator servo_dec(fs, decim);
  dsp::StreamingDecimator diff_dec(fs, decim);
  {
    const DetectedPair det = detected_pair(sc);
    const double expected =
        detect::homodyne_variance(det.plus, det.minus, sc.initial_phase_rad) +
        v_dark;
    zs.prime(expected);
    servo_dec.prime(expected);
  }

  dsp::LockInConfig li = sc.lock_in;
  li.demod_phase_rad =
      sc.auto_demod_phase ? calibrated_demod_phase(sc) : sc.lock_in.demod_phase_rad;
  result.demod_phase_rad = li.demod_phase_rad;
  dsp::LockInDemodulator lockin(li, fs_servo,
                                static_cast<double>(decim - 1) / fs);

  dsp::PidConfig pc = sc.pid;
  // The error curve rises with theta at the squeeze point and falls at the
  // anti-squeeze point, so the feedback sign follows the chosen extremum.
  pc.sign = sc.mode == LockMode::kLockAntisqueeze ? 1.0 : -1.0;
  dsp::PidController pid(pc);

  // PZT drive: servo hold value + phase dither + any ambient pickup tone at
  // the plant resonance.
  dsp::Biquad plant = sim::pzt_filter(sc.disturbance.pzt, fs);
  const double quad_coeff = sc.disturbance.pzt.quadratic_coeff;
  complex<double> mod_ph(1.0, 0.0);
  const complex<double> mod_rot = std::polar(1.0, kTwoPi * li.mod_frequency_hz / fs);
  complex<double> tone_ph(1.0, 0.0);
  const complex<double> tone_rot =
      std::polar(1.0, kTwoPi * sc.disturbance.pzt.resonance_hz / fs);

  // Capture bookkeeping, in full-rate samples.
  const double period_samples = fs / li.mod_frequency_hz;
  const auto in_needed =
      static_cast<std::size_t>(std::ceil(10.0 * period_samples));
  const auto out_allowed =
      static_cast<std::size_t>(std::ceil(100.0 * period_samples));
  // Let the demodulator output settle before closing the loop.
  const auto warmup = static_cast<std::size_t>(
      std::llround(2.0 / li.output_lpf_cutoff_hz * fs));

  TimeSeries phase_traj;
  phase_traj.sample_rate = fs_servo;
  phase_traj.start_time = static_cast<double>(decim - 1) / fs;
  phase_traj.samples.reserve(total / decim + 1);
  TimeSeries error_ts = phase_traj;

  std::vector<double> diff_all;
  diff_all.reserve(total / decim + 1);

  double u_hold = 0.0;
  std::size_t in_run = 0;
  std::size_t out_run = 0;
  bool locked_now = false;
  bool was_lost = false;
  std::ptrdiff_t first_acq = -1;
  std::ptrdiff_t last_acq = -1;
  bool diverged = false;

  for (std::size_t n = 0; n < total; ++n) {
    const double drive = u_hold + li.mod_amplitude * mod_ph.imag() +
                         sc.pzt_drive_tone_v * tone_ph.imag();
    mod_ph *= mod_rot;
    tone_ph *= tone_rot;
    if ((n & 0xFFFU) == 0xFFFU) {
      mod_ph /= std::abs(mod_ph);
      tone_ph /= std::abs(tone_ph);
    }

    const double lin = plant.process(drive);
    const double theta =
        sc.initial_phase_rad + dist.next() + lin + quad_coeff * lin * lin;
    if (!std::isfinite(theta) || std::abs(lin) > 1e4) {
      result.diagnostic = "actuation diverged at t = " +
                          std::to_string(static_cast<double>(n) / fs /
                                         sc.frequency_scale) +
                          " s; verdict forced to never";
      diverged = true;
      break;
    }

    const double s = std::sin(theta);
    const auto q = gen.next();
    const double i_det = sqrt_eta * (s * q.plus + std::cos(theta) * q.minus) +
                         sc.carrier_leakage * s + sigma_det * det_rng.gaussian();

    const double p = zs.process(i_det);
    if (const auto y = servo_dec.process(p)) {
      const double e = lockin.process(*y);
      phase_traj.samples.push_back(theta);
      error_ts.samples.push_back(e);
      if (n >= warmup) {
        u_hold = pid.step(e, dt_servo);
        if (!std::isfinite(u_hold)) {
          result.diagnostic = "servo output diverged at t = " +
                              std::to_string(static_cast<double>(n) / fs /
                                             sc.frequency_scale) +
                              " s; verdict forced to never";
          diverged = true;
          break;
        }
      }
    }
    if (const auto y = diff_dec.process(i_det)) diff_all.push_back(*y);

    if (phase_distance(theta, target) < kCaptureWindowRad) {
      ++in_run;
      out_run = 0;
      if (!locked_now && in_run >= in_needed) {
        locked_now = true;
        last_acq = static_cast<std::ptrdiff_t>(n);
        if (first_acq < 0) first_acq = last_acq;
      }
    } else {
      ++out_run;
      in_run = 0;
      if (locked_now && out_run > out_allowed) {
        locked_now = false;
        was_lost = true;
      }
    }
  }

  if (diverged) {
    result.verdict = LockVerdict::kNever;
  } else if (locked_now) {
    result.verdict = LockVerdict::kLocked;
  } else {
    result.verdict = was_lost ? LockVerdict::kLost : LockVerdict::kNever;
  }
  if (first_acq >= 0 && !diverged) {
    result.lock_acquired_at_s =
        static_cast<double>(first_acq) / fs / sc.frequency_scale;
  }

  const double fs_diff = fs_servo;
  if (result.verdict == LockVerdict::kLocked) {
    const auto settle_n =
        static_cast<std::size_t>(std::llround(sc.spectrum_settle_s * fs));
    const std::size_t w_start = static_cast<std::size_t>(last_acq) + settle_n;
    const std::size_t k_start = w_start / decim;  // first emitted sample at or
                                                  // after the window start
    if (k_start < phase_traj.samples.size()) {
      double sum_sq = 0.0;
      for (std::size_t k = k_start; k < phase_traj.samples.size(); ++k) {
        const double d = std::remainder(phase_traj.samples[k] - target,
                                        0.5 * kTwoPi);
        sum_sq += d * d;
      }
      result.residual_phase_rms_rad =
          std::sqrt(sum_sq / static_cast<double>(phase_traj.samples.size() - k_start));

      result.difference_signal.sample_rate = fs_diff;
      result.difference_signal.start_time =
          static_cast<double>(k_start * decim + decim - 1) / fs;
      result.difference_signal.samples.assign(diff_all.begin() + k_start,
                                              diff_all.end());

      if (result.difference_signal.samples.size() >= sc.spectrum_segment_length) {
        dsp::WelchAccumulator acc(fs_diff, sc.spectrum_segment_length);
        acc.feed(result.difference_signal.samples);
        Spectrum psd = acc.finalize();
        result.locked_spectrum.frequency_hz = std::move(psd.frequency_hz);
        result.locked_spectrum.unit = SpectrumUnit::kRelativeToShotNoise;
        result.locked_spectrum.reference_level = 1.0;
        result.locked_spectrum.value.reserve(psd.value.size());
        for (const double v : psd.value) {
          result.locked_spectrum.value.push_back(
              std::max(v * fs * 0.5 - v_dark, 0.0));
        }
      } else {
        result.diagnostic =
            "locked window shorter than one spectrum segment; spectrum empty";
      }
    } else {
      result.diagnostic =
          "run ended inside the settle window; no locked statistics";
    }
  } else {
    // Keep the whole difference record for post-mortem inspection.
    result.difference_signal.sample_rate = fs_diff;
    result.difference_signal.start_time = static_cast<double>(decim - 1) / fs;
    result.difference_signal.samples = std::move(diff_all);
  }

  result.phase_trajectory = std::move(phase_traj);
  result.error_signal = std::move(error_ts);

  const double scale = sc.frequency_scale;
  relabel(result.phase_trajectory, scale);
  relabel(result.error_signal, scale);
  relabel(result.difference_signal, scale);
  relabel(result.locked_spectrum, scale);
  return result;
}

TimeSeries run_scan(const LockScenario& sc, double ramp_rate_rad_s) {
  sc.validate();

  const double fs = sc.sample_rate_hz;
  const auto total = static_cast<std::size_t>(std::llround(sc.duration_s * fs));
  const double eta = sc.budget.total();
  const double sqrt_eta = std::sqrt(eta);
  const double v_dark = dark_noise_linear(sc);
  const double sigma_det = std::sqrt((1.0 - eta) + v_dark);

  sim::SimConfig qcfg;
  qcfg.params = sc.params;
  qcfg.noise = sc.noise;
  qcfg.duration_s = sc.duration_s;
  qcfg.sample_rate_hz = fs;
  qcfg.rng_seed = sc.seed;
  sim::QuadratureGenerator gen(qcfg);
  sim::DisturbanceGenerator dist(sc.disturbance, fs, sc.seed);
  Rng det_rng(sc.seed, kStreamDetect);

  dsp::ZeroSpanDetector zs(sc.zero_span, fs);
  dsp::StreamingDecimator trace_dec(fs, sc.trace_decimation);
  {
    const DetectedPair det = detected_pair(sc);
    const double expected =
        detect::homodyne_variance(det.plus, det.minus, sc.initial_phase_rad) +
        v_dark;
    zs.prime(expected);
    trace_dec.prime(expected);
  }

  dsp::Biquad plant = sim::pzt_filter(sc.disturbance.pzt, fs);
  const double quad_coeff = sc.disturbance.pzt.quadratic_coeff;
  complex<double> tone_ph(1.0, 0.0);
  const complex<double> tone_rot =
      std::polar(1.0, kTwoPi * sc.disturbance.pzt.resonance_hz / fs);
  const bool has_tone = sc.pzt_drive_tone_v > 0.0;

  TimeSeries trace;
  trace.sample_rate = fs / static_cast<double>(sc.trace_decimation);
  trace.start_time = static_cast<double>(sc.trace_decimation - 1) / fs;
  trace.samples.reserve(total / sc.trace_decimation + 1);

  for (std::size_t n = 0; n < total; ++n) {
    double theta = sc.initial_phase_rad +
                   ramp_rate_rad_s * static_cast<double>(n) / fs + dist.next();
    if (has_tone) {
      const double lin = plant.process(sc.pzt_drive_tone_v * tone_ph.imag());
      tone_ph *= tone_rot;
      if ((n & 0xFFFU) == 0xFFFU) tone_ph /= std::abs(tone_ph);
      theta += lin + quad_coeff * lin * lin;
    }

    const double s = std::sin(theta);
    const auto q = gen.next();
    const double i_det = sqrt_eta * (s * q.plus + std::cos(theta) * q.minus) +
                         sc.carrier_leakage * s + sigma_det * det_rng.gaussian();
    if (const auto y = trace_dec.process(zs.process(i_det)))
      trace.samples.push_back(*y);
  }

  relabel(trace, sc.frequency_scale);
  return trace;
}

Spectrum locked_spectrum_with_artifacts(const LockResult& result,
                                        const LockScenario& sc) {
  require(result.verdict == LockVerdict::kLocked,
          "locked_spectrum_with_artifacts: the lock was not held");
  require(result.difference_signal.samples.size() >= sc.spectrum_segment_length,
          "locked_spectrum_with_artifacts: locked record shorter than one segment");

  dsp::WelchAccumulator acc(result.difference_signal.sample_rate,
                            sc.spectrum_segment_length);
  acc.feed(result.difference_signal.samples);
  Spectrum psd = acc.finalize();

  const double fs_full = result.difference_signal.sample_rate *
                         static_cast<double>(sc.servo_decimation);
  Spectrum out;
  out.frequency_hz = std::move(psd.frequency_hz);
  out.unit = SpectrumUnit::kRelativeToShotNoise;
  out.reference_level = 1.0;
  out.value.reserve(psd.value.size());
  for (const double v : psd.value) out.value.push_back(v * fs_full * 0.5);
  return out;
}

}  // namespace squeezelab::lock
