#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <vector>

#include "squeezelab/types.hpp"

namespace squeezelab::dsp {

// Direct-form II transposed second-order section.
struct Biquad {
  double b0 = 1.0, b1 = 0.0, b2 = 0.0;
  double a1 = 0.0, a2 = 0.0;
  double s1 = 0.0, s2 = 0.0;

  double process(double x) {
    const double y = b0 * x + s1;
    s1 = b1 * x - a1 * y + s2;
    s2 = b2 * x - a2 * y;
    return y;
  }

  void reset() { s1 = s2 = 0.0; }

  // Set the internal state to the steady state for a constant input, so the
  // first output is already the settled DC response instead of a turn-on ramp.
  // Returns the settled output.
  double prime_dc(double input) {
    const double y = input * (b0 + b1 + b2) / (1.0 + a1 + a2);
    s1 = y - b0 * input;
    s2 = b2 * input - a2 * y;
    return y;
  }

  // Complex frequency response at f (Hz) for sample rate fs.
  [[nodiscard]] std::complex<double> response(double f, double fs) const;
};

struct BiquadCascade {
  std::vector<Biquad> sections;

  double process(double x) {
    for (auto& s : sections) x = s.process(x);
    return x;
  }

  void reset() {
    for (auto& s : sections) s.reset();
  }

  // Steady-state initialization for a constant input, section by section.
  double prime_dc(double input) {
    for (auto& s : sections) input = s.prime_dc(input);
    return input;
  }

  [[nodiscard]] std::complex<double> response(double f, double fs) const;
};

// 4th-order Butterworth band-pass (two cascaded biquads, bilinear transform
// with prewarped band edges). Unity gain at center_hz; -3 dB edges at
// center_hz +- bandwidth_hz/2. Requires fs > 4 * (center_hz + bandwidth_hz).
BiquadCascade butterworth_bandpass(double center_hz, double bandwidth_hz, double fs);

// Even-order Butterworth low-pass, bilinear transform with prewarped cutoff.
// Unity DC gain, -3 dB at cutoff_hz.
BiquadCascade butterworth_lowpass(int order, double cutoff_hz, double fs);

// Single real pole, unity DC gain; -3 dB near cutoff_hz for cutoff << fs.
struct OnePoleLowpass {
  double coeff = 0.0;
  double y = 0.0;

  OnePoleLowpass() = default;
  OnePoleLowpass(double cutoff_hz, double fs);

  double process(double x) {
    y += coeff * (x - y);
    return y;
  }
  void reset() { y = 0.0; }
};

// One-sided equivalent noise bandwidth, integral of |H(f)|^2 over [0, fs/2].
double equivalent_noise_bandwidth(const BiquadCascade& filter, double fs);

// Square-law detector followed by a 1st-order video low-pass: the output
// tracks the instantaneous power of the input band.
TimeSeries envelope(const TimeSeries& series, double video_bandwidth_hz);

// Swept-free spectrum-analyzer emulation: fixed center frequency, resolution
// band-pass, square-law detection, video low-pass.
struct ZeroSpanConfig {
  double center_frequency_hz = 0.0;
  double resolution_bandwidth_hz = 0.0;
  double video_bandwidth_hz = 0.0;
  double sweep_time_s = 1.0;

  void validate() const;
};

// Streaming zero-span detector. Calibrated so that shot noise (a white input
// with per-sample variance 1, i.e. one-sided PSD 2/fs) reads 1.0: the raw band
// power is divided by ENBW * 2/fs.
class ZeroSpanDetector {
 public:
  ZeroSpanDetector(const ZeroSpanConfig& config, double fs);

  double process(double x) {
    const double banded = bandpass_.process(x);
    return calibration_ * video_.process(banded * banded);
  }

  void reset();

  // Start the video filter at an expected output level instead of zero, the
  // way a long-running analyzer would be found mid-measurement; avoids a
  // settling ramp at the head of every trace.
  void prime(double expected_output) { video_.y = expected_output / calibration_; }

  [[nodiscard]] double calibration() const { return calibration_; }
  [[nodiscard]] double enbw_hz() const { return enbw_hz_; }

 private:
  BiquadCascade bandpass_;
  OnePoleLowpass video_;
  double calibration_ = 1.0;
  double enbw_hz_ = 0.0;
};

// Whole-series form of the zero-span detector.
TimeSeries zero_span_power(const TimeSeries& series, const ZeroSpanConfig& config);

// Streaming Welch estimator (Hann window, fractional overlap, one-sided PSD
// with window-power correction). White noise of variance sigma^2 at rate fs
// gives a flat 2*sigma^2/fs.
class WelchAccumulator {
 public:
  WelchAccumulator(double fs, std::size_t segment_length, double overlap_fraction = 0.5);
  ~WelchAccumulator();
  WelchAccumulator(const WelchAccumulator&) = delete;
  WelchAccumulator& operator=(const WelchAccumulator&) = delete;

  void feed(const double* samples, std::size_t count);
  void feed(const std::vector<double>& samples) { feed(samples.data(), samples.size()); }

  [[nodiscard]] std::size_t segments_accumulated() const { return segments_; }

  // One-sided PSD; throws if no full segment was accumulated.
  [[nodiscard]] Spectrum finalize() const;

 private:
  void process_segment();

  double fs_;
  std::size_t n_;
  std::size_t hop_;
  std::vector<double> window_;
  double window_power_ = 0.0;
  std::vector<double> buffer_;
  std::size_t buffered_ = 0;
  std::vector<double> psd_sum_;
  std::size_t segments_ = 0;
  void* plan_ = nullptr;       // fftw plan
  double* fft_in_ = nullptr;
  void* fft_out_ = nullptr;    // fftw_complex*
};

Spectrum welch_psd(const TimeSeries& series, std::size_t segment_length,
                   double overlap_fraction = 0.5);

// Phase-sensitive detection of a modulation tone.
struct LockInConfig {
  double mod_frequency_hz = 0.0;
  double mod_amplitude = 0.0;        // drive amplitude fed to the actuator
  double demod_phase_rad = 0.0;
  double output_lpf_cutoff_hz = 0.0; // 2nd-order low-pass on the demodulated output

  void validate() const;
};

// Streaming demodulator: y = LPF2(x * 2 sin(2 pi f t + demod_phase)). For an
// input A sin(2 pi f t + phi) the settled output is A cos(phi - demod_phase).
class LockInDemodulator {
 public:
  LockInDemodulator(const LockInConfig& config, double fs, double start_time = 0.0);

  double process(double x);
  void reset();

 private:
  LockInConfig config_;
  BiquadCascade lpf_;
  double phase_ = 0.0;       // running modulation phase (rad)
  double phase_step_ = 0.0;
};

TimeSeries lock_in_demodulate(const TimeSeries& series, const LockInConfig& config);

// Parallel PID with conditional anti-windup: the integrator freezes while the
// output is saturated and the error keeps pushing into the rail.
struct PidConfig {
  double kp = 0.0;
  double ki = 0.0;
  double kd = 0.0;
  double output_min = -1.0;
  double output_max = 1.0;
  double sign = 1.0;  // +1 or -1, multiplies the error

  void validate() const;
};

class PidController {
 public:
  explicit PidController(const PidConfig& config);

  double step(double error, double dt);
  void reset();

  [[nodiscard]] double integral() const { return integral_; }

 private:
  PidConfig config_;
  double integral_ = 0.0;
  double prev_error_ = 0.0;
  bool has_prev_ = false;
};

// Anti-aliased downsampling: 8th-order Butterworth low-pass at
// 0.4 * (fs/factor) followed by an every-factor pick.
class StreamingDecimator {
 public:
  StreamingDecimator(double fs, std::size_t factor);

  // Returns a value once every `factor` inputs.
  std::optional<double> process(double x);
  [[nodiscard]] double output_rate() const { return fs_out_; }
  void reset();

  // Pre-settle the anti-alias filter at a constant level, as if the input had
  // been sitting there forever; removes the turn-on ramp from the output.
  void prime(double dc_level) { lowpass_.prime_dc(dc_level); }

 private:
  BiquadCascade lowpass_;
  std::size_t factor_;
  std::size_t count_ = 0;
  double fs_out_;
};

TimeSeries decimate(const TimeSeries& series, std::size_t factor);

}  // namespace squeezelab::dsp
