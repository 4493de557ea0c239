#include "squeezelab/dsp.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <sstream>

#include "squeezelab/errors.hpp"

namespace squeezelab::dsp {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw PhysicsError(msg);
}

// FFTW plan creation/destruction is not thread-safe; execution on distinct
// plans is.
std::mutex& fftw_mutex() {
  static std::mutex m;
  return m;
}

std::complex<double> biquad_response(const Biquad& s, double f, double fs) {
  const std::complex<double> z1 = std::polar(1.0, -kTwoPi * f / fs);
  const std::complex<double> z2 = z1 * z1;
  return (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
}

double prewarp(double f, double fs) {
  return 2.0 * fs * std::tan(kTwoPi * 0.5 * f / fs);
}

// Bilinear transform of an analog section
//   H(s) = (n2 s^2 + n1 s + n0) / (s^2 + d1 s + d0)
// with s = 2 fs (1 - z^-1)/(1 + z^-1).
Biquad bilinear(double n2, double n1, double n0, double d1, double d0, double fs) {
  const double k = 2.0 * fs;
  const double a0 = k * k + d1 * k + d0;
  Biquad s;
  s.b0 = (n2 * k * k + n1 * k + n0) / a0;
  s.b1 = (2.0 * n0 - 2.0 * n2 * k * k) / a0;
  s.b2 = (n2 * k * k - n1 * k + n0) / a0;
  s.a1 = (2.0 * d0 - 2.0 * k * k) / a0;
  s.a2 = (k * k - d1 * k + d0) / a0;
  return s;
}

}  // namespace

std::complex<double> Biquad::response(double f, double fs) const {
  return biquad_response(*this, f, fs);
}

std::complex<double> BiquadCascade::response(double f, double fs) const {
  std::complex<double> h{1.0, 0.0};
  for (const auto& s : sections) h *= biquad_response(s, f, fs);
  return h;
}

BiquadCascade butterworth_bandpass(double center_hz, double bandwidth_hz, double fs) {
  require(center_hz > 0.0 && bandwidth_hz > 0.0 && fs > 0.0,
          "butterworth_bandpass: frequencies must be > 0");
  require(center_hz > 0.5 * bandwidth_hz,
          "butterworth_bandpass: center must exceed half the bandwidth");
  require(fs > 4.0 * (center_hz + bandwidth_hz),
          "butterworth_bandpass: sample rate must exceed 4x (center + bandwidth)");

  // Prewarp the band edges so the -3 dB points land exactly.
  const double w1 = prewarp(center_hz - 0.5 * bandwidth_hz, fs);
  const double w2 = prewarp(center_hz + 0.5 * bandwidth_hz, fs);
  const double w0sq = w1 * w2;
  const double bw = w2 - w1;

  // 2nd-order Butterworth low-pass prototype pole (upper half plane); the
  // low-pass to band-pass substitution s -> (s^2 + w0^2)/(bw s) maps it to two
  // pole pairs, one per biquad section.
  const std::complex<double> proto(-std::sqrt(0.5), std::sqrt(0.5));
  const std::complex<double> half = 0.5 * bw * proto;
  const std::complex<double> root = std::sqrt(half * half - w0sq);

  BiquadCascade cascade;
  for (const std::complex<double> pole : {half + root, half - root}) {
    const double d1 = -2.0 * pole.real();
    const double d0 = std::norm(pole);
    // Band-pass numerator (zero at DC and Nyquist); per-section gain fixed at
    // the center afterwards.
    cascade.sections.push_back(bilinear(0.0, bw, 0.0, d1, d0, fs));
  }
  for (auto& s : cascade.sections) {
    const double g = std::abs(biquad_response(s, center_hz, fs));
    s.b0 /= g;
    s.b1 /= g;
    s.b2 /= g;
  }
  return cascade;
}

BiquadCascade butterworth_lowpass(int order, double cutoff_hz, double fs) {
  require(order > 0 && order % 2 == 0, "butterworth_lowpass: order must be even and > 0");
  require(cutoff_hz > 0.0 && cutoff_hz < 0.5 * fs,
          "butterworth_lowpass: cutoff must lie in (0, fs/2)");
  const double wc = prewarp(cutoff_hz, fs);
  BiquadCascade cascade;
  const int pairs = order / 2;
  for (int k = 1; k <= pairs; ++k) {
    // Upper-half-plane Butterworth pole angles for the analog prototype.
    const double theta = kTwoPi * 0.5 * (2.0 * k + order - 1.0) / (2.0 * order);
    const double zeta = -std::cos(theta);
    cascade.sections.push_back(bilinear(0.0, 0.0, wc * wc, 2.0 * zeta * wc, wc * wc, fs));
  }
  return cascade;
}

OnePoleLowpass::OnePoleLowpass(double cutoff_hz, double fs) {
  require(cutoff_hz > 0.0 && cutoff_hz < 0.5 * fs,
          "OnePoleLowpass: cutoff must lie in (0, fs/2)");
  coeff = 1.0 - std::exp(-kTwoPi * cutoff_hz / fs);
}

double equivalent_noise_bandwidth(const BiquadCascade& filter, double fs) {
  // Composite Simpson over [0, fs/2]. The grid is uniform and dense enough for
  // the narrowest bands used here (resolution bandwidths >= fs/2^18).
  const std::size_t n = 1 << 19;  // intervals (even)
  const double h = 0.5 * fs / static_cast<double>(n);
  auto mag2 = [&](double f) { return std::norm(filter.response(f, fs)); };
  double sum = mag2(0.0) + mag2(0.5 * fs);
  for (std::size_t i = 1; i < n; ++i)
    sum += (i % 2 == 1 ? 4.0 : 2.0) * mag2(h * static_cast<double>(i));
  return sum * h / 3.0;
}

TimeSeries envelope(const TimeSeries& series, double video_bandwidth_hz) {
  require(series.sample_rate > 0.0, "envelope: series has no sample rate");
  OnePoleLowpass lp(video_bandwidth_hz, series.sample_rate);
  TimeSeries out;
  out.sample_rate = series.sample_rate;
  out.start_time = series.start_time;
  out.samples.reserve(series.samples.size());
  for (double x : series.samples) out.samples.push_back(lp.process(x * x));
  return out;
}

void ZeroSpanConfig::validate() const {
  require(center_frequency_hz > 0.0, "zero_span: center_frequency_hz must be > 0");
  require(resolution_bandwidth_hz > 0.0, "zero_span: resolution_bandwidth_hz must be > 0");
  require(video_bandwidth_hz > 0.0, "zero_span: video_bandwidth_hz must be > 0");
  require(video_bandwidth_hz <= resolution_bandwidth_hz,
          "zero_span: video bandwidth must not exceed resolution bandwidth");
  require(center_frequency_hz > 0.5 * resolution_bandwidth_hz,
          "zero_span: center frequency must exceed half the resolution bandwidth");
  require(sweep_time_s > 0.0, "zero_span: sweep_time_s must be > 0");
}

ZeroSpanDetector::ZeroSpanDetector(const ZeroSpanConfig& config, double fs) {
  config.validate();
  bandpass_ = butterworth_bandpass(config.center_frequency_hz,
                                   config.resolution_bandwidth_hz, fs);
  video_ = OnePoleLowpass(config.video_bandwidth_hz, fs);
  enbw_hz_ = equivalent_noise_bandwidth(bandpass_, fs);
  // Shot noise in these units is white with per-sample variance 1 (one-sided
  // PSD 2/fs), so the raw band power for shot noise is ENBW * 2/fs.
  calibration_ = fs / (2.0 * enbw_hz_);
}

void ZeroSpanDetector::reset() {
  bandpass_.reset();
  video_.reset();
}

TimeSeries zero_span_power(const TimeSeries& series, const ZeroSpanConfig& config) {
  require(series.sample_rate > 0.0, "zero_span_power: series has no sample rate");
  ZeroSpanDetector det(config, series.sample_rate);
  TimeSeries out;
  out.sample_rate = series.sample_rate;
  out.start_time = series.start_time;
  out.samples.reserve(series.samples.size());
  for (double x : series.samples) out.samples.push_back(det.process(x));
  return out;
}

WelchAccumulator::WelchAccumulator(double fs, std::size_t segment_length,
                                   double overlap_fraction)
    : fs_(fs), n_(segment_length) {
  require(fs > 0.0, "welch: sample rate must be > 0");
  require(segment_length >= 8, "welch: segment length must be >= 8");
  require(overlap_fraction >= 0.0 && overlap_fraction < 1.0,
          "welch: overlap fraction must lie in [0, 1)");
  hop_ = std::max<std::size_t>(1, static_cast<std::size_t>(
                                      std::llround((1.0 - overlap_fraction) *
                                                   static_cast<double>(n_))));
  window_.resize(n_);
  for (std::size_t i = 0; i < n_; ++i) {
    window_[i] = 0.5 * (1.0 - std::cos(kTwoPi * static_cast<double>(i) /
                                       static_cast<double>(n_)));
    window_power_ += window_[i] * window_[i];
  }
  buffer_.resize(n_);
  psd_sum_.assign(n_ / 2 + 1, 0.0);

  std::lock_guard<std::mutex> guard(fftw_mutex());
  fft_in_ = fftw_alloc_real(n_);
  fft_out_ = fftw_alloc_complex(n_ / 2 + 1);
  plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n_), fft_in_,
                               static_cast<fftw_complex*>(fft_out_), FFTW_ESTIMATE);
}

WelchAccumulator::~WelchAccumulator() {
  std::lock_guard<std::mutex> guard(fftw_mutex());
  if (plan_) fftw_destroy_plan(static_cast<fftw_plan>(plan_));
  if (fft_in_) fftw_free(fft_in_);
  if (fft_out_) fftw_free(static_cast<fftw_complex*>(fft_out_));
}

void WelchAccumulator::feed(const double* samples, std::size_t count) {
  for (std::size_t i = 0; i < count; ++i) {
    buffer_[buffered_++] = samples[i];
    if (buffered_ == n_) {
      process_segment();
      // Slide by the hop, keeping the overlapping tail.
      std::copy(buffer_.begin() + static_cast<std::ptrdiff_t>(hop_), buffer_.end(),
                buffer_.begin());
      buffered_ = n_ - hop_;
    }
  }
}

void WelchAccumulator::process_segment() {
  for (std::size_t i = 0; i < n_; ++i) fft_in_[i] = buffer_[i] * window_[i];
  fftw_execute(static_cast<fftw_plan>(plan_));
  const auto* out = static_cast<fftw_complex*>(fft_out_);
  for (std::size_t k = 0; k < psd_sum_.size(); ++k)
    psd_sum_[k] += out[k][0] * out[k][0] + out[k][1] * out[k][1];
  ++segments_;
}

Spectrum WelchAccumulator::finalize() const {
  require(segments_ > 0, "welch: no full segment accumulated");
  Spectrum s;
  s.unit = SpectrumUnit::kPowerSpectralDensity;
  const std::size_t bins = psd_sum_.size();
  s.frequency_hz.resize(bins);
  s.value.resize(bins);
  const double scale = 1.0 / (fs_ * window_power_ * static_cast<double>(segments_));
  for (std::size_t k = 0; k < bins; ++k) {
    s.frequency_hz[k] = fs_ * static_cast<double>(k) / static_cast<double>(n_);
    const bool interior = k != 0 && k != bins - 1;
    s.value[k] = psd_sum_[k] * scale * (interior ? 2.0 : 1.0);
  }
  s.reference_level = 2.0 / fs_;  // shot-noise PSD for unit-variance samples
  return s;
}

Spectrum welch_psd(const TimeSeries& series, std::size_t segment_length,
                   double overlap_fraction) {
  require(segment_length <= series.samples.size(),
          "welch_psd: segment length exceeds series length");
  WelchAccumulator acc(series.sample_rate, segment_length, overlap_fraction);
  acc.feed(series.samples);
  return acc.finalize();
}

void LockInConfig::validate() const {
  require(mod_frequency_hz > 0.0, "lock_in: mod_frequency_hz must be > 0");
  require(mod_amplitude >= 0.0, "lock_in: mod_amplitude must be >= 0");
  require(output_lpf_cutoff_hz > 0.0, "lock_in: output_lpf_cutoff_hz must be > 0");
  require(output_lpf_cutoff_hz < mod_frequency_hz / 5.0,
          "lock_in: output low-pass cutoff must stay below mod_frequency/5");
}

LockInDemodulator::LockInDemodulator(const LockInConfig& config, double fs,
                                     double start_time)
    : config_(config) {
  config.validate();
  require(fs > 2.0 * config.mod_frequency_hz,
          "lock_in: sample rate must exceed twice the modulation frequency");
  lpf_ = butterworth_lowpass(2, config.output_lpf_cutoff_hz, fs);
  phase_step_ = kTwoPi * config.mod_frequency_hz / fs;
  phase_ = kTwoPi * config.mod_frequency_hz * start_time;
}

double LockInDemodulator::process(double x) {
  const double ref = 2.0 * std::sin(phase_ + config_.demod_phase_rad);
  phase_ += phase_step_;
  if (phase_ > 1e12) phase_ = std::fmod(phase_, kTwoPi);  // keep precision on long runs
  return lpf_.process(x * ref);
}

void LockInDemodulator::reset() { lpf_.reset(); }

TimeSeries lock_in_demodulate(const TimeSeries& series, const LockInConfig& config) {
  require(series.sample_rate > 0.0, "lock_in_demodulate: series has no sample rate");
  LockInDemodulator demod(config, series.sample_rate, series.start_time);
  TimeSeries out;
  out.sample_rate = series.sample_rate;
  out.start_time = series.start_time;
  out.samples.reserve(series.samples.size());
  for (double x : series.samples) out.samples.push_back(demod.process(x));
  return out;
}

void PidConfig::validate() const {
  require(output_min < output_max, "pid: output_min must be < output_max");
  require(sign == 1.0 || sign == -1.0, "pid: sign must be +1 or -1");
  require(kp >= 0.0 && ki >= 0.0 && kd >= 0.0, "pid: gains must be >= 0");
}

PidController::PidController(const PidConfig& config) : config_(config) {
  config.validate();
}

double PidController::step(double error, double dt) {
  const double e = config_.sign * error;
  double derivative = 0.0;
  if (has_prev_ && dt > 0.0) derivative = (e - prev_error_) / dt;

  const double candidate_integral = integral_ + e * dt;
  double u = config_.kp * e + config_.ki * candidate_integral + config_.kd * derivative;

  bool integrated = true;
  if (u > config_.output_max) {
    u = config_.output_max;
    if (e > 0.0) integrated = false;  // pushing further into the rail
  } else if (u < config_.output_min) {
    u = config_.output_min;
    if (e < 0.0) integrated = false;
  }
  if (integrated) integral_ = candidate_integral;

  prev_error_ = e;
  has_prev_ = true;
  return u;
}

void PidController::reset() {
  integral_ = 0.0;
  prev_error_ = 0.0;
  has_prev_ = false;
}

StreamingDecimator::StreamingDecimator(double fs, std::size_t factor)
    : factor_(factor), fs_out_(fs / static_cast<double>(factor)) {
  require(factor >= 1, "decimate: factor must be >= 1");
  if (factor_ > 1)
    lowpass_ = butterworth_lowpass(8, 0.4 * fs_out_, fs);
}

std::optional<double> StreamingDecimator::process(double x) {
  const double filtered = factor_ > 1 ? lowpass_.process(x) : x;
  if (++count_ == factor_) {
    count_ = 0;
    return filtered;
  }
  return std::nullopt;
}

void StreamingDecimator::reset() {
  lowpass_.reset();
  count_ = 0;
}

TimeSeries decimate(const TimeSeries& series, std::size_t factor) {
  StreamingDecimator dec(series.sample_rate, factor);
  TimeSeries out;
  out.sample_rate = dec.output_rate();
  out.start_time = series.start_time;
  out.samples.reserve(series.samples.size() / factor + 1);
  for (double x : series.samples)
    if (auto y = dec.process(x)) out.samples.push_back(*y);
  return out;
}

}  // namespace squeezelab::dsp
