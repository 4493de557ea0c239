// Microbenchmarks for the hot paths: the analytic variance model, the
// time-domain quadrature engine, and the per-sample instrument DSP that
// dominates scan and lock runs.
#include <benchmark/benchmark.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include "squeezelab/dsp.hpp"
#include "squeezelab/opo.hpp"
#include "squeezelab/rng.hpp"
#include "squeezelab/sim.hpp"
#include "squeezelab/types.hpp"

using namespace squeezelab;

namespace {

opo::CavityParams bench_params(double drive_ratio) {
  opo::CavityParams p;
  p.kappa_out_a = kTwoPi * 2.0e6;
  p.kappa_in_a = kTwoPi * 2.0e4;
  p.kappa_loss_a = kTwoPi * 5.0e4;
  p.beta = 1.0;
  p.epsilon = drive_ratio * p.kappa_a();
  return p;
}

// A reusable buffer of unit-variance white noise, long enough that cycling
// through it keeps the filters exercised with fresh data.
const std::vector<double>& noise_buffer() {
  static const std::vector<double> buffer = [] {
    Rng rng(12345, 0);
    std::vector<double> b(1 << 16);
    for (auto& x : b) x = rng.gaussian();
    return b;
  }();
  return buffer;
}

}  // namespace

// Analytic variance spectra on a log grid (both quadrature branches).
static void BM_VarianceSpectrum(benchmark::State& state) {
  const auto points = static_cast<std::size_t>(state.range(0));
  std::vector<double> freqs(points);
  for (std::size_t i = 0; i < points; ++i)
    freqs[i] = 1.0e2 * std::pow(10.0, 6.0 * static_cast<double>(i) / static_cast<double>(points - 1));
  const opo::CavityParams p = bench_params(0.4);
  const opo::NoiseInputs noise;
  for (auto _ : state) {
    auto spectra = opo::variance_spectrum(p, noise, freqs);
    benchmark::DoNotOptimize(spectra.minus.value.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          static_cast<std::int64_t>(points));
}
BENCHMARK(BM_VarianceSpectrum)->Arg(1000);

// Time-domain engine throughput: one call produces both quadrature streams.
static void BM_QuadratureGenerator(benchmark::State& state) {
  sim::SimConfig cfg;
  cfg.params = bench_params(0.4);
  // Slow the cavity two decades so the sample rate clears the stability
  // margin the validator enforces; per-sample cost is rate-independent.
  cfg.params.kappa_out_a *= 1.0e-2;
  cfg.params.kappa_in_a *= 1.0e-2;
  cfg.params.kappa_loss_a *= 1.0e-2;
  cfg.params.epsilon *= 1.0e-2;
  cfg.duration_s = 1.0e6;  // effectively unbounded for the benchmark
  cfg.sample_rate_hz = 1.0e7;
  cfg.rng_seed = 7;
  sim::QuadratureGenerator gen(cfg);
  for (auto _ : state) {
    auto s = gen.next();
    benchmark::DoNotOptimize(s);
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()));
}
BENCHMARK(BM_QuadratureGenerator);

// 8th-order anti-aliasing low-pass, the inner filter of every decimator.
static void BM_BiquadCascade(benchmark::State& state) {
  dsp::BiquadCascade filter = dsp::butterworth_lowpass(8, 4.0e4, 1.0e7);
  const auto& noise = noise_buffer();
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(filter.process(noise[i]));
    i = (i + 1) & (noise.size() - 1);
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()));
}
BENCHMARK(BM_BiquadCascade);

// Band-power monitor: band-pass, square-law, video filter per sample.
static void BM_ZeroSpanDetector(benchmark::State& state) {
  dsp::ZeroSpanConfig cfg;
  cfg.center_frequency_hz = 2.0e5;
  cfg.resolution_bandwidth_hz = 3.0e4;
  cfg.video_bandwidth_hz = 3.0e3;
  dsp::ZeroSpanDetector detector(cfg, 1.0e7);
  const auto& noise = noise_buffer();
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(detector.process(noise[i]));
    i = (i + 1) & (noise.size() - 1);
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()));
}
BENCHMARK(BM_ZeroSpanDetector);

// Dither demodulation: mixer plus 2nd-order output low-pass per sample.
static void BM_LockInDemodulator(benchmark::State& state) {
  dsp::LockInConfig cfg;
  cfg.mod_frequency_hz = 3.5e3;
  cfg.mod_amplitude = 1.0;
  cfg.output_lpf_cutoff_hz = 60.0;
  dsp::LockInDemodulator demod(cfg, 1.0e5);
  const auto& noise = noise_buffer();
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(demod.process(noise[i]));
    i = (i + 1) & (noise.size() - 1);
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()));
}
BENCHMARK(BM_LockInDemodulator);

// Averaged periodogram of a one-second record, the spectral readout path.
static void BM_WelchPsd(benchmark::State& state) {
  const auto segment = static_cast<std::size_t>(state.range(0));
  TimeSeries series;
  series.sample_rate = 1.0e6;
  series.samples.resize(1 << 20);
  Rng rng(99, 0);
  for (auto& x : series.samples) x = rng.gaussian();
  for (auto _ : state) {
    auto psd = dsp::welch_psd(series, segment);
    benchmark::DoNotOptimize(psd.value.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                          static_cast<std::int64_t>(series.samples.size()));
}
BENCHMARK(BM_WelchPsd)->Arg(4096)->Arg(16384);

BENCHMARK_MAIN();
