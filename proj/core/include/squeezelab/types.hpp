#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "squeezelab/errors.hpp"

namespace squeezelab {

inline constexpr double kSpeedOfLight = 2.99792458e8;     // m/s
inline constexpr double kPlanck = 6.62607015e-34;         // J*s
inline constexpr double kTwoPi = 6.283185307179586476925286766559;

// Noise powers are expressed relative to the shot-noise limit (vacuum = 1).
inline double to_db(double linear) {
  if (!(linear > 0.0))
    throw PhysicsError("to_db: value must be > 0, got " + std::to_string(linear));
  return 10.0 * std::log10(linear);
}

inline double from_db(double db) { return std::pow(10.0, db / 10.0); }

// Uniformly sampled real signal. `samples[n]` is the value at
// start_time + n / sample_rate.
struct TimeSeries {
  double sample_rate = 0.0;  // Hz
  double start_time = 0.0;   // s
  std::vector<double> samples;

  [[nodiscard]] std::size_t size() const { return samples.size(); }
  [[nodiscard]] double duration() const {
    return sample_rate > 0.0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
  [[nodiscard]] double time_at(std::size_t n) const {
    return start_time + static_cast<double>(n) / sample_rate;
  }
};

enum class SpectrumUnit {
  kRelativeToShotNoise,       // dimensionless variance, vacuum = 1
  kPowerSpectralDensity,      // signal-units^2 / Hz, one-sided
};

// Frequency-domain trace. `reference_level` defines 0 dB for the dB column of
// CSV exports (for a PSD in shot-noise-normalized signal units at rate fs the
// shot-noise reference is 2/fs).
struct Spectrum {
  std::vector<double> frequency_hz;  // strictly increasing
  std::vector<double> value;
  SpectrumUnit unit = SpectrumUnit::kRelativeToShotNoise;
  double reference_level = 1.0;

  [[nodiscard]] std::size_t size() const { return frequency_hz.size(); }

  void validate() const {
    if (frequency_hz.size() != value.size())
      throw PhysicsError("Spectrum: frequency and value arrays differ in length");
    for (std::size_t i = 1; i < frequency_hz.size(); ++i)
      if (!(frequency_hz[i] > frequency_hz[i - 1]))
        throw PhysicsError("Spectrum: frequency grid must be strictly increasing");
    if (!(reference_level > 0.0))
      throw PhysicsError("Spectrum: reference_level must be > 0");
  }

  // dB relative to reference_level; very small/negative values clamp to the
  // floor instead of producing -inf (subtraction noise can graze zero).
  [[nodiscard]] double value_db(std::size_t i, double floor_db = -200.0) const {
    const double r = value[i] / reference_level;
    if (!(r > 0.0)) return floor_db;
    return std::max(10.0 * std::log10(r), floor_db);
  }
};

// Variance of the two orthogonal output quadratures at one frequency.
// `plus` is the amplified (anti-squeezed) quadrature, `minus` the deamplified
// (squeezed) one.
struct QuadraturePair {
  double plus = 1.0;
  double minus = 1.0;
};

}  // namespace squeezelab
