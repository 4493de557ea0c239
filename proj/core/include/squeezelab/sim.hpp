#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "squeezelab/dsp.hpp"
#include "squeezelab/opo.hpp"
#include "squeezelab/rng.hpp"
#include "squeezelab/types.hpp"

namespace squeezelab::sim {

enum class Integrator {
  kExact,          // exact per-step joint statistics of the linear system
  kEulerMaruyama,  // first-order reference scheme, kept for cross-checks
};

// Configuration for the time-domain quadrature simulation. The engine models
// the vacuum-seeded cavity only (alpha must be 0); input-noise levels must be
// frequency-independent here (tabulated curves belong to the frequency-domain
// model).
struct SimConfig {
  opo::CavityParams params;
  opo::NoiseInputs noise;  // constants only; defaults are unit vacuum
  double duration_s = 1.0;
  double sample_rate_hz = 0.0;
  std::uint64_t rng_seed = 1;
  Integrator integrator = Integrator::kExact;

  void validate() const;
};

// Streaming generator of the two output quadrature streams. Samples are
// normalized so shot noise is white with per-sample variance 1 (one-sided PSD
// 2/fs); the Welch PSD of branch +/- divided by that reference reproduces the
// frequency-domain variance model. The state starts from its stationary
// distribution, so the process is stationary from the first sample.
class QuadratureGenerator {
 public:
  explicit QuadratureGenerator(const SimConfig& config);

  struct Sample {
    double plus;
    double minus;
  };

  Sample next();
  [[nodiscard]] double sample_rate() const { return fs_; }

 private:
  struct Port {
    Rng rng;
    double drive = 0.0;      // sqrt(2 kappa V) into the state
    double alpha1 = 0.0;     // Cholesky of the (a, c) covariance
    double c1 = 0.0;
    double c2 = 0.0;
    double reflect = 0.0;    // sqrt(V) on the directly reflected term (output port only)
    bool reflecting = false;
  };

  struct BranchState {
    double gamma = 0.0;
    double decay = 0.0;          // exp(-gamma dt)
    double mean_weight = 0.0;    // (1 - exp(-gamma dt)) / (gamma dt)
    double transmit = 0.0;       // sqrt(2 kappa_out)
    double x = 0.0;
    std::vector<Port> ports;
  };

  double step(BranchState& b);
  double step_euler(BranchState& b);

  double fs_ = 0.0;
  double dt_ = 0.0;
  double sqrt_dt_ = 0.0;
  Integrator integrator_;
  BranchState branch_[2];
};

// Whole-run form: returns (plus, minus) series of duration_s * sample_rate_hz
// samples.
std::pair<TimeSeries, TimeSeries> simulate_output_quadratures(const SimConfig& config);

// Time interval to discard before estimating spectra: ten relaxation times of
// the slowest branch.
double burn_in_time(const opo::CavityParams& params);

struct SinusoidSpec {
  double frequency_hz = 0.0;
  double amplitude_rad = 0.0;
  double phase_rad = 0.0;
};

// Piezo-actuated mirror: second-order resonance driven in volts, read in
// radians. An optional quadratic term models actuator nonlinearity (adds a
// component at twice the drive frequency); off by default.
struct PztParams {
  double resonance_hz = 19e3;
  double quality_factor = 20.0;
  double dc_gain_rad_per_v = 1.0;
  double quadratic_coeff = 0.0;

  void validate() const;
};

// Slow relative-phase drift between local oscillator and squeezed beam:
// deterministic ramp + Wiener process + discrete spectral lines.
struct DisturbanceModel {
  double linear_drift_rad_s = 0.0;
  double random_walk_rad2_s = 0.0;  // Wiener diffusion
  std::vector<SinusoidSpec> sinusoids;
  PztParams pzt;

  void validate() const;
};

// Streaming phase-disturbance generator (deterministic per seed).
class DisturbanceGenerator {
 public:
  DisturbanceGenerator(const DisturbanceModel& model, double fs, std::uint64_t seed);

  double next();

 private:
  DisturbanceModel model_;
  double dt_;
  double t_ = 0.0;
  double walk_ = 0.0;
  double walk_sigma_ = 0.0;
  Rng rng_;
};

TimeSeries simulate_phase_disturbance(const DisturbanceModel& model, double duration_s,
                                      double sample_rate_hz, std::uint64_t seed);

// Discrete-time realization of the piezo resonance H(s) =
// gain * w0^2 / (s^2 + w0 s / Q + w0^2) (bilinear transform, prewarped at the
// resonance). DC gain is exact; the response magnitude at the resonance is
// gain * Q.
dsp::Biquad pzt_filter(const PztParams& pzt, double sample_rate_hz);

TimeSeries pzt_response(const TimeSeries& drive_volts, const PztParams& pzt);

}  // namespace squeezelab::sim
