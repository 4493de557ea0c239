#include "squeezelab/sim.hpp"

#include <cmath>
#include <sstream>

#include "squeezelab/errors.hpp"

namespace squeezelab::sim {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw PhysicsError(msg);
}

double constant_level(const opo::NoiseCurve& curve, const char* name) {
  if (!curve.is_constant())
    throw PhysicsError(std::string("time-domain simulation requires a constant ") + name +
                       " level; tabulated spectra are frequency-domain only");
  return curve.constant_value();
}

// Noise-stream ids. Fixed per port so adding a port never reseeds another.
constexpr std::uint64_t kStreamOut = 0;
constexpr std::uint64_t kStreamIn = 1;
constexpr std::uint64_t kStreamLoss = 2;
constexpr std::uint64_t kStreamInit = 3;
constexpr std::uint64_t kBranchStride = 8;
constexpr std::uint64_t kStreamWalk = 32;

}  // namespace

void SimConfig::validate() const {
  params.validate();
  noise.validate();
  require(params.alpha == 0.0,
          "time-domain simulation models the vacuum-seeded cavity only (alpha = 0)");
  require(duration_s > 0.0, "duration_s must be > 0");
  const double fastest = std::max(params.kappa_a(), params.pump_gain()) / kTwoPi;
  if (!(sample_rate_hz > 20.0 * fastest)) {
    std::ostringstream os;
    os << "sample_rate_hz = " << sample_rate_hz
       << " must exceed 20x the fastest rate (" << 20.0 * fastest << " Hz)";
    throw PhysicsError(os.str());
  }
  require(duration_s * sample_rate_hz >= 2.0, "run must cover at least 2 samples");
}

QuadratureGenerator::QuadratureGenerator(const SimConfig& config) {
  config.validate();
  fs_ = config.sample_rate_hz;
  dt_ = 1.0 / fs_;
  sqrt_dt_ = std::sqrt(dt_);
  integrator_ = config.integrator;

  const auto& p = config.params;
  const double g = p.pump_gain();

  for (int bi = 0; bi < 2; ++bi) {
    const bool plus = bi == 0;
    BranchState& b = branch_[bi];
    b.gamma = p.kappa_a() + (plus ? -g : +g);
    b.decay = std::exp(-b.gamma * dt_);
    b.mean_weight = (1.0 - b.decay) / (b.gamma * dt_);
    b.transmit = std::sqrt(2.0 * p.kappa_out_a);

    const double v_vac = constant_level(plus ? config.noise.vacuum_plus : config.noise.vacuum_minus,
                                        "vacuum port noise");
    const double v_seed = constant_level(plus ? config.noise.seed_plus : config.noise.seed_minus,
                                         "seed port noise");
    const double v_loss = constant_level(plus ? config.noise.loss_plus : config.noise.loss_minus,
                                         "loss port noise");

    const std::uint64_t base = static_cast<std::uint64_t>(bi) * kBranchStride;
    const double var_a = (1.0 - b.decay * b.decay) / (2.0 * b.gamma);
    const double cov_ac = (1.0 - b.decay) / b.gamma;
    const double alpha1 = std::sqrt(var_a);
    const double c1 = cov_ac / alpha1;
    const double c2 = std::sqrt(std::max(dt_ - c1 * c1, 0.0));

    auto add_port = [&](double kappa, double level, std::uint64_t stream, bool reflecting) {
      if (kappa <= 0.0) return;
      Port port;
      port.rng = Rng(config.rng_seed, base + stream);
      port.drive = std::sqrt(2.0 * kappa * level);
      port.alpha1 = alpha1;
      port.c1 = c1;
      port.c2 = c2;
      port.reflect = std::sqrt(level);
      port.reflecting = reflecting;
      b.ports.push_back(port);
    };
    add_port(p.kappa_out_a, v_vac, kStreamOut, true);
    add_port(p.kappa_in_a, v_seed, kStreamIn, false);
    add_port(p.kappa_loss_a, v_loss, kStreamLoss, false);

    // Stationary start: no burn-in needed for the state itself.
    const double var_st = (p.kappa_out_a * v_vac + p.kappa_in_a * v_seed +
                           p.kappa_loss_a * v_loss) / b.gamma;
    Rng init(config.rng_seed, base + kStreamInit);
    b.x = std::sqrt(var_st) * init.gaussian();
  }
}

double QuadratureGenerator::step(BranchState& b) {
  // Exact joint per-step statistics: for each port, a is the exponentially
  // weighted Wiener integral entering the state update, c the plain Wiener
  // increment; the bin average of the within-step response is (c - a)/gamma.
  double sum_a = 0.0;
  double sum_b = 0.0;
  double reflected = 0.0;
  for (Port& port : b.ports) {
    const double z1 = port.rng.gaussian();
    const double z2 = port.rng.gaussian();
    const double a = port.alpha1 * z1;
    const double c = port.c1 * z1 + port.c2 * z2;
    sum_a += port.drive * a;
    sum_b += port.drive * (c - a) / b.gamma;
    if (port.reflecting) reflected = port.reflect * c;
  }
  const double xbar = b.x * b.mean_weight + sum_b / dt_;
  const double y = sqrt_dt_ * (b.transmit * xbar - reflected / dt_);
  b.x = b.decay * b.x + sum_a;
  return y;
}

double QuadratureGenerator::step_euler(BranchState& b) {
  double sum_dw = 0.0;
  double reflected = 0.0;
  for (Port& port : b.ports) {
    const double z = port.rng.gaussian();
    const double dw = sqrt_dt_ * z;
    sum_dw += port.drive * dw;
    if (port.reflecting) reflected = port.reflect * dw;
  }
  const double y = sqrt_dt_ * (b.transmit * b.x - reflected / dt_);
  b.x += -b.gamma * b.x * dt_ + sum_dw;
  return y;
}

QuadratureGenerator::Sample QuadratureGenerator::next() {
  if (integrator_ == Integrator::kExact)
    return {step(branch_[0]), step(branch_[1])};
  return {step_euler(branch_[0]), step_euler(branch_[1])};
}

std::pair<TimeSeries, TimeSeries> simulate_output_quadratures(const SimConfig& config) {
  QuadratureGenerator gen(config);
  const auto n = static_cast<std::size_t>(std::llround(config.duration_s *
                                                       config.sample_rate_hz));
  TimeSeries plus, minus;
  plus.sample_rate = minus.sample_rate = config.sample_rate_hz;
  plus.samples.reserve(n);
  minus.samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto s = gen.next();
    plus.samples.push_back(s.plus);
    minus.samples.push_back(s.minus);
  }
  return {std::move(plus), std::move(minus)};
}

double burn_in_time(const opo::CavityParams& params) {
  return 10.0 / (params.kappa_a() - params.pump_gain());
}

void PztParams::validate() const {
  require(resonance_hz > 0.0, "pzt: resonance_hz must be > 0");
  require(quality_factor > 0.0, "pzt: quality_factor must be > 0");
  require(dc_gain_rad_per_v != 0.0, "pzt: dc_gain_rad_per_v must be nonzero");
}

void DisturbanceModel::validate() const {
  require(random_walk_rad2_s >= 0.0, "disturbance: random_walk_rad2_s must be >= 0");
  for (const auto& s : sinusoids) {
    require(s.frequency_hz > 0.0, "disturbance: sinusoid frequency must be > 0");
    require(s.amplitude_rad >= 0.0, "disturbance: sinusoid amplitude must be >= 0");
  }
  pzt.validate();
}

DisturbanceGenerator::DisturbanceGenerator(const DisturbanceModel& model, double fs,
                                           std::uint64_t seed)
    : model_(model), dt_(1.0 / fs), rng_(seed, kStreamWalk) {
  model.validate();
  require(fs > 0.0, "disturbance: sample rate must be > 0");
  walk_sigma_ = std::sqrt(model.random_walk_rad2_s * dt_);
}

double DisturbanceGenerator::next() {
  double theta = model_.linear_drift_rad_s * t_ + walk_;
  for (const auto& s : model_.sinusoids)
    theta += s.amplitude_rad * std::sin(kTwoPi * s.frequency_hz * t_ + s.phase_rad);
  walk_ += walk_sigma_ * rng_.gaussian();
  t_ += dt_;
  return theta;
}

TimeSeries simulate_phase_disturbance(const DisturbanceModel& model, double duration_s,
                                      double sample_rate_hz, std::uint64_t seed) {
  DisturbanceGenerator gen(model, sample_rate_hz, seed);
  TimeSeries out;
  out.sample_rate = sample_rate_hz;
  const auto n = static_cast<std::size_t>(std::llround(duration_s * sample_rate_hz));
  out.samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.samples.push_back(gen.next());
  return out;
}

dsp::Biquad pzt_filter(const PztParams& pzt, double sample_rate_hz) {
  pzt.validate();
  require(sample_rate_hz > 10.0 * pzt.resonance_hz,
          "pzt: sample rate must exceed 10x the resonance frequency");
  const double w0 = 2.0 * sample_rate_hz *
                    std::tan(kTwoPi * 0.5 * pzt.resonance_hz / sample_rate_hz);
  // Bilinear transform of gain * w0^2 / (s^2 + (w0/Q) s + w0^2); prewarping
  // pins both the DC gain and the resonant magnitude gain * Q.
  const double k = 2.0 * sample_rate_hz;
  const double d1 = w0 / pzt.quality_factor;
  const double d0 = w0 * w0;
  const double a0 = k * k + d1 * k + d0;
  dsp::Biquad s;
  const double n0 = pzt.dc_gain_rad_per_v * d0;
  s.b0 = n0 / a0;
  s.b1 = 2.0 * n0 / a0;
  s.b2 = n0 / a0;
  s.a1 = (2.0 * d0 - 2.0 * k * k) / a0;
  s.a2 = (k * k - d1 * k + d0) / a0;
  return s;
}

TimeSeries pzt_response(const TimeSeries& drive_volts, const PztParams& pzt) {
  dsp::Biquad filter = pzt_filter(pzt, drive_volts.sample_rate);
  TimeSeries out;
  out.sample_rate = drive_volts.sample_rate;
  out.start_time = drive_volts.start_time;
  out.samples.reserve(drive_volts.samples.size());
  for (double v : drive_volts.samples) {
    const double lin = filter.process(v);
    out.samples.push_back(lin + pzt.quadratic_coeff * lin * lin);
  }
  return out;
}

}  // namespace squeezelab::sim
