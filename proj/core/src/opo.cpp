#include "squeezelab/opo.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace squeezelab::opo {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw PhysicsError(msg);
}

double fraction_checked(double v, const char* name) {
  if (!(v >= 0.0 && v < 1.0)) {
    std::ostringstream os;
    os << name << " must lie in [0, 1), got " << v;
    throw PhysicsError(os.str());
  }
  return v;
}

}  // namespace

void CavityGeometry::validate() const {
  require(round_trip_length_m > 0.0, "round_trip_length_m must be > 0");
  fraction_checked(output_coupler_transmission, "output_coupler_transmission");
  fraction_checked(input_coupler_transmission, "input_coupler_transmission");
  fraction_checked(intracavity_loss, "intracavity_loss");
  fraction_checked(pump_input_transmission, "pump_input_transmission");
  require(output_coupler_transmission > 0.0, "output_coupler_transmission must be > 0");
}

void CavityParams::validate() const {
  require(kappa_out_a > 0.0, "kappa_out_a must be > 0 (no output port)");
  require(kappa_in_a >= 0.0, "kappa_in_a must be >= 0");
  require(kappa_loss_a >= 0.0, "kappa_loss_a must be >= 0");
  require(kappa_b > 0.0, "kappa_b must be > 0");
  require(kappa_in_b >= 0.0, "kappa_in_b must be >= 0");
  require(epsilon >= 0.0, "epsilon must be >= 0");
  require(beta >= 0.0, "beta must be >= 0");
  require(alpha >= 0.0, "alpha must be >= 0");
  if (!(pump_gain() < kappa_a())) {
    std::ostringstream os;
    os << "pump drive at or above threshold: epsilon*beta = " << pump_gain()
       << " must be < kappa_a = " << kappa_a();
    throw PhysicsError(os.str());
  }
}

NoiseCurve::NoiseCurve(std::vector<double> frequency_hz, std::vector<double> value)
    : frequency_hz_(std::move(frequency_hz)), value_(std::move(value)) {
  require(!frequency_hz_.empty(), "NoiseCurve: empty table");
  require(frequency_hz_.size() == value_.size(),
          "NoiseCurve: frequency and value arrays differ in length");
  for (std::size_t i = 1; i < frequency_hz_.size(); ++i)
    require(frequency_hz_[i] > frequency_hz_[i - 1],
            "NoiseCurve: frequencies must be strictly increasing");
  for (double v : value_) require(v >= 0.0, "NoiseCurve: values must be >= 0");
  constant_ = value_.front();
}

double NoiseCurve::at_omega(double omega) const {
  if (frequency_hz_.empty()) return constant_;
  const double f = std::abs(omega) / kTwoPi;
  if (f <= frequency_hz_.front()) return value_.front();
  if (f >= frequency_hz_.back()) return value_.back();
  const auto it = std::upper_bound(frequency_hz_.begin(), frequency_hz_.end(), f);
  const std::size_t hi = static_cast<std::size_t>(it - frequency_hz_.begin());
  const std::size_t lo = hi - 1;
  const double t = (f - frequency_hz_[lo]) / (frequency_hz_[hi] - frequency_hz_[lo]);
  return value_[lo] + t * (value_[hi] - value_[lo]);
}

void NoiseInputs::validate() const {
  auto check = [](const NoiseCurve& c, const char* name) {
    if (c.is_constant() && !(c.constant_value() >= 0.0))
      throw PhysicsError(std::string(name) + ": noise level must be >= 0");
  };
  check(seed_plus, "seed_plus");
  check(seed_minus, "seed_minus");
  check(loss_plus, "loss_plus");
  check(loss_minus, "loss_minus");
  check(vacuum_plus, "vacuum_plus");
  check(vacuum_minus, "vacuum_minus");
  check(pump_plus, "pump_plus");
  check(pump_minus, "pump_minus");
  check(detuning, "detuning");
}

CavityParams decay_rates_from_geometry(const CavityGeometry& geometry) {
  geometry.validate();
  const double per_transmission = kSpeedOfLight / (2.0 * geometry.round_trip_length_m);
  CavityParams p;
  p.kappa_out_a = per_transmission * geometry.output_coupler_transmission;
  p.kappa_in_a = per_transmission * geometry.input_coupler_transmission;
  p.kappa_loss_a = per_transmission * geometry.intracavity_loss;
  p.kappa_in_b = per_transmission * geometry.pump_input_transmission;
  p.kappa_b = p.kappa_in_b;  // only harmonic channel specified by the geometry
  p.epsilon = 0.0;
  p.beta = 0.0;
  p.alpha = 0.0;
  p.validate();
  return p;
}

double escape_efficiency(const CavityParams& params) {
  params.validate();
  return params.kappa_out_a / params.kappa_a();
}

std::complex<double> denominator(const CavityParams& params, double omega, Branch branch) {
  const double pump_shift = (branch == Branch::plus ? 3.0 : 1.0) *
                            params.epsilon * params.epsilon * params.alpha * params.alpha /
                            (2.0 * params.kappa_b);
  const double gain = (branch == Branch::plus ? -1.0 : +1.0) * params.pump_gain();
  return {params.kappa_a() + pump_shift + gain, omega};
}

Couplings coupling_coefficients(const CavityParams& params, double omega, Branch branch) {
  Couplings c;
  c.seed = 4.0 * params.kappa_in_a * params.kappa_out_a;
  c.loss = 4.0 * params.kappa_loss_a * params.kappa_out_a;
  c.vacuum = std::norm(2.0 * params.kappa_out_a - denominator(params, omega, branch));
  const double eps_over_kb = params.epsilon / params.kappa_b;
  c.pump = 4.0 * params.kappa_out_a * params.kappa_in_b * eps_over_kb * eps_over_kb;
  c.detuning = branch == Branch::plus ? 0.0 : 8.0 * params.kappa_out_a;
  return c;
}

double output_variance(const CavityParams& params, const NoiseInputs& noise,
                       double omega, Branch branch) {
  params.validate();
  const Couplings c = coupling_coefficients(params, omega, branch);
  const bool plus = branch == Branch::plus;
  const double v_seed = plus ? noise.seed_plus.at_omega(omega) : noise.seed_minus.at_omega(omega);
  const double v_loss = plus ? noise.loss_plus.at_omega(omega) : noise.loss_minus.at_omega(omega);
  const double v_vac = plus ? noise.vacuum_plus.at_omega(omega) : noise.vacuum_minus.at_omega(omega);
  const double v_pump = plus ? noise.pump_plus.at_omega(omega) : noise.pump_minus.at_omega(omega);
  const double v_det = noise.detuning.at_omega(omega);

  const double alpha_sq = params.alpha * params.alpha;
  const double numerator = c.seed * v_seed + c.loss * v_loss + c.vacuum * v_vac +
                           alpha_sq * (c.pump * v_pump + c.detuning * v_det);
  return numerator / std::norm(denominator(params, omega, branch));
}

QuadraturePair output_variance_pair(const CavityParams& params,
                                    const NoiseInputs& noise, double omega) {
  return {output_variance(params, noise, omega, Branch::plus),
          output_variance(params, noise, omega, Branch::minus)};
}

VarianceSpectra variance_spectrum(const CavityParams& params, const NoiseInputs& noise,
                                  const std::vector<double>& frequency_hz) {
  params.validate();
  noise.validate();
  VarianceSpectra out;
  out.plus.frequency_hz = frequency_hz;
  out.minus.frequency_hz = frequency_hz;
  out.plus.value.reserve(frequency_hz.size());
  out.minus.value.reserve(frequency_hz.size());
  for (double f : frequency_hz) {
    const double omega = kTwoPi * f;
    out.plus.value.push_back(output_variance(params, noise, omega, Branch::plus));
    out.minus.value.push_back(output_variance(params, noise, omega, Branch::minus));
  }
  out.plus.unit = SpectrumUnit::kRelativeToShotNoise;
  out.minus.unit = SpectrumUnit::kRelativeToShotNoise;
  out.plus.validate();
  out.minus.validate();
  return out;
}

double fit_pump_gain(double measured_antisqueezing_db, double detection_efficiency,
                     const CavityParams& params_template) {
  params_template.validate();
  require(measured_antisqueezing_db > 0.0,
          "fit_pump_gain: measured anti-squeezing must be > 0 dB");
  require(detection_efficiency > 0.0 && detection_efficiency <= 1.0,
          "fit_pump_gain: detection efficiency must lie in (0, 1]");

  const double target = from_db(measured_antisqueezing_db);
  const NoiseInputs vacuum_inputs;  // all ports at the vacuum level

  auto detected_plus = [&](double gain) {
    CavityParams p = params_template;
    // Represent the drive purely through epsilon*beta.
    p.epsilon = 1.0;
    p.beta = gain;
    const double v = output_variance(p, vacuum_inputs, 0.0, Branch::plus);
    return detection_efficiency * v + (1.0 - detection_efficiency);
  };

  const double kappa_a = params_template.kappa_a();
  double lo = kappa_a * 1e-15;
  double hi = kappa_a * (1.0 - 1e-9);

  if (detected_plus(hi) < target) {
    std::ostringstream os;
    os << "unreachable anti-squeezing: " << measured_antisqueezing_db
       << " dB at efficiency " << detection_efficiency
       << " requires an output variance beyond the below-threshold range";
    throw PhysicsError(os.str());
  }
  if (detected_plus(lo) > target)
    throw PhysicsError("unreachable anti-squeezing: target below the unpumped output level");

  // detected_plus is strictly increasing in the gain, so plain bisection is
  // robust; 200 halvings push far past the requested relative 1e-9.
  for (int iter = 0; iter < 200 && (hi - lo) > 1e-10 * kappa_a * 1e-2; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (detected_plus(mid) < target)
      lo = mid;
    else
      hi = mid;
    if ((hi - lo) <= 1e-12 * hi) break;
  }
  return 0.5 * (lo + hi);
}

}  // namespace squeezelab::opo
