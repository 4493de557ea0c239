#include "squeezelab/detect.hpp"

#include <cmath>
#include <sstream>

#include "squeezelab/errors.hpp"

namespace squeezelab::detect {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw PhysicsError(msg);
}

void check_stage(double v, const char* name) {
  if (!(v > 0.0 && v <= 1.0)) {
    std::ostringstream os;
    os << "efficiency stage " << name << " must lie in (0, 1], got " << v;
    throw PhysicsError(os.str());
  }
}

}  // namespace

void EfficiencyBudget::validate() const {
  check_stage(quantum_efficiency, "quantum_efficiency");
  check_stage(escape_efficiency, "escape_efficiency");
  check_stage(propagation_efficiency, "propagation_efficiency");
  check_stage(visibility, "visibility");
}

double EfficiencyBudget::total() const {
  validate();
  const double escape = escape_included_upstream ? 1.0 : escape_efficiency;
  return quantum_efficiency * escape * propagation_efficiency * visibility * visibility;
}

double total_efficiency(const EfficiencyBudget& budget) { return budget.total(); }

double apply_loss(double variance, double efficiency) {
  require(variance >= 0.0, "apply_loss: variance must be >= 0");
  require(efficiency > 0.0 && efficiency <= 1.0,
          "apply_loss: efficiency must lie in (0, 1]");
  return efficiency * variance + (1.0 - efficiency);
}

double homodyne_variance(double v_plus, double v_minus, double theta_rad) {
  require(v_plus >= 0.0 && v_minus >= 0.0, "homodyne_variance: variances must be >= 0");
  const double s = std::sin(theta_rad);
  const double c = std::cos(theta_rad);
  return v_plus * s * s + v_minus * c * c;
}

double add_dark_noise(double variance, double dark_below_shot_db) {
  require(variance >= 0.0, "add_dark_noise: variance must be >= 0");
  return variance + from_db(-dark_below_shot_db);
}

double subtract_dark_noise(double variance, double dark_below_shot_db) {
  const double out = variance - from_db(-dark_below_shot_db);
  if (out < 0.0) {
    std::ostringstream os;
    os << "dark-noise over-subtraction: " << variance << " - "
       << from_db(-dark_below_shot_db) << " is negative";
    throw PhysicsError(os.str());
  }
  return out;
}

Spectrum cmrr_leakage(const Spectrum& lo_noise_db_above_shot, double cmrr_db) {
  lo_noise_db_above_shot.validate();
  require(cmrr_db >= 0.0, "cmrr_leakage: cmrr_db must be >= 0");
  Spectrum out = lo_noise_db_above_shot;
  out.unit = SpectrumUnit::kRelativeToShotNoise;
  out.reference_level = 1.0;
  for (std::size_t i = 0; i < out.value.size(); ++i)
    out.value[i] = from_db(lo_noise_db_above_shot.value[i] - cmrr_db);
  return out;
}

void DetectorModel::validate() const {
  require(dark_noise_below_shot_db >= 0.0,
          "detector: dark_noise_below_shot_db must be >= 0");
  require(cmrr_db >= 0.0, "detector: cmrr_db must be >= 0");
  require(saturation_power_w > 0.0, "detector: saturation_power_w must be > 0");
  if (!lo_classical_noise_db.frequency_hz.empty()) lo_classical_noise_db.validate();
}

StokesState stokes_state(double lo_power_w, double wavelength_m, double v_plus,
                         double v_minus, double theta_lock_rad,
                         const DetectorModel& detector) {
  detector.validate();
  require(lo_power_w >= 0.0, "stokes_state: lo_power_w must be >= 0");
  require(wavelength_m > 0.0, "stokes_state: wavelength_m must be > 0");
  require(v_plus > 0.0 && v_minus > 0.0, "stokes_state: variances must be > 0");
  if (!(v_plus * v_minus >= 1.0 - 1e-9)) {
    std::ostringstream os;
    os << "stokes_state: quadrature pair violates the uncertainty bound, "
       << "v_plus * v_minus = " << v_plus * v_minus << " < 1";
    throw PhysicsError(os.str());
  }
  if (lo_power_w >= detector.saturation_power_w) {
    std::ostringstream os;
    os << "stokes_state: carrier power " << lo_power_w
       << " W reaches the detector saturation limit of "
       << detector.saturation_power_w << " W";
    throw PhysicsError(os.str());
  }

  const double photon_energy = kPlanck * kSpeedOfLight / wavelength_m;
  const double flux = lo_power_w / photon_energy;

  StokesState st;
  st.lo_photon_flux = flux;
  st.mean_photons_per_s = {flux, 0.0, 0.0};
  // The bright carrier dominates the first component (shot-noise limited);
  // the other two read the squeezed beam's quadratures at the lock phase.
  st.variance_rel_shot = {1.0,
                          homodyne_variance(v_plus, v_minus, theta_lock_rad),
                          homodyne_variance(v_plus, v_minus,
                                            theta_lock_rad + 0.25 * kTwoPi)};
  return st;
}

TimeSeries polarimeter_signal(const TimeSeries& x_carrier, const TimeSeries& y_quadrature,
                              double lo_amplitude) {
  require(x_carrier.sample_rate > 0.0 && y_quadrature.sample_rate > 0.0,
          "polarimeter_signal: series must have sample rates");
  if (x_carrier.sample_rate != y_quadrature.sample_rate)
    throw PhysicsError("polarimeter_signal: sample rates differ");
  require(lo_amplitude > 0.0, "polarimeter_signal: lo_amplitude must be > 0");

  TimeSeries out;
  out.sample_rate = y_quadrature.sample_rate;
  out.start_time = y_quadrature.start_time;
  out.samples.reserve(y_quadrature.samples.size());
  for (double y : y_quadrature.samples) out.samples.push_back(2.0 * lo_amplitude * y);
  return out;
}

PoincareEllipsoid poincare_ellipsoid(const StokesState& state, bool normalized) {
  PoincareEllipsoid e;
  e.normalized = normalized;
  e.center = state.mean_photons_per_s;
  for (int i = 0; i < 3; ++i) {
    const double v = state.variance_rel_shot[static_cast<std::size_t>(i)];
    // Absolute Stokes variance scales with the carrier flux.
    const double scaled = normalized ? v : v * state.lo_photon_flux;
    e.semi_axes[static_cast<std::size_t>(i)] = std::sqrt(scaled);
  }
  return e;
}

}  // namespace squeezelab::detect
