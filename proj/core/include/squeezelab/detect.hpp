#pragma once

#include <array>

#include "squeezelab/types.hpp"

namespace squeezelab::detect {

// Multiplicative efficiency stages between the cavity output and the recorded
// photocurrent. Visibility enters squared. When the variance being detected
// already includes the intracavity-loss port (full cavity model), set
// escape_included_upstream so the escape stage is not counted twice.
struct EfficiencyBudget {
  double quantum_efficiency = 1.0;
  double escape_efficiency = 1.0;
  double propagation_efficiency = 1.0;
  double visibility = 1.0;
  bool escape_included_upstream = false;

  void validate() const;
  [[nodiscard]] double total() const;
};

double total_efficiency(const EfficiencyBudget& budget);

// Beam-splitter loss model: V' = eta * V + (1 - eta).
double apply_loss(double variance, double efficiency);

// Projection of the quadrature pair onto the measured angle:
// V(theta) = v_plus sin^2(theta) + v_minus cos^2(theta).
double homodyne_variance(double v_plus, double v_minus, double theta_rad);

// Detector electronic noise, quoted in dB below the shot-noise limit; additive
// on the normalized variance. subtract restores the input of add exactly and
// throws on over-subtraction.
double add_dark_noise(double variance, double dark_below_shot_db);
double subtract_dark_noise(double variance, double dark_below_shot_db);

// Common-mode rejection leakage: local-oscillator classical noise (dB above
// shot noise, per frequency) suppressed by the CMRR, returned as linear added
// variance.
Spectrum cmrr_leakage(const Spectrum& lo_noise_db_above_shot, double cmrr_db);

struct DetectorModel {
  double dark_noise_below_shot_db = 16.0;
  double cmrr_db = 45.0;
  double saturation_power_w = 0.0025;  // 2 mW-class homodyne saturation limit
  Spectrum lo_classical_noise_db;      // dB above shot noise vs Hz; may be empty

  void validate() const;
};

// Polarization-state second moments at the detection plane for a bright
// x-polarized carrier and a squeezed y-polarized vacuum. Means in photons/s;
// variances normalized to shot noise.
struct StokesState {
  std::array<double, 3> mean_photons_per_s{};   // S1, S2, S3
  std::array<double, 3> variance_rel_shot{};    // V(S1), V(S2), V(S3)
  double lo_photon_flux = 0.0;                  // photons/s

  // Absolute component variances: shot noise scales with the carrier flux.
  [[nodiscard]] std::array<double, 3> variance_photons_per_s() const {
    return {variance_rel_shot[0] * lo_photon_flux,
            variance_rel_shot[1] * lo_photon_flux,
            variance_rel_shot[2] * lo_photon_flux};
  }
};

// theta_lock selects which quadrature S2 sees; S3 sees the orthogonal one.
StokesState stokes_state(double lo_power_w, double wavelength_m, double v_plus,
                         double v_minus, double theta_lock_rad,
                         const DetectorModel& detector);

// Balanced-polarimeter difference photocurrent for a bright x carrier:
// 2 * lo_amplitude * (y quadrature at the carrier-defined phase). Input series
// must share a sample rate.
TimeSeries polarimeter_signal(const TimeSeries& x_carrier, const TimeSeries& y_quadrature,
                              double lo_amplitude);

// Noise ellipsoid on the polarization sphere: semi-axes are the standard
// deviations of the three components.
struct PoincareEllipsoid {
  std::array<double, 3> center{};
  std::array<double, 3> semi_axes{};
  bool normalized = true;  // axes in shot-noise units (true) or photons/s
};

PoincareEllipsoid poincare_ellipsoid(const StokesState& state, bool normalized = true);

}  // namespace squeezelab::detect
