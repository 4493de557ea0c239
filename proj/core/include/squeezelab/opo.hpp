#pragma once

#include <complex>
#include <vector>

#include "squeezelab/types.hpp"

namespace squeezelab::opo {

// Mirror transmissions and losses of the doubly resonant cavity, as measured
// on the bench. All fractions are power fractions per round trip.
struct CavityGeometry {
  double round_trip_length_m = 0.6;
  double output_coupler_transmission = 0.115;  // fundamental output port
  double input_coupler_transmission = 0.0;     // fundamental seed port
  double intracavity_loss = 0.004;             // distributed round-trip loss
  double pump_input_transmission = 0.98;       // harmonic pump port

  void validate() const;
};

// Amplitude decay rates (rad/s) plus the parametric drive. kappa_a is derived,
// never stored, so the sum rule holds by construction.
struct CavityParams {
  double kappa_out_a = 0.0;  // fundamental output coupler
  double kappa_in_a = 0.0;   // fundamental input coupler
  double kappa_loss_a = 0.0; // fundamental intracavity loss
  double kappa_b = 1.0;      // harmonic (pump) total decay
  double kappa_in_b = 1.0;   // harmonic input coupler
  double epsilon = 0.0;      // single-pass nonlinear coupling (rad/s per unit pump amplitude)
  double beta = 0.0;         // normalized intracavity pump amplitude
  double alpha = 0.0;        // normalized intracavity seed amplitude (0 = vacuum)

  [[nodiscard]] double kappa_a() const { return kappa_out_a + kappa_in_a + kappa_loss_a; }
  [[nodiscard]] double pump_gain() const { return epsilon * beta; }

  // Throws PhysicsError for negative rates, a zero output coupler, a
  // non-positive pump decay, or an at/above-threshold drive.
  void validate() const;
};

// The amplified (+) and deamplified (-) quadrature branches.
enum class Branch { plus, minus };

// Input-noise spectra, relative to vacuum (= 1). Constant by default; a
// tabulated curve is linearly interpolated in frequency and clamped at the
// ends.
class NoiseCurve {
 public:
  NoiseCurve(double constant = 1.0) : constant_(constant) {}  // NOLINT(google-explicit-constructor)
  NoiseCurve(std::vector<double> frequency_hz, std::vector<double> value);

  [[nodiscard]] bool is_constant() const { return frequency_hz_.empty(); }
  [[nodiscard]] double constant_value() const { return constant_; }

  // Evaluate at angular frequency omega (rad/s).
  [[nodiscard]] double at_omega(double omega) const;

 private:
  double constant_ = 1.0;
  std::vector<double> frequency_hz_;
  std::vector<double> value_;
};

// One curve per input port and quadrature. Ports: seed (input coupler), loss
// (intracavity), vacuum (output coupler), pump, and the pump-phase/detuning
// channel (single spectrum, defaults to 0).
struct NoiseInputs {
  NoiseCurve seed_plus{1.0}, seed_minus{1.0};
  NoiseCurve loss_plus{1.0}, loss_minus{1.0};
  NoiseCurve vacuum_plus{1.0}, vacuum_minus{1.0};
  NoiseCurve pump_plus{1.0}, pump_minus{1.0};
  NoiseCurve detuning{0.0};

  void validate() const;
};

// Decay rates from bench-measurable geometry: kappa_i = c * T_i / (2 * L_rt).
// Pump fields are filled from the harmonic port (kappa_b = kappa_in_b when no
// other harmonic loss is specified); drive (epsilon, beta, alpha) left at 0.
CavityParams decay_rates_from_geometry(const CavityGeometry& geometry);

// Fraction of intracavity fundamental photons that leave through the output
// coupler.
double escape_efficiency(const CavityParams& params);

// Response denominator of one quadrature branch at angular frequency omega.
std::complex<double> denominator(const CavityParams& params, double omega, Branch branch);

// Multipliers of the input-noise spectra in the output-variance model.
struct Couplings {
  double seed = 0.0;
  double loss = 0.0;
  double vacuum = 0.0;   // frequency dependent
  double pump = 0.0;
  double detuning = 0.0; // 0 for the + branch
};

Couplings coupling_coefficients(const CavityParams& params, double omega, Branch branch);

// Output quadrature variance (relative to vacuum) at angular frequency omega.
double output_variance(const CavityParams& params, const NoiseInputs& noise,
                       double omega, Branch branch);

QuadraturePair output_variance_pair(const CavityParams& params,
                                    const NoiseInputs& noise, double omega);

struct VarianceSpectra {
  Spectrum plus;
  Spectrum minus;
};

// Sweep over a grid of (non-angular) frequencies in Hz.
VarianceSpectra variance_spectrum(const CavityParams& params, const NoiseInputs& noise,
                                  const std::vector<double>& frequency_hz);

// Invert the zero-frequency detected anti-squeezing for the pump gain
// g = epsilon*beta: solves eta * V_plus(0; g) + (1 - eta) = 10^(dB/10) by
// bisection on g in (0, kappa_a), accurate to a relative 1e-9. Throws
// PhysicsError("unreachable anti-squeezing ...") when no root exists below
// threshold.
double fit_pump_gain(double measured_antisqueezing_db, double detection_efficiency,
                     const CavityParams& params_template);

}  // namespace squeezelab::opo
