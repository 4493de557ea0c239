// squeezelab — command-line front end for the squeezed-light numerical bench.
//
// Subcommands:
//   validate   parse a scenario, run every validator, print its content hash
//   budget     detection-efficiency stages, loss floor, optional pump-gain fit
//   spectrum   analytic quadrature-variance spectra in lab units (CSV)
//   scan       open-loop phase scan through the band-power analyzer (CSV + JSON)
//   lock       closed-loop dither lock run (CSVs + JSON); exit 4 if never held
//   poincare   polarization noise ellipsoid and a sampled cloud (JSON + CSV)
//
// Exit codes: 0 success, 2 usage/schema error, 3 physics error, 4 no lock.
// All written files are byte-deterministic for a given scenario and seed; the
// run manifest carries the scenario content hash instead of a timestamp.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "squeezelab/detect.hpp"
#include "squeezelab/errors.hpp"
#include "squeezelab/io.hpp"
#include "squeezelab/lock.hpp"
#include "squeezelab/opo.hpp"
#include "squeezelab/rng.hpp"
#include "squeezelab/scenario.hpp"
#include "squeezelab/types.hpp"

namespace {

using namespace squeezelab;
using nlohmann::json;

constexpr const char* kToolName = "squeezelab";
constexpr const char* kToolVersion = "1.0.0";

constexpr int kExitOk = 0;
constexpr int kExitSchema = 2;
constexpr int kExitPhysics = 3;
constexpr int kExitNoLock = 4;

constexpr double kDbFloor = -300.0;

struct CommonOpts {
  std::string scenario_path;
  std::optional<std::uint64_t> seed;  // highest-precedence override
  std::string output_dir;             // overrides the scenario's output_dir
};

// Seed precedence: command-line flag, then SQUEEZELAB_SEED, then the file.
std::uint64_t effective_seed(const scenario::Scenario& sc,
                             const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("SQUEEZELAB_SEED")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0') {
      throw SchemaError(std::string("SQUEEZELAB_SEED must be a non-negative "
                                    "integer, got \"") +
                        env + '"');
    }
    return static_cast<std::uint64_t>(v);
  }
  return sc.lock.seed;
}

scenario::Scenario prepare(const CommonOpts& opts) {
  scenario::Scenario sc = scenario::load_file(opts.scenario_path);
  sc.lock.seed = effective_seed(sc, opts.seed);
  if (!opts.output_dir.empty()) sc.output_dir = opts.output_dir;
  std::filesystem::create_directories(sc.output_dir);
  return sc;
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

// Lab-unit cavity rates (the engine keeps desk-scaled copies).
opo::CavityParams physical_params(const scenario::Scenario& sc) {
  opo::CavityParams p = sc.lock.params;
  const double s = sc.scale_factor;
  p.kappa_out_a *= s;
  p.kappa_in_a *= s;
  p.kappa_loss_a *= s;
  p.kappa_b *= s;
  p.kappa_in_b *= s;
  p.epsilon *= s;
  return p;
}

double dark_noise_linear(const scenario::Scenario& sc) {
  return from_db(-sc.lock.detector.dark_noise_below_shot_db);
}

json manifest_json(const scenario::Scenario& sc, const std::string& command) {
  json m;
  m["command"] = command;
  m["mode"] = lock::to_string(sc.lock.mode);
  m["scale_factor"] = sc.scale_factor;
  m["scenario_hash"] = sc.content_hash;
  m["scenario_path"] = sc.source_path;
  m["seed"] = sc.lock.seed;
  m["tool"] = kToolName;
  m["version"] = kToolVersion;
  return m;
}

void write_json_file(const std::string& path, const json& j) {
  io::write_file(path, j.dump(2) + "\n");
}

double db_or_floor(double linear) {
  if (linear <= 0.0) return kDbFloor;
  const double db = to_db(linear);
  return db < kDbFloor ? kDbFloor : db;
}

// ---------------------------------------------------------------------------

int cmd_validate(const CommonOpts& opts) {
  const scenario::Scenario sc = prepare(opts);
  std::printf("ok  hash=%s  mode=%s  scale=%g  seed=%llu\n",
              sc.content_hash.c_str(), lock::to_string(sc.lock.mode),
              sc.scale_factor,
              static_cast<unsigned long long>(sc.lock.seed));
  return kExitOk;
}

int cmd_budget(const CommonOpts& opts, std::optional<double> antisqueezing_db) {
  const scenario::Scenario sc = prepare(opts);
  const detect::EfficiencyBudget& b = sc.lock.budget;
  const double eta = b.total();
  const double v_dark = dark_noise_linear(sc);

  json out;
  out["stages"]["escape_efficiency"] = b.escape_efficiency;
  out["stages"]["escape_included_upstream"] = b.escape_included_upstream;
  out["stages"]["propagation_efficiency"] = b.propagation_efficiency;
  out["stages"]["quantum_efficiency"] = b.quantum_efficiency;
  out["stages"]["visibility"] = b.visibility;
  out["total_efficiency"] = eta;
  // Deepest observable squeezing: losses mix in (1 - eta) of vacuum, and the
  // electronics add dark noise on top.
  out["loss_floor_db"] = db_or_floor(1.0 - eta);
  out["detected_floor_db"] = db_or_floor(1.0 - eta + v_dark);
  out["dark_noise_rel_shot"] = v_dark;

  if (antisqueezing_db) {
    const opo::CavityParams tpl = physical_params(sc);
    const double g = opo::fit_pump_gain(*antisqueezing_db, eta, tpl);
    opo::CavityParams fitted = tpl;
    fitted.beta = 1.0;
    fitted.epsilon = g;
    const QuadraturePair v0 =
        opo::output_variance_pair(fitted, sc.lock.noise, 0.0);
    out["fit"]["measured_antisqueezing_db"] = *antisqueezing_db;
    out["fit"]["pump_gain_rad_s"] = g;
    out["fit"]["pump_gain_ratio"] = g / fitted.kappa_a();
    out["fit"]["implied_squeezing_db"] =
        db_or_floor(detect::apply_loss(v0.minus, eta));
  }

  write_json_file(join_path(sc.output_dir, "budget.json"), out);
  std::printf("budget: total efficiency %.6f, loss floor %.3f dB%s\n", eta,
              out["loss_floor_db"].get<double>(),
              antisqueezing_db ? ", pump-gain fit written" : "");
  return kExitOk;
}

int cmd_spectrum(const CommonOpts& opts, double fmin, double fmax,
                 std::size_t points) {
  if (!(fmin > 0.0) || !(fmax > fmin) || points < 2) {
    throw SchemaError("spectrum: need 0 < fmin < fmax and at least 2 points");
  }
  const scenario::Scenario sc = prepare(opts);
  const opo::CavityParams params = physical_params(sc);

  std::vector<double> freqs(points);
  const double step = std::log(fmax / fmin) / static_cast<double>(points - 1);
  for (std::size_t i = 0; i < points; ++i) {
    freqs[i] = fmin * std::exp(step * static_cast<double>(i));
  }
  const opo::VarianceSpectra sp =
      opo::variance_spectrum(params, sc.lock.noise, freqs);

  io::write_file(join_path(sc.output_dir, "spectrum.csv"),
                 io::variance_table_csv(freqs, sp.minus.value, sp.plus.value));
  write_json_file(join_path(sc.output_dir, "manifest.json"),
                  manifest_json(sc, "spectrum"));
  std::printf("spectrum: %zu points, %.6g Hz .. %.6g Hz -> %s\n", points, fmin,
              fmax, join_path(sc.output_dir, "spectrum.csv").c_str());
  return kExitOk;
}

int cmd_scan(const CommonOpts& opts) {
  const scenario::Scenario sc = prepare(opts);
  const TimeSeries trace = lock::run_scan(sc.lock, sc.lock.ramp_rate_rad_s);
  const double v_dark = dark_noise_linear(sc);

  // Display convention: the dark (electronic) level is subtracted before
  // converting to dB, matching how analyzer traces are normalized against a
  // blocked-beam reference.
  const auto [lo_it, hi_it] =
      std::minmax_element(trace.samples.begin(), trace.samples.end());
  const auto t_of = [&](std::vector<double>::const_iterator it) {
    return trace.start_time +
           static_cast<double>(it - trace.samples.begin()) / trace.sample_rate;
  };

  json summary;
  summary["center_frequency_hz"] =
      sc.lock.zero_span.center_frequency_hz * sc.scale_factor;
  summary["resolution_bandwidth_hz"] =
      sc.lock.zero_span.resolution_bandwidth_hz * sc.scale_factor;
  summary["video_bandwidth_hz"] =
      sc.lock.zero_span.video_bandwidth_hz * sc.scale_factor;
  summary["dark_noise_rel_shot"] = v_dark;
  summary["dark_subtracted"] = true;
  summary["points"] = trace.samples.size();
  summary["min_db"] = db_or_floor(*lo_it - v_dark);
  summary["min_time_s"] = t_of(lo_it);
  summary["max_db"] = db_or_floor(*hi_it - v_dark);
  summary["max_time_s"] = t_of(hi_it);

  io::write_file(join_path(sc.output_dir, "scan_trace.csv"),
                 io::time_series_csv(trace));
  write_json_file(join_path(sc.output_dir, "scan_summary.json"), summary);
  write_json_file(join_path(sc.output_dir, "manifest.json"),
                  manifest_json(sc, "scan"));
  std::printf("scan: min %.3f dB at %.4f s, max %.3f dB at %.4f s (%zu points)\n",
              summary["min_db"].get<double>(),
              summary["min_time_s"].get<double>(),
              summary["max_db"].get<double>(),
              summary["max_time_s"].get<double>(), trace.samples.size());
  return kExitOk;
}

int cmd_lock(const CommonOpts& opts, const std::string& mode_override) {
  scenario::Scenario sc = prepare(opts);
  if (!mode_override.empty()) {
    if (mode_override == "lock_squeeze") {
      sc.lock.mode = lock::LockMode::kLockSqueeze;
    } else if (mode_override == "lock_antisqueeze") {
      sc.lock.mode = lock::LockMode::kLockAntisqueeze;
    } else {
      throw SchemaError("lock: --mode must be lock_squeeze or lock_antisqueeze");
    }
  }

  const lock::LockResult r = lock::run_lock(sc.lock);

  io::write_file(join_path(sc.output_dir, "lock_phase.csv"),
                 io::time_series_csv(r.phase_trajectory));
  io::write_file(join_path(sc.output_dir, "lock_error.csv"),
                 io::time_series_csv(r.error_signal));
  io::write_file(join_path(sc.output_dir, "lock_difference.csv"),
                 io::time_series_csv(r.difference_signal));
  if (!r.locked_spectrum.frequency_hz.empty()) {
    io::write_file(join_path(sc.output_dir, "lock_spectrum.csv"),
                   io::spectrum_csv(r.locked_spectrum));
  }
  const bool wants_artifacts =
      sc.lock.carrier_leakage > 0.0 || sc.lock.pzt_drive_tone_v > 0.0;
  if (wants_artifacts && r.verdict == lock::LockVerdict::kLocked &&
      r.difference_signal.samples.size() >= sc.lock.spectrum_segment_length) {
    io::write_file(
        join_path(sc.output_dir, "lock_artifacts.csv"),
        io::spectrum_csv(lock::locked_spectrum_with_artifacts(r, sc.lock)));
  }

  json summary;
  summary["verdict"] = lock::to_string(r.verdict);
  summary["lock_acquired_at_s"] = r.lock_acquired_at_s;
  summary["residual_phase_rms_rad"] = r.residual_phase_rms_rad;
  summary["plateau_prediction_db"] = r.plateau_prediction_db;
  summary["demod_phase_rad"] = r.demod_phase_rad;
  summary["dither_depth_rad"] = lock::dither_depth_rad(sc.lock);
  summary["diagnostic"] = r.diagnostic;
  write_json_file(join_path(sc.output_dir, "lock_summary.json"), summary);
  write_json_file(join_path(sc.output_dir, "manifest.json"),
                  manifest_json(sc, "lock"));

  if (r.verdict == lock::LockVerdict::kLocked) {
    std::printf(
        "lock: acquired at %.4f s, residual %.4f rad rms, plateau prediction "
        "%.3f dB\n",
        r.lock_acquired_at_s, r.residual_phase_rms_rad,
        r.plateau_prediction_db);
    return kExitOk;
  }
  std::fprintf(stderr, "lock: verdict %s%s%s\n", lock::to_string(r.verdict),
               r.diagnostic.empty() ? "" : " — ", r.diagnostic.c_str());
  return kExitNoLock;
}

int cmd_poincare(const CommonOpts& opts, std::size_t samples) {
  const scenario::Scenario sc = prepare(opts);
  const opo::CavityParams params = physical_params(sc);
  const double f_center =
      sc.lock.zero_span.center_frequency_hz * sc.scale_factor;
  const QuadraturePair v =
      opo::output_variance_pair(params, sc.lock.noise, kTwoPi * f_center);
  const double eta = sc.lock.budget.total();
  const double dark_db = sc.lock.detector.dark_noise_below_shot_db;
  const double vp =
      detect::add_dark_noise(detect::apply_loss(v.plus, eta), dark_db);
  const double vm =
      detect::add_dark_noise(detect::apply_loss(v.minus, eta), dark_db);

  const detect::StokesState st =
      detect::stokes_state(sc.lo_power_w, sc.wavelength_m, vp, vm,
                           sc.lock.initial_phase_rad, sc.lock.detector);
  const detect::PoincareEllipsoid rel = detect::poincare_ellipsoid(st, true);
  const detect::PoincareEllipsoid abs = detect::poincare_ellipsoid(st, false);

  json out;
  out["analysis_frequency_hz"] = f_center;
  out["theta_lock_rad"] = sc.lock.initial_phase_rad;
  out["detected_v_plus"] = vp;
  out["detected_v_minus"] = vm;
  out["uncertainty_product"] = vp * vm;
  out["lo_photon_flux_per_s"] = st.lo_photon_flux;
  out["mean_photons_per_s"] = st.mean_photons_per_s;
  out["variance_rel_shot"] = st.variance_rel_shot;
  out["semi_axes_rel_shot"] = rel.semi_axes;
  out["semi_axes_photons_per_s"] = abs.semi_axes;

  // Sampled noise cloud around the mean polarization state, in photons/s so
  // the center and the spread share units (component i: center +
  // semi_axis_i * standard normal).
  Rng rng(sc.lock.seed, /*stream=*/40);
  std::string csv = "s1_photons_per_s,s2_photons_per_s,s3_photons_per_s\n";
  char buf[64];
  for (std::size_t n = 0; n < samples; ++n) {
    for (int i = 0; i < 3; ++i) {
      const double x = abs.center[static_cast<std::size_t>(i)] +
                       abs.semi_axes[static_cast<std::size_t>(i)] * rng.gaussian();
      std::snprintf(buf, sizeof buf, "%.12g", x);
      csv += buf;
      csv += (i < 2) ? ',' : '\n';
    }
  }

  io::write_file(join_path(sc.output_dir, "poincare.json"), out.dump(2) + "\n");
  io::write_file(join_path(sc.output_dir, "poincare_cloud.csv"), csv);
  write_json_file(join_path(sc.output_dir, "manifest.json"),
                  manifest_json(sc, "poincare"));
  std::printf(
      "poincare: axes (rel. shot) %.4f / %.4f / %.4f, uncertainty product "
      "%.6f\n",
      rel.semi_axes[0], rel.semi_axes[1], rel.semi_axes[2], vp * vm);
  return kExitOk;
}

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("scenario", opts.scenario_path, "Scenario JSON file")
      ->required();
  cmd->add_option("--seed", opts.seed,
                  "Override the RNG seed (also honors SQUEEZELAB_SEED)");
  cmd->add_option("--output-dir", opts.output_dir,
                  "Write outputs here instead of the scenario's output_dir");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical bench for squeezed-light generation, detection, and "
               "noise locking"};
  app.set_version_flag("--version", std::string(kToolName) + " " + kToolVersion);
  app.require_subcommand(1);

  CommonOpts validate_opts;
  CLI::App* validate_cmd =
      app.add_subcommand("validate", "Parse and validate a scenario file");
  add_common(validate_cmd, validate_opts);

  CommonOpts budget_opts;
  std::optional<double> antisqueezing_db;
  CLI::App* budget_cmd = app.add_subcommand(
      "budget", "Detection-efficiency stages and squeezing floors");
  add_common(budget_cmd, budget_opts);
  budget_cmd->add_option(
      "--antisqueezing-db", antisqueezing_db,
      "Fit the pump gain to a measured zero-frequency anti-squeezing level");

  CommonOpts spectrum_opts;
  double fmin = 1e3, fmax = 2e7;
  std::size_t points = 400;
  CLI::App* spectrum_cmd = app.add_subcommand(
      "spectrum", "Analytic quadrature-variance spectra (lab units)");
  add_common(spectrum_cmd, spectrum_opts);
  spectrum_cmd->add_option("--fmin", fmin, "Lowest frequency in Hz");
  spectrum_cmd->add_option("--fmax", fmax, "Highest frequency in Hz");
  spectrum_cmd->add_option("--points", points, "Number of log-spaced points");

  CommonOpts scan_opts;
  CLI::App* scan_cmd = app.add_subcommand(
      "scan", "Open-loop phase scan through the band-power analyzer");
  add_common(scan_cmd, scan_opts);

  CommonOpts lock_opts;
  std::string mode_override;
  CLI::App* lock_cmd =
      app.add_subcommand("lock", "Closed-loop dither lock run");
  add_common(lock_cmd, lock_opts);
  lock_cmd->add_option("--mode", mode_override,
                       "Override the scenario mode "
                       "(lock_squeeze | lock_antisqueeze)");

  CommonOpts poincare_opts;
  std::size_t samples = 1000;
  CLI::App* poincare_cmd = app.add_subcommand(
      "poincare", "Polarization noise ellipsoid and sampled cloud");
  add_common(poincare_cmd, poincare_opts);
  poincare_cmd->add_option("--samples", samples, "Cloud sample count");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitSchema;
  }

  try {
    if (*validate_cmd) return cmd_validate(validate_opts);
    if (*budget_cmd) return cmd_budget(budget_opts, antisqueezing_db);
    if (*spectrum_cmd) return cmd_spectrum(spectrum_opts, fmin, fmax, points);
    if (*scan_cmd) return cmd_scan(scan_opts);
    if (*lock_cmd) return cmd_lock(lock_opts, mode_override);
    if (*poincare_cmd) return cmd_poincare(poincare_opts, samples);
  } catch (const SchemaError& e) {
    std::fprintf(stderr, "%s error: %s\n", kToolName, e.what());
    return kExitSchema;
  } catch (const PhysicsError& e) {
    std::fprintf(stderr, "%s physics error: %s\n", kToolName, e.what());
    return kExitPhysics;
  }
  return kExitSchema;  // unreachable: a subcommand is required
}
