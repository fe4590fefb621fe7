// oamq_cli: simulate and analyze OAM-entangled photon-pair experiments.
//
//   oamq_cli hist simulate --config paper.json --out run/
//   oamq_cli hist analyze  --config paper.json --out run/
//   oamq_cli sweep simulate|fit ...
//   oamq_cli tomo simulate|reconstruct ...
//   oamq_cli report ...
//
// Exit status: 0 ok, 1 other failure, 2 bad config/usage/input, 3 numerical failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "oamq/io.hpp"

namespace fs = std::filesystem;
using namespace oamq;

namespace {

struct Common {
  std::string config;
  std::string out = ".";
  std::string in;
  std::uint64_t seed = 0;
  bool seed_given = false;
};

RunConfig load(const Common &c) {
  RunConfig cfg = load_run_config(c.config);
  if (c.seed_given) {
    cfg.seed = c.seed;
    cfg.source.seed = c.seed;
  }
  return cfg;
}

Json stamp(const RunConfig &cfg) { return {{"config_hash", cfg.hash}, {"seed", cfg.seed}}; }

fs::path out_path(const Common &c, const std::string &name) {
  fs::create_directories(c.out);
  return fs::path(c.out) / name;
}

fs::path in_path(const Common &c, const std::string &default_name) {
  return c.in.empty() ? fs::path(c.out) / default_name : fs::path(c.in);
}

void write_json(const fs::path &p, const Json &j) {
  std::ofstream os(p, std::ios::binary);
  if (!os)
    throw std::runtime_error("cannot write " + p.string());
  os << j.dump(2) << '\n';
}

Json read_json(const fs::path &p) {
  std::ifstream is(p, std::ios::binary);
  if (!is)
    throw InvalidInput("cannot open " + p.string());
  try {
    return Json::parse(is);
  } catch (const Json::parse_error &e) {
    throw InvalidInput(p.string() + ": malformed JSON: " + e.what());
  }
}

// --- hist ------------------------------------------------------------------

Json analyze(const RunConfig &cfg, const CoincidenceHistogram &h) {
  const Estimate g = g_with_uncertainty(h, cfg.g_tau_ns, cfg.windows.tail_start_ns);
  const Estimate n = normalized_signal_with_uncertainty(h, cfg.windows);
  Json curve = Json::array();
  const double bg = estimate_background(h, cfg.windows.tail_start_ns);
  for (int i = 0; i < h.n_bins(); ++i)
    curve.push_back(static_cast<double>(h.counts[i]) / bg);
  Json j = stamp(cfg);
  j["background"] = bg;
  j["background_bins"] = background_bin_count(h, cfg.windows.tail_start_ns);
  j["g_tau_ns"] = cfg.g_tau_ns;
  j["g"] = g.value;
  j["g_sigma"] = g.sigma;
  j["normalized_signal"] = n.value;
  j["normalized_signal_sigma"] = n.sigma;
  j["g_curve"] = curve;
  return j;
}

int hist_simulate(const Common &c) {
  const RunConfig cfg = load(c);
  const CoincidenceHistogram h = simulate_histogram(cfg.source);
  char rate[64];
  std::snprintf(rate, sizeof rate, "pair_rate=%.17g", cfg.source.pair_rate);
  const fs::path p = out_path(c, cfg.outputs.histogram);
  std::ofstream os(p, std::ios::binary);
  write_histogram_csv(os, h, {"config_hash=" + cfg.hash, "seed=" + std::to_string(cfg.seed), rate});
  std::cout << "wrote " << p.string() << " (" << h.n_bins() << " bins, " << cfg.source.duration_s << " s)\n";
  return 0;
}

int hist_analyze(const Common &c) {
  const RunConfig cfg = load(c);
  const fs::path src = in_path(c, cfg.outputs.histogram);
  std::ifstream is(src, std::ios::binary);
  if (!is)
    throw InvalidInput("cannot open " + src.string());
  const Json j = analyze(cfg, read_histogram_csv(is));
  write_json(out_path(c, cfg.outputs.analysis), j);
  std::printf("g(%g ns) = %.4f +/- %.4f, background %.2f counts/bin, normalized signal %.3f\n", cfg.g_tau_ns,
              j["g"].get<double>(), j["g_sigma"].get<double>(), j["background"].get<double>(),
              j["normalized_signal"].get<double>());
  return 0;
}

// --- sweep -----------------------------------------------------------------

int sweep_simulate(const Common &c) {
  const RunConfig cfg = load(c);
  const DensityMatrix4 rho = cfg.state.density();
  SourceConfig src = cfg.source;
  src.duration_s = cfg.sweep.duration_s;
  SweepSimOptions opt;
  opt.antistokes_order = cfg.sweep.antistokes_order;
  opt.windows = cfg.windows;
  opt.parallel = true;
  opt.noiseless = cfg.sweep.noiseless;
  const LGMode<double> fiber{0, 0, cfg.waist_mm};

  Json curves = Json::array();
  for (std::size_t k = 0; k < cfg.sweep.curves.size(); ++k) {
    const auto &spec = cfg.sweep.curves[k];
    const double xs = spec.x0 ? *spec.x0
                              : balanced_displacement(Side::Stokes, -1, cfg.waist_mm, spec.balanced_sign, cfg.quadrature);
    src.seed = derive_seed(cfg.seed, k + 1);
    const AnalyzerSetting stokes{{-1, xs}, fiber, Side::Stokes};
    const SweepResult r = simulate_sweep(rho, stokes, cfg.sweep.x0_list, src, cfg.quadrature, opt);
    curves.push_back({{"label", spec.label},
                      {"stokes_x0", xs},
                      {"points", sweep_points_to_json(r.points)},
                      {"probabilities", r.probabilities}});
  }
  Json j = stamp(cfg);
  j["noiseless"] = cfg.sweep.noiseless;
  j["duration_s"] = src.duration_s;
  j["curves"] = curves;
  const fs::path p = out_path(c, cfg.outputs.sweep);
  write_json(p, j);
  std::cout << "wrote " << p.string() << " (" << curves.size() << " curves x " << cfg.sweep.x0_list.size()
            << " points)\n";
  return 0;
}

int sweep_fit(const Common &c) {
  const RunConfig cfg = load(c);
  const Json in = read_json(in_path(c, cfg.outputs.sweep));
  if (!in.is_object() || !in.contains("curves") || !in["curves"].is_array())
    throw InvalidInput("sweep file: missing curves");
  SweepFitOptions opt;
  opt.order = cfg.sweep.fit_order;
  opt.quad = cfg.quadrature;
  Json fits = Json::array();
  for (const auto &curve : in["curves"]) {
    if (!curve.contains("points"))
      throw InvalidInput("sweep file: curve without points");
    const SweepFit f = fit_sweep_multistart(sweep_points_from_json(curve["points"]), cfg.waist_mm, opt);
    Json fj = fit_to_json(f);
    fj["label"] = curve.value("label", "");
    fits.push_back(fj);
    std::printf("%-8s theta = %+.5f  w = %.5f mm  A = %.4g  B = %.4g%s\n", fj["label"].get<std::string>().c_str(),
                f.theta, f.w, f.amplitude, f.offset, f.converged ? "" : "  (not converged)");
  }
  Json j = stamp(cfg);
  j["fits"] = fits;
  write_json(out_path(c, cfg.outputs.fit), j);
  return 0;
}

// --- tomo ------------------------------------------------------------------

std::vector<MeasurementRecord> simulate_records(const RunConfig &cfg) {
  const auto design = cfg.tomography.physical_design ? physical_design_measurements(cfg.waist_mm, cfg.quadrature)
                                                      : design_measurements();
  return simulate_tomography_counts(cfg.state.density(), cfg.tomography.counts_per_setting, cfg.seed, design);
}

Json reconstruct(const RunConfig &cfg, const std::vector<MeasurementRecord> &records) {
  const TomographyResult r = mle_reconstruct(records, cfg.tomography.mle);
  if (!r.converged)
    std::cerr << "warning: likelihood maximization did not converge in " << r.iterations << " iterations\n";
  Json j = stamp(cfg);
  j.update(tomography_to_json(r));
  j["eof_from_concurrence"] = eof_from_concurrence(r.concurrence);
  return j;
}

int tomo_simulate(const Common &c) {
  const RunConfig cfg = load(c);
  Json j = stamp(cfg);
  j["records"] = records_to_json(simulate_records(cfg));
  const fs::path p = out_path(c, cfg.outputs.records);
  write_json(p, j);
  std::cout << "wrote " << p.string() << " (" << j["records"].size() << " settings)\n";
  return 0;
}

int tomo_reconstruct(const Common &c) {
  const RunConfig cfg = load(c);
  Json in = read_json(in_path(c, cfg.outputs.records));
  const Json &list = in.is_object() && in.contains("records") ? in["records"] : in;
  const Json j = reconstruct(cfg, records_from_json(list));
  write_json(out_path(c, cfg.outputs.tomography), j);
  std::printf("F = %.4f  C = %.4f  EoF = %.4f\n", j["fidelity_to_bell"].get<double>(), j["concurrence"].get<double>(),
              j["eof"].get<double>());
  return 0;
}

// --- report ----------------------------------------------------------------

int report(const Common &c) {
  const RunConfig cfg = load(c);
  const Json hist = analyze(cfg, simulate_histogram(cfg.source));
  const Json tomo = reconstruct(cfg, simulate_records(cfg));
  const DensityMatrix4 rho = cfg.state.density();

  Json j = stamp(cfg);
  j["pair_rate"] = cfg.source.pair_rate;
  j["accidental_rate_per_bin"] = accidental_rate_per_bin(cfg.source);
  j["g_tau_ns"] = cfg.g_tau_ns;
  j["g"] = hist["g"];
  j["g_sigma"] = hist["g_sigma"];
  j["reconstructed"] = {{"fidelity", tomo["fidelity_to_bell"]},
                        {"concurrence", tomo["concurrence"]},
                        {"eof", tomo["eof"]},
                        {"converged", tomo["optimizer"]["converged"]}};
  j["generating_state"] = {{"fidelity", fidelity(rho, make_pair_state(1.0))},
                           {"concurrence", concurrence(rho)},
                           {"eof", entanglement_of_formation(rho)}};
  if (cfg.g_target)
    j["g_target"] = *cfg.g_target;
  write_json(out_path(c, cfg.outputs.report), j);

  std::printf("g(%g ns)  %.4f +/- %.4f\n", cfg.g_tau_ns, j["g"].get<double>(), j["g_sigma"].get<double>());
  std::printf("F         %.4f\n", tomo["fidelity_to_bell"].get<double>());
  std::printf("C         %.4f\n", tomo["concurrence"].get<double>());
  std::printf("EoF       %.4f\n", tomo["eof"].get<double>());
  return 0;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Simulation and analysis of OAM-entangled photon pairs"};
  app.require_subcommand(1);
  Common common;
  std::function<int(const Common &)> action;

  auto leaf = [&](CLI::App *parent, const std::string &name, const std::string &help,
                  std::function<int(const Common &)> fn, bool takes_input) {
    CLI::App *sub = parent->add_subcommand(name, help);
    sub->add_option("--config", common.config, "run configuration (JSON)")->required();
    sub->add_option("--out", common.out, "output directory")->capture_default_str();
    sub->add_option_function<std::uint64_t>(
        "--seed",
        [&](const std::uint64_t &s) {
          common.seed = s;
          common.seed_given = true;
        },
        "master seed (overrides the config)");
    if (takes_input)
      sub->add_option("--in", common.in, "input file (default: the configured name inside --out)");
    sub->callback([&action, fn] { action = fn; });
  };

  CLI::App *hist = app.add_subcommand("hist", "coincidence histograms")->require_subcommand(1);
  leaf(hist, "simulate", "simulate a time-resolved coincidence histogram", hist_simulate, false);
  leaf(hist, "analyze", "background, g(tau) and normalized signal of a histogram", hist_analyze, true);
  CLI::App *sweep = app.add_subcommand("sweep", "hologram displacement sweeps")->require_subcommand(1);
  leaf(sweep, "simulate", "simulate anti-Stokes displacement sweeps", sweep_simulate, false);
  leaf(sweep, "fit", "fit sweep curves to the squared projection", sweep_fit, true);
  CLI::App *tomo = app.add_subcommand("tomo", "two-qubit state tomography")->require_subcommand(1);
  leaf(tomo, "simulate", "simulate tomography coincidence counts", tomo_simulate, false);
  leaf(tomo, "reconstruct", "maximum-likelihood density matrix and entanglement measures", tomo_reconstruct, true);
  leaf(&app, "report", "g, fidelity, concurrence and entanglement of formation summary", report, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    app.exit(e);
    return 2;
  }

  try {
    return action(common);
  } catch (const NumericalFailure &e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const InvalidInput &e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return 2;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
