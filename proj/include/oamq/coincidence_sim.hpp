#pragma once

//! Binned Monte Carlo model of Stokes/anti-Stokes start-stop coincidences:
//! a flat accidental floor from the singles rates plus a correlated
//! wavepacket, each bin an independent Poisson draw.

#include <cstdint>
#include <vector>

#include "oamq/histogram.hpp"
#include "oamq/histogram_analysis.hpp"
#include "oamq/quantum_state.hpp"

namespace oamq {

/// Two-sided exponential arrival-delay density: rises with time constant
/// rise_time up to peak_delay, decays with decay_time after it, zero outside
/// [0, window]. Area-normalized.
struct WavepacketProfile {
  double peak_delay_ns = 12.0;
  double rise_time_ns = 2.0;
  double decay_time_ns = 8.0;
  double window_ns = 30.0;

  /** Probability mass in [lo, hi). */
  double mass(double lo_ns, double hi_ns) const;
};

struct SourceConfig {
  double stokes_rate = 1.4e4;     // 1/s
  double antistokes_rate = 4.0e4; // 1/s
  double pair_rate = 0.0;         // correlated pairs, 1/s
  WavepacketProfile wavepacket{};
  double bin_width_ns = 2.0;
  int n_bins = 160;
  double efficiency_s = 0.4;
  double efficiency_as = 0.4;
  double duration_s = 1000.0;
  std::uint64_t seed = 20080101;
};

void validate_source(const SourceConfig &cfg);

/** Accidental coincidence rate per bin: R_S R_AS bin_width. */
double accidental_rate_per_bin(const SourceConfig &cfg);

/** Wavepacket probability mass of every bin. */
std::vector<double> wavepacket_bins(const SourceConfig &cfg);

/// duration * (accidental + pair_rate eta_S eta_AS W(tau)) per bin, with
/// the correlated part scaled by `pair_fraction`.
std::vector<double> expected_histogram(const SourceConfig &cfg, double pair_fraction = 1.0);

/** Poisson draw of every bin around the given means. */
CoincidenceHistogram sample_histogram(const std::vector<double> &means, double bin_width_ns, double duration_s,
                                      std::uint64_t seed);

CoincidenceHistogram simulate_histogram(const SourceConfig &cfg);

/// Pair rate for which the expected g at tau_ns equals g_target.
double calibrate_pair_rate(const SourceConfig &cfg, double g_target, double tau_ns = 12.0);

/** Per-point seed derived from the master seed and the point index. */
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

struct SweepResult {
  std::vector<SweepPoint> points;
  std::vector<double> probabilities; // coincidence_probability per point
  std::vector<CoincidenceHistogram> histograms;
};

struct SweepSimOptions {
  int antistokes_order = 1;
  AnalysisWindows windows{};
  bool parallel = false;
  bool noiseless = false; // report expected values instead of sampling; histograms left empty
};

/// Normalized signal and its Poisson uncertainty evaluated on expected counts.
Estimate expected_normalized_signal(const std::vector<double> &means, double bin_width_ns,
                                    const AnalysisWindows &win = {});

/// Sweeps the anti-Stokes hologram over x0_list with the Stokes analyzer
/// fixed. Each point's correlated rate is pair_rate eta_S eta_AS p(x0), the
/// histogram is sampled with derive_seed(cfg.seed, index) and reduced with
/// normalized_signal_with_uncertainty.
SweepResult simulate_sweep(const DensityMatrix4 &rho, const AnalyzerSetting &stokes, const std::vector<double> &x0_list,
                           const SourceConfig &cfg, const QuadratureSpec &quad = {}, const SweepSimOptions &opt = {});

} // namespace oamq
