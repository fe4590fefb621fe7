#pragma once

//! Background, g(tau), the normalized coincidence signal of a sweep point,
//! and least-squares fitting of displacement sweeps to the squared
//! projection amplitude.

#include <vector>

#include "oamq/histogram.hpp"
#include "oamq/oam_optics.hpp"

namespace oamq {

/// Delay windows used by the analysis, in ns.
struct AnalysisWindows {
  double tail_start_ns = 50.0; // background from bins with tau > tail_start
  double signal_lo_ns = 2.0;   // inclusive
  double signal_hi_ns = 32.0;  // inclusive
};

inline constexpr int kMinTailBins = 5;

/** Mean count of the bins with tau > tail_start. */
double estimate_background(const CoincidenceHistogram &hist, double tail_start_ns = 50.0);

/** Number of bins the background is averaged over. */
int background_bin_count(const CoincidenceHistogram &hist, double tail_start_ns = 50.0);

/** g(tau) = N(tau) / bg. */
double g_function(const CoincidenceHistogram &hist, double tau_ns, double tail_start_ns = 50.0);

struct Estimate {
  double value = 0.0;
  double sigma = 0.0;
};

/// g(tau) with its Poisson standard error, propagating both the bin count
/// and the background mean.
Estimate g_with_uncertainty(const CoincidenceHistogram &hist, double tau_ns, double tail_start_ns = 50.0);

/// N = sum over signal_lo <= tau <= signal_hi of (N(tau) - bg) / bg.
double normalized_signal(const CoincidenceHistogram &hist, const AnalysisWindows &win = {});

/** normalized_signal with its Poisson standard error. */
Estimate normalized_signal_with_uncertainty(const CoincidenceHistogram &hist, const AnalysisWindows &win = {});

struct SweepPoint {
  double x0 = 0.0;
  double signal = 0.0;
  double uncertainty = 0.0;
};

/// Parameters of signal(x0) = amplitude * |a(x0; theta, w)|^2 + offset.
struct SweepFit {
  double theta = 0.0;
  double w = 0.8;
  double amplitude = 1.0;
  double offset = 0.0;
  double residual = 0.0; // weighted sum of squares
  int iterations = 0;
  bool converged = false;
  bool degenerate = false; // +theta and -theta fit equally well
};

struct SweepFitOptions {
  int order = -1; // hologram order of the swept analyzer in the model
  QuadratureSpec quad{}; // only used when order != -1
  int max_iter = 200;
  double step_tol = 1e-6; // relative parameter step
  bool nonnegative_amplitude = true; // steps are projected onto amplitude >= 0
};

/// Model value amplitude |a(x0; theta, w)|^2 + offset at one displacement.
/// Order -1 uses stokes_basis_closed_form, other orders the quadrature.
double sweep_model(double x0, const SweepFit &params, int order, const QuadratureSpec &quad = {});

/// Weighted (1 / uncertainty^2, floored at 1e-12) Levenberg-Marquardt fit
/// of theta, w, amplitude and offset. theta is reported modulo pi in
/// [-pi/2, pi/2]. On hitting max_iter the best parameters are returned with
/// converged = false.
SweepFit fit_sweep(const std::vector<SweepPoint> &points, const SweepFit &initial, const SweepFitOptions &opt = {});

/// fit_sweep from several theta starting points, keeping the lowest residual.
SweepFit fit_sweep_multistart(const std::vector<SweepPoint> &points, double w_guess, const SweepFitOptions &opt = {},
                              int n_theta_starts = 8);

} // namespace oamq
