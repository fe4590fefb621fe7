#include "oamq/histogram_analysis.hpp"

#include <algorithm>
#include <numbers>

namespace oamq {

namespace {

constexpr double kTauEps = 1e-9;

void require_tail(const CoincidenceHistogram &hist, double tail_start_ns) {
  if (!(hist.bin_width_ns > 0.0))
    throw InvalidInput("histogram: bin width must be positive");
  if (background_bin_count(hist, tail_start_ns) < kMinTailBins)
    throw InvalidInput("histogram: fewer than 5 bins beyond the background tail start");
}

double nonzero_background(const CoincidenceHistogram &hist, double tail_start_ns) {
  const double bg = estimate_background(hist, tail_start_ns);
  if (!(bg > 0.0))
    throw InvalidInput("histogram: background is zero, normalization undefined");
  return bg;
}

} // namespace

int background_bin_count(const CoincidenceHistogram &hist, double tail_start_ns) {
  int n = 0;
  for (int i = 0; i < hist.n_bins(); ++i)
    if (hist.tau_ns(i) > tail_start_ns + kTauEps)
      ++n;
  return n;
}

double estimate_background(const CoincidenceHistogram &hist, double tail_start_ns) {
  require_tail(hist, tail_start_ns);
  double sum = 0.0;
  int n = 0;
  for (int i = 0; i < hist.n_bins(); ++i)
    if (hist.tau_ns(i) > tail_start_ns + kTauEps) {
      sum += static_cast<double>(hist.counts[i]);
      ++n;
    }
  return sum / n;
}

double g_function(const CoincidenceHistogram &hist, double tau_ns, double tail_start_ns) {
  return g_with_uncertainty(hist, tau_ns, tail_start_ns).value;
}

Estimate g_with_uncertainty(const CoincidenceHistogram &hist, double tau_ns, double tail_start_ns) {
  const int b = hist.bin_of(tau_ns);
  if (b < 0)
    throw InvalidInput("g_function: delay outside the histogram");
  const double bg = nonzero_background(hist, tail_start_ns);
  const double n = static_cast<double>(hist.counts[b]);
  const int nt = background_bin_count(hist, tail_start_ns);
  // var(n) = n, var(bg) = bg / nt
  const double g = n / bg;
  const double sigma = std::sqrt(n / (bg * bg) + g * g / (bg * nt));
  return {g, sigma};
}

double normalized_signal(const CoincidenceHistogram &hist, const AnalysisWindows &win) {
  return normalized_signal_with_uncertainty(hist, win).value;
}

Estimate normalized_signal_with_uncertainty(const CoincidenceHistogram &hist, const AnalysisWindows &win) {
  const double bg = nonzero_background(hist, win.tail_start_ns);
  if (hist.bin_of(win.signal_lo_ns) < 0 || hist.bin_of(win.signal_hi_ns) < 0)
    throw InvalidInput("normalized_signal: histogram does not cover the signal window");
  double sum = 0.0;
  int terms = 0;
  for (int i = 0; i < hist.n_bins(); ++i) {
    const double tau = hist.tau_ns(i);
    if (tau >= win.signal_lo_ns - kTauEps && tau <= win.signal_hi_ns + kTauEps) {
      sum += static_cast<double>(hist.counts[i]);
      ++terms;
    }
  }
  const int nt = background_bin_count(hist, win.tail_start_ns);
  const double value = (sum - terms * bg) / bg;
  // N = S / bg - terms; var(S) = S, var(bg) = bg / nt
  const double dbg = sum / (bg * bg);
  const double sigma = std::sqrt(sum / (bg * bg) + dbg * dbg * bg / nt);
  return {value, sigma};
}

// ---------------------------------------------------------------------------

namespace {

StokesBasisProjection<double> basis(int order, double x0, double w, const QuadratureSpec &quad) {
  return order == -1 ? stokes_basis_closed_form(x0, w) : stokes_basis_projection(order, x0, w, quad);
}

} // namespace

double sweep_model(double x0, const SweepFit &p, int order, const QuadratureSpec &quad) {
  const auto b = basis(order, x0, p.w, quad);
  const auto a = std::cos(p.theta) * b.a[0] + std::sin(p.theta) * b.a[1];
  return p.amplitude * std::norm(a) + p.offset;
}

namespace {

using Vector4 = Eigen::Vector4d;

struct Evaluation {
  Eigen::VectorXd residual; // weighted
  Eigen::MatrixXd jacobian; // d residual / d (theta, w, A, B)
  double chi2 = 0.0;
};

Vector4 to_vec(const SweepFit &f) { return {f.theta, f.w, f.amplitude, f.offset}; }

Evaluation evaluate(const std::vector<SweepPoint> &pts, const Vector4 &p, const SweepFitOptions &opt,
                    bool with_jacobian) {
  const int n = static_cast<int>(pts.size());
  Evaluation ev;
  ev.residual.resize(n);
  if (with_jacobian)
    ev.jacobian.resize(n, 4);
  const double c = std::cos(p[0]), s = std::sin(p[0]);
  for (int i = 0; i < n; ++i) {
    const double sig2 = std::max(pts[i].uncertainty * pts[i].uncertainty, 1e-12);
    const double sw = 1.0 / std::sqrt(sig2);
    const auto b = basis(opt.order, pts[i].x0, p[1], opt.quad);
    const std::complex<double> a = c * b.a[0] + s * b.a[1];
    const double f = std::norm(a);
    ev.residual[i] = sw * (pts[i].signal - (p[2] * f + p[3]));
    if (with_jacobian) {
      const std::complex<double> da_dt = -s * b.a[0] + c * b.a[1];
      const std::complex<double> da_dw = c * b.da_dw[0] + s * b.da_dw[1];
      ev.jacobian(i, 0) = -sw * p[2] * 2.0 * std::real(std::conj(a) * da_dt);
      ev.jacobian(i, 1) = -sw * p[2] * 2.0 * std::real(std::conj(a) * da_dw);
      ev.jacobian(i, 2) = -sw * f;
      ev.jacobian(i, 3) = -sw;
    }
  }
  ev.chi2 = ev.residual.squaredNorm();
  return ev;
}

double wrap_theta(double t) {
  constexpr double pi = std::numbers::pi;
  t = std::remainder(t, pi); // [-pi/2, pi/2]
  return t;
}

} // namespace

SweepFit fit_sweep(const std::vector<SweepPoint> &points, const SweepFit &initial, const SweepFitOptions &opt) {
  if (points.size() < 6)
    throw InvalidInput("fit_sweep: need at least 6 points");
  const bool has_neg = std::any_of(points.begin(), points.end(), [](const SweepPoint &p) { return p.x0 < 0.0; });
  const bool has_pos = std::any_of(points.begin(), points.end(), [](const SweepPoint &p) { return p.x0 > 0.0; });
  if (!has_neg || !has_pos)
    throw InvalidInput("fit_sweep: points must span both signs of x0");
  for (const auto &p : points)
    if (!(p.uncertainty >= 0.0) || !std::isfinite(p.signal))
      throw InvalidInput("fit_sweep: invalid sweep point");
  if (!(initial.w > 0.0))
    throw InvalidInput("fit_sweep: initial waist must be positive");
  validate_quadrature(opt.quad);

  Vector4 p = to_vec(initial);
  if (opt.nonnegative_amplitude)
    p[2] = std::max(p[2], 0.0);
  Evaluation cur = evaluate(points, p, opt, true);
  double lambda = 1e-3;
  SweepFit out = initial;
  int it = 0;
  bool converged = false;
  for (; it < opt.max_iter && !converged; ++it) {
    const Eigen::Matrix4d jtj = cur.jacobian.transpose() * cur.jacobian;
    const Vector4 g = cur.jacobian.transpose() * cur.residual;
    bool accepted = false;
    for (int tries = 0; tries < 30 && !accepted; ++tries) {
      Eigen::Matrix4d a = jtj;
      for (int k = 0; k < 4; ++k)
        a(k, k) += lambda * std::max(jtj(k, k), 1e-12);
      Vector4 trial = p - a.ldlt().solve(g);
      if (opt.nonnegative_amplitude)
        trial[2] = std::max(trial[2], 0.0);
      const Vector4 step = trial - p;
      if (!(trial[1] > 0.0) || !step.allFinite()) {
        lambda *= 10.0;
        continue;
      }
      Evaluation next = evaluate(points, trial, opt, false);
      if (next.chi2 <= cur.chi2) {
        const Vector4 scale(1.0, p[1], std::max(std::abs(p[2]), 1e-12),
                            std::max({std::abs(p[3]), std::abs(p[2]), 1e-12}));
        const double rel = step.cwiseAbs().cwiseQuotient(scale).maxCoeff();
        p = trial;
        cur = evaluate(points, p, opt, true);
        lambda = std::max(lambda / 10.0, 1e-12);
        accepted = true;
        converged = rel < opt.step_tol || cur.chi2 == 0.0;
      } else {
        lambda *= 10.0;
      }
    }
    if (!accepted) {
      // No downhill step at any damping: stationary to working precision.
      converged = true;
    }
  }

  out.theta = wrap_theta(p[0]);
  out.w = p[1];
  out.amplitude = p[2];
  out.offset = p[3];
  out.residual = cur.chi2;
  out.iterations = it;
  out.converged = converged;
  if (std::abs(std::sin(2.0 * out.theta)) > 1e-6) {
    Vector4 mirrored = p;
    mirrored[0] = -p[0];
    const double chi2_m = evaluate(points, mirrored, opt, false).chi2;
    out.degenerate = std::abs(chi2_m - cur.chi2) <= 1e-9 * std::max(1.0, cur.chi2);
  }
  return out;
}

SweepFit fit_sweep_multistart(const std::vector<SweepPoint> &points, double w_guess, const SweepFitOptions &opt,
                              int n_theta_starts) {
  if (n_theta_starts < 1)
    throw InvalidInput("fit_sweep_multistart: need at least one start");
  double lo = points.front().signal, hi = points.front().signal;
  for (const auto &pt : points) {
    lo = std::min(lo, pt.signal);
    hi = std::max(hi, pt.signal);
  }
  SweepFit best;
  bool have = false;
  for (int k = 0; k < n_theta_starts; ++k) {
    SweepFit init;
    init.theta = -std::numbers::pi / 2 + std::numbers::pi * (k + 0.5) / n_theta_starts;
    init.w = w_guess;
    init.amplitude = std::max(hi - lo, 1e-6);
    init.offset = 0.0;
    const SweepFit f = fit_sweep(points, init, opt);
    if (!have || f.residual < best.residual) {
      best = f;
      have = true;
    }
  }
  return best;
}

} // namespace oamq
