#include "oamq/coincidence_sim.hpp"

#include <future>
#include <random>

namespace oamq {

double WavepacketProfile::mass(double lo, double hi) const {
  // Unnormalized antiderivatives of the rise and decay branches.
  const double t0 = peak_delay_ns, tr = rise_time_ns, td = decay_time_ns, tw = window_ns;
  auto rise = [&](double a, double b) { // int_a^b exp(-(t0 - t) / tr), a <= b <= t0
    return tr * (std::exp(-(t0 - b) / tr) - std::exp(-(t0 - a) / tr));
  };
  auto decay = [&](double a, double b) { // int_a^b exp(-(t - t0) / td), t0 <= a <= b
    return td * (std::exp(-(a - t0) / td) - std::exp(-(b - t0) / td));
  };
  auto integral = [&](double a, double b) {
    a = std::max(a, 0.0);
    b = std::min(b, tw);
    if (!(b > a))
      return 0.0;
    double s = 0.0;
    if (a < t0)
      s += rise(a, std::min(b, t0));
    if (b > t0)
      s += decay(std::max(a, t0), b);
    return s;
  };
  return integral(lo, hi) / integral(0.0, tw);
}

void validate_source(const SourceConfig &c) {
  auto finite_nonneg = [](double v) { return std::isfinite(v) && v >= 0.0; };
  if (!finite_nonneg(c.stokes_rate) || !finite_nonneg(c.antistokes_rate) || !finite_nonneg(c.pair_rate))
    throw InvalidInput("source: rates must be finite and non-negative");
  if (c.pair_rate > std::min(c.stokes_rate, c.antistokes_rate))
    throw InvalidInput("source: pair rate exceeds a singles rate");
  if (!(c.bin_width_ns > 0.0) || !std::isfinite(c.bin_width_ns))
    throw InvalidInput("source: bin width must be positive");
  if (c.n_bins < 1)
    throw InvalidInput("source: need at least one bin");
  if (!(c.efficiency_s >= 0.0 && c.efficiency_s <= 1.0 && c.efficiency_as >= 0.0 && c.efficiency_as <= 1.0))
    throw InvalidInput("source: efficiencies must lie in [0, 1]");
  if (!(c.duration_s > 0.0) || !std::isfinite(c.duration_s))
    throw InvalidInput("source: duration must be positive");
  const auto &w = c.wavepacket;
  if (!(w.rise_time_ns > 0.0 && w.decay_time_ns > 0.0 && w.window_ns > 0.0 && w.peak_delay_ns >= 0.0 &&
        w.peak_delay_ns <= w.window_ns))
    throw InvalidInput("source: invalid wavepacket profile");
}

double accidental_rate_per_bin(const SourceConfig &c) { return c.stokes_rate * c.antistokes_rate * c.bin_width_ns * 1e-9; }

std::vector<double> wavepacket_bins(const SourceConfig &c) {
  std::vector<double> w(static_cast<std::size_t>(c.n_bins));
  for (int i = 0; i < c.n_bins; ++i)
    w[i] = c.wavepacket.mass(i * c.bin_width_ns, (i + 1) * c.bin_width_ns);
  return w;
}

std::vector<double> expected_histogram(const SourceConfig &c, double pair_fraction) {
  validate_source(c);
  if (!(pair_fraction >= 0.0) || !std::isfinite(pair_fraction))
    throw InvalidInput("expected_histogram: pair fraction must be non-negative");
  const double acc = accidental_rate_per_bin(c);
  const double corr = c.pair_rate * c.efficiency_s * c.efficiency_as * pair_fraction;
  auto w = wavepacket_bins(c);
  for (auto &v : w)
    v = c.duration_s * (acc + corr * v);
  return w;
}

CoincidenceHistogram sample_histogram(const std::vector<double> &means, double bin_width_ns, double duration_s,
                                      std::uint64_t seed) {
  // Means beyond 2^53 no longer fit the counting model exactly.
  constexpr double kMaxMean = 9.0e15;
  CoincidenceHistogram h{bin_width_ns, {}, duration_s};
  h.counts.reserve(means.size());
  std::mt19937_64 rng(seed);
  for (double m : means) {
    if (!std::isfinite(m) || m < 0.0 || m > kMaxMean)
      throw InvalidInput("simulate_histogram: expected count out of range (duration too large?)");
    if (m == 0.0) {
      h.counts.push_back(0);
      continue;
    }
    std::poisson_distribution<std::int64_t> pd(m);
    h.counts.push_back(pd(rng));
  }
  return h;
}

CoincidenceHistogram simulate_histogram(const SourceConfig &c) {
  return sample_histogram(expected_histogram(c), c.bin_width_ns, c.duration_s, derive_seed(c.seed, 0));
}

double calibrate_pair_rate(const SourceConfig &c, double g_target, double tau_ns) {
  validate_source(c);
  if (!(g_target >= 1.0))
    throw InvalidInput("calibrate_pair_rate: target g must be >= 1");
  const int b = static_cast<int>(std::floor(tau_ns / c.bin_width_ns + 1e-9));
  if (b < 0 || b >= c.n_bins)
    throw InvalidInput("calibrate_pair_rate: delay outside the histogram");
  const double wb = wavepacket_bins(c)[b];
  const double eta = c.efficiency_s * c.efficiency_as;
  if (!(wb > 0.0) || !(eta > 0.0))
    throw InvalidInput("calibrate_pair_rate: no correlated signal in the target bin");
  return (g_target - 1.0) * accidental_rate_per_bin(c) / (eta * wb);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  // splitmix64 finalizer over a combination of both inputs
  std::uint64_t z = master + 0x9E3779B97F4A7C15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

Estimate expected_normalized_signal(const std::vector<double> &means, double bin_width_ns, const AnalysisWindows &win) {
  if (!(bin_width_ns > 0.0))
    throw InvalidInput("expected_normalized_signal: bin width must be positive");
  double tail = 0.0, sum = 0.0;
  int nt = 0, terms = 0;
  for (std::size_t i = 0; i < means.size(); ++i) {
    const double tau = static_cast<double>(i) * bin_width_ns;
    if (tau > win.tail_start_ns + 1e-9) {
      tail += means[i];
      ++nt;
    }
    if (tau >= win.signal_lo_ns - 1e-9 && tau <= win.signal_hi_ns + 1e-9) {
      sum += means[i];
      ++terms;
    }
  }
  if (nt < kMinTailBins)
    throw InvalidInput("expected_normalized_signal: fewer than 5 bins beyond the background tail start");
  const double bg = tail / nt;
  if (!(bg > 0.0))
    throw InvalidInput("expected_normalized_signal: background is zero");
  const double dbg = sum / (bg * bg);
  return {(sum - terms * bg) / bg, std::sqrt(sum / (bg * bg) + dbg * dbg * bg / nt)};
}

SweepResult simulate_sweep(const DensityMatrix4 &rho, const AnalyzerSetting &stokes, const std::vector<double> &x0_list,
                           const SourceConfig &cfg, const QuadratureSpec &quad, const SweepSimOptions &opt) {
  validate_density_matrix(rho);
  validate_source(cfg);
  if (x0_list.empty())
    throw InvalidInput("simulate_sweep: empty displacement list");
  if (stokes.side != Side::Stokes)
    throw InvalidInput("simulate_sweep: fixed analyzer must be on the Stokes side");
  const Vector2cd cs = analyzer_vector(stokes, quad);

  const std::size_t n = x0_list.size();
  SweepResult out;
  out.points.resize(n);
  out.probabilities.resize(n);
  out.histograms.resize(n);

  auto run_point = [&](std::size_t i) {
    const AnalyzerSetting as{{opt.antistokes_order, x0_list[i]}, stokes.collected_mode, Side::AntiStokes};
    const double p = coincidence_probability(rho, cs, analyzer_vector(as, quad));
    const auto means = expected_histogram(cfg, p);
    out.probabilities[i] = p;
    if (opt.noiseless) {
      const Estimate e = expected_normalized_signal(means, cfg.bin_width_ns, opt.windows);
      out.points[i] = SweepPoint{x0_list[i], e.value, e.sigma};
      return;
    }
    auto hist = sample_histogram(means, cfg.bin_width_ns, cfg.duration_s, derive_seed(cfg.seed, i));
    const Estimate e = normalized_signal_with_uncertainty(hist, opt.windows);
    out.points[i] = SweepPoint{x0_list[i], e.value, e.sigma};
    out.histograms[i] = std::move(hist);
  };

  if (opt.parallel) {
    std::vector<std::future<void>> jobs;
    jobs.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
      jobs.push_back(std::async(std::launch::async, run_point, i));
    for (auto &j : jobs)
      j.get();
  } else {
    for (std::size_t i = 0; i < n; ++i)
      run_point(i);
  }
  return out;
}

} // namespace oamq
