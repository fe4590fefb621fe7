#include "doctest.h"

#include <numbers>
#include <random>

#include "oamq/coincidence_sim.hpp"
#include "oamq/histogram_analysis.hpp"

using namespace oamq;
using std::numbers::pi;

namespace {

CoincidenceHistogram flat(std::int64_t v, int n = 160) { return {2.0, std::vector<std::int64_t>(n, v), 1000.0}; }

std::vector<SweepPoint> model_points(double theta, double w, double A, double B, int n = 41) {
  std::vector<SweepPoint> pts;
  std::vector<double> x;
  for (int i = 0; i < n; ++i)
    x.push_back(-2.0 + 4.0 * i / (n - 1));
  const auto prof = sweep_profile(theta, w, -1, x);
  for (int i = 0; i < n; ++i)
    pts.push_back({x[i], A * prof[i] + B, 0.01});
  return pts;
}

} // namespace

TEST_CASE("flat histogram") {
  const auto h = flat(7);
  CHECK(estimate_background(h) == 7.0);
  for (double tau : {0.0, 12.0, 50.0, 318.0})
    CHECK(g_function(h, tau) == 1.0);
  CHECK(normalized_signal(h) == 0.0);
}

TEST_CASE("background uses only bins strictly beyond the tail start") {
  auto h = flat(100);
  CHECK(background_bin_count(h) == 134);
  for (int i = 0; i <= 25; ++i)
    h.counts[i] = 5000 + i; // tau <= 50 ns
  CHECK(estimate_background(h) == 100.0);
  h.counts[26] = 234; // tau = 52 ns
  CHECK(estimate_background(h) == doctest::Approx(101.0));
}

TEST_CASE("tail too short or empty") {
  const auto h = flat(10, 30); // bins up to 58 ns: 4 beyond 50
  CHECK_THROWS_AS(estimate_background(h), InvalidInput);
  CHECK_NOTHROW(estimate_background(flat(10, 31)));
  const auto z = flat(0);
  CHECK_THROWS_AS(g_function(z, 12.0), InvalidInput);
  CHECK_THROWS_AS(normalized_signal(z), InvalidInput);
  CHECK_THROWS_AS(g_function(flat(3), 400.0), InvalidInput);
  CHECK_THROWS_AS(g_function(flat(3), -1.0), InvalidInput);
}

TEST_CASE("g and normalized signal examples") {
  auto h = flat(50);
  h.counts[6] = 0;
  CHECK(g_function(h, 12.0) == 0.0);
  CHECK(g_function(h, 13.9) == 0.0); // same bin

  h = flat(50);
  h.counts[6] = 100; // one extra background at 12 ns
  CHECK(normalized_signal(h) == doctest::Approx(1.0).epsilon(1e-15));
  // outside the 2..32 ns window
  h = flat(50);
  h.counts[0] = 100;
  h.counts[17] = 100;
  CHECK(normalized_signal(h) == 0.0);
  // both window edges count
  h = flat(50);
  h.counts[1] = 100;
  h.counts[16] = 100;
  CHECK(normalized_signal(h) == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("normalized signal is invariant under uniform rescaling") {
  SourceConfig c;
  c.pair_rate = calibrate_pair_rate(c, 1.57);
  const auto h = simulate_histogram(c);
  auto s = h;
  for (auto &n : s.counts)
    n *= 3;
  s.duration_s *= 3;
  CHECK(normalized_signal(s) == doctest::Approx(normalized_signal(h)).epsilon(1e-12));
  CHECK(g_function(s, 12.0) == doctest::Approx(g_function(h, 12.0)).epsilon(1e-12));
}

TEST_CASE("simulated background matches the accidental expectation") {
  SourceConfig c;
  c.pair_rate = calibrate_pair_rate(c, 1.57);
  const double expect = accidental_rate_per_bin(c) * c.duration_s;
  const double se = std::sqrt(expect / 134.0);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    c.seed = seed;
    CHECK(std::abs(estimate_background(simulate_histogram(c)) - expect) < 3.0 * se);
  }
  // peak height does not leak into the tail
  c.pair_rate = 500.0;
  c.seed = 1;
  const double with_peak = estimate_background(simulate_histogram(c));
  c.pair_rate = 0.0;
  CHECK(estimate_background(simulate_histogram(c)) == with_peak);
}

TEST_CASE("g uncertainty propagation") {
  auto h = flat(400);
  h.counts[6] = 900;
  const Estimate e = g_with_uncertainty(h, 12.0);
  CHECK(e.value == doctest::Approx(2.25));
  CHECK(e.sigma == doctest::Approx(std::sqrt(900.0 / 160000.0 + 2.25 * 2.25 / (400.0 * 134.0))));
}

TEST_CASE("g deviation shrinks with duration") {
  auto spread = [](double duration) {
    SourceConfig c;
    c.duration_s = duration;
    double s2 = 0.0;
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
      c.seed = seed;
      const auto h = simulate_histogram(c);
      const double d = g_function(h, 12.0) - 1.0;
      s2 += d * d;
    }
    return std::sqrt(s2 / 40);
  };
  const double s1 = spread(100.0), s2 = spread(1600.0);
  CHECK(s1 / s2 == doctest::Approx(4.0).epsilon(0.35));
}

TEST_CASE("closed-form basis agrees with the quadrature") {
  for (double w : {0.5, 0.8, 1.3})
    for (double x0 : {-3.0, -0.7, -0.01, 0.0, 0.2, 0.9, 2.5, 16.0, 40.0, -300.0}) {
      const auto q = stokes_basis_projection(-1, x0, w);
      const auto c = stokes_basis_closed_form(x0, w);
      for (int k = 0; k < 2; ++k) {
        CHECK(std::abs(q.a[k] - c.a[k]) < 1e-11);
        CHECK(std::abs(q.da_dw[k] - c.da_dw[k]) < 1e-9);
      }
    }
  // asymptotic branch of the scaled Bessel functions
  for (double x : {500.0, 650.0})
    for (int n : {0, 1})
      CHECK(detail::scaled_bessel_i(n, x) == doctest::Approx(std::exp(-x) * std::cyl_bessel_i(double(n), x)).epsilon(1e-14));
  CHECK(detail::scaled_bessel_i(0, 1e6) == doctest::Approx(1.0 / std::sqrt(2e6 * pi)).epsilon(1e-6));
}

TEST_CASE("fit_sweep round-trips noiseless model data") {
  for (double theta : {0.0, pi / 2, pi / 4, -pi / 4, 0.3}) {
    const auto pts = model_points(theta, 0.8, 2.0, 0.1);
    SweepFit init;
    init.theta = theta + 0.2;
    init.w = 0.7;
    init.amplitude = 1.5;
    const SweepFit f = fit_sweep(pts, init);
    CHECK(f.converged);
    // pi/2 and -pi/2 are the same analyzer
    CHECK(std::abs(std::remainder(f.theta - theta, pi)) < 1e-3);
    CHECK(f.w == doctest::Approx(0.8).epsilon(1e-3));
    CHECK(f.residual < 1e-10);
    CHECK(f.amplitude == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(f.theta >= -pi / 2);
    CHECK(f.theta <= pi / 2);
    CHECK_FALSE(f.degenerate);
  }
}

TEST_CASE("multistart fit finds the global minimum") {
  for (double theta : {-1.2, -pi / 4, 0.0, 0.6, pi / 2}) {
    const SweepFit f = fit_sweep_multistart(model_points(theta, 0.8, 1.0, 0.0), 0.7);
    CHECK(std::abs(std::remainder(f.theta - theta, pi)) < 1e-3);
    CHECK(f.w == doctest::Approx(0.8).epsilon(1e-3));
  }
}

TEST_CASE("mirror-symmetric data is flagged degenerate") {
  auto a = model_points(pi / 4, 0.8, 1.0, 0.0);
  const auto b = model_points(-pi / 4, 0.8, 1.0, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    a[i].signal = 0.5 * (a[i].signal + b[i].signal);
  SweepFit init;
  init.theta = 0.5;
  const SweepFit f = fit_sweep(a, init);
  if (std::abs(std::sin(2 * f.theta)) > 1e-6)
    CHECK(f.degenerate);
}

TEST_CASE("fit_sweep preconditions") {
  auto pts = model_points(0.0, 0.8, 1.0, 0.0, 5);
  CHECK_THROWS_AS(fit_sweep(pts, {}), InvalidInput);
  pts = model_points(0.0, 0.8, 1.0, 0.0, 12);
  std::vector<SweepPoint> right(pts.begin() + 6, pts.end());
  right.insert(right.end(), right.begin(), right.end());
  CHECK_THROWS_AS(fit_sweep(right, {}), InvalidInput);
  pts[3].uncertainty = -1.0;
  CHECK_THROWS_AS(fit_sweep(pts, {}), InvalidInput);
}

TEST_CASE("max_iter exhaustion is reported") {
  const auto pts = model_points(0.4, 0.8, 1.0, 0.0);
  SweepFitOptions opt;
  opt.max_iter = 1;
  SweepFit init;
  init.theta = -1.0;
  init.w = 0.5;
  const SweepFit f = fit_sweep(pts, init, opt);
  CHECK_FALSE(f.converged);
  CHECK(f.iterations == 1);
}

TEST_CASE("noisy fit recovers the waist") {
  std::mt19937_64 rng(7);
  auto pts = model_points(pi / 4, 0.8, 1.0, 0.0, 33);
  std::normal_distribution<double> n(0.0, 0.05);
  for (auto &p : pts) {
    p.signal += n(rng);
    p.uncertainty = 0.05;
  }
  const SweepFit f = fit_sweep_multistart(pts, 0.8);
  CHECK(f.w == doctest::Approx(0.8).epsilon(0.05));
}
