#pragma once

//! Laguerre-Gaussian LG_{0l} modes, fork-hologram transmission and the
//! hologram-plus-single-mode-fiber projection integral.
//!
//! Conventions: LG_{0l} carries the azimuthal factor e^{-i l phi}. A hologram
//! of order s multiplies the incident field by e^{-i s arg(x - x0, y)}, so at
//! x0 = 0 it maps LG_{0l} onto LG_{0,l+s}. All lengths share one unit (mm).

#include <cmath>
#include <cstdlib>
#include <numbers>
#include <utility>
#include <vector>

#include "oamq/types.hpp"

namespace oamq {

/** Default OAM truncation |l| <= 1 of the working two-mode model. */
inline constexpr int kDefaultMaxOAM = 1;

/** Largest |l| the closed-form amplitude is evaluated for. */
inline constexpr int kMaxSupportedOAM = 32;

template <typename Scalar = double> struct LGMode {
  int p = 0;
  int l = 0;
  Scalar w = Scalar(0.8);
};

/** Throws InvalidInput unless p = 0, w > 0 and |l| <= max_abs_l. */
template <typename Scalar>
void validate_mode(const LGMode<Scalar> &mode, int max_abs_l = kMaxSupportedOAM) {
  if (mode.p != 0)
    throw InvalidInput("LG mode: only radial index p = 0 is supported");
  if (!(mode.w > Scalar(0)) || !std::isfinite(static_cast<double>(mode.w)))
    throw InvalidInput("LG mode: waist must be positive and finite");
  if (std::abs(mode.l) > max_abs_l)
    throw InvalidInput("LG mode: |l| exceeds the configured truncation");
}

/// Finite superposition of LG_{0l} modes sharing one waist.
template <typename Scalar = double> struct TransverseField {
  struct Term {
    Complex<Scalar> coefficient;
    LGMode<Scalar> mode;
  };
  std::vector<Term> terms;

  Scalar waist() const { return terms.empty() ? Scalar(0) : terms.front().mode.w; }

  Scalar norm_squared() const {
    Scalar s(0);
    for (const auto &t : terms)
      s += std::norm(t.coefficient);
    return s;
  }

  static TransverseField single(const LGMode<Scalar> &mode) {
    return TransverseField{{Term{Complex<Scalar>(1), mode}}};
  }
};

/** Throws InvalidInput for an empty field, mixed waists or invalid modes. */
template <typename Scalar>
void validate_field(const TransverseField<Scalar> &field, int max_abs_l = kMaxSupportedOAM) {
  if (field.terms.empty())
    throw InvalidInput("transverse field has no terms");
  for (const auto &t : field.terms) {
    validate_mode(t.mode, max_abs_l);
    if (t.mode.w != field.terms.front().mode.w)
      throw InvalidInput("transverse field terms must share one waist");
  }
}

template <typename Scalar = double> struct HologramSetting {
  int order = -1;
  Scalar x0 = Scalar(0);
};

template <typename Scalar>
void validate_hologram(const HologramSetting<Scalar> &h) {
  if (h.order != 1 && h.order != -1)
    throw InvalidInput("hologram order must be +1 or -1");
  if (!std::isfinite(static_cast<double>(h.x0)))
    throw InvalidInput("hologram displacement must be finite");
}

/// Node counts for the projection integral. Radial nodes are Gauss-Legendre,
/// azimuthal nodes a uniform periodic trapezoid.
struct QuadratureSpec {
  int n_radial = 128;
  int n_azimuthal = 512;
  double r_max_in_waists = 5.0;

  QuadratureSpec refined() const { return {2 * n_radial, 2 * n_azimuthal, r_max_in_waists}; }
};

/** Throws InvalidInput unless the node counts and cutoff meet the minimums. */
void validate_quadrature(const QuadratureSpec &q);

/** Gauss-Legendre nodes and weights on [-1, 1], ascending. */
std::pair<Eigen::VectorXd, Eigen::VectorXd> gauss_legendre(int n);

namespace detail {

// (x - i y)^l for l >= 0, (x + i y)^{|l|} for l < 0; equals r^{|l|} e^{-i l phi}.
template <typename Scalar>
Complex<Scalar> winding_power(Scalar x, Scalar y, int l) {
  const Complex<Scalar> base(x, l >= 0 ? -y : y);
  Complex<Scalar> out(1);
  for (int k = 0; k < std::abs(l); ++k)
    out *= base;
  return out;
}

template <typename Scalar> Scalar inv_sqrt_factorial(int n) {
  Scalar f(1);
  for (int k = 2; k <= n; ++k)
    f *= Scalar(k);
  return Scalar(1) / std::sqrt(f);
}

// Mode amplitude at a Cartesian point, no validation.
template <typename Scalar>
Complex<Scalar> lg_cartesian(const LGMode<Scalar> &mode, Scalar x, Scalar y) {
  using std::exp;
  using std::sqrt;
  const Scalar w = mode.w;
  const Scalar r2 = x * x + y * y;
  const Scalar e00 = sqrt(Scalar(2) / std::numbers::pi_v<Scalar>) / w * exp(-r2 / (w * w));
  const int al = std::abs(mode.l);
  const Scalar scale = std::pow(sqrt(Scalar(2)) / w, al) * inv_sqrt_factorial<Scalar>(al);
  return e00 * scale * winding_power(x, y, mode.l);
}

template <typename Scalar>
Complex<Scalar> field_cartesian(const TransverseField<Scalar> &f, Scalar x, Scalar y) {
  Complex<Scalar> s(0);
  for (const auto &t : f.terms)
    s += t.coefficient * lg_cartesian(t.mode, x, y);
  return s;
}

} // namespace detail

/// E_{0l}(r, phi) = E_00(r) |l|!^{-1/2} (r sqrt2 / w)^{|l|} e^{-i l phi}, with
/// E_00(r) = sqrt(2/pi) / w exp(-r^2/w^2). Unit norm over the plane.
template <typename Scalar>
Complex<Scalar> lg_amplitude(const LGMode<Scalar> &mode, Scalar r, Scalar phi) {
  validate_mode(mode);
  if (!(r >= Scalar(0)))
    throw InvalidInput("lg_amplitude: radius must be non-negative");
  return detail::lg_cartesian(mode, r * std::cos(phi), r * std::sin(phi));
}

/** cos(theta) LG_00 + sin(theta) LG_01 at waist w. */
template <typename Scalar>
TransverseField<Scalar> superposed_stokes_field(Scalar theta, Scalar w) {
  if (!(w > Scalar(0)))
    throw InvalidInput("superposed_stokes_field: waist must be positive");
  using Term = typename TransverseField<Scalar>::Term;
  return TransverseField<Scalar>{{Term{Complex<Scalar>(std::cos(theta)), LGMode<Scalar>{0, 0, w}},
                                  Term{Complex<Scalar>(std::sin(theta)), LGMode<Scalar>{0, 1, w}}}};
}

/// e^{-i order arg(r cos phi - x0, r sin phi)}. At the dislocation itself the
/// argument is taken as that of a point displaced radially outward by 1e-9.
template <typename Scalar>
Complex<Scalar> hologram_phase(const HologramSetting<Scalar> &setting, Scalar r, Scalar phi) {
  validate_hologram(setting);
  Scalar dx = r * std::cos(phi) - setting.x0;
  Scalar dy = r * std::sin(phi);
  if (std::hypot(dx, dy) < Scalar(1e-12)) {
    const Scalar rr = r + Scalar(1e-9);
    dx = rr * std::cos(phi) - setting.x0;
    dy = rr * std::sin(phi);
  }
  const Scalar arg = std::atan2(dy, dx);
  return std::polar(Scalar(1), -Scalar(setting.order) * arg);
}

/// How projection_amplitude treats the quadrature rule.
enum class ConvergenceCheck { Enabled, Disabled };

/// Overlap a = Int Int T(r, phi) u_input(r, phi) conj(u_collected(r, phi)) r dr dphi
/// of the hologram-transmitted input field with the fiber-collected mode.
///
/// The polar grid is centered on the dislocation, where T is e^{-i order psi}
/// and the whole integrand is smooth. With ConvergenceCheck::Enabled the
/// integral is repeated with doubled node counts and NumericalFailure is
/// thrown if |a|^2 moves by more than 1e-6.
template <typename Scalar>
Complex<Scalar> projection_amplitude(const TransverseField<Scalar> &collected,
                                     const TransverseField<Scalar> &input,
                                     const HologramSetting<Scalar> &holo,
                                     const QuadratureSpec &quad = {},
                                     ConvergenceCheck check = ConvergenceCheck::Enabled);

/** |a(x0)|^2 for the theta-superposed input collected into LG_00. */
template <typename Scalar>
std::vector<Scalar> sweep_profile(Scalar theta, Scalar w, int order, const std::vector<Scalar> &x0_list,
                                  const QuadratureSpec &quad = {});

/// Overlaps of LG_00 and LG_01 through a hologram into LG_00, and their
/// derivatives with respect to the shared waist, from one pass over the grid.
/// For input cos(theta) LG_00 + sin(theta) LG_01 the amplitude is
/// cos(theta) a[0] + sin(theta) a[1].
template <typename Scalar> struct StokesBasisProjection {
  Complex<Scalar> a[2];
  Complex<Scalar> da_dw[2];
};

template <typename Scalar>
StokesBasisProjection<Scalar> stokes_basis_projection(int order, Scalar x0, Scalar w, const QuadratureSpec &quad = {});

/// Closed form of stokes_basis_projection for an order -1 hologram. With
/// u = x0 / w and E_n = e^{-u^2} I_n(u^2):
///   a[0] = -sqrt(pi/2) u (E_0 + E_1),   a[1] = sqrt(pi)/2 E_0.
template <typename Scalar> StokesBasisProjection<Scalar> stokes_basis_closed_form(Scalar x0, Scalar w);

/** Overlap <LG_0m | LG_0l> by the same quadrature (no hologram). */
template <typename Scalar>
Complex<Scalar> mode_overlap(const LGMode<Scalar> &a, const LGMode<Scalar> &b, const QuadratureSpec &quad = {});

// ---------------------------------------------------------------------------

namespace detail {

/// Azimuthal nodes psi0 + j * dpsi. The full circle when the dislocation lies
/// inside the cutoff disk, otherwise only the arc the disk subtends (midpoint
/// rule; the integrand is negligible at the arc ends).
template <typename Scalar> std::pair<Scalar, Scalar> azimuthal_rule(Scalar x0, Scalar R, int n) {
  constexpr Scalar pi = std::numbers::pi_v<Scalar>;
  if (std::abs(x0) <= R)
    return {Scalar(0), Scalar(2) * pi / Scalar(n)};
  const Scalar alpha = std::asin(R / std::abs(x0));
  const Scalar step = Scalar(2) * alpha / Scalar(n);
  const Scalar center = x0 > Scalar(0) ? pi : Scalar(0);
  return {center - alpha + step / Scalar(2), step};
}

template <typename Scalar>
Complex<Scalar> projection_fixed(const TransverseField<Scalar> &collected, const TransverseField<Scalar> &input,
                                 const HologramSetting<Scalar> &holo, const QuadratureSpec &quad) {
  const Scalar w = input.waist();
  const Scalar R = Scalar(quad.r_max_in_waists) * w;
  const Scalar ax0 = std::abs(holo.x0);
  const Scalar lo = std::max(Scalar(0), ax0 - R);
  const Scalar hi = ax0 + R;
  const auto [xi, wi] = gauss_legendre(quad.n_radial);
  const Scalar half = (hi - lo) / Scalar(2);
  const auto [psi0, dpsi] = azimuthal_rule(holo.x0, R, quad.n_azimuthal);

  std::vector<Complex<Scalar>> twist(quad.n_azimuthal);
  std::vector<Scalar> cs(quad.n_azimuthal), sn(quad.n_azimuthal);
  for (int j = 0; j < quad.n_azimuthal; ++j) {
    const Scalar psi = psi0 + dpsi * Scalar(j);
    cs[j] = std::cos(psi);
    sn[j] = std::sin(psi);
    twist[j] = std::polar(Scalar(1), -Scalar(holo.order) * psi);
  }

  // Per-term constants; the Gaussian envelope is shared by every term.
  struct Prepared {
    Complex<Scalar> scale;
    int l;
  };
  auto prepare = [w](const TransverseField<Scalar> &f, bool conjugate) {
    std::vector<Prepared> out;
    for (const auto &t : f.terms) {
      const int al = std::abs(t.mode.l);
      const Scalar norm = std::sqrt(Scalar(2) / std::numbers::pi_v<Scalar>) / w *
                          std::pow(std::sqrt(Scalar(2)) / w, al) * inv_sqrt_factorial<Scalar>(al);
      out.push_back({(conjugate ? std::conj(t.coefficient) : t.coefficient) * norm,
                     conjugate ? -t.mode.l : t.mode.l});
    }
    return out;
  };
  const auto in_terms = prepare(input, false);
  const auto col_terms = prepare(collected, true);
  auto eval = [](const std::vector<Prepared> &terms, Scalar x, Scalar y) {
    Complex<Scalar> s(0);
    for (const auto &t : terms)
      s += t.scale * winding_power(x, y, t.l);
    return s;
  };

  const Scalar inv_w2 = Scalar(1) / (w * w);
  Complex<Scalar> total(0);
  for (int i = 0; i < quad.n_radial; ++i) {
    const Scalar rho = lo + half * (Scalar(xi[i]) + Scalar(1));
    Complex<Scalar> ring(0);
    for (int j = 0; j < quad.n_azimuthal; ++j) {
      const Scalar x = holo.x0 + rho * cs[j];
      const Scalar y = rho * sn[j];
      const Scalar envelope = std::exp(Scalar(-2) * (x * x + y * y) * inv_w2);
      ring += twist[j] * envelope * eval(in_terms, x, y) * eval(col_terms, x, y);
    }
    total += ring * (Scalar(wi[i]) * half * rho);
  }
  return total * dpsi;
}

} // namespace detail

template <typename Scalar>
Complex<Scalar> projection_amplitude(const TransverseField<Scalar> &collected, const TransverseField<Scalar> &input,
                                     const HologramSetting<Scalar> &holo, const QuadratureSpec &quad,
                                     ConvergenceCheck check) {
  validate_field(collected);
  validate_field(input);
  validate_hologram(holo);
  validate_quadrature(quad);
  if (collected.waist() != input.waist())
    throw InvalidInput("projection_amplitude: collected and input fields must share one waist");

  const auto a = detail::projection_fixed(collected, input, holo, quad);
  if (check == ConvergenceCheck::Enabled) {
    const auto fine = detail::projection_fixed(collected, input, holo, quad.refined());
    if (std::abs(std::norm(fine) - std::norm(a)) > Scalar(1e-6))
      throw NumericalFailure("projection_amplitude: quadrature not converged on node doubling");
  }
  return a;
}

template <typename Scalar>
std::vector<Scalar> sweep_profile(Scalar theta, Scalar w, int order, const std::vector<Scalar> &x0_list,
                                  const QuadratureSpec &quad) {
  if (x0_list.empty())
    throw InvalidInput("sweep_profile: empty displacement list");
  const auto input = superposed_stokes_field(theta, w);
  const auto collected = TransverseField<Scalar>::single(LGMode<Scalar>{0, 0, w});
  std::vector<Scalar> out;
  out.reserve(x0_list.size());
  for (Scalar x0 : x0_list)
    out.push_back(std::norm(projection_amplitude(collected, input, HologramSetting<Scalar>{order, x0}, quad)));
  return out;
}

template <typename Scalar>
StokesBasisProjection<Scalar> stokes_basis_projection(int order, Scalar x0, Scalar w, const QuadratureSpec &quad) {
  validate_hologram(HologramSetting<Scalar>{order, x0});
  validate_quadrature(quad);
  if (!(w > Scalar(0)))
    throw InvalidInput("stokes_basis_projection: waist must be positive");
  const Scalar R = Scalar(quad.r_max_in_waists) * w;
  const Scalar ax0 = std::abs(x0);
  const Scalar lo = std::max(Scalar(0), ax0 - R);
  const Scalar half = (ax0 + R - lo) / Scalar(2);
  const auto [xi, wi] = gauss_legendre(quad.n_radial);
  const auto [psi0, dpsi] = detail::azimuthal_rule(x0, R, quad.n_azimuthal);
  const Scalar inv_w2 = Scalar(1) / (w * w);
  // E00 * E00 and E00 * E01 prefactors, E01 = sqrt2/w (x - i y) E00
  const Scalar c00 = Scalar(2) / std::numbers::pi_v<Scalar> * inv_w2;
  const Scalar c01 = c00 * std::sqrt(Scalar(2)) / w;

  std::vector<Complex<Scalar>> twist(quad.n_azimuthal);
  std::vector<Scalar> cs(quad.n_azimuthal), sn(quad.n_azimuthal);
  for (int j = 0; j < quad.n_azimuthal; ++j) {
    const Scalar psi = psi0 + dpsi * Scalar(j);
    cs[j] = std::cos(psi);
    sn[j] = std::sin(psi);
    twist[j] = std::polar(Scalar(1), -Scalar(order) * psi);
  }

  StokesBasisProjection<Scalar> out{};
  for (int i = 0; i < quad.n_radial; ++i) {
    const Scalar rho = lo + half * (Scalar(xi[i]) + Scalar(1));
    Complex<Scalar> s0(0), s1(0), d0(0), d1(0);
    for (int j = 0; j < quad.n_azimuthal; ++j) {
      const Scalar x = x0 + rho * cs[j];
      const Scalar y = rho * sn[j];
      const Scalar r2 = x * x + y * y;
      const Complex<Scalar> g = twist[j] * std::exp(Scalar(-2) * r2 * inv_w2);
      const Complex<Scalar> g1 = g * Complex<Scalar>(x, -y);
      // d/dw log of E00^2 is -2/w + 4 r^2/w^3; of E00 E01 it is -3/w + 4 r^2/w^3
      const Scalar radial = Scalar(4) * r2 * inv_w2 / w;
      s0 += g;
      s1 += g1;
      d0 += g * (radial - Scalar(2) / w);
      d1 += g1 * (radial - Scalar(3) / w);
    }
    const Scalar weight = Scalar(wi[i]) * half * rho * dpsi;
    out.a[0] += s0 * (c00 * weight);
    out.a[1] += s1 * (c01 * weight);
    out.da_dw[0] += d0 * (c00 * weight);
    out.da_dw[1] += d1 * (c01 * weight);
  }
  return out;
}

template <typename Scalar>
Complex<Scalar> mode_overlap(const LGMode<Scalar> &a, const LGMode<Scalar> &b, const QuadratureSpec &quad) {
  validate_mode(a);
  validate_mode(b);
  validate_quadrature(quad);
  if (a.w != b.w)
    throw InvalidInput("mode_overlap: modes must share one waist");
  // No dislocation: beam-centered grid, integrand is smooth.
  const Scalar R = Scalar(quad.r_max_in_waists) * a.w;
  const auto [xi, wi] = gauss_legendre(quad.n_radial);
  const Scalar dphi = Scalar(2) * std::numbers::pi_v<Scalar> / Scalar(quad.n_azimuthal);
  Complex<Scalar> total(0);
  for (int i = 0; i < quad.n_radial; ++i) {
    const Scalar r = R / Scalar(2) * (Scalar(xi[i]) + Scalar(1));
    Complex<Scalar> ring(0);
    for (int j = 0; j < quad.n_azimuthal; ++j) {
      const Scalar x = r * std::cos(dphi * Scalar(j));
      const Scalar y = r * std::sin(dphi * Scalar(j));
      ring += std::conj(detail::lg_cartesian(a, x, y)) * detail::lg_cartesian(b, x, y);
    }
    total += ring * (Scalar(wi[i]) * R / Scalar(2) * r);
  }
  return total * dphi;
}

namespace detail {

/** e^{-s} I_n(s) for s >= 0, n in {0, 1}, without overflow. */
template <typename Scalar> Scalar scaled_bessel_i(int n, Scalar s) {
  if (s < Scalar(500))
    return std::exp(-s) * std::cyl_bessel_i(Scalar(n), s);
  // Hankel asymptotic series; at s >= 500 twelve terms reach double precision.
  const Scalar mu = Scalar(4 * n * n);
  Scalar term = 1, sum = 1;
  for (int k = 1; k <= 12; ++k) {
    term *= -(mu - Scalar((2 * k - 1) * (2 * k - 1))) / (Scalar(8 * k) * s);
    sum += term;
  }
  return sum / std::sqrt(Scalar(2) * std::numbers::pi_v<Scalar> * s);
}

} // namespace detail

template <typename Scalar> StokesBasisProjection<Scalar> stokes_basis_closed_form(Scalar x0, Scalar w) {
  if (!(w > Scalar(0)) || !std::isfinite(x0))
    throw InvalidInput("stokes_basis_closed_form: waist must be positive and x0 finite");
  constexpr Scalar pi = std::numbers::pi_v<Scalar>;
  const Scalar u = x0 / w, s = u * u;
  const Scalar e0 = detail::scaled_bessel_i(0, s), e1 = detail::scaled_bessel_i(1, s);
  const Scalar k0 = std::sqrt(pi / Scalar(2)), k1 = std::sqrt(pi) / Scalar(2);
  // d/dw = -(u / w) d/du
  const Scalar df0 = -k0 * (e0 - e1);
  const Scalar df1 = Scalar(2) * k1 * u * (e1 - e0);
  StokesBasisProjection<Scalar> out;
  out.a[0] = Complex<Scalar>(-k0 * u * (e0 + e1));
  out.a[1] = Complex<Scalar>(k1 * e0);
  out.da_dw[0] = Complex<Scalar>(-u / w * df0);
  out.da_dw[1] = Complex<Scalar>(-u / w * df1);
  return out;
}

} // namespace oamq
