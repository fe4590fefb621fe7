#include "oamq/quantum_state.hpp"

#include <numeric>

namespace oamq {

void validate_density_matrix(const DensityMatrix4 &rho, double tol) {
  if (!rho.allFinite())
    throw InvalidInput("density matrix has non-finite entries");
  if ((rho - rho.adjoint()).cwiseAbs().maxCoeff() > tol)
    throw InvalidInput("density matrix is not Hermitian");
  if (std::abs(rho.trace() - std::complex<double>(1.0)) > tol)
    throw InvalidInput("density matrix trace differs from 1");
  const DensityMatrix4 h = (rho + rho.adjoint()) / 2.0;
  Eigen::SelfAdjointEigenSolver<DensityMatrix4> es(h, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() < -tol)
    throw InvalidInput("density matrix has a negative eigenvalue");
}

DensityMatrix4 pure_density(const KetVector4 &psi) { return psi * psi.adjoint(); }

KetVector4 make_pair_state(std::complex<double> alpha1) {
  const double c = 1.0 / std::sqrt(1.0 + std::norm(alpha1));
  KetVector4 psi = KetVector4::Zero();
  psi[0] = c;
  psi[3] = c * alpha1;
  return psi;
}

DensityMatrix4 werner_state(double p) {
  if (!(p >= 0.0 && p <= 1.0))
    throw InvalidInput("werner_state: mixing weight must lie in [0, 1]");
  return p * pure_density(make_pair_state(1.0)) + (1.0 - p) * DensityMatrix4::Identity() / 4.0;
}

std::complex<double> TruncatedOAMState::amplitude(int i) const {
  if (std::abs(i) > l_max)
    return 0.0;
  return amplitudes[static_cast<std::size_t>(i + l_max)];
}

KetVector4 TruncatedOAMState::to_pair_ket(double tol) const {
  for (int i = -l_max; i <= l_max; ++i)
    if (i != 0 && i != 1 && std::abs(amplitude(i)) > tol)
      throw InvalidInput("truncated state has weight outside the {0, 1} subspace");
  KetVector4 psi = KetVector4::Zero();
  psi[0] = amplitude(0);
  psi[3] = amplitude(1);
  return psi.normalized();
}

TruncatedOAMState make_truncated_state(const std::vector<std::complex<double>> &amps, int l_max) {
  if (l_max < 0)
    throw InvalidInput("make_truncated_state: l_max must be non-negative");
  if (amps.size() != static_cast<std::size_t>(2 * l_max + 1))
    throw InvalidInput("make_truncated_state: expected 2*l_max+1 amplitudes");
  const double n2 = std::accumulate(amps.begin(), amps.end(), 0.0,
                                    [](double s, const std::complex<double> &a) { return s + std::norm(a); });
  if (!(n2 > 0.0) || !std::isfinite(n2))
    throw InvalidInput("make_truncated_state: amplitudes are all zero");
  TruncatedOAMState st;
  st.l_max = l_max;
  st.normalization = 1.0 / std::sqrt(n2);
  st.amplitudes.reserve(amps.size());
  for (const auto &a : amps)
    st.amplitudes.push_back(a * st.normalization);
  return st;
}

ConservationReport conservation_check(const ConservationInput &in, double tol) {
  ConservationReport rep;
  rep.energy = std::abs(in.omega[0] + in.omega[1] - in.omega[2] - in.omega[3]) <= tol;
  rep.momentum = (in.k[0] + in.k[1] - in.k[2] - in.k[3]).cwiseAbs().maxCoeff() <= tol;
  rep.oam = std::abs(in.oam[0] + in.oam[1] - in.oam[2] - in.oam[3]) <= tol;
  return rep;
}

namespace {

Vector2cd analyzer_vector_impl(const AnalyzerSetting &setting, const QuadratureSpec &quad, ConvergenceCheck check) {
  if (setting.collected_mode.l != 0)
    throw InvalidInput("analyzer: the fiber collects LG_00 only");
  const auto collected = TransverseField<double>::single(setting.collected_mode);
  Vector2cd c;
  for (int b = 0; b < 2; ++b) {
    const LGMode<double> mode{0, oam_of_bit(setting.side, b), setting.collected_mode.w};
    c[b] = projection_amplitude(collected, TransverseField<double>::single(mode), setting.hologram, quad, check);
  }
  return c;
}

} // namespace

Vector2cd analyzer_vector(const AnalyzerSetting &setting, const QuadratureSpec &quad) {
  return analyzer_vector_impl(setting, quad, ConvergenceCheck::Enabled);
}

KetVector4 measurement_ket(const Vector2cd &s, const Vector2cd &as) {
  KetVector4 m;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      m[2 * i + j] = std::conj(s[i] * as[j]);
  return m;
}

double coincidence_probability(const DensityMatrix4 &rho, const Vector2cd &s, const Vector2cd &as) {
  validate_density_matrix(rho);
  const KetVector4 m = measurement_ket(s, as);
  return std::max(0.0, (m.adjoint() * rho * m)(0, 0).real());
}

double coincidence_probability(const DensityMatrix4 &rho, const AnalyzerSetting &stokes,
                               const AnalyzerSetting &antistokes, const QuadratureSpec &quad) {
  if (stokes.side != Side::Stokes || antistokes.side != Side::AntiStokes)
    throw InvalidInput("coincidence_probability: analyzer sides swapped");
  return coincidence_probability(rho, analyzer_vector(stokes, quad), analyzer_vector(antistokes, quad));
}

double balanced_displacement(Side side, int order, double w, int sign, const QuadratureSpec &quad) {
  if (sign != 1 && sign != -1)
    throw InvalidInput("balanced_displacement: sign must be +1 or -1");
  auto imbalance = [&](double x0) {
    const AnalyzerSetting s{{order, sign * x0}, {0, 0, w}, side};
    const Vector2cd c = analyzer_vector_impl(s, quad, ConvergenceCheck::Disabled);
    return std::abs(c[0]) - std::abs(c[1]);
  };
  double lo = 0.0, hi = 5.0 * w;
  if (!(imbalance(lo) < 0.0 && imbalance(hi) > 0.0))
    throw NumericalFailure("balanced_displacement: no sign change on [0, 5w]");
  while (hi - lo > 1e-12 * w) {
    const double mid = 0.5 * (lo + hi);
    (imbalance(mid) < 0.0 ? lo : hi) = mid;
  }
  const double x0 = sign * 0.5 * (lo + hi);
  analyzer_vector({{order, x0}, {0, 0, w}, side}, quad);
  return x0;
}

} // namespace oamq
