#include "oamq/tomography.hpp"

#include <numbers>
#include <random>

#include "oamq/coincidence_sim.hpp"

namespace oamq {

using Params = Eigen::Matrix<double, 16, 1>;

Vector2cd QubitProjector::ket() const {
  const double s = std::sqrt(efficiency);
  return Vector2cd(s * std::cos(theta_bloch / 2), s * std::polar(std::sin(theta_bloch / 2), phi_bloch));
}

namespace {

constexpr double kPi = std::numbers::pi;

QubitProjector bloch(double theta, double phi) { return {theta, phi, 1.0}; }

Matrix2cd pauli(int a) {
  Matrix2cd m = Matrix2cd::Zero();
  switch (a) {
  case 0:
    m(0, 0) = m(1, 1) = 1.0;
    break;
  case 1:
    m(0, 1) = m(1, 0) = 1.0;
    break;
  case 2:
    m(0, 1) = std::complex<double>(0, -1);
    m(1, 0) = std::complex<double>(0, 1);
    break;
  default:
    m(0, 0) = 1.0;
    m(1, 1) = -1.0;
  }
  return m;
}

Matrix4cd kron(const Matrix2cd &a, const Matrix2cd &b) {
  Matrix4cd k;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      k.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
  return k;
}

// sigma_a (x) sigma_b / 4, unit-trace only for a = b = 0.
const std::vector<Matrix4cd> &pauli_basis() {
  static const std::vector<Matrix4cd> basis = [] {
    std::vector<Matrix4cd> b;
    for (int a = 0; a < 4; ++a)
      for (int c = 0; c < 4; ++c)
        b.push_back(kron(pauli(a), pauli(c)) / 4.0);
    return b;
  }();
  return basis;
}

QubitProjector from_ket(const Vector2cd &m) {
  const double eff = m.squaredNorm();
  if (!(eff > 0.0))
    throw NumericalFailure("physical_projector: analyzer transmits nothing");
  QubitProjector q;
  q.efficiency = eff;
  q.theta_bloch = 2.0 * std::atan2(std::abs(m[1]), std::abs(m[0]));
  q.phi_bloch = (std::abs(m[0]) > 0.0 && std::abs(m[1]) > 0.0) ? std::arg(m[1] / m[0]) : 0.0;
  return q;
}

} // namespace

std::vector<SettingPair> design_measurements() {
  const std::pair<const char *, QubitProjector> single[4] = {
      {"0", bloch(0.0, 0.0)}, {"1", bloch(kPi, 0.0)}, {"D", bloch(kPi / 2, 0.0)}, {"R", bloch(kPi / 2, kPi / 2)}};
  std::vector<SettingPair> out;
  for (const auto &[ls, s] : single)
    for (const auto &[la, a] : single)
      out.push_back({s, a, std::string(ls) + la});
  return out;
}

Matrix4cd measurement_operator(const QubitProjector &stokes, const QubitProjector &antistokes) {
  const Vector2cd s = stokes.ket(), a = antistokes.ket();
  return kron(s * s.adjoint(), a * a.adjoint());
}

QubitProjector physical_projector(const AnalyzerSetting &setting, double rotation_rad, const QuadratureSpec &quad) {
  const Vector2cd c = analyzer_vector(setting, quad);
  // Dislocation rotated about the beam axis: c_l -> e^{-i (order + l) beta} c_l.
  Vector2cd m;
  for (int b = 0; b < 2; ++b) {
    const int l = oam_of_bit(setting.side, b);
    m[b] = std::conj(c[b] * std::polar(1.0, -(setting.hologram.order + l) * rotation_rad));
  }
  return from_ket(m);
}

std::vector<SettingPair> physical_design_measurements(double w, const QuadratureSpec &quad) {
  auto arm = [&](Side side, int order) {
    const double xb = balanced_displacement(side, order, w, 1, quad);
    const int l1 = oam_of_bit(side, 1);
    const LGMode<double> fiber{0, 0, w};
    return std::vector<std::pair<std::string, QubitProjector>>{
        {"f", physical_projector({{order, 20.0 * w}, fiber, side}, 0.0, quad)},
        {"c", physical_projector({{order, 0.0}, fiber, side}, 0.0, quad)},
        {"d", physical_projector({{order, xb}, fiber, side}, 0.0, quad)},
        {"r", physical_projector({{order, xb}, fiber, side}, (kPi / 2) / l1, quad)}};
  };
  const auto s = arm(Side::Stokes, -1);
  const auto a = arm(Side::AntiStokes, 1);
  std::vector<SettingPair> out;
  for (const auto &[ls, ps] : s)
    for (const auto &[la, pa] : a)
      out.push_back({ps, pa, ls + la});
  return out;
}

std::vector<MeasurementRecord> simulate_tomography_counts(const DensityMatrix4 &rho, double n_per_setting,
                                                          std::uint64_t seed, const std::vector<SettingPair> &design) {
  validate_density_matrix(rho);
  if (!(n_per_setting >= 0.0) || !std::isfinite(n_per_setting))
    throw InvalidInput("simulate_tomography_counts: expected counts must be non-negative");
  std::vector<MeasurementRecord> out;
  out.reserve(design.size());
  for (std::size_t k = 0; k < design.size(); ++k) {
    const Matrix4cd m = measurement_operator(design[k].stokes, design[k].antistokes);
    const double mean = std::max(0.0, n_per_setting * (rho * m).trace().real());
    std::int64_t n = 0;
    if (mean > 0.0) {
      std::mt19937_64 rng(derive_seed(seed, k));
      n = std::poisson_distribution<std::int64_t>(mean)(rng);
    }
    out.push_back({design[k].stokes, design[k].antistokes, n, 1.0});
  }
  return out;
}

Matrix4cd linear_inversion(const std::vector<SettingPair> &settings, const Eigen::VectorXd &rates) {
  const int K = static_cast<int>(settings.size());
  if (K != rates.size())
    throw InvalidInput("linear_inversion: one rate per setting required");
  if (K < 16)
    throw InvalidInput("linear_inversion: fewer than 16 settings");
  const auto &basis = pauli_basis();
  Eigen::MatrixXd A(K, 16);
  for (int k = 0; k < K; ++k) {
    const Matrix4cd m = measurement_operator(settings[k].stokes, settings[k].antistokes);
    for (int j = 0; j < 16; ++j)
      A(k, j) = (basis[j] * m).trace().real();
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  qr.setThreshold(1e-10);
  if (qr.rank() < 16)
    throw InvalidInput("linear_inversion: measurement design is not informationally complete");
  const Eigen::VectorXd x = qr.solve(rates);
  Matrix4cd X = Matrix4cd::Zero();
  for (int j = 0; j < 16; ++j)
    X += x[j] * basis[j];
  const double tr = X.trace().real();
  if (!(tr > 0.0))
    throw InvalidInput("linear_inversion: reconstructed trace is not positive");
  X /= tr;
  return (X + X.adjoint()) / 2.0;
}

Matrix4cd linear_inversion(const std::vector<MeasurementRecord> &records) {
  std::vector<SettingPair> s;
  Eigen::VectorXd rates(static_cast<Eigen::Index>(records.size()));
  for (std::size_t k = 0; k < records.size(); ++k) {
    if (records[k].counts < 0 || !(records[k].exposure_s > 0.0))
      throw InvalidInput("linear_inversion: invalid measurement record");
    s.push_back({records[k].stokes, records[k].antistokes, {}});
    rates[static_cast<Eigen::Index>(k)] = static_cast<double>(records[k].counts) / records[k].exposure_s;
  }
  return linear_inversion(s, rates);
}

DensityMatrix4 project_to_physical(const Matrix4cd &h) {
  Eigen::SelfAdjointEigenSolver<Matrix4cd> es((h + h.adjoint()) / 2.0);
  const Eigen::Vector4d ev = es.eigenvalues().cwiseMax(0.0);
  if (!(ev.sum() > 0.0))
    throw NumericalFailure("project_to_physical: no positive eigenvalue");
  DensityMatrix4 rho = es.eigenvectors() * (ev / ev.sum()).cast<std::complex<double>>().asDiagonal() *
                       es.eigenvectors().adjoint();
  return (rho + rho.adjoint()) / 2.0;
}

namespace detail {

// Layout: 4 real diagonal entries, then (re, im) of T(i, j) for i > j row-major.
Matrix4cd cholesky_unpack(const Params &t) {
  Matrix4cd T = Matrix4cd::Zero();
  for (int i = 0; i < 4; ++i)
    T(i, i) = t[i];
  int k = 4;
  for (int i = 1; i < 4; ++i)
    for (int j = 0; j < i; ++j, k += 2)
      T(i, j) = std::complex<double>(t[k], t[k + 1]);
  return T;
}

Params cholesky_pack(const Matrix4cd &T) {
  Params t;
  for (int i = 0; i < 4; ++i)
    t[i] = T(i, i).real();
  int k = 4;
  for (int i = 1; i < 4; ++i)
    for (int j = 0; j < i; ++j, k += 2) {
      t[k] = T(i, j).real();
      t[k + 1] = T(i, j).imag();
    }
  return t;
}

double log_likelihood(const Params &t, const std::vector<Matrix4cd> &ops, const Eigen::VectorXd &counts,
                      const Eigen::VectorXd &exposure, Params *grad) {
  const Matrix4cd T = cholesky_unpack(t);
  const Matrix4cd S = T.adjoint() * T;
  double ll = 0.0;
  Matrix4cd G = Matrix4cd::Zero();
  for (std::size_t k = 0; k < ops.size(); ++k) {
    const double mu = exposure[k] * (S * ops[k]).trace().real();
    const double n = counts[k];
    if (n > 0.0) {
      if (!(mu > 0.0))
        return -std::numeric_limits<double>::infinity();
      ll += n * std::log(mu / n) - mu + n;
      if (grad)
        G += (n / mu - 1.0) * exposure[k] * ops[k];
    } else {
      ll -= mu;
      if (grad)
        G -= exposure[k] * ops[k];
    }
  }
  if (grad) {
    // d ll = 2 Re tr(G T^dagger dT)
    const Matrix4cd GT = G * T.adjoint();
    for (int i = 0; i < 4; ++i)
      (*grad)[i] = 2.0 * GT(i, i).real();
    int k = 4;
    for (int i = 1; i < 4; ++i)
      for (int j = 0; j < i; ++j, k += 2) {
        (*grad)[k] = 2.0 * GT(j, i).real();
        (*grad)[k + 1] = -2.0 * GT(j, i).imag();
      }
  }
  return ll;
}

} // namespace detail

namespace {

// T lower-triangular with T^dagger T = rho, via Cholesky of the index-reversed matrix.
Matrix4cd lower_factor(const DensityMatrix4 &rho) {
  Eigen::Matrix4d P = Eigen::Matrix4d::Zero();
  for (int i = 0; i < 4; ++i)
    P(i, 3 - i) = 1.0;
  const Matrix4cd Pc = P.cast<std::complex<double>>();
  const Matrix4cd reversed = Pc * rho * Pc;
  Eigen::LLT<Matrix4cd> llt(reversed);
  if (llt.info() != Eigen::Success)
    throw NumericalFailure("mle_reconstruct: initial state is not positive definite");
  const Matrix4cd L = llt.matrixL();
  return Pc * L.adjoint() * Pc;
}

} // namespace

TomographyResult mle_reconstruct(const std::vector<MeasurementRecord> &records, const MleOptions &opt) {
  const std::size_t K = records.size();
  std::vector<Matrix4cd> ops;
  Eigen::VectorXd counts(static_cast<Eigen::Index>(K)), exposure(static_cast<Eigen::Index>(K));
  double total = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    ops.push_back(measurement_operator(records[k].stokes, records[k].antistokes));
    counts[k] = static_cast<double>(records[k].counts);
    exposure[k] = records[k].exposure_s;
    total += counts[k];
  }
  if (!(total > 0.0))
    throw InvalidInput("mle_reconstruct: no counts recorded");

  // Start from the PSD-projected linear inversion, nudged off the boundary so
  // the Cholesky factor exists, and scaled to the observed total.
  DensityMatrix4 rho0 = project_to_physical(linear_inversion(records));
  rho0 = (1.0 - 1e-6) * rho0 + 1e-6 * DensityMatrix4::Identity() / 4.0;
  double predicted = 0.0;
  for (std::size_t k = 0; k < K; ++k)
    predicted += exposure[k] * (rho0 * ops[k]).trace().real();
  Params t = detail::cholesky_pack(lower_factor(rho0) * std::sqrt(total / predicted));

  Params g;
  double ll = detail::log_likelihood(t, ops, counts, exposure, &g);
  TomographyResult res;
  res.likelihood_history.push_back(ll);

  // BFGS on -ll with Armijo backtracking; a step is taken only if it raises ll.
  Eigen::Matrix<double, 16, 16> H = Eigen::Matrix<double, 16, 16>::Identity() / std::max(1.0, g.norm());
  int it = 0;
  for (; it < opt.max_iter; ++it) {
    Params dir = H * g;
    if (dir.dot(g) <= 0.0) {
      H = Eigen::Matrix<double, 16, 16>::Identity() / std::max(1.0, g.norm());
      dir = H * g;
    }
    double alpha = 1.0;
    Params t_new, g_new;
    double ll_new = -std::numeric_limits<double>::infinity();
    bool ok = false;
    for (int ls = 0; ls < 60; ++ls, alpha *= 0.5) {
      t_new = t + alpha * dir;
      ll_new = detail::log_likelihood(t_new, ops, counts, exposure, &g_new);
      if (std::isfinite(ll_new) && ll_new >= ll + 1e-4 * alpha * dir.dot(g)) {
        ok = true;
        break;
      }
    }
    if (!ok) {
      // No ascent along the quasi-Newton or gradient direction: stationary.
      res.converged = g.norm() < 1e-3 * std::sqrt(total);
      break;
    }
    const double gain = ll_new - ll;
    const Params s = t_new - t;
    const Params y = g - g_new; // gradient of -ll
    t = t_new;
    g = g_new;
    ll = ll_new;
    res.likelihood_history.push_back(ll);
    const double sy = s.dot(y);
    if (sy > 1e-300) {
      const Eigen::Matrix<double, 16, 16> I = Eigen::Matrix<double, 16, 16>::Identity();
      H = (I - s * y.transpose() / sy) * H * (I - y * s.transpose() / sy) + s * s.transpose() / sy;
    }
    if (gain < opt.tol) {
      res.converged = true;
      ++it;
      break;
    }
  }

  const Matrix4cd T = detail::cholesky_unpack(t);
  Matrix4cd S = T.adjoint() * T;
  S = (S + S.adjoint()) / 2.0;
  res.rho = S / S.trace().real();
  res.log_likelihood = ll;
  res.iterations = it;
  res.fidelity_to_bell = fidelity(res.rho, make_pair_state(1.0));
  res.concurrence = concurrence(res.rho);
  res.eof = eof_from_concurrence(res.concurrence);
  return res;
}

} // namespace oamq
