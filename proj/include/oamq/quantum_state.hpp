#pragma once

//! Two-qubit OAM states of a Stokes/anti-Stokes pair and the measures used
//! to characterize them.
//!
//! Basis order (index = 2 * stokes_bit + antistokes_bit):
//!   0: |0>_S |0>_AS   1: |0>_S |-1>_AS   2: |1>_S |0>_AS   3: |1>_S |-1>_AS
//! Logical qubit value 1 is OAM +1 on the Stokes side, -1 on the anti-Stokes side.

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "oamq/oam_optics.hpp"

namespace oamq {

using DensityMatrix4 = Matrix4cd;
using KetVector4 = Vector4cd;

inline constexpr double kStateTolerance = 1e-9;

enum class Side { Stokes, AntiStokes };

/** OAM index carried by logical qubit value `bit` on a given side. */
constexpr int oam_of_bit(Side side, int bit) { return bit == 0 ? 0 : (side == Side::Stokes ? 1 : -1); }

/// Throws InvalidInput unless rho is Hermitian, unit trace and has no
/// eigenvalue below -tol.
void validate_density_matrix(const DensityMatrix4 &rho, double tol = kStateTolerance);

DensityMatrix4 pure_density(const KetVector4 &psi);

/** C (|0,0> + alpha1 |1,-1>), C = 1 / sqrt(1 + |alpha1|^2). */
KetVector4 make_pair_state(std::complex<double> alpha1 = 1.0);

/** p |Phi><Phi| + (1 - p) I/4 with Phi the balanced pair state. */
DensityMatrix4 werner_state(double p);

/// C sum_i alpha_i |i>_S |-i>_AS over i in [-l_max, l_max].
struct TruncatedOAMState {
  int l_max = 0;
  std::vector<std::complex<double>> amplitudes; // normalized, index i + l_max
  double normalization = 1.0;                   // C applied to the raw amplitudes

  std::complex<double> amplitude(int i) const;
  /// Projection onto the two-qubit subspace i in {0, 1}; throws if any other
  /// component is non-negligible.
  KetVector4 to_pair_ket(double tol = kStateTolerance) const;
};

TruncatedOAMState make_truncated_state(const std::vector<std::complex<double>> &amps, int l_max);

/// Energy, momentum and OAM balance of the four-wave-mixing process.
struct ConservationInput {
  std::array<double, 4> omega{};           // S, AS, P, C
  std::array<Eigen::Vector3d, 4> k{Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero(),
                                   Eigen::Vector3d::Zero()};
  std::array<double, 4> oam{};
};

struct ConservationReport {
  bool energy = false;
  bool momentum = false;
  bool oam = false;
  bool all() const { return energy && momentum && oam; }
};

ConservationReport conservation_check(const ConservationInput &in, double tol = 1e-9);

/// Hologram plus single-mode fiber on one arm.
struct AnalyzerSetting {
  HologramSetting<double> hologram;
  LGMode<double> collected_mode{0, 0, 0.8};
  Side side = Side::Stokes;
};

/// Transmitted amplitudes (c_0, c_1) of the side's two basis modes into the
/// collected mode. Not normalized: mode-overlap loss is kept.
Vector2cd analyzer_vector(const AnalyzerSetting &setting, const QuadratureSpec &quad = {});

/// Measurement ket m with p = m^dagger rho m; m = conj(c_S) (x) conj(c_AS).
KetVector4 measurement_ket(const Vector2cd &stokes_amplitudes, const Vector2cd &antistokes_amplitudes);

double coincidence_probability(const DensityMatrix4 &rho, const Vector2cd &stokes_amplitudes,
                               const Vector2cd &antistokes_amplitudes);

double coincidence_probability(const DensityMatrix4 &rho, const AnalyzerSetting &stokes,
                               const AnalyzerSetting &antistokes, const QuadratureSpec &quad = {});

/// Displacement x0 of sign `sign` at which |c_0| = |c_1| for the given
/// side and hologram order.
double balanced_displacement(Side side, int order, double w, int sign = 1, const QuadratureSpec &quad = {});

// ---------------------------------------------------------------------------
// Measures (header templates on the scalar type).

/** <psi|rho|psi>. */
template <typename Scalar> Scalar fidelity(const Matrix4c<Scalar> &rho, const Vector4c<Scalar> &psi) {
  return (psi.adjoint() * rho * psi)(0, 0).real();
}

/** sigma_y (x) sigma_y. */
template <typename Scalar> Matrix4c<Scalar> spin_flip() {
  Matrix4c<Scalar> s = Matrix4c<Scalar>::Zero();
  s(0, 3) = s(3, 0) = Scalar(-1);
  s(1, 2) = s(2, 1) = Scalar(1);
  return s;
}

/// Square roots of the eigenvalues of rho (sy x sy) rho^* (sy x sy), descending.
///
/// Evaluated as the singular values of W^T (sy x sy) W with rho = W W^dagger,
/// W the eigenvectors scaled by sqrt(eigenvalue). Eigenvalues below 1e-13 are
/// treated as exact zeros so that pure states keep full precision.
template <typename Scalar> Eigen::Matrix<Scalar, 4, 1> wootters_lambdas(const Matrix4c<Scalar> &rho) {
  const Matrix4c<Scalar> herm = (rho + rho.adjoint()) / Scalar(2);
  Eigen::SelfAdjointEigenSolver<Matrix4c<Scalar>> es(herm);
  const auto &ev = es.eigenvalues();
  if (ev.minCoeff() < Scalar(-kStateTolerance))
    throw InvalidInput("concurrence: density matrix has a negative eigenvalue");
  Eigen::Matrix<Scalar, 4, 1> root;
  for (int i = 0; i < 4; ++i)
    root[i] = ev[i] > Scalar(1e-13) ? std::sqrt(ev[i]) : Scalar(0);
  const Matrix4c<Scalar> W = es.eigenvectors() * root.template cast<Complex<Scalar>>().asDiagonal();
  const Matrix4c<Scalar> tau = W.transpose() * spin_flip<Scalar>() * W;
  Eigen::Matrix<Scalar, 4, 1> lam = Eigen::JacobiSVD<Matrix4c<Scalar>>(tau).singularValues();
  std::sort(lam.data(), lam.data() + 4, [](Scalar a, Scalar b) { return a > b; });
  return lam;
}

/** Wootters concurrence max(0, l1 - l2 - l3 - l4). */
template <typename Scalar> Scalar concurrence(const Matrix4c<Scalar> &rho) {
  const auto lam = wootters_lambdas(rho);
  return std::max(Scalar(0), lam[0] - lam[1] - lam[2] - lam[3]);
}

/** -x log2 x - (1-x) log2 (1-x), with h(0) = h(1) = 0. */
template <typename Scalar> Scalar binary_entropy(Scalar x) {
  auto term = [](Scalar v) { return v <= Scalar(0) ? Scalar(0) : -v * std::log2(v); };
  return term(x) + term(Scalar(1) - x);
}

template <typename Scalar> Scalar eof_from_concurrence(Scalar c) {
  if (!(c >= Scalar(-kStateTolerance)) || c > Scalar(1) + Scalar(kStateTolerance))
    throw InvalidInput("entanglement_of_formation: concurrence outside [0, 1]");
  c = std::clamp(c, Scalar(0), Scalar(1));
  return binary_entropy((Scalar(1) + std::sqrt(Scalar(1) - c * c)) / Scalar(2));
}

template <typename Scalar> Scalar entanglement_of_formation(const Matrix4c<Scalar> &rho) {
  return eof_from_concurrence(concurrence(rho));
}

} // namespace oamq
