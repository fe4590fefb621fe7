#pragma once

// Random states and fixtures shared by the test binaries.

#include <random>

#include "oamq/quantum_state.hpp"

namespace test_support {

inline std::complex<double> gaussian_complex(std::mt19937_64 &rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  const double re = n(rng);
  const double im = n(rng);
  return {re, im};
}

/** G G^dagger / tr with G a 4 x rank complex Gaussian matrix. */
inline oamq::DensityMatrix4 random_density(std::mt19937_64 &rng, int rank = 4) {
  Eigen::Matrix<std::complex<double>, 4, Eigen::Dynamic> g(4, rank);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < rank; ++j)
      g(i, j) = gaussian_complex(rng);
  oamq::DensityMatrix4 rho = g * g.adjoint();
  rho /= rho.trace();
  return (rho + rho.adjoint()) / 2.0;
}

inline oamq::Vector2cd random_ket2(std::mt19937_64 &rng) {
  oamq::Vector2cd v(gaussian_complex(rng), gaussian_complex(rng));
  return v.normalized();
}

inline oamq::Matrix2cd random_unitary2(std::mt19937_64 &rng) {
  oamq::Matrix2cd g;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      g(i, j) = gaussian_complex(rng);
  Eigen::HouseholderQR<oamq::Matrix2cd> qr(g);
  return qr.householderQ();
}

/// X state with fidelity F to the balanced pair state and concurrence C:
/// coherence C/2 between |0,0> and |1,-1>, populations (1-q)/2 there and
/// q = 1 - 2F + C on |1,0>. Requires 0 <= C <= F and q in [0, 1].
inline oamq::DensityMatrix4 x_state(double F, double C) {
  const double q = 1.0 - 2.0 * F + C;
  oamq::DensityMatrix4 rho = oamq::DensityMatrix4::Zero();
  rho(0, 0) = rho(3, 3) = (1.0 - q) / 2.0;
  rho(0, 3) = rho(3, 0) = C / 2.0;
  rho(2, 2) = q;
  return rho;
}

inline double trace_distance(const oamq::DensityMatrix4 &a, const oamq::DensityMatrix4 &b) {
  const oamq::DensityMatrix4 d = a - b;
  Eigen::SelfAdjointEigenSolver<oamq::DensityMatrix4> es((d + d.adjoint()) / 2.0, Eigen::EigenvaluesOnly);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

} // namespace test_support
