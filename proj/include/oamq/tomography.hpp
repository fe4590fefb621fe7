#pragma once

//! Two-qubit state tomography from coincidence counts: the 16-setting
//! product-projector design, count simulation, linear inversion and
//! maximum-likelihood reconstruction with rho = T^dagger T / tr(T^dagger T).

#include <cstdint>
#include <string>
#include <vector>

#include "oamq/quantum_state.hpp"

namespace oamq {

/// Single-qubit analyzer sqrt(efficiency) (cos(t/2) |0> + e^{i p} sin(t/2) |1>).
/// For the anti-Stokes arm the logical |1> is the OAM -1 mode.
struct QubitProjector {
  double theta_bloch = 0.0;
  double phi_bloch = 0.0;
  double efficiency = 1.0;

  Vector2cd ket() const; // includes sqrt(efficiency)
};

struct MeasurementRecord {
  QubitProjector stokes;
  QubitProjector antistokes;
  std::int64_t counts = 0;
  double exposure_s = 1.0;
};

struct SettingPair {
  QubitProjector stokes;
  QubitProjector antistokes;
  std::string label;
};

/// |0>, |1>, (|0>+|1>)/sqrt2, (|0>+i|1>)/sqrt2 on each arm, all 16 pairs,
/// Stokes index outer. The first pair is (|0>, |0>).
std::vector<SettingPair> design_measurements();

/** Product measurement operator for one setting pair (efficiencies included). */
Matrix4cd measurement_operator(const QubitProjector &stokes, const QubitProjector &antistokes);

/** Analyzer realized by a hologram + fiber arm, efficiency = ||c||^2. */
QubitProjector physical_projector(const AnalyzerSetting &setting, double rotation_rad = 0.0,
                                  const QuadratureSpec &quad = {});

/// Physically realizable 16-setting design for waist w: far-displaced (|0>),
/// centered (|1>), balanced displacement (D) and the balanced displacement
/// rotated by a quarter turn of relative phase (R) on each arm.
std::vector<SettingPair> physical_design_measurements(double w, const QuadratureSpec &quad = {});

/// Poisson counts with mean n_per_setting * tr(rho M) per setting; exposure 1 s.
std::vector<MeasurementRecord> simulate_tomography_counts(const DensityMatrix4 &rho, double n_per_setting,
                                                          std::uint64_t seed,
                                                          const std::vector<SettingPair> &design = design_measurements());

/// Hermitian, unit-trace, possibly non-PSD solution of rate_k = N tr(rho M_k).
Matrix4cd linear_inversion(const std::vector<MeasurementRecord> &records);
Matrix4cd linear_inversion(const std::vector<SettingPair> &settings, const Eigen::VectorXd &rates);

/** Clip negative eigenvalues and renormalize. */
DensityMatrix4 project_to_physical(const Matrix4cd &h);

struct MleOptions {
  int max_iter = 5000;
  double tol = 1e-10;
};

struct TomographyResult {
  DensityMatrix4 rho = DensityMatrix4::Identity() / 4.0;
  double fidelity_to_bell = 0.0;
  double concurrence = 0.0;
  double eof = 0.0;
  /// Poisson log-likelihood relative to the saturated model, sum n log(mu/n) - mu + n (<= 0).
  double log_likelihood = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> likelihood_history; // one entry per accepted step, starting at the initial point
};

namespace detail {

/** rho = T^dagger T / tr for T lower-triangular from 16 reals. */
Matrix4cd cholesky_unpack(const Eigen::Matrix<double, 16, 1> &t);
Eigen::Matrix<double, 16, 1> cholesky_pack(const Matrix4cd &T);

/// Saturated-relative Poisson log-likelihood and its gradient in the 16
/// Cholesky parameters, mu_k = exposure_k tr(T^dagger T M_k).
double log_likelihood(const Eigen::Matrix<double, 16, 1> &t, const std::vector<Matrix4cd> &ops,
                      const Eigen::VectorXd &counts, const Eigen::VectorXd &exposure,
                      Eigen::Matrix<double, 16, 1> *grad);

} // namespace detail

TomographyResult mle_reconstruct(const std::vector<MeasurementRecord> &records, const MleOptions &opt = {});

} // namespace oamq
