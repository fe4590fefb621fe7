#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace oamq {

template <typename Scalar> using Complex = std::complex<Scalar>;

/** 2-component single-qubit amplitude vector */
template <typename Scalar> using Vector2c = Eigen::Matrix<Complex<Scalar>, 2, 1>;

/** 4-component two-qubit amplitude vector */
template <typename Scalar> using Vector4c = Eigen::Matrix<Complex<Scalar>, 4, 1>;

template <typename Scalar> using Matrix2c = Eigen::Matrix<Complex<Scalar>, 2, 2>;

template <typename Scalar> using Matrix4c = Eigen::Matrix<Complex<Scalar>, 4, 4>;

using Vector2cd = Vector2c<double>;
using Vector4cd = Vector4c<double>;
using Matrix2cd = Matrix2c<double>;
using Matrix4cd = Matrix4c<double>;

/** Rejected input: precondition or invariant violated by the caller. */
class InvalidInput : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/** Numerical failure: quadrature or optimizer did not meet its tolerance. */
class NumericalFailure : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace oamq
