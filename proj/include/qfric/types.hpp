#ifndef QFRIC_TYPES_HPP
#define QFRIC_TYPES_HPP

#include <Eigen/Dense>

#include <complex>
#include <stdexcept>
#include <string>

// Natural units throughout: c = hbar = eps0 = mu0 = 1. Frequencies and
// wavenumbers are measured in units of a reference resonance frequency.
namespace qfric {

template <typename T> using Complex = std::complex<T>;

/// Dense 3x3 complex tensor (Green functions, susceptibility and coupling tensors).
template <typename T> using Tensor3 = Eigen::Matrix<std::complex<T>, 3, 3>;
template <typename T> using RealTensor3 = Eigen::Matrix<T, 3, 3>;
template <typename T> using Vector3 = Eigen::Matrix<T, 3, 1>;
template <typename T> using ComplexVector3 = Eigen::Matrix<std::complex<T>, 3, 1>;

using ComplexTensor3 = Tensor3<double>;
using cdouble = std::complex<double>;

template <typename Derived>
auto hermitian_part(const Eigen::MatrixBase<Derived>& m) {
  return ((m + m.adjoint()) / typename Derived::Scalar(2)).eval();
}

/// (m - m^dagger) / 2i. Hermitian; reduces to Im m for symmetric m.
template <typename Derived>
auto antihermitian_part(const Eigen::MatrixBase<Derived>& m) {
  using S = typename Derived::Scalar;
  return ((m - m.adjoint()) / S(0, 2)).eval();
}

/// Largest entry modulus.
template <typename Derived>
double max_abs(const Eigen::MatrixBase<Derived>& m) {
  return static_cast<double>(m.cwiseAbs().maxCoeff());
}

/// Antisymmetric tensor of v x (.), i.e. cross_matrix(v) * a == v.cross(a).
template <typename T>
RealTensor3<T> cross_matrix(const Vector3<T>& v) {
  RealTensor3<T> m;
  m << T(0), -v(2), v(1),
       v(2), T(0), -v(0),
       -v(1), v(0), T(0);
  return m;
}

/// Violated precondition (bad argument, degenerate configuration).
class DomainError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// File could not be read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numerical integral failed to reach the requested tolerance.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double achieved_error)
      : std::runtime_error(what + " (achieved error estimate " +
                           std::to_string(achieved_error) + ")"),
        achieved_error_(achieved_error) {}
  double achieved_error() const noexcept { return achieved_error_; }

 private:
  double achieved_error_;
};

}  // namespace qfric

#endif  // QFRIC_TYPES_HPP
