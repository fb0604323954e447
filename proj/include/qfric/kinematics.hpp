#ifndef QFRIC_KINEMATICS_HPP
#define QFRIC_KINEMATICS_HPP

#include "qfric/medium.hpp"
#include "qfric/types.hpp"

namespace qfric {

/// (1 - beta^2)^(-1/2); |beta| >= 1 is rejected.
double lorentz_gamma(double beta);

/// Medium velocity beta (units of c) along x.
class MotionFrame {
 public:
  MotionFrame() = default;
  explicit MotionFrame(double beta) : beta_(beta), gamma_(lorentz_gamma(beta)) {}

  double beta() const { return beta_; }
  double gamma() const { return gamma_; }
  /// diag(1, gamma, gamma)
  RealTensor3<double> lambda() const { return Eigen::Vector3d(1.0, gamma_, gamma_).asDiagonal(); }
  /// Cross-product tensor of the velocity: velocity_cross() * a == V x a.
  RealTensor3<double> velocity_cross() const { return cross_matrix<double>(Eigen::Vector3d(beta_, 0, 0)); }
  MotionFrame reversed() const { return MotionFrame(-beta_); }

 private:
  double beta_ = 0.0;
  double gamma_ = 1.0;
};

struct DopplerPair {
  double omega_minus;
  double omega_plus;
};

/// gamma (omega -+ beta kx).
DopplerPair doppler(const MotionFrame& frame, double omega, double kx);

struct CouplingTensors {
  ComplexTensor3 ee, bb, eb, be;
};

CouplingTensors coupling_tensors(const SusceptibilityModel& model, const MotionFrame& frame,
                                 double omega_rest);

struct SusceptibilityTensors {
  ComplexTensor3 ee, bb, eb, be;
};

/// Lab-frame susceptibility tensors for a mode (omega_lab, kx): rest-frame
/// chi at the Doppler frequency dressed by the Lambda and V-cross structure.
SusceptibilityTensors moving_susceptibility_tensors(const SusceptibilityModel& model,
                                                    const MotionFrame& frame, double omega_lab,
                                                    double kx);

}  // namespace qfric

#endif  // QFRIC_KINEMATICS_HPP
