#include "qfric/kinematics.hpp"

#include <cmath>

namespace qfric {

double lorentz_gamma(double beta) {
  if (!std::isfinite(beta) || !(std::abs(beta) < 1.0))
    throw DomainError("lorentz_gamma: |beta| must be < 1");
  return 1.0 / std::sqrt((1.0 - beta) * (1.0 + beta));
}

DopplerPair doppler(const MotionFrame& frame, double omega, double kx) {
  if (!std::isfinite(omega) || !std::isfinite(kx)) throw DomainError("doppler: non-finite input");
  const double g = frame.gamma(), v = frame.beta() * kx;
  return {g * (omega - v), g * (omega + v)};
}

CouplingTensors coupling_tensors(const SusceptibilityModel& model, const MotionFrame& frame,
                                 double omega_rest) {
  const double a = coupling_amplitude(model, Response::electric, omega_rest);
  const double b = coupling_amplitude(model, Response::magnetic, omega_rest);
  const RealTensor3<double> lam = frame.lambda();
  const RealTensor3<double> vx = frame.velocity_cross();
  const double g = frame.gamma();
  CouplingTensors t;
  t.ee = (lam * a).cast<cdouble>();
  t.bb = (lam * b).cast<cdouble>();
  t.eb = (g * b * vx).cast<cdouble>();
  t.be = (-g * a * vx).cast<cdouble>();
  return t;
}

SusceptibilityTensors moving_susceptibility_tensors(const SusceptibilityModel& model,
                                                    const MotionFrame& frame, double omega_lab,
                                                    double kx) {
  const double w = doppler(frame, omega_lab, kx).omega_minus;
  const cdouble ce = chi(model, Response::electric, w);
  const cdouble cb = chi(model, Response::magnetic, w);
  const double g = frame.gamma(), b = frame.beta();
  const RealTensor3<double> lam2 = frame.lambda() * frame.lambda();
  const RealTensor3<double> pyz = Eigen::Vector3d(0.0, 1.0, 1.0).asDiagonal();
  const ComplexTensor3 vx = frame.velocity_cross().cast<cdouble>();

  SusceptibilityTensors s;
  s.ee = lam2.cast<cdouble>() * ce + (g * g * b * b) * pyz.cast<cdouble>() * cb;
  s.bb = lam2.cast<cdouble>() * cb + (g * g * b * b) * pyz.cast<cdouble>() * ce;
  s.eb = (g * g) * vx * (ce + cb);
  s.be = -s.eb;
  return s;
}

}  // namespace qfric
