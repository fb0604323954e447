#include "qfric/greens.hpp"

#include <cmath>
#include <numbers>

namespace qfric {

namespace {

constexpr double kPi = std::numbers::pi;
// Truncate the transverse integrals once e^{-xi z} has fallen by e^-60.
constexpr double kDecayExponent = 60.0;

double sgn(double x) { return x < 0.0 ? -1.0 : 1.0; }

// sqrt(|a|^2 - |b|^2) without squaring away precision.
double root_diff(double a, double b) {
  const double x = std::abs(a), y = std::abs(b);
  return std::sqrt((x - y) * (x + y));
}

template <typename V>
void accumulate(IntegralResult<V>& into, const IntegralResult<V>& part, cdouble scale) {
  into.value += part.value * scale;
  into.error_estimate += part.error_estimate * std::abs(scale);
  into.evaluations += part.evaluations;
  into.converged = into.converged && part.converged;
}

}  // namespace

ComplexTensor3 free_green_k(const Eigen::Vector3d& k, double omega, double eta) {
  if (omega == 0.0 || !std::isfinite(omega)) throw DomainError("free_green_k: omega must be nonzero");
  if (!(eta >= 0.0)) throw DomainError("free_green_k: eta must be >= 0");
  const double kn = k.norm();
  const cdouble den = omega * omega * (kn - omega - cdouble(0, eta)) * (kn + omega + cdouble(0, eta));
  if (den == cdouble(0.0)) throw DomainError("free_green_k: on-shell wavevector with eta = 0");
  const RealTensor3<double> num = k * k.transpose() - omega * omega * RealTensor3<double>::Identity();
  return -num.cast<cdouble>() / den;
}

RealTensor3<double> im_free_green_coincident(double kx, double omega) {
  if (omega == 0.0 || !std::isfinite(omega) || !std::isfinite(kx))
    throw DomainError("im_free_green_coincident: omega must be nonzero and finite");
  RealTensor3<double> out = RealTensor3<double>::Zero();
  if (!(std::abs(kx) < std::abs(omega))) return out;
  const double w2 = omega * omega;
  const double k02 = (std::abs(omega) - std::abs(kx)) * (std::abs(omega) + std::abs(kx));
  const double pre = sgn(omega) / (8.0 * w2);
  out.diagonal() << pre * 2.0 * k02, pre * (w2 + kx * kx), pre * (w2 + kx * kx);
  return out;
}

cdouble vacuum_xi(double kpar2, double omega) {
  const double r = kpar2 - omega * omega;
  if (r >= 0.0) return std::sqrt(r);
  return {0.0, -sgn(omega) * std::sqrt(-r)};
}

ComplexTensor3 ReflectionCoefficients::reflected_dyad() const {
  return r11 * (e1 * e1.transpose()) + r22 * (e2_reflected * e2_incident.transpose()) +
         r12 * (e2_reflected * e1.transpose()) + r21 * (e1 * e2_incident.transpose());
}

ReflectionCoefficients reflection_coefficients_with_xi(const SusceptibilityModel& model,
                                                       const MotionFrame& frame, double kx,
                                                       double ky, double omega, cdouble xi) {
  const double kpar2 = kx * kx + ky * ky;
  const double kpar = std::sqrt(kpar2);
  if (kpar == 0.0) throw DomainError("reflection_coefficients: polarization basis undefined at k = 0");
  if (omega == 0.0) throw DomainError("reflection_coefficients: omega must be nonzero");

  ReflectionCoefficients rc;
  rc.omega_minus = doppler(frame, omega, kx).omega_minus;
  rc.epsilon = 1.0 + chi(model, Response::electric, rc.omega_minus);
  rc.mu = 1.0 / (1.0 - chi(model, Response::magnetic, rc.omega_minus));
  rc.xi = xi;

  const cdouble rad = kpar2 - rc.epsilon * rc.mu * omega * omega;
  if (rad.imag() == 0.0 && rad.real() < 0.0)
    rc.xi_medium = cdouble(0.0, -sgn(omega) * std::sqrt(-rad.real()));
  else
    rc.xi_medium = std::sqrt(rad);

  if (rc.epsilon == 1.0 && rc.mu == 1.0) {
    rc.r11 = rc.r22 = 0.0;
  } else {
    rc.r11 = (rc.mu * xi - rc.xi_medium) / (rc.mu * xi + rc.xi_medium);
    rc.r22 = (rc.epsilon * xi - rc.xi_medium) / (rc.epsilon * xi + rc.xi_medium);
  }

  const cdouble i(0.0, 1.0);
  rc.e1 = ComplexVector3<double>(-ky / kpar, kx / kpar, 0.0);
  const cdouble kz_r = i * xi, kz_i = -i * xi;
  const double norm = omega * kpar;
  rc.e2_reflected = ComplexVector3<double>(-kx * kz_r / norm, -ky * kz_r / norm, kpar2 / norm);
  rc.e2_incident = ComplexVector3<double>(-kx * kz_i / norm, -ky * kz_i / norm, kpar2 / norm);
  return rc;
}

ReflectionCoefficients reflection_coefficients(const SusceptibilityModel& model,
                                               const MotionFrame& frame, double kx, double ky,
                                               double omega) {
  if (!std::isfinite(kx) || !std::isfinite(ky) || !std::isfinite(omega))
    throw DomainError("reflection_coefficients: non-finite input");
  const double kpar2 = kx * kx + ky * ky;
  if (std::abs(kpar2 - omega * omega) <= 1e-12 * std::max(kpar2, omega * omega))
    throw DomainError("reflection_coefficients: wavevector on the light cone (xi = 0)");
  return reflection_coefficients_with_xi(model, frame, kx, ky, omega, vacuum_xi(kpar2, omega));
}

IntegralResult<ComplexTensor3> reflected_green(const SusceptibilityModel& model,
                                               const MotionFrame& frame, double kx,
                                               const Transverse& field, const Transverse& source,
                                               double omega, const QuadratureSpec& quad) {
  if (!(field.z > 0.0) || !(source.z > 0.0))
    throw DomainError("reflected_green: both points must lie above the surface (z > 0)");
  if (omega == 0.0 || !std::isfinite(omega) || !std::isfinite(kx))
    throw DomainError("reflected_green: omega must be nonzero and finite");
  if (std::abs(std::abs(kx) - std::abs(omega)) <= 1e-12 * std::abs(omega))
    throw DomainError("reflected_green: kx on the light cone");
  quad.validate();

  IntegralResult<ComplexTensor3> out;
  out.value = ComplexTensor3::Zero();
  out.converged = true;
  if (model.is_vacuum()) return out;

  const double dy = field.y - source.y;
  const double zs = field.z + source.z;
  const cdouble i(0.0, 1.0);
  // e^{i ky dy} D(ky) e^{-xi zs}, summed over +-ky.
  auto folded = [&](double ky, cdouble xi) -> ComplexTensor3 {
    const cdouble decay = std::exp(-xi * zs);
    auto term = [&](double k) {
      const auto rc = reflection_coefficients_with_xi(model, frame, kx, k, omega, xi);
      return ComplexTensor3(rc.reflected_dyad() * (std::exp(i * (k * dy)) * decay));
    };
    return ComplexTensor3(term(ky) + term(-ky));
  };

  if (std::abs(kx) > std::abs(omega)) {
    const double k0 = root_diff(kx, omega);
    const double tmax = std::acosh(1.0 + kDecayExponent / (k0 * zs));
    auto f = [&](double t) { return folded(k0 * std::sinh(t), k0 * std::cosh(t)); };
    accumulate(out, integrate_adaptive(f, 0.0, tmax, quad), 1.0 / (4.0 * kPi));
  } else {
    const double k0 = root_diff(omega, kx);
    const double s = sgn(omega);
    auto inner = [&](double th) {
      return folded(k0 * std::sin(th), cdouble(0.0, -s * k0 * std::cos(th)));
    };
    accumulate(out, integrate_adaptive(inner, 0.0, 0.5 * kPi, quad), i * s / (4.0 * kPi));
    const double tmax = std::asinh(kDecayExponent / (k0 * zs));
    auto outer = [&](double t) { return folded(k0 * std::cosh(t), k0 * std::sinh(t)); };
    accumulate(out, integrate_adaptive(outer, 0.0, tmax, quad), 1.0 / (4.0 * kPi));
  }
  return out;
}

ComplexTensor3 surface_green_coincident(const SusceptibilityModel& model, const MotionFrame& frame,
                                        const SurfaceGeometry& geom, double kx, double omega,
                                        const QuadratureSpec& quad) {
  geom.validate();
  const Transverse p{0.0, geom.z0};
  auto r = reflected_green(model, frame, kx, p, p, omega, quad);
  if (!r.converged) throw ConvergenceError("surface_green_coincident did not converge", r.error_estimate);
  return r.value + cdouble(0.0, 1.0) * im_free_green_coincident(kx, omega).cast<cdouble>();
}

ComplexTensor3 homogeneous_green_k(const SusceptibilityModel& model, const MotionFrame& frame,
                                   const Eigen::Vector3d& k, double omega) {
  if (omega == 0.0 || !std::isfinite(omega)) throw DomainError("homogeneous_green_k: omega must be nonzero");
  const auto s = moving_susceptibility_tensors(model, frame, omega, k.x());
  const cdouble i(0.0, 1.0);
  const ComplexTensor3 C = i * cross_matrix<double>(k).cast<cdouble>();
  const ComplexTensor3 I = ComplexTensor3::Identity();
  const ComplexTensor3 L = C * (I - s.bb) * C - omega * omega * (I + s.ee) + i * omega * (s.eb * C - C * s.be);
  Eigen::FullPivLU<ComplexTensor3> lu(L);
  if (!lu.isInvertible()) throw DomainError("homogeneous_green_k: wave operator is singular");
  return lu.inverse();
}

DissipationReport green_dissipation_identity(const SusceptibilityModel& model,
                                             const MotionFrame& frame, double kx,
                                             const Eigen::Vector2d& K, double omega,
                                             const QuadratureSpec& quad) {
  quad.validate();
  const double wm = doppler(frame, omega, kx).omega_minus;
  if (wm == 0.0) throw DomainError("green_dissipation_identity: degenerate Doppler frequency");
  const Eigen::Vector3d k(kx, K.x(), K.y());
  DissipationReport rep;
  rep.green = homogeneous_green_k(model, frame, k, omega);
  const ComplexTensor3& G = rep.green;

  const cdouble i(0.0, 1.0);
  const auto a = coupling_tensors(model, frame, std::abs(wm));
  const ComplexTensor3 C = i * cross_matrix<double>(k).cast<cdouble>();
  const ComplexTensor3 ME = i * omega * a.ee.transpose() + a.be.transpose() * C;
  const ComplexTensor3 MB = i * omega * a.eb.transpose() + a.bb.transpose() * C;
  rep.lhs = G * (ME.adjoint() * ME + MB.adjoint() * MB) * G.adjoint();
  rep.rhs = (wm / (kPi * i)) * (G - G.adjoint());
  rep.max_residual = max_abs(rep.lhs - rep.rhs);
  const double scale = std::max(max_abs(rep.lhs), max_abs(rep.rhs));
  rep.rel_residual = scale > 0.0 ? rep.max_residual / scale : 0.0;
  return rep;
}

ReciprocityReport reciprocity_check(const SusceptibilityModel& model, const MotionFrame& frame,
                                    double kx, double omega, const Transverse& a,
                                    const Transverse& b, const QuadratureSpec& quad) {
  auto fwd = reflected_green(model, frame, kx, a, b, omega, quad);
  auto rev = reflected_green(model, frame.reversed(), -kx, b, a, omega, quad);
  auto nai = reflected_green(model, frame, -kx, b, a, omega, quad);
  if (!fwd.converged || !rev.converged || !nai.converged)
    throw ConvergenceError("reciprocity_check did not converge",
                           fwd.error_estimate + rev.error_estimate + nai.error_estimate);
  ReciprocityReport rep;
  rep.forward = fwd.value;
  rep.reversed = rev.value.transpose();
  rep.naive = nai.value.transpose();
  const double scale = max_abs(rep.forward);
  rep.error_estimate = fwd.error_estimate + rev.error_estimate;
  if (scale > 0.0) {
    rep.transpose_residual = max_abs(rep.forward - rep.reversed) / scale;
    rep.naive_violation = max_abs(rep.forward - rep.naive) / scale;
  }
  return rep;
}

}  // namespace qfric
