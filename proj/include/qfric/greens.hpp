#ifndef QFRIC_GREENS_HPP
#define QFRIC_GREENS_HPP

#include "qfric/kinematics.hpp"
#include "qfric/medium.hpp"
#include "qfric/quadrature.hpp"
#include "qfric/types.hpp"

namespace qfric {

/// Homogeneous free-space Green tensor in k-space with the retarded regulator eta.
ComplexTensor3 free_green_k(const Eigen::Vector3d& k, double omega, double eta = 0.0);

/// Imaginary part of the free Green tensor at coincident transverse points for
/// wavenumber kx along the motion; zero outside the light cone |kx| < |omega|.
RealTensor3<double> im_free_green_coincident(double kx, double omega);

/// Evanescent decay constant for the vacuum side. Real and positive outside
/// the light cone; -i sign(omega) sqrt(omega^2 - k^2) inside.
cdouble vacuum_xi(double kpar2, double omega);

struct ReflectionCoefficients {
  cdouble r11;  // s (TE)
  cdouble r22;  // p (TM)
  cdouble r12 = 0.0;
  cdouble r21 = 0.0;
  ComplexVector3<double> e1;            // s basis vector (independent of kz)
  ComplexVector3<double> e2_reflected;  // p vector for the reflected wave, kz = i xi
  ComplexVector3<double> e2_incident;   // p vector for the incident wave, kz = -i xi
  cdouble xi;
  cdouble xi_medium;
  cdouble epsilon;
  cdouble mu;
  double omega_minus = 0.0;

  /// sum_l r_ll e_l(i xi) (x) e_l(-i xi)
  ComplexTensor3 reflected_dyad() const;
};

/// Half-space reflection coefficients for a medium moving along x: rest-frame
/// Fresnel formulas at the Doppler frequency with lab-frame transverse
/// kinematics. Throws DomainError on the light cone.
ReflectionCoefficients reflection_coefficients(const SusceptibilityModel& model,
                                               const MotionFrame& frame, double kx, double ky,
                                               double omega);

/// Same, with the vacuum xi supplied by the caller (used inside integrals
/// where xi is known more accurately than from the radicand).
ReflectionCoefficients reflection_coefficients_with_xi(const SusceptibilityModel& model,
                                                       const MotionFrame& frame, double kx,
                                                       double ky, double omega, cdouble xi);

struct Transverse {
  double y = 0.0;
  double z = 0.0;
};

/// Reflected part of the half-space Green tensor for a fixed kx between
/// transverse points `field` and `source` (both above the surface).
IntegralResult<ComplexTensor3> reflected_green(const SusceptibilityModel& model,
                                               const MotionFrame& frame, double kx,
                                               const Transverse& field, const Transverse& source,
                                               double omega, const QuadratureSpec& quad);

struct SurfaceGeometry {
  double z0 = 1.0;
  void validate() const {
    if (!(z0 > 0.0) || !std::isfinite(z0)) throw DomainError("z0 must be > 0");
  }
};

/// Coincident-point Green tensor above the moving half-space: reflected part
/// plus i Im of the free part. The contact term is excluded.
ComplexTensor3 surface_green_coincident(const SusceptibilityModel& model, const MotionFrame& frame,
                                        const SurfaceGeometry& geom, double kx, double omega,
                                        const QuadratureSpec& quad);

struct DissipationReport {
  ComplexTensor3 lhs;
  ComplexTensor3 rhs;
  ComplexTensor3 green;
  double max_residual = 0.0;
  double rel_residual = 0.0;  // max entry residual / max entry of either side
};

/// Homogeneous-medium k-space Green tensor of the moving medium.
ComplexTensor3 homogeneous_green_k(const SusceptibilityModel& model, const MotionFrame& frame,
                                   const Eigen::Vector3d& k, double omega);

/// G (M_E^+ M_E + M_B^+ M_B) G^+ against (Omega_-/(pi i)) (G - G^+), with the
/// noise operators built from the coupling tensors at |Omega_-|.
DissipationReport green_dissipation_identity(const SusceptibilityModel& model,
                                             const MotionFrame& frame, double kx,
                                             const Eigen::Vector2d& K, double omega,
                                             const QuadratureSpec& quad);

struct ReciprocityReport {
  ComplexTensor3 forward;       // G(kx; a, b; beta)
  ComplexTensor3 reversed;      // G^T(-kx; b, a; -beta)
  ComplexTensor3 naive;         // G^T(-kx; b, a; beta)
  double transpose_residual = 0.0;  // relative, forward vs reversed
  double naive_violation = 0.0;     // relative, forward vs naive
  double error_estimate = 0.0;
};

/// Reflected-part reciprocity structure between two transverse points.
ReciprocityReport reciprocity_check(const SusceptibilityModel& model, const MotionFrame& frame,
                                    double kx, double omega, const Transverse& a,
                                    const Transverse& b, const QuadratureSpec& quad);

}  // namespace qfric

#endif  // QFRIC_GREENS_HPP
