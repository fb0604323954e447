#ifndef QFRIC_RATES_HPP
#define QFRIC_RATES_HPP

#include "qfric/greens.hpp"
#include "qfric/kinematics.hpp"
#include "qfric/medium.hpp"
#include "qfric/quadrature.hpp"

#include <vector>

namespace qfric {

struct DetectorSpec {
  Eigen::Vector3d kappa = Eigen::Vector3d(0.0, 0.0, 1.0);
  double omega = 1.0;
  double z0 = 1.0;

  void validate(bool needs_height) const;
};

struct RateResult {
  double gamma = 0.0;
  double k_lower = 0.0;  // omega / |V|; +inf when V = 0
  double k_max = 0.0;
  double error_estimate = 0.0;
  double gamma_s = 0.0;  // per-polarization breakdown of gamma
  double gamma_p = 0.0;
  long evaluations = 0;
  bool converged = true;
  bool exact = false;         // value is analytically exact (no quadrature error)
  bool empty_domain = false;  // integration domain [k_lower, k_max] is empty

  /// gamma / (omega^2 |kappa|^2), the dimensionless integral.
  double reduced = 0.0;
};

/// Rate with the free-space Green tensor; identically zero for |V| < c.
RateResult rate_free_space(const DetectorSpec& det, const MotionFrame& frame, const QuadratureSpec& quad);

/// Surface rate in the diagonal (non-mixing) reflection scheme.
RateResult rate_surface(const DetectorSpec& det, const MotionFrame& frame,
                        const SusceptibilityModel& model, const QuadratureSpec& quad);

/// rate_surface over a ladder of heights, evaluated on up to `workers`
/// threads (0 = hardware concurrency). Output order follows the input.
std::vector<RateResult> rate_vs_distance(const DetectorSpec& det, const MotionFrame& frame,
                                         const SusceptibilityModel& model, const QuadratureSpec& quad,
                                         const std::vector<double>& z0_ladder, unsigned workers = 0);

/// Slowest evanescent decay constant on the rate domain, sqrt((w/V)^2 - w^2).
double envelope_xi_min(const DetectorSpec& det, const MotionFrame& frame);

struct FiniteTimeOptions {
  /// Half-width of the detector-frequency band around omega; 0 picks omega / 2.
  double band_half_width = 0.0;
  int chebyshev_nodes = 48;
};

struct FiniteTimeResult {
  double probability = 0.0;
  double per_time = 0.0;  // probability / T
  double error_estimate = 0.0;
  double surrogate_error = 0.0;
  double band_half_width = 0.0;
  bool converged = true;
};

/// Excitation probability after time T with the sin^2 window kept at finite
/// T; probability / T tends to rate_surface as T grows.
FiniteTimeResult finite_time_probability(const DetectorSpec& det, const MotionFrame& frame,
                                         const SusceptibilityModel& model, const QuadratureSpec& quad,
                                         double T, const FiniteTimeOptions& opts = {});

/// Same for several times, sharing one spectral surrogate.
std::vector<FiniteTimeResult> finite_time_probabilities(const DetectorSpec& det, const MotionFrame& frame,
                                                        const SusceptibilityModel& model,
                                                        const QuadratureSpec& quad,
                                                        const std::vector<double>& times,
                                                        const FiniteTimeOptions& opts = {});

}  // namespace qfric

#endif  // QFRIC_RATES_HPP
