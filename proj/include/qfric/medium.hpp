#ifndef QFRIC_MEDIUM_HPP
#define QFRIC_MEDIUM_HPP

#include "qfric/quadrature.hpp"
#include "qfric/types.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace qfric {

/// One term w_p^2 / (w_0^2 - w^2 - i g w).
struct LorentzOscillator {
  double plasma_strength = 0.0;  // w_p^2
  double resonance = 0.0;        // w_0 (0 gives a Drude term)
  double damping = 0.0;          // g

  void validate() const;
};

enum class Response { electric, magnetic };

struct SusceptibilityModel {
  std::vector<LorentzOscillator> electric_terms;
  std::vector<LorentzOscillator> magnetic_terms;
  std::string label;

  const std::vector<LorentzOscillator>& terms(Response kind) const {
    return kind == Response::electric ? electric_terms : magnetic_terms;
  }
  bool is_vacuum() const { return electric_terms.empty() && magnetic_terms.empty(); }
  void validate() const;
};

/// Rest-frame susceptibility continued to complex frequency (Im omega >= 0).
template <typename T>
std::complex<T> chi(const SusceptibilityModel& model, Response kind, std::complex<T> omega) {
  if (!std::isfinite(omega.real()) || !std::isfinite(omega.imag()))
    throw DomainError("chi: non-finite frequency");
  if (omega.imag() < T(0)) throw DomainError("chi: frequency in the lower half plane");
  std::complex<T> sum(0);
  for (const auto& t : model.terms(kind)) {
    const std::complex<T> den = T(t.resonance) * T(t.resonance) - omega * omega -
                                std::complex<T>(0, 1) * T(t.damping) * omega;
    if (den == std::complex<T>(0)) throw DomainError("chi: Drude term evaluated at zero frequency");
    sum += T(t.plasma_strength) / den;
  }
  return sum;
}

inline cdouble chi(const SusceptibilityModel& model, Response kind, double omega) {
  return chi<double>(model, kind, cdouble(omega, 0.0));
}

/// Rest-frame permittivity 1 + chi_E and permeability 1 / (1 - chi_B).
cdouble permittivity(const SusceptibilityModel& model, double omega);
cdouble permeability(const SusceptibilityModel& model, double omega);

/// sqrt(2 omega Im chi(omega) / pi), omega >= 0.
double coupling_amplitude(const SusceptibilityModel& model, Response kind, double omega);

/// Real part rebuilt from Im chi on (0, inf) by the dispersion integral; the
/// imaginary part is the model's own. Throws ConvergenceError on failure.
cdouble kk_reconstruct(const SusceptibilityModel& model, Response kind, double omega,
                       const QuadratureSpec& quad, double* error_estimate = nullptr);

/// Real part of a causal, decaying response g on the whole frequency line,
/// Re g(w) = (1/pi) PV int Im g(w') / (w' - w) dw', with g's own imaginary part.
template <typename G>
cdouble hilbert_reconstruct(G&& g, double omega, const QuadratureSpec& quad,
                            std::vector<double> breakpoints = {}) {
  const double inf = std::numeric_limits<double>::infinity();
  auto f = [&](double w) { return std::imag(g(w)) / (w - omega); };
  auto r = integrate_pv(f, -inf, inf, {omega}, std::move(breakpoints), quad);
  if (!r.converged) throw ConvergenceError("hilbert_reconstruct did not converge", r.error_estimate);
  return {r.value / std::numbers::pi, std::imag(g(omega))};
}

struct IdentityReport {
  cdouble lhs;
  cdouble rhs;
  double abs_residual = 0.0;
  double rel_residual = 0.0;  // |lhs - rhs| / max(|lhs|, 1)
  double error_estimate = 0.0;
};

/// Pole-decomposed dispersion identity for the product of two resonant
/// denominators at omega_minus and omega_plus_prime. The numerator constant
/// is omega_plus * omega_plus_prime; omega_plus defaults to omega_minus.
IdentityReport verify_identity_1(const SusceptibilityModel& model, double omega_minus,
                                 double omega_plus_prime, const QuadratureSpec& quad,
                                 Response kind = Response::electric,
                                 std::optional<double> omega_plus = std::nullopt);

/// Natural frequencies worth seeding an integration grid with.
std::vector<double> feature_frequencies(const SusceptibilityModel& model, Response kind);

SusceptibilityModel parse_model_json(const std::string& text);
SusceptibilityModel load_model_file(const std::string& path);
std::string model_to_json(const SusceptibilityModel& model);

}  // namespace qfric

#endif  // QFRIC_MEDIUM_HPP
