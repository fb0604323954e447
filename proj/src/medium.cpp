#include "qfric/medium.hpp"

#include <algorithm>
#include <numbers>

namespace qfric {

void LorentzOscillator::validate() const {
  if (!std::isfinite(plasma_strength) || plasma_strength < 0.0)
    throw DomainError("plasma_strength must be finite and >= 0");
  if (!std::isfinite(resonance) || resonance < 0.0)
    throw DomainError("resonance must be finite and >= 0");
  if (!std::isfinite(damping) || !(damping > 0.0))
    throw DomainError("damping must be finite and > 0");
}

void SusceptibilityModel::validate() const {
  for (const auto& t : electric_terms) t.validate();
  for (const auto& t : magnetic_terms) t.validate();
}

cdouble permittivity(const SusceptibilityModel& model, double omega) {
  return 1.0 + chi(model, Response::electric, omega);
}

cdouble permeability(const SusceptibilityModel& model, double omega) {
  return 1.0 / (1.0 - chi(model, Response::magnetic, omega));
}

double coupling_amplitude(const SusceptibilityModel& model, Response kind, double omega) {
  if (!(omega >= 0.0)) throw DomainError("coupling_amplitude: omega must be >= 0");
  if (omega == 0.0 || model.terms(kind).empty()) return 0.0;
  const double im = chi(model, kind, omega).imag();
  return std::sqrt(std::max(0.0, 2.0 * omega * im / std::numbers::pi));
}

std::vector<double> feature_frequencies(const SusceptibilityModel& model, Response kind) {
  std::vector<double> out;
  for (const auto& t : model.terms(kind)) {
    if (t.resonance > 0.0) out.push_back(t.resonance);
    if (t.resonance > t.damping) out.push_back(t.resonance - t.damping);
    out.push_back(t.resonance + t.damping);
    out.push_back(t.damping);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

cdouble kk_reconstruct(const SusceptibilityModel& model, Response kind, double omega,
                       const QuadratureSpec& quad, double* error_estimate) {
  if (!(omega > 0.0) || !std::isfinite(omega)) throw DomainError("kk_reconstruct: omega must be > 0");
  quad.validate();
  if (error_estimate) *error_estimate = 0.0;
  if (model.terms(kind).empty()) return 0.0;
  auto f = [&](double w) { return w * chi(model, kind, w).imag() / ((w - omega) * (w + omega)); };
  auto r = integrate_pv(f, 0.0, std::numeric_limits<double>::infinity(), {omega},
                        feature_frequencies(model, kind), quad);
  if (!r.converged)
    throw ConvergenceError("kk_reconstruct did not converge", 2.0 / std::numbers::pi * r.error_estimate);
  if (error_estimate) *error_estimate = 2.0 / std::numbers::pi * r.error_estimate;
  return {2.0 / std::numbers::pi * r.value, chi(model, kind, omega).imag()};
}

IdentityReport verify_identity_1(const SusceptibilityModel& model, double omega_minus,
                                 double omega_plus_prime, const QuadratureSpec& quad,
                                 Response kind, std::optional<double> omega_plus) {
  const double A = omega_minus, B = omega_plus_prime;
  const double P = omega_plus.value_or(omega_minus);
  if (!std::isfinite(A) || !std::isfinite(B) || !std::isfinite(P))
    throw DomainError("verify_identity_1: non-finite frequency");
  if (A == 0.0 || B == 0.0) throw DomainError("verify_identity_1: zero pole frequency");
  const double a2 = A * A, b2 = B * B;
  if (std::abs(std::abs(A) - std::abs(B)) <= 1e-9 * std::max(std::abs(A), std::abs(B)))
    throw DomainError("verify_identity_1: degenerate poles");
  quad.validate();

  IdentityReport rep;
  const double c = P * B;
  const cdouble i(0.0, 1.0);
  const cdouble chiA = chi(model, kind, A), chiB = chi(model, kind, B);
  const double wa = (a2 - c) / (a2 - b2), wb = (b2 - c) / (b2 - a2);
  rep.rhs = wa * chiA + wb * chiB;

  if (!model.terms(kind).empty()) {
    auto f = [&](double w) {
      const double w2 = w * w;
      return w * (w2 - c) * chi(model, kind, w).imag() / ((w2 - a2) * (w2 - b2));
    };
    auto r = integrate_pv(f, 0.0, std::numeric_limits<double>::infinity(),
                          {std::abs(A), std::abs(B)}, feature_frequencies(model, kind), quad);
    if (!r.converged)
      throw ConvergenceError("verify_identity_1 did not converge", 2.0 / std::numbers::pi * r.error_estimate);
    rep.error_estimate = 2.0 / std::numbers::pi * r.error_estimate;
    rep.lhs = i * (wa * chiA.imag() + wb * chiB.imag()) + 2.0 / std::numbers::pi * r.value;
  }
  rep.abs_residual = std::abs(rep.lhs - rep.rhs);
  rep.rel_residual = rep.abs_residual / std::max(std::abs(rep.lhs), 1.0);
  return rep;
}

}  // namespace qfric
