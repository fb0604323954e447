#ifndef QFRIC_BESSEL_HPP
#define QFRIC_BESSEL_HPP

#include <cmath>
#include <numbers>

namespace qfric {

namespace detail {

// Power series, summed in extended precision to absorb the alternating
// cancellation near x = 8.
inline double j0_series(double x) {
  const long double q = -0.25L * static_cast<long double>(x) * x;
  long double term = 1.0L, sum = 1.0L;
  for (int k = 1; k < 80; ++k) {
    term *= q / (static_cast<long double>(k) * k);
    sum += term;
    if (std::fabs(term) < 1e-21L * std::fabs(sum) + 1e-300L) break;
  }
  return static_cast<double>(sum);
}

// J0(x) = (1/pi) int_0^pi cos(x sin t) dt. The integrand is smooth and
// pi-periodic, so the trapezoid rule converges geometrically (error ~ J_{2n}(x)).
inline double j0_trapezoid(double x) {
  constexpr int n = 64;
  long double sum = 0.0L;
  for (int j = 0; j < n; ++j) {
    const long double t = std::numbers::pi_v<long double> * (j + 0.5L) / n;
    sum += std::cos(static_cast<long double>(x) * std::sin(t));
  }
  return static_cast<double>(sum / n);
}

// Hankel asymptotic expansion, truncated at the smallest term.
inline double j0_asymptotic(double x) {
  const double z8 = 8.0 * x;
  double p = 1.0, q = 0.0;
  double term = 1.0, last = 1e300;
  for (int k = 1; k < 60; ++k) {
    const double m = 2.0 * k - 1.0;
    term *= -m * m / (k * z8);
    if (std::abs(term) > last) break;
    last = std::abs(term);
    // a_k picks up (-1)^k from the (0 - m^2) factors; even k feed P, odd k feed Q.
    if (k % 2 == 0) {
      p += ((k / 2) % 2 == 0 ? 1.0 : -1.0) * term;
    } else {
      q += (((k - 1) / 2) % 2 == 0 ? 1.0 : -1.0) * term;
    }
    if (last < 1e-18) break;
  }
  const double chi = x - 0.25 * std::numbers::pi;
  return std::sqrt(2.0 / (std::numbers::pi * x)) * (p * std::cos(chi) - q * std::sin(chi));
}

}  // namespace detail

/// Bessel function of the first kind, order zero.
inline double bessel_j0(double x) {
  x = std::abs(x);
  if (x < 8.0) return detail::j0_series(x);
  if (x < 25.0) return detail::j0_trapezoid(x);
  return detail::j0_asymptotic(x);
}

}  // namespace qfric

#endif  // QFRIC_BESSEL_HPP
