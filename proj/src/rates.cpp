#include "qfric/rates.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <numbers>
#include <thread>

namespace qfric {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDecayExponent = 60.0;

RateResult base_result(const DetectorSpec& det, const MotionFrame& frame, const QuadratureSpec& quad) {
  RateResult r;
  r.k_max = quad.require_k_max();
  r.k_lower = frame.beta() == 0.0 ? std::numeric_limits<double>::infinity()
                                  : det.omega / std::abs(frame.beta());
  r.empty_domain = !(r.k_lower < r.k_max);
  return r;
}

void finish(RateResult& r, const DetectorSpec& det) {
  const double scale = det.omega * det.omega * det.kappa.squaredNorm();
  r.reduced = r.gamma / scale;
}

// Detector frequencies map to these outer-integral wavenumbers wherever the
// Doppler-shifted frequency gamma (beta q - w) crosses a feature of the medium.
std::vector<double> rate_breakpoints(const SusceptibilityModel& model, const MotionFrame& frame,
                                     double omega) {
  std::vector<double> out;
  std::vector<double> rest = feature_frequencies(model, Response::electric);
  for (const auto& t : model.electric_terms)
    rest.push_back(std::sqrt(t.resonance * t.resonance + 0.5 * t.plasma_strength));
  for (double w : feature_frequencies(model, Response::magnetic)) rest.push_back(w);
  for (double w : rest)
    if (w > 0.0) out.push_back((w / frame.gamma() + omega) / frame.beta());
  return out;
}

}  // namespace

void DetectorSpec::validate(bool needs_height) const {
  if (!(omega > 0.0) || !std::isfinite(omega)) throw DomainError("detector.omega must be > 0");
  if (!kappa.allFinite() || !(kappa.norm() > 0.0)) throw DomainError("detector.kappa must be nonzero");
  if (needs_height && (!(z0 > 0.0) || !std::isfinite(z0))) throw DomainError("detector.z0 must be > 0");
}

double envelope_xi_min(const DetectorSpec& det, const MotionFrame& frame) {
  if (frame.beta() == 0.0) return std::numeric_limits<double>::infinity();
  const double kl = det.omega / std::abs(frame.beta());
  return std::sqrt((kl - det.omega) * (kl + det.omega));
}

RateResult rate_free_space(const DetectorSpec& det, const MotionFrame& frame, const QuadratureSpec& quad) {
  det.validate(false);
  quad.validate();
  RateResult r = base_result(det, frame, quad);
  r.exact = true;
  if (r.empty_domain) {
    finish(r, det);
    return r;
  }
  // k >= w / |V| > w puts every mode outside the light cone, where the
  // coincident free tensor has no imaginary part.
  const Eigen::Vector3d kap = det.kappa;
  auto f = [&](double k) {
    return kap.dot(im_free_green_coincident(-k, -det.omega) * kap) / (2.0 * kPi);
  };
  auto res = integrate_adaptive(f, r.k_lower, r.k_max, quad);
  r.gamma = 2.0 * det.omega * det.omega * res.value;
  r.error_estimate = 2.0 * det.omega * det.omega * res.error_estimate;
  r.evaluations = res.evaluations;
  r.converged = res.converged;
  r.exact = r.k_lower >= det.omega && res.value == 0.0;
  finish(r, det);
  return r;
}

RateResult rate_surface(const DetectorSpec& det, const MotionFrame& frame_in,
                        const SusceptibilityModel& model, const QuadratureSpec& quad) {
  det.validate(true);
  quad.validate();
  RateResult r = base_result(det, frame_in, quad);
  if (frame_in.beta() == 0.0) {
    r.exact = true;
    finish(r, det);
    return r;
  }
  if (r.empty_domain) throw DomainError("rate_surface: k_max must exceed omega / V");
  if (model.is_vacuum()) {
    r.exact = true;
    finish(r, det);
    return r;
  }

  // Motion along -x is the mirror image of motion along +x.
  const MotionFrame frame(std::abs(frame_in.beta()));
  Eigen::Vector3d kap = det.kappa;
  if (frame_in.beta() < 0.0) kap.x() = -kap.x();

  const double w = det.omega, z0 = det.z0;
  QuadratureSpec inner = quad;

  // Inner ky integral at fixed q (kx = -q, detector frequency -w),
  // ky = k0 sinh t so that dky / xi = dt. Returns (s, p) contributions.
  long inner_evals = 0;
  bool inner_ok = true;
  auto ky_integral = [&](double q) -> Eigen::Vector2d {
    const double k0 = std::sqrt((q - w) * (q + w));
    const double tmax = std::acosh(1.0 + kDecayExponent / (2.0 * k0 * z0));
    auto f = [&](double t) -> Eigen::Vector2d {
      const double xi = k0 * std::cosh(t);
      const double ey = std::exp(-2.0 * xi * z0);
      Eigen::Vector2d acc = Eigen::Vector2d::Zero();
      for (double sgn : {-1.0, 1.0}) {
        const double ky = sgn * k0 * std::sinh(t);
        const auto rc = reflection_coefficients_with_xi(model, frame, -q, ky, -w, xi);
        const double kp2 = q * q + ky * ky;
        const double es = kap.x() * ky + kap.y() * q;
        const double ep_par = q * kap.x() - ky * kap.y();
        const double s_weight = es * es / kp2;
        const double p_weight = (xi * xi * ep_par * ep_par + kp2 * kp2 * kap.z() * kap.z()) / (w * w * kp2);
        acc.x() += s_weight * rc.r11.imag();
        acc.y() += p_weight * rc.r22.imag();
      }
      return Eigen::Vector2d(acc * ey);
    };
    auto res = integrate_adaptive(f, 0.0, tmax, inner);
    inner_evals += res.evaluations;
    inner_ok = inner_ok && res.converged;
    return res.value / (2.0 * kPi);
  };

  auto outer = integrate_adaptive([&](double q) { return Eigen::Vector2d(ky_integral(q) / (2.0 * kPi)); },
                                  r.k_lower, r.k_max, quad, rate_breakpoints(model, frame, w));
  const double pre = w * w;
  r.gamma_s = pre * outer.value.x();
  r.gamma_p = pre * outer.value.y();
  r.gamma = r.gamma_s + r.gamma_p;
  r.error_estimate = pre * outer.error_estimate;
  r.evaluations = outer.evaluations + inner_evals;
  r.converged = outer.converged && inner_ok;
  finish(r, det);
  return r;
}

std::vector<RateResult> rate_vs_distance(const DetectorSpec& det, const MotionFrame& frame,
                                         const SusceptibilityModel& model, const QuadratureSpec& quad,
                                         const std::vector<double>& z0_ladder, unsigned workers) {
  for (std::size_t i = 0; i < z0_ladder.size(); ++i) {
    if (!(z0_ladder[i] > 0.0)) throw DomainError("rate_vs_distance: z0 values must be positive");
    if (i > 0 && !(z0_ladder[i] > z0_ladder[i - 1]))
      throw DomainError("rate_vs_distance: z0 values must be increasing");
  }
  std::vector<RateResult> out(z0_ladder.size());
  std::vector<std::exception_ptr> errors(z0_ladder.size());
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min<unsigned>(workers, std::max<std::size_t>(1, z0_ladder.size()));
  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    for (std::size_t i; (i = next.fetch_add(1)) < z0_ladder.size();) {
      try {
        DetectorSpec d = det;
        d.z0 = z0_ladder[i];
        out[i] = rate_surface(d, frame, model, quad);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < workers; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

namespace {

// Chebyshev interpolant of R on [a, b] from values at the first-kind nodes.
struct Chebyshev {
  double a = 0.0, b = 0.0;
  std::vector<double> c;

  double operator()(double x) const {
    const double u = (2.0 * x - a - b) / (b - a);
    double b1 = 0.0, b2 = 0.0;
    for (std::size_t j = c.size(); j-- > 1;) {
      const double t = 2.0 * u * b1 - b2 + c[j];
      b2 = b1;
      b1 = t;
    }
    return u * b1 - b2 + 0.5 * c[0];
  }
};

}  // namespace

std::vector<FiniteTimeResult> finite_time_probabilities(const DetectorSpec& det, const MotionFrame& frame,
                                                        const SusceptibilityModel& model,
                                                        const QuadratureSpec& quad,
                                                        const std::vector<double>& times,
                                                        const FiniteTimeOptions& opts) {
  det.validate(true);
  quad.validate();
  for (double T : times)
    if (!(T > 0.0) || !std::isfinite(T)) throw DomainError("finite_time_probability: T must be > 0");
  const double w = det.omega;
  const double W = opts.band_half_width > 0.0 ? opts.band_half_width : 0.5 * w;
  if (!(W < w)) throw DomainError("finite_time_probability: band must stay below omega");
  if (opts.chebyshev_nodes < 8) throw DomainError("finite_time_probability: need >= 8 nodes");

  std::vector<FiniteTimeResult> out(times.size());
  for (auto& r : out) r.band_half_width = W;
  if (frame.beta() == 0.0 || model.is_vacuum()) return out;
  const double kl = (w + W) / std::abs(frame.beta());
  if (!(kl < quad.require_k_max()))
    throw DomainError("finite_time_probability: k_max must exceed (omega + band) / V");

  // Spectral surrogate: rate at detector frequency nu across the band.
  const int n = opts.chebyshev_nodes;
  Chebyshev cheb{w - W, w + W, std::vector<double>(n, 0.0)};
  std::vector<double> vals(n);
  bool rates_ok = true;
  double rate_err = 0.0;
  for (int k = 0; k < n; ++k) {
    const double u = std::cos(kPi * (k + 0.5) / n);
    DetectorSpec d = det;
    d.omega = w + W * u;
    const auto rr = rate_surface(d, frame, model, quad);
    vals[k] = rr.gamma;
    rates_ok = rates_ok && rr.converged;
    rate_err = std::max(rate_err, rr.error_estimate);
  }
  for (int j = 0; j < n; ++j) {
    double s = 0.0;
    for (int k = 0; k < n; ++k) s += vals[k] * std::cos(kPi * j * (k + 0.5) / n);
    cheb.c[j] = 2.0 * s / n;
  }
  const double surrogate_err = std::abs(cheb.c[n - 1]) + std::abs(cheb.c[n - 2]) + rate_err;

  for (std::size_t i = 0; i < times.size(); ++i) {
    const double T = times[i];
    // Window sin^2(x T / 2) / x^2 in the detuning x = omega - nu.
    auto f = [&](double x) {
      const double h = 0.5 * x * T;
      const double win = std::abs(h) < 1e-4 ? 0.25 * T * T * (1.0 - h * h / 3.0)
                                            : std::pow(std::sin(h) / x, 2);
      return (cheb(w - x) + cheb(w + x)) * win;
    };
    // Seed the partition at the window's zeros; budget grows with T.
    const double period = 2.0 * kPi / T;
    const long lobes = static_cast<long>(W / period);
    std::vector<double> bp;
    const long step = std::max<long>(1, lobes / 4000);
    for (long m = step; m <= lobes; m += step) bp.push_back(m * period);
    QuadratureSpec q = quad;
    q.max_subdivisions = std::max<int>(quad.max_subdivisions, static_cast<int>(4 * bp.size() + 200));
    auto res = integrate_adaptive(f, 0.0, W, q, bp);
    auto& r = out[i];
    r.probability = 2.0 / kPi * res.value;
    r.per_time = r.probability / T;
    r.error_estimate = 2.0 / kPi * res.error_estimate;
    // Surrogate error propagates through the window's total weight (about pi T / 2).
    r.surrogate_error = surrogate_err * T;
    r.converged = res.converged && rates_ok;
  }
  return out;
}

FiniteTimeResult finite_time_probability(const DetectorSpec& det, const MotionFrame& frame,
                                         const SusceptibilityModel& model, const QuadratureSpec& quad,
                                         double T, const FiniteTimeOptions& opts) {
  return finite_time_probabilities(det, frame, model, quad, {T}, opts).front();
}

}  // namespace qfric
