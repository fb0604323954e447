#ifndef QFRIC_QUADRATURE_HPP
#define QFRIC_QUADRATURE_HPP

// Deterministic adaptive Gauss-Kronrod (7/15) quadrature with principal-value
// and semi-infinite support. Everything here is a pure function of its
// arguments; integrand callbacks must be reentrant if callers integrate from
// several threads at once.

#include "qfric/types.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <queue>
#include <span>
#include <sstream>
#include <type_traits>
#include <utility>
#include <vector>

namespace qfric {

struct QuadratureSpec {
  double rel_tol = 1e-8;
  double abs_tol = 1e-12;
  int max_subdivisions = 2000;
  /// Retarded-pole regulator. Zero selects exact residue + principal part handling.
  double eta = 0.0;
  /// Wavenumber cutoff for rate integrals. No default; rate scenarios must set it.
  std::optional<double> k_max;
  /// Semi-infinite integrals switch to the x -> s/u map beyond this coordinate.
  double tail_switch = 10.0;
  /// Fixed half-width of the symmetric exclusion window around PV poles.
  /// Zero means half the distance to the nearest partition point.
  double pv_half_width = 0.0;
  /// Poles closer than this (relative to the domain scale) to an endpoint or
  /// to each other are rejected.
  double endpoint_margin = 1e-9;

  void validate() const {
    if (!(rel_tol > 0.0) || !(abs_tol > 0.0))
      throw DomainError("quadrature tolerances must be positive");
    if (max_subdivisions < 1) throw DomainError("max_subdivisions must be >= 1");
    if (!(eta >= 0.0)) throw DomainError("eta must be >= 0");
    if (k_max && !(*k_max > 0.0)) throw DomainError("k_max must be positive");
    if (!(tail_switch > 0.0)) throw DomainError("tail_switch must be positive");
    if (!(pv_half_width >= 0.0)) throw DomainError("pv_half_width must be >= 0");
    if (!(endpoint_margin > 0.0)) throw DomainError("endpoint_margin must be positive");
  }

  double require_k_max() const {
    if (!k_max) throw DomainError("k_max must be set explicitly for rate integrals");
    return *k_max;
  }
};

template <typename V>
struct IntegralResult {
  V value{};
  double error_estimate = 0.0;
  long evaluations = 0;
  bool converged = false;
};

/// Thrown when the integrand returns NaN or infinity; location() is the abscissa.
class NonFiniteIntegrand : public std::runtime_error {
 public:
  explicit NonFiniteIntegrand(double x)
      : std::runtime_error(message(x)), location_(x) {}
  double location() const noexcept { return location_; }

 private:
  static std::string message(double x) {
    std::ostringstream os;
    os.precision(17);
    os << "non-finite integrand value at x = " << x;
    return os.str();
  }
  double location_;
};

namespace detail {

inline double qnorm(double v) { return std::abs(v); }
inline double qnorm(const std::complex<double>& v) { return std::abs(v); }
template <typename D>
double qnorm(const Eigen::MatrixBase<D>& m) {
  return m.cwiseAbs().maxCoeff();
}

template <typename T> struct is_eigen : std::is_base_of<Eigen::EigenBase<T>, T> {};

template <typename V, bool = is_eigen<V>::value> struct plain_of { using type = V; };
template <typename V> struct plain_of<V, true> { using type = typename V::PlainObject; };

template <typename V>
V qzero() {
  if constexpr (is_eigen<V>::value) {
    return V::Zero();
  } else {
    return V(0);
  }
}

// Kronrod 15-point abscissae (descending, last is the centre) and weights;
// the embedded 7-point Gauss rule uses the odd-indexed abscissae.
inline constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

enum class Map { identity, fold, invert };

// One integration sub-domain in its own coordinate.
//   identity: integrate f(t) over [lo, hi]
//   fold:     integrate f(anchor + t) + f(anchor - t) over [lo, hi] in t >= 0
//   invert:   integrate f(anchor / u) * |anchor| / u^2 over u in [lo, hi] in (0, 1]
struct Piece {
  double lo = 0.0;
  double hi = 0.0;
  Map map = Map::identity;
  double anchor = 0.0;
};

template <typename V>
struct Segment {
  Piece piece;
  V value;
  double error = 0.0;
  long id = 0;
};

template <typename F, typename V>
V eval_mapped(F& f, const Piece& p, double t, long& evals) {
  auto check = [](const V& v, double x) {
    if (!std::isfinite(qnorm(v))) throw NonFiniteIntegrand(x);
    return v;
  };
  switch (p.map) {
    case Map::identity:
      ++evals;
      return check(V(f(t)), t);
    case Map::fold: {
      evals += 2;
      V a = check(V(f(p.anchor + t)), p.anchor + t);
      V b = check(V(f(p.anchor - t)), p.anchor - t);
      return V(a + b);
    }
    case Map::invert: {
      ++evals;
      const double x = p.anchor / t;
      V v = check(V(f(x)), x);
      return V(v * (std::abs(p.anchor) / (t * t)));
    }
  }
  return qzero<V>();
}

// Gauss-Kronrod 7/15 on one piece with the QUADPACK error heuristic.
template <typename F, typename V>
Segment<V> gk15(F& f, const Piece& p, long& evals) {
  const double centr = 0.5 * (p.lo + p.hi);
  const double hlgth = 0.5 * (p.hi - p.lo);
  std::array<V, 15> fv;
  fv[7] = eval_mapped<F, V>(f, p, centr, evals);
  for (int j = 0; j < 7; ++j) {
    const double dx = hlgth * kXgk[j];
    fv[j] = eval_mapped<F, V>(f, p, centr - dx, evals);
    fv[14 - j] = eval_mapped<F, V>(f, p, centr + dx, evals);
  }
  V resk = V(fv[7] * kWgk[7]);
  V resg = V(fv[7] * kWg[3]);
  double resabs = kWgk[7] * qnorm(fv[7]);
  for (int j = 0; j < 7; ++j) {
    resk = V(resk + (fv[j] + fv[14 - j]) * kWgk[j]);
    resabs += kWgk[j] * (qnorm(fv[j]) + qnorm(fv[14 - j]));
    if (j % 2 == 1) resg = V(resg + (fv[j] + fv[14 - j]) * kWg[j / 2]);
  }
  const V reskh = V(resk * 0.5);
  double resasc = kWgk[7] * qnorm(V(fv[7] - reskh));
  for (int j = 0; j < 7; ++j)
    resasc += kWgk[j] * (qnorm(V(fv[j] - reskh)) + qnorm(V(fv[14 - j] - reskh)));

  const double h = std::abs(hlgth);
  resasc *= h;
  resabs *= h;
  double err = qnorm(V((resk - resg) * hlgth));
  if (resasc != 0.0 && err != 0.0)
    err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
  constexpr double eps = std::numeric_limits<double>::epsilon();
  if (resabs > std::numeric_limits<double>::min() / (50.0 * eps))
    err = std::max(50.0 * eps * resabs, err);
  return Segment<V>{p, V(resk * hlgth), err, 0};
}

template <typename V>
struct WorstFirst {
  bool operator()(const Segment<V>& a, const Segment<V>& b) const {
    if (a.error != b.error) return a.error < b.error;
    return a.id > b.id;
  }
};

// Global adaptive bisection over a fixed initial partition. Refines the piece
// with the largest error until the summed error meets the tolerance.
template <typename F>
auto integrate_pieces(F&& f, const std::vector<Piece>& pieces, const QuadratureSpec& spec) {
  using VV = typename plain_of<std::decay_t<decltype(std::declval<F&>()(0.0))>>::type;
  IntegralResult<VV> out;
  out.value = qzero<VV>();
  if (pieces.empty()) {
    out.converged = true;
    return out;
  }

  std::priority_queue<Segment<VV>, std::vector<Segment<VV>>, WorstFirst<VV>> heap;
  std::vector<Segment<VV>> frozen;
  long next_id = 0;
  long evals = 0;
  VV total = qzero<VV>();
  double total_err = 0.0;
  for (const auto& p : pieces) {
    auto s = gk15<F, VV>(f, p, evals);
    s.id = next_id++;
    total = VV(total + s.value);
    total_err += s.error;
    heap.push(s);
  }

  auto tolerance = [&](const VV& v) {
    return std::max(spec.abs_tol, spec.rel_tol * qnorm(v));
  };
  auto exact_totals = [&]() {
    std::vector<Segment<VV>> all;
    all.reserve(heap.size() + frozen.size());
    auto copy = heap;
    while (!copy.empty()) {
      all.push_back(copy.top());
      copy.pop();
    }
    all.insert(all.end(), frozen.begin(), frozen.end());
    std::sort(all.begin(), all.end(),
              [](const Segment<VV>& a, const Segment<VV>& b) { return a.id < b.id; });
    total = qzero<VV>();
    total_err = 0.0;
    for (const auto& s : all) {
      total = VV(total + s.value);
      total_err += s.error;
    }
  };

  int subdivisions = 0;
  bool converged = false;
  while (true) {
    if (total_err <= tolerance(total)) {
      exact_totals();
      if (total_err <= tolerance(total)) {
        converged = true;
        break;
      }
    }
    if (subdivisions >= spec.max_subdivisions || heap.empty()) break;
    Segment<VV> worst = heap.top();
    heap.pop();
    const Piece& p = worst.piece;
    const double mid = 0.5 * (p.lo + p.hi);
    const double scale = std::max({std::abs(p.lo), std::abs(p.hi), 1e-300});
    if (!(mid > p.lo && mid < p.hi) ||
        (p.hi - p.lo) <= 8.0 * std::numeric_limits<double>::epsilon() * scale) {
      frozen.push_back(worst);
      continue;
    }
    Piece left = p, right = p;
    left.hi = mid;
    right.lo = mid;
    auto a = gk15<F, VV>(f, left, evals);
    auto b = gk15<F, VV>(f, right, evals);
    a.id = next_id++;
    b.id = next_id++;
    total = VV(total + a.value + b.value - worst.value);
    total_err += a.error + b.error - worst.error;
    heap.push(a);
    heap.push(b);
    ++subdivisions;
  }
  exact_totals();
  out.value = total;
  out.error_estimate = total_err;
  out.evaluations = evals;
  out.converged = converged;
  return out;
}

// Builds the piece list for a possibly infinite domain containing simple
// poles that are to be taken in the principal-value sense.
inline std::vector<Piece> build_pieces(double lo, double hi, std::vector<double> poles,
                                       std::vector<double> breakpoints,
                                       const QuadratureSpec& spec) {
  const bool lo_inf = std::isinf(lo);
  const bool hi_inf = std::isinf(hi);
  if (std::isnan(lo) || std::isnan(hi) || !(lo < hi))
    throw DomainError("integration domain must satisfy lo < hi");
  if (lo_inf && lo > 0) throw DomainError("lower limit cannot be +inf");
  if (hi_inf && hi < 0) throw DomainError("upper limit cannot be -inf");

  std::sort(poles.begin(), poles.end());
  double extent = spec.tail_switch;
  for (double p : poles) extent = std::max(extent, 2.0 * std::abs(p));
  for (double b : breakpoints)
    if (std::isfinite(b)) extent = std::max(extent, 1.25 * std::abs(b));
  if (!lo_inf) extent = std::max(extent, std::abs(lo));
  if (!hi_inf) extent = std::max(extent, std::abs(hi));

  // Finite core [core_lo, core_hi] plus tails mapped onto (0, 1].
  double core_lo = lo, core_hi = hi;
  std::vector<Piece> out;
  if (lo_inf) {
    core_lo = -extent;
    out.push_back({0.0, 1.0, Map::invert, core_lo});
  }
  if (hi_inf) {
    core_hi = extent;
    if (!lo_inf && lo >= core_hi) core_hi = lo;
    if (core_hi <= 0.0) core_hi = spec.tail_switch;
  }
  if (lo_inf && !hi_inf && hi <= core_lo) core_lo = hi;

  const double scale = std::max(core_hi - core_lo, 1.0);
  const double margin = spec.endpoint_margin * scale;
  for (std::size_t i = 0; i < poles.size(); ++i) {
    const double p = poles[i];
    if (!(p > core_lo && p < core_hi) || !std::isfinite(p))
      throw DomainError("pole lies outside the open integration domain");
    if ((!lo_inf && p - lo < margin) || (!hi_inf && hi - p < margin))
      throw DomainError("pole within margin of an integration endpoint");
    if (i > 0 && p - poles[i - 1] < margin)
      throw DomainError("degenerate (coincident) poles");
  }

  std::vector<double> grid{core_lo, core_hi};
  for (double b : breakpoints) {
    if (!(b > core_lo && b < core_hi)) continue;
    bool near_pole = false;
    for (double p : poles) near_pole |= std::abs(b - p) < 1e3 * margin;
    if (!near_pole) grid.push_back(b);
  }
  grid.insert(grid.end(), poles.begin(), poles.end());
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());

  // Pole windows: [p - d, p + d] folded onto [0, d].
  std::vector<std::pair<double, double>> windows;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    if (!std::binary_search(poles.begin(), poles.end(), grid[g])) continue;
    const double p = grid[g];
    double d = 0.5 * std::min(p - grid[g - 1], grid[g + 1] - p);
    if (spec.pv_half_width > 0.0) d = std::min(d, spec.pv_half_width);
    windows.emplace_back(p, d);
    out.push_back({0.0, d, Map::fold, p});
  }
  for (std::size_t g = 0; g + 1 < grid.size(); ++g) {
    double a = grid[g], b = grid[g + 1];
    for (const auto& [p, d] : windows) {
      if (a == p) a = p + d;
      if (b == p) b = p - d;
    }
    if (b > a) out.push_back({a, b, Map::identity, 0.0});
  }
  if (hi_inf) out.push_back({0.0, 1.0, Map::invert, core_hi});
  return out;
}

// |x f(x)| must shrink along the tail for the u-mapped integral to exist.
template <typename F>
bool tail_decays(F& f, double anchor) {
  const double x1 = anchor * 1e4, x2 = anchor * 1e8;
  const double n1 = std::abs(x1) * qnorm(f(x1));
  const double n2 = std::abs(x2) * qnorm(f(x2));
  if (!std::isfinite(n1) || !std::isfinite(n2)) return false;
  return !(n2 > 1e-300 && n2 > 0.5 * n1);
}

}  // namespace detail

/// General entry point: integral of f over [lo, hi] (either limit may be
/// infinite) with the listed simple poles taken as principal values.
/// Breakpoints seed the initial partition at known integrand features.
template <typename F>
auto integrate_pv(F&& f, double lo, double hi, std::vector<double> poles,
                  std::vector<double> breakpoints, const QuadratureSpec& spec) {
  spec.validate();
  auto pieces = detail::build_pieces(lo, hi, std::move(poles), std::move(breakpoints), spec);
  auto res = detail::integrate_pieces(f, pieces, spec);
  for (const auto& p : pieces) {
    if (p.map == detail::Map::invert && !detail::tail_decays(f, p.anchor)) res.converged = false;
  }
  return res;
}

/// Adaptive integral over a finite interval.
template <typename F>
auto integrate_adaptive(F&& f, double a, double b, const QuadratureSpec& spec,
                        std::vector<double> breakpoints = {}) {
  if (!std::isfinite(a) || !std::isfinite(b) || !(a < b))
    throw DomainError("integrate_adaptive requires finite a < b");
  return integrate_pv(f, a, b, {}, std::move(breakpoints), spec);
}

/// Principal value of the integral of f over [a, b]; f carries the simple
/// pole at `pole` itself. Uses a symmetric exclusion window folded onto [0, d].
template <typename F>
auto principal_value(F&& f, double pole, double a, double b, const QuadratureSpec& spec) {
  if (!std::isfinite(a) || !std::isfinite(b) || !(a < pole && pole < b))
    throw DomainError("principal_value requires a < pole < b");
  return integrate_pv(f, a, b, {pole}, {}, spec);
}

/// Integral over [a, inf). Beyond tail_switch the variable change x = s/u is used.
template <typename F>
auto integrate_semi_infinite(F&& f, double a, const QuadratureSpec& spec,
                             std::vector<double> breakpoints = {}) {
  if (!std::isfinite(a)) throw DomainError("integrate_semi_infinite requires finite a");
  return integrate_pv(f, a, std::numeric_limits<double>::infinity(), {}, std::move(breakpoints),
                      spec);
}

}  // namespace qfric

#endif  // QFRIC_QUADRATURE_HPP
