#include "qfric/scenario.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <thread>

namespace qfric {

using ojson = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

const std::vector<std::pair<ScenarioKind, const char*>> kKindNames = {
    {ScenarioKind::rate_surface, "rate-surface"},
    {ScenarioKind::rate_free, "rate-free"},
    {ScenarioKind::kk_check, "kk-check"},
    {ScenarioKind::identity_check, "identity-check"},
    {ScenarioKind::dissipation_check, "dissipation-check"},
    {ScenarioKind::reciprocity_check, "reciprocity-check"},
    {ScenarioKind::fresnel, "fresnel"},
    {ScenarioKind::sweep, "sweep"},
    {ScenarioKind::finite_time, "finite-time"},
};

const char* axis_name(SweepAxis a) {
  switch (a) {
    case SweepAxis::beta: return "beta";
    case SweepAxis::z0: return "z0";
    case SweepAxis::omega: return "omega";
    case SweepAxis::kx: return "kx";
  }
  return "?";
}

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw DomainError(path + ": " + msg);
}

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

void only_keys(const nlohmann::json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) fail(path.empty() ? "scenario" : path, "expected an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return it.key() == a; }))
      fail(join(path, it.key()), "unknown field");
  }
}

double number(const nlohmann::json& v, const std::string& path) {
  if (!v.is_number()) fail(path, "expected a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) fail(path, "must be finite");
  return x;
}

double number_or(const nlohmann::json& obj, const char* key, const std::string& path, double dflt) {
  return obj.contains(key) ? number(obj.at(key), join(path, key)) : dflt;
}

long integer(const nlohmann::json& v, const std::string& path) {
  if (!v.is_number_integer()) {
    if (v.is_number_float() && std::floor(v.get<double>()) == v.get<double>()) return static_cast<long>(v.get<double>());
    fail(path, "expected an integer");
  }
  return v.get<long>();
}

std::string text(const nlohmann::json& v, const std::string& path) {
  if (!v.is_string()) fail(path, "expected a string");
  return v.get<std::string>();
}

Eigen::Vector3d vec3(const nlohmann::json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 3) fail(path, "expected an array of 3 numbers");
  Eigen::Vector3d out;
  for (int i = 0; i < 3; ++i) out[i] = number(v[i], path + "[" + std::to_string(i) + "]");
  return out;
}

Response response_of(const nlohmann::json& params, const std::string& path) {
  if (!params.contains("response")) return Response::electric;
  const auto s = text(params.at("response"), join(path, "response"));
  if (s == "electric") return Response::electric;
  if (s == "magnetic") return Response::magnetic;
  fail(join(path, "response"), "expected \"electric\" or \"magnetic\"");
}

const char* response_name(Response r) { return r == Response::electric ? "electric" : "magnetic"; }

GridSpec parse_grid(const nlohmann::json& g, const std::string& path, GridSpec dflt) {
  only_keys(g, path, {"min", "max", "count", "spacing"});
  GridSpec out = dflt;
  out.min = number_or(g, "min", path, dflt.min);
  out.max = number_or(g, "max", path, dflt.max);
  if (g.contains("count")) out.count = static_cast<int>(integer(g.at("count"), join(path, "count")));
  if (g.contains("spacing")) {
    const auto s = text(g.at("spacing"), join(path, "spacing"));
    if (s != "lin" && s != "log") fail(join(path, "spacing"), "expected \"lin\" or \"log\"");
    out.log = s == "log";
  }
  out.validate(path);
  return out;
}

ojson grid_json(const GridSpec& g) {
  return ojson{{"min", g.min}, {"max", g.max}, {"count", g.count}, {"spacing", g.log ? "log" : "lin"}};
}

QuadratureSpec parse_quad(const nlohmann::json& q, const std::string& path) {
  only_keys(q, path, {"rel_tol", "abs_tol", "max_subdivisions", "eta", "k_max", "tail_switch", "pv_half_width",
                      "endpoint_margin"});
  QuadratureSpec out;
  out.rel_tol = number_or(q, "rel_tol", path, out.rel_tol);
  out.abs_tol = number_or(q, "abs_tol", path, out.abs_tol);
  if (q.contains("max_subdivisions"))
    out.max_subdivisions = static_cast<int>(integer(q.at("max_subdivisions"), join(path, "max_subdivisions")));
  out.eta = number_or(q, "eta", path, out.eta);
  if (q.contains("k_max") && !q.at("k_max").is_null()) out.k_max = number(q.at("k_max"), join(path, "k_max"));
  out.tail_switch = number_or(q, "tail_switch", path, out.tail_switch);
  out.pv_half_width = number_or(q, "pv_half_width", path, out.pv_half_width);
  out.endpoint_margin = number_or(q, "endpoint_margin", path, out.endpoint_margin);
  try {
    out.validate();
  } catch (const DomainError& e) {
    fail(path, e.what());
  }
  return out;
}

ojson quad_json(const QuadratureSpec& q) {
  ojson j;
  j["rel_tol"] = q.rel_tol;
  j["abs_tol"] = q.abs_tol;
  j["max_subdivisions"] = q.max_subdivisions;
  j["eta"] = q.eta;
  j["k_max"] = q.k_max ? ojson(*q.k_max) : ojson(nullptr);
  j["tail_switch"] = q.tail_switch;
  j["pv_half_width"] = q.pv_half_width;
  j["endpoint_margin"] = q.endpoint_margin;
  return j;
}

ojson transverse_json(const Transverse& t) { return ojson{{"y", t.y}, {"z", t.z}}; }

Transverse parse_transverse(const nlohmann::json& p, const char* key, const std::string& path, Transverse dflt) {
  if (!p.contains(key)) return dflt;
  const std::string at = join(path, key);
  only_keys(p.at(key), at, {"y", "z"});
  return {number_or(p.at(key), "y", at, dflt.y), number_or(p.at(key), "z", at, dflt.z)};
}

bool is_rate(ScenarioKind k) { return k == ScenarioKind::rate_surface || k == ScenarioKind::rate_free; }

ScenarioKind effective_kind(const Scenario& s) { return s.sweep ? s.sweep->target : s.kind; }

bool needs_model(ScenarioKind k) { return k != ScenarioKind::rate_free; }

bool needs_detector(ScenarioKind k) {
  return k == ScenarioKind::rate_surface || k == ScenarioKind::rate_free || k == ScenarioKind::finite_time;
}

// Normalises kind-specific parameters, filling defaults.
ojson parse_params(const nlohmann::json& p, ScenarioKind kind, const std::optional<SweepSpec>& sweep,
                   const Scenario& s) {
  const std::string path = "params";
  ojson out = ojson::object();
  const bool swept_kx = sweep && sweep->axis == SweepAxis::kx;
  switch (kind) {
    case ScenarioKind::rate_surface:
    case ScenarioKind::rate_free:
      only_keys(p, path, {});
      break;
    case ScenarioKind::kk_check: {
      only_keys(p, path, {"response", "omega_grid"});
      out["response"] = response_name(response_of(p, path));
      GridSpec g{0.01, 100.0, 50, true};
      if (p.contains("omega_grid")) g = parse_grid(p.at("omega_grid"), join(path, "omega_grid"), g);
      if (!(g.min > 0.0)) fail(join(path, "omega_grid.min"), "must be > 0");
      out["omega_grid"] = grid_json(g);
      break;
    }
    case ScenarioKind::identity_check: {
      only_keys(p, path, {"response", "pairs", "random"});
      out["response"] = response_name(response_of(p, path));
      if (p.contains("pairs") && p.contains("random")) fail(path, "give either pairs or random, not both");
      if (p.contains("pairs")) {
        const auto& arr = p.at("pairs");
        if (!arr.is_array() || arr.empty()) fail(join(path, "pairs"), "expected a nonempty array");
        ojson pairs = ojson::array();
        for (std::size_t i = 0; i < arr.size(); ++i) {
          const std::string at = join(path, "pairs") + "[" + std::to_string(i) + "]";
          if (!arr[i].is_array() || arr[i].size() < 2 || arr[i].size() > 3) fail(at, "expected [omega_minus, omega_plus_prime(, omega_plus)]");
          const double a = number(arr[i][0], at + "[0]"), b = number(arr[i][1], at + "[1]");
          const double c = arr[i].size() == 3 ? number(arr[i][2], at + "[2]") : a;
          if (a == 0.0 || b == 0.0) fail(at, "pole frequencies must be nonzero");
          if (std::abs(std::abs(a) - std::abs(b)) <= 1e-9 * std::max(std::abs(a), std::abs(b)))
            fail(at, "degenerate pair, |omega_minus| == |omega_plus_prime|");
          pairs.push_back(ojson::array({a, b, c}));
        }
        out["pairs"] = pairs;
      } else {
        const nlohmann::json r = p.contains("random") ? p.at("random") : nlohmann::json::object();
        const std::string at = join(path, "random");
        only_keys(r, at, {"count", "seed", "min", "max"});
        ojson rr;
        rr["count"] = r.contains("count") ? integer(r.at("count"), join(at, "count")) : 20;
        rr["seed"] = r.contains("seed") ? integer(r.at("seed"), join(at, "seed")) : 1;
        rr["min"] = number_or(r, "min", at, 0.05);
        rr["max"] = number_or(r, "max", at, 5.0);
        if (rr["count"].get<long>() < 1) fail(join(at, "count"), "must be >= 1");
        if (!(rr["min"].get<double>() > 0.0) || !(rr["max"].get<double>() > rr["min"].get<double>()))
          fail(at, "need 0 < min < max");
        out["random"] = rr;
      }
      break;
    }
    case ScenarioKind::dissipation_check: {
      only_keys(p, path, {"points", "random"});
      if (p.contains("points") && p.contains("random")) fail(path, "give either points or random, not both");
      if (p.contains("points")) {
        const auto& arr = p.at("points");
        if (!arr.is_array() || arr.empty()) fail(join(path, "points"), "expected a nonempty array");
        ojson pts = ojson::array();
        for (std::size_t i = 0; i < arr.size(); ++i) {
          const std::string at = join(path, "points") + "[" + std::to_string(i) + "]";
          if (!arr[i].is_array() || arr[i].size() != 5) fail(at, "expected [beta, kx, ky, kz, omega]");
          ojson row = ojson::array();
          for (int c = 0; c < 5; ++c) row.push_back(number(arr[i][c], at + "[" + std::to_string(c) + "]"));
          if (!(std::abs(row[0].get<double>()) < 1.0)) fail(at + "[0]", "|beta| must be < 1");
          pts.push_back(row);
        }
        out["points"] = pts;
      } else {
        const nlohmann::json r = p.contains("random") ? p.at("random") : nlohmann::json::object();
        const std::string at = join(path, "random");
        only_keys(r, at, {"count", "seed", "beta_max", "k_range", "omega_min", "omega_max"});
        ojson rr;
        rr["count"] = r.contains("count") ? integer(r.at("count"), join(at, "count")) : 50;
        rr["seed"] = r.contains("seed") ? integer(r.at("seed"), join(at, "seed")) : 1;
        rr["beta_max"] = number_or(r, "beta_max", at, 0.9);
        rr["k_range"] = number_or(r, "k_range", at, 3.0);
        rr["omega_min"] = number_or(r, "omega_min", at, 0.05);
        rr["omega_max"] = number_or(r, "omega_max", at, 3.05);
        if (rr["count"].get<long>() < 1) fail(join(at, "count"), "must be >= 1");
        if (!(rr["beta_max"].get<double>() >= 0.0 && rr["beta_max"].get<double>() < 1.0))
          fail(join(at, "beta_max"), "must lie in [0, 1)");
        if (!(rr["k_range"].get<double>() > 0.0)) fail(join(at, "k_range"), "must be > 0");
        if (!(rr["omega_min"].get<double>() > 0.0) || !(rr["omega_max"].get<double>() > rr["omega_min"].get<double>()))
          fail(at, "need 0 < omega_min < omega_max");
        out["random"] = rr;
      }
      break;
    }
    case ScenarioKind::reciprocity_check: {
      only_keys(p, path, {"kx", "omega", "a", "b"});
      out["kx"] = swept_kx ? ojson(nullptr) : ojson(number_or(p, "kx", path, 1.5));
      out["omega"] = number_or(p, "omega", path, 1.0);
      out["a"] = transverse_json(parse_transverse(p, "a", path, {0.0, 1.0}));
      out["b"] = transverse_json(parse_transverse(p, "b", path, {0.4, 1.3}));
      if (out["a"]["z"].get<double>() <= 0.0 || out["b"]["z"].get<double>() <= 0.0)
        fail(path, "a.z and b.z must be > 0");
      break;
    }
    case ScenarioKind::fresnel: {
      only_keys(p, path, {"kx", "ky", "omega"});
      if (!swept_kx && !p.contains("kx")) fail(join(path, "kx"), "missing");
      out["kx"] = swept_kx ? ojson(nullptr) : ojson(number(p.at("kx"), join(path, "kx")));
      out["ky"] = number_or(p, "ky", path, 0.0);
      out["omega"] = number_or(p, "omega", path, 1.0);
      break;
    }
    case ScenarioKind::finite_time: {
      only_keys(p, path, {"times", "band_half_width", "chebyshev_nodes"});
      if (!p.contains("times")) fail(join(path, "times"), "missing");
      const auto& t = p.at("times");
      if (!t.is_array() || t.empty()) fail(join(path, "times"), "expected a nonempty array");
      ojson times = ojson::array();
      double prev = 0.0;
      for (std::size_t i = 0; i < t.size(); ++i) {
        const std::string at = join(path, "times") + "[" + std::to_string(i) + "]";
        const double v = number(t[i], at);
        if (!(v > prev)) fail(at, "times must be positive and strictly increasing");
        prev = v;
        times.push_back(v);
      }
      out["times"] = times;
      FiniteTimeOptions o;
      out["band_half_width"] = number_or(p, "band_half_width", path, o.band_half_width);
      out["chebyshev_nodes"] =
          p.contains("chebyshev_nodes") ? integer(p.at("chebyshev_nodes"), join(path, "chebyshev_nodes")) : o.chebyshev_nodes;
      if (out["band_half_width"].get<double>() < 0.0) fail(join(path, "band_half_width"), "must be >= 0");
      if (out["chebyshev_nodes"].get<long>() < 8) fail(join(path, "chebyshev_nodes"), "must be >= 8");
      if (out["band_half_width"].get<double>() >= s.detector.omega)
        fail(join(path, "band_half_width"), "must be below detector.omega");
      break;
    }
    case ScenarioKind::sweep:
      break;
  }
  return out;
}

std::string utc_timestamp() {
  std::time_t t = std::time(nullptr);
  if (const char* e = std::getenv("SOURCE_DATE_EPOCH")) {
    char* end = nullptr;
    const long long v = std::strtoll(e, &end, 10);
    if (end && *end == '\0') t = static_cast<std::time_t>(v);
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Row plus bookkeeping; cells follow the record's columns.
struct Row {
  std::vector<Cell> cells;
  bool converged = true;
  std::string diagnostic;
};

template <typename F>
std::vector<Row> parallel_rows(std::size_t n, unsigned workers, F&& f) {
  std::vector<Row> out(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        out[i] = f(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  unsigned w = workers ? workers : std::max(1u, std::thread::hardware_concurrency());
  w = static_cast<unsigned>(std::min<std::size_t>(w, n));
  if (w <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < w; ++t) pool.emplace_back(work);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string point_label(const char* what, double x) { return std::string(what) + "=" + format_number(x); }

Row rate_row(const Scenario& s, bool compact, double axis_value) {
  MotionFrame f(s.beta);
  Row row;
  RateResult r;
  const bool surface = effective_kind(s) == ScenarioKind::rate_surface;
  r = surface ? rate_surface(s.detector, f, s.model, s.quad) : rate_free_space(s.detector, f, s.quad);
  row.converged = r.converged;
  if (!r.converged) row.diagnostic = "rate integral did not reach tolerance";
  if (compact) {
    row.cells = {axis_value, r.gamma, r.error_estimate, r.converged};
  } else if (surface) {
    row.cells = {s.beta, s.detector.omega, s.detector.z0, r.gamma, r.gamma_s, r.gamma_p, r.error_estimate, r.exact,
                 r.converged};
  } else {
    row.cells = {s.beta, s.detector.omega, r.gamma, r.error_estimate, r.exact, r.converged};
  }
  return row;
}

Row fresnel_row(const Scenario& s, double kx) {
  const auto rc = reflection_coefficients(s.model, MotionFrame(s.beta), kx, s.params["ky"].get<double>(),
                                          s.params["omega"].get<double>());
  Row row;
  row.cells = {s.beta, kx, s.params["ky"].get<double>(), s.params["omega"].get<double>(),
               rc.r11.real(), rc.r11.imag(), rc.r22.real(), rc.r22.imag(),
               rc.r12.real(), rc.r12.imag(), rc.r21.real(), rc.r21.imag(), true, true};
  return row;
}

Row reciprocity_row(const Scenario& s, double kx) {
  const auto& p = s.params;
  const Transverse a{p["a"]["y"].get<double>(), p["a"]["z"].get<double>()};
  const Transverse b{p["b"]["y"].get<double>(), p["b"]["z"].get<double>()};
  const double w = p["omega"].get<double>();
  Row row;
  try {
    const auto rep = reciprocity_check(s.model, MotionFrame(s.beta), kx, w, a, b, s.quad);
    row.cells = {s.beta, kx, w, rep.transpose_residual, rep.naive_violation, rep.error_estimate, true};
  } catch (const ConvergenceError& e) {
    row.converged = false;
    row.diagnostic = e.what();
    row.cells = {s.beta, kx, w, kNaN, kNaN, e.achieved_error(), false};
  }
  return row;
}

const std::vector<Column> kRateSurfaceCols = {
    {"beta"}, {"omega"}, {"z0"}, {"gamma"}, {"gamma_s"}, {"gamma_p"}, {"error_estimate"},
    {"exact", ColumnType::flag}, {"converged", ColumnType::flag}};
const std::vector<Column> kRateFreeCols = {
    {"beta"}, {"omega"}, {"gamma"}, {"error_estimate"}, {"exact", ColumnType::flag}, {"converged", ColumnType::flag}};
const std::vector<Column> kFresnelCols = {
    {"beta"}, {"kx"}, {"ky"}, {"omega"}, {"r11_re"}, {"r11_im"}, {"r22_re"}, {"r22_im"}, {"r12_re"}, {"r12_im"},
    {"r21_re"}, {"r21_im"}, {"exact", ColumnType::flag}, {"converged", ColumnType::flag}};
const std::vector<Column> kReciprocityCols = {
    {"beta"}, {"kx"}, {"omega"}, {"transpose_residual"}, {"naive_violation"}, {"error_estimate"},
    {"converged", ColumnType::flag}};

Scenario with_axis(Scenario s, SweepAxis axis, double x) {
  switch (axis) {
    case SweepAxis::beta: s.beta = x; break;
    case SweepAxis::z0: s.detector.z0 = x; break;
    case SweepAxis::omega:
      if (is_rate(effective_kind(s))) s.detector.omega = x;
      else s.params["omega"] = x;
      break;
    case SweepAxis::kx: s.params["kx"] = x; break;
  }
  return s;
}

void run_sweep(const Scenario& s, const RunOptions& opts, ResultRecord& rec, std::vector<Row>& rows) {
  const auto& sw = *s.sweep;
  const auto xs = sw.grid.points();
  const auto target = sw.target;
  if (is_rate(target)) {
    rec.columns = {{axis_name(sw.axis)}, {"gamma"}, {"error_estimate"}, {"converged", ColumnType::flag}};
  } else if (target == ScenarioKind::fresnel) {
    rec.columns = kFresnelCols;
  } else {
    rec.columns = kReciprocityCols;
  }
  rows = parallel_rows(xs.size(), opts.workers, [&](std::size_t i) {
    const Scenario p = with_axis(s, sw.axis, xs[i]);
    try {
      if (is_rate(target)) return rate_row(p, true, xs[i]);
      const double kx = p.params["kx"].get<double>();
      return target == ScenarioKind::fresnel ? fresnel_row(p, kx) : reciprocity_row(p, kx);
    } catch (const DomainError& e) {
      throw DomainError(std::string("sweep point ") + point_label(axis_name(sw.axis), xs[i]) + ": " + e.what());
    }
  });
}

void run_kk(const Scenario& s, const RunOptions& opts, ResultRecord& rec, std::vector<Row>& rows) {
  const Response kind = s.params["response"] == "magnetic" ? Response::magnetic : Response::electric;
  const auto& g = s.params["omega_grid"];
  const GridSpec grid{g["min"].get<double>(), g["max"].get<double>(), g["count"].get<int>(), g["spacing"] == "log"};
  const auto ws = grid.points();
  rec.columns = {{"omega"}, {"chi_re"}, {"chi_im"}, {"kk_re"}, {"rel_residual"}, {"error_estimate"},
                 {"converged", ColumnType::flag}};
  rows = parallel_rows(ws.size(), opts.workers, [&](std::size_t i) {
    const double w = ws[i];
    const cdouble c = chi(s.model, kind, w);
    Row row;
    try {
      double err = 0.0;
      const cdouble k = kk_reconstruct(s.model, kind, w, s.quad, &err);
      const double rel = std::abs(c) > 0.0 ? std::abs(k - c) / std::abs(c) : std::abs(k - c);
      row.cells = {w, c.real(), c.imag(), k.real(), rel, err, true};
    } catch (const ConvergenceError& e) {
      row.converged = false;
      row.diagnostic = point_label("omega", w) + ": " + e.what();
      row.cells = {w, c.real(), c.imag(), kNaN, kNaN, e.achieved_error(), false};
    }
    return row;
  });
}

void run_identity(const Scenario& s, const RunOptions& opts, ResultRecord& rec, std::vector<Row>& rows) {
  const Response kind = s.params["response"] == "magnetic" ? Response::magnetic : Response::electric;
  std::vector<std::array<double, 3>> pairs;
  if (s.params.contains("pairs")) {
    for (const auto& p : s.params["pairs"]) pairs.push_back({p[0].get<double>(), p[1].get<double>(), p[2].get<double>()});
  } else {
    const auto& r = s.params["random"];
    std::mt19937_64 rng(static_cast<std::uint64_t>(r["seed"].get<long>()));
    const double lo = r["min"].get<double>(), hi = r["max"].get<double>();
    const auto n = static_cast<std::size_t>(r["count"].get<long>());
    auto draw = [&] { return (uniform01(rng) < 0.5 ? -1.0 : 1.0) * (lo + (hi - lo) * uniform01(rng)); };
    while (pairs.size() < n) {
      const double a = draw(), b = draw();
      const double p = pairs.size() % 2 ? lo + (hi - lo) * uniform01(rng) : a;
      if (std::abs(std::abs(a) - std::abs(b)) < 1e-3 * std::max(std::abs(a), std::abs(b))) continue;
      pairs.push_back({a, b, p});
    }
  }
  rec.columns = {{"omega_minus"}, {"omega_plus_prime"}, {"omega_plus"}, {"lhs_re"}, {"lhs_im"}, {"rhs_re"},
                 {"rhs_im"}, {"rel_residual"}, {"error_estimate"}, {"converged", ColumnType::flag}};
  rows = parallel_rows(pairs.size(), opts.workers, [&](std::size_t i) {
    const auto [a, b, p] = pairs[i];
    Row row;
    try {
      const auto rep = verify_identity_1(s.model, a, b, s.quad, kind, p);
      row.cells = {a, b, p, rep.lhs.real(), rep.lhs.imag(), rep.rhs.real(), rep.rhs.imag(), rep.rel_residual,
                   rep.error_estimate, true};
    } catch (const ConvergenceError& e) {
      row.converged = false;
      row.diagnostic = "pair " + std::to_string(i) + ": " + e.what();
      row.cells = {a, b, p, kNaN, kNaN, kNaN, kNaN, kNaN, e.achieved_error(), false};
    }
    return row;
  });
}

void run_dissipation(const Scenario& s, const RunOptions& opts, ResultRecord& rec, std::vector<Row>& rows) {
  std::vector<std::array<double, 5>> pts;
  if (s.params.contains("points")) {
    for (const auto& p : s.params["points"])
      pts.push_back({p[0].get<double>(), p[1].get<double>(), p[2].get<double>(), p[3].get<double>(), p[4].get<double>()});
  } else {
    const auto& r = s.params["random"];
    std::mt19937_64 rng(static_cast<std::uint64_t>(r["seed"].get<long>()));
    const double bmax = r["beta_max"].get<double>(), K = r["k_range"].get<double>();
    const double wlo = r["omega_min"].get<double>(), whi = r["omega_max"].get<double>();
    const auto n = static_cast<std::size_t>(r["count"].get<long>());
    while (pts.size() < n) {
      const double beta = bmax * (2 * uniform01(rng) - 1);
      const double w = wlo + (whi - wlo) * uniform01(rng);
      const double kx = K * (2 * uniform01(rng) - 1);
      const double ky = K * (2 * uniform01(rng) - 1), kz = K * (2 * uniform01(rng) - 1);
      if (std::abs(doppler(MotionFrame(beta), w, kx).omega_minus) < 1e-3 * w) continue;
      pts.push_back({beta, kx, ky, kz, w});
    }
  }
  rec.columns = {{"beta"}, {"kx"}, {"ky"}, {"kz"}, {"omega"}, {"max_residual"}, {"rel_residual"},
                 {"exact", ColumnType::flag}, {"converged", ColumnType::flag}};
  rows = parallel_rows(pts.size(), opts.workers, [&](std::size_t i) {
    const auto [beta, kx, ky, kz, w] = pts[i];
    const auto rep = green_dissipation_identity(s.model, MotionFrame(beta), kx, Eigen::Vector2d(ky, kz), w, s.quad);
    Row row;
    row.cells = {beta, kx, ky, kz, w, rep.max_residual, rep.rel_residual, true, true};
    return row;
  });
}

void run_finite_time(const Scenario& s, ResultRecord& rec, std::vector<Row>& rows) {
  std::vector<double> times;
  for (const auto& t : s.params["times"]) times.push_back(t.get<double>());
  FiniteTimeOptions o;
  o.band_half_width = s.params["band_half_width"].get<double>();
  o.chebyshev_nodes = s.params["chebyshev_nodes"].get<int>();
  const MotionFrame f(s.beta);
  const auto rate = rate_surface(s.detector, f, s.model, s.quad);
  const auto res = finite_time_probabilities(s.detector, f, s.model, s.quad, times, o);
  rec.columns = {{"T"}, {"probability"}, {"per_time"}, {"gamma"}, {"relative_deviation"}, {"error_estimate"},
                 {"converged", ColumnType::flag}};
  for (std::size_t i = 0; i < times.size(); ++i) {
    const auto& r = res[i];
    Row row;
    const double dev = rate.gamma > 0.0 ? (r.per_time - rate.gamma) / rate.gamma : kNaN;
    row.converged = r.converged && rate.converged;
    if (!row.converged) row.diagnostic = point_label("T", times[i]) + ": finite-time integral did not reach tolerance";
    row.cells = {times[i], r.probability, r.per_time, rate.gamma, dev, r.error_estimate, row.converged};
    rows.push_back(std::move(row));
  }
  rec.summary["gamma_error_estimate"] = rate.error_estimate;
  if (!res.empty()) {
    rec.summary["band_half_width"] = res.front().band_half_width;
    rec.summary["surrogate_error"] = res.front().surrogate_error;
  }
}

std::string unit_of(const std::string& col) {
  static const std::vector<std::pair<std::string, std::string>> table = {
      {"omega", "w0"}, {"omega_minus", "w0"}, {"omega_plus", "w0"}, {"omega_plus_prime", "w0"},
      {"z0", "c/w0"}, {"kx", "w0/c"}, {"ky", "w0/c"}, {"kz", "w0/c"},
      {"gamma", "w0"}, {"gamma_s", "w0"}, {"gamma_p", "w0"}, {"per_time", "w0"}, {"T", "1/w0"}};
  for (const auto& [name, unit] : table)
    if (name == col) return unit;
  return "1";
}

void max_of_column(ResultRecord& rec, const char* col, const char* key) {
  const auto it = std::find_if(rec.columns.begin(), rec.columns.end(), [&](const Column& c) { return c.name == col; });
  if (it == rec.columns.end()) return;
  const auto idx = static_cast<std::size_t>(it - rec.columns.begin());
  double m = 0.0;
  bool any = false;
  for (const auto& r : rec.rows) {
    const double v = std::get<double>(r[idx]);
    if (std::isfinite(v)) {
      m = std::max(m, v);
      any = true;
    }
  }
  if (any) rec.summary[key] = m;
}

ojson cell_json(const Cell& c) {
  if (const auto* d = std::get_if<double>(&c)) {
    if (std::isfinite(*d)) return *d;
    return std::isnan(*d) ? "nan" : (*d > 0 ? "inf" : "-inf");
  }
  if (const auto* b = std::get_if<bool>(&c)) return *b;
  return std::get<std::string>(c);
}

Cell cell_from_json(const ojson& j, ColumnType t, const std::string& where) {
  switch (t) {
    case ColumnType::number:
      if (j.is_number()) return j.get<double>();
      if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "nan") return kNaN;
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
      }
      break;
    case ColumnType::flag:
      if (j.is_boolean()) return j.get<bool>();
      break;
    case ColumnType::text:
      if (j.is_string()) return j.get<std::string>();
      break;
  }
  throw DomainError("record: bad cell at " + where);
}

const char* type_name(ColumnType t) {
  switch (t) {
    case ColumnType::number: return "number";
    case ColumnType::flag: return "flag";
    case ColumnType::text: return "text";
  }
  return "?";
}

}  // namespace

std::string to_string(ScenarioKind k) {
  for (const auto& [kind, name] : kKindNames)
    if (kind == k) return name;
  return "?";
}

ScenarioKind kind_from_string(const std::string& s) {
  for (const auto& [kind, name] : kKindNames)
    if (s == name) return kind;
  throw DomainError("kind: unknown scenario kind \"" + s + "\"");
}

void GridSpec::validate(const std::string& where) const {
  if (count < 1) fail(join(where, "count"), "must be >= 1");
  if (!std::isfinite(min) || !std::isfinite(max)) fail(where, "bounds must be finite");
  if (count > 1 && !(min < max)) fail(where, "need min < max for a strictly increasing grid");
  if (log && !(min > 0.0)) fail(join(where, "min"), "log spacing needs min > 0");
}

std::vector<double> GridSpec::points() const {
  std::vector<double> out(static_cast<std::size_t>(count));
  if (count == 1) {
    out[0] = min;
    return out;
  }
  for (int i = 0; i < count; ++i) {
    const double t = static_cast<double>(i) / (count - 1);
    out[i] = log ? min * std::pow(max / min, t) : min + t * (max - min);
  }
  out.front() = min;
  out.back() = max;
  return out;
}

ojson Scenario::canonical() const {
  ojson j;
  j["kind"] = to_string(kind);
  j["model_file"] = model_file.empty() ? ojson(nullptr) : ojson(model_file);
  j["model"] = model_file.empty() ? ojson(nullptr) : ojson::parse(model_to_json(model));
  j["frame"] = ojson{{"beta", beta}};
  j["detector"] = ojson{{"kappa", {detector.kappa[0], detector.kappa[1], detector.kappa[2]}},
                        {"omega", detector.omega},
                        {"z0", detector.z0}};
  j["quadrature"] = quad_json(quad);
  if (sweep) {
    ojson sw = grid_json(sweep->grid);
    sw["axis"] = axis_name(sweep->axis);
    sw["target"] = to_string(sweep->target);
    j["sweep"] = sw;
  }
  j["params"] = params;
  if (reference_frequency) j["units"] = ojson{{"reference_frequency", *reference_frequency}};
  return j;
}

Scenario parse_scenario(const nlohmann::json& doc, const std::string& base_dir) {
  only_keys(doc, "", {"kind", "description", "model_file", "frame", "detector", "quadrature", "sweep", "params",
                      "units"});
  Scenario s;
  if (!doc.contains("kind")) fail("kind", "missing");
  s.kind = kind_from_string(text(doc.at("kind"), "kind"));
  if (doc.contains("description")) text(doc.at("description"), "description");

  if (doc.contains("sweep")) {
    if (s.kind != ScenarioKind::sweep) fail("sweep", "only allowed with kind \"sweep\"");
    const auto& sw = doc.at("sweep");
    only_keys(sw, "sweep", {"axis", "min", "max", "count", "spacing", "target"});
    SweepSpec spec;
    if (!sw.contains("axis")) fail("sweep.axis", "missing");
    const auto axis = text(sw.at("axis"), "sweep.axis");
    if (axis == "beta") spec.axis = SweepAxis::beta;
    else if (axis == "z0") spec.axis = SweepAxis::z0;
    else if (axis == "omega") spec.axis = SweepAxis::omega;
    else if (axis == "kx") spec.axis = SweepAxis::kx;
    else fail("sweep.axis", "expected beta, z0, omega or kx");
    for (const char* k : {"min", "max", "count"})
      if (!sw.contains(k)) fail(std::string("sweep.") + k, "missing");
    nlohmann::json g = nlohmann::json::object();
    for (const char* k : {"min", "max", "count", "spacing"})
      if (sw.contains(k)) g[k] = sw.at(k);
    spec.grid = parse_grid(g, "sweep", GridSpec{});
    if (sw.contains("target")) {
      spec.target = kind_from_string(text(sw.at("target"), "sweep.target"));
    }
    const auto t = spec.target;
    const bool ok = (t == ScenarioKind::rate_surface && spec.axis != SweepAxis::kx) ||
                    (t == ScenarioKind::rate_free && (spec.axis == SweepAxis::beta || spec.axis == SweepAxis::omega)) ||
                    ((t == ScenarioKind::fresnel || t == ScenarioKind::reciprocity_check) && spec.axis != SweepAxis::z0);
    if (!ok) fail("sweep", "axis " + axis + " cannot be swept for target " + to_string(t));
    for (double x : spec.grid.points()) {
      if (spec.axis == SweepAxis::beta && !(std::abs(x) < 1.0)) fail("sweep", "beta values must satisfy |beta| < 1");
      if ((spec.axis == SweepAxis::z0 || spec.axis == SweepAxis::omega) && !(x > 0.0))
        fail("sweep", std::string(axis_name(spec.axis)) + " values must be > 0");
    }
    s.sweep = spec;
  } else if (s.kind == ScenarioKind::sweep) {
    fail("sweep", "missing");
  }
  const ScenarioKind k = effective_kind(s);

  if (doc.contains("model_file")) {
    s.model_file = text(doc.at("model_file"), "model_file");
    fs::path p(s.model_file);
    if (p.is_relative()) p = fs::path(base_dir) / p;
    s.model_path = p.lexically_normal().string();
    std::error_code ec;
    if (!fs::is_regular_file(s.model_path, ec)) fail("model_file", "not found: " + s.model_path);
    std::ifstream in(s.model_path, std::ios::binary);
    if (!in) fail("model_file", "cannot read " + s.model_path);
    std::stringstream ss;
    ss << in.rdbuf();
    try {
      s.model = parse_model_json(ss.str());
    } catch (const DomainError& e) {
      fail("model_file", std::string(s.model_path) + ": " + e.what());
    }
  } else if (needs_model(k)) {
    fail("model_file", "missing");
  }

  if (doc.contains("frame")) {
    only_keys(doc.at("frame"), "frame", {"beta"});
    s.beta = number_or(doc.at("frame"), "beta", "frame", 0.0);
  }
  if (!(std::abs(s.beta) < 1.0)) fail("frame.beta", "|beta| must be < 1");

  if (doc.contains("detector")) {
    const auto& d = doc.at("detector");
    only_keys(d, "detector", {"kappa", "omega", "z0"});
    if (d.contains("kappa")) s.detector.kappa = vec3(d.at("kappa"), "detector.kappa");
    s.detector.omega = number_or(d, "omega", "detector", s.detector.omega);
    s.detector.z0 = number_or(d, "z0", "detector", s.detector.z0);
  } else if (needs_detector(k)) {
    fail("detector", "missing");
  }
  if (needs_detector(k)) {
    if (!(s.detector.omega > 0.0)) fail("detector.omega", "must be > 0");
    if (k != ScenarioKind::rate_free && !(s.detector.z0 > 0.0)) fail("detector.z0", "must be > 0");
  }

  if (doc.contains("quadrature")) s.quad = parse_quad(doc.at("quadrature"), "quadrature");
  if ((is_rate(k) || k == ScenarioKind::finite_time) && !s.quad.k_max)
    fail("quadrature.k_max", "required for rate scenarios");

  if (doc.contains("units")) {
    only_keys(doc.at("units"), "units", {"reference_frequency"});
    if (!doc.at("units").contains("reference_frequency")) fail("units.reference_frequency", "missing");
    s.reference_frequency = number(doc.at("units").at("reference_frequency"), "units.reference_frequency");
    if (!(*s.reference_frequency > 0.0)) fail("units.reference_frequency", "must be > 0");
  }

  const nlohmann::json params = doc.contains("params") ? doc.at("params") : nlohmann::json::object();
  s.params = parse_params(params, k, s.sweep, s);
  return s;
}

Scenario load_scenario_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read scenario file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(ss.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw DomainError(std::string("scenario: invalid JSON: ") + e.what());
  }
  return parse_scenario(doc, fs::path(path).parent_path().string());
}

ResultRecord run_scenario(const Scenario& s, const RunOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  ResultRecord rec;
  rec.scenario = s.canonical();
  rec.provenance.timestamp = utc_timestamp();
  rec.provenance.quad = quad_json(s.quad);
  std::vector<Row> rows;

  switch (s.kind) {
    case ScenarioKind::rate_surface:
      rec.columns = kRateSurfaceCols;
      rows.push_back(rate_row(s, false, 0.0));
      break;
    case ScenarioKind::rate_free:
      rec.columns = kRateFreeCols;
      rows.push_back(rate_row(s, false, 0.0));
      break;
    case ScenarioKind::kk_check: run_kk(s, opts, rec, rows); break;
    case ScenarioKind::identity_check: run_identity(s, opts, rec, rows); break;
    case ScenarioKind::dissipation_check: run_dissipation(s, opts, rec, rows); break;
    case ScenarioKind::reciprocity_check:
      rec.columns = kReciprocityCols;
      rows.push_back(reciprocity_row(s, s.params["kx"].get<double>()));
      break;
    case ScenarioKind::fresnel:
      rec.columns = kFresnelCols;
      rows.push_back(fresnel_row(s, s.params["kx"].get<double>()));
      break;
    case ScenarioKind::sweep: run_sweep(s, opts, rec, rows); break;
    case ScenarioKind::finite_time: run_finite_time(s, rec, rows); break;
  }

  for (auto& r : rows) {
    rec.converged = rec.converged && r.converged;
    if (!r.diagnostic.empty()) rec.diagnostics.push_back(r.diagnostic);
    rec.rows.push_back(std::move(r.cells));
  }
  const bool rate_valued = std::any_of(rec.columns.begin(), rec.columns.end(),
                                       [](const Column& c) { return c.name == "gamma"; });
  for (auto& c : rec.columns) {
    if (c.type != ColumnType::number) continue;
    c.unit = c.name == "error_estimate" && rate_valued && effective_kind(s) != ScenarioKind::finite_time ? "w0"
                                                                                                         : unit_of(c.name);
  }
  if (s.reference_frequency) {
    constexpr double c_light = 299792458.0;
    const double w0 = *s.reference_frequency;
    rec.summary["si_factors"] = ojson{{"w0 [rad/s]", w0}, {"c/w0 [m]", c_light / w0}, {"1/w0 [s]", 1.0 / w0},
                                      {"w0/c [1/m]", w0 / c_light}};
  }
  max_of_column(rec, "rel_residual", "max_rel_residual");
  max_of_column(rec, "transpose_residual", "max_transpose_residual");
  rec.summary["rows"] = rec.rows.size();
  rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string to_csv(const ResultRecord& r) {
  std::string out;
  for (std::size_t i = 0; i < r.columns.size(); ++i) {
    if (i) out += ',';
    out += r.columns[i].name;
  }
  out += '\n';
  for (const auto& row : r.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      if (const auto* d = std::get_if<double>(&row[i])) out += format_number(*d);
      else if (const auto* b = std::get_if<bool>(&row[i])) out += *b ? "true" : "false";
      else out += std::get<std::string>(row[i]);
    }
    out += '\n';
  }
  return out;
}

ojson to_json(const ResultRecord& r) {
  ojson j;
  j["scenario"] = r.scenario;
  ojson cols = ojson::array();
  for (const auto& c : r.columns) {
    ojson jc{{"name", c.name}, {"type", type_name(c.type)}};
    if (!c.unit.empty()) jc["unit"] = c.unit;
    cols.push_back(jc);
  }
  j["columns"] = cols;
  ojson rows = ojson::array();
  for (const auto& row : r.rows) {
    ojson jr = ojson::array();
    for (const auto& c : row) jr.push_back(cell_json(c));
    rows.push_back(jr);
  }
  j["rows"] = rows;
  j["summary"] = r.summary;
  j["diagnostics"] = r.diagnostics;
  j["converged"] = r.converged;
  j["provenance"] = ojson{{"version", r.provenance.version},
                          {"timestamp", r.provenance.timestamp},
                          {"quad", r.provenance.quad}};
  j["wall_time"] = r.wall_time;
  return j;
}

ResultRecord record_from_json(const ojson& j) {
  try {
    ResultRecord r;
    r.scenario = j.at("scenario");
    for (const auto& c : j.at("columns")) {
      const auto t = c.at("type").get<std::string>();
      const ColumnType type = t == "flag" ? ColumnType::flag : t == "text" ? ColumnType::text : ColumnType::number;
      if (t != "flag" && t != "text" && t != "number") throw DomainError("record: unknown column type " + t);
      r.columns.push_back({c.at("name").get<std::string>(), type, c.value("unit", std::string())});
    }
    std::size_t ri = 0;
    for (const auto& jr : j.at("rows")) {
      if (jr.size() != r.columns.size()) throw DomainError("record: row width mismatch");
      std::vector<Cell> row;
      for (std::size_t i = 0; i < jr.size(); ++i)
        row.push_back(cell_from_json(jr[i], r.columns[i].type, "row " + std::to_string(ri) + ", " + r.columns[i].name));
      r.rows.push_back(std::move(row));
      ++ri;
    }
    r.summary = j.at("summary");
    r.diagnostics = j.at("diagnostics").get<std::vector<std::string>>();
    r.converged = j.at("converged").get<bool>();
    const auto& p = j.at("provenance");
    r.provenance.version = p.at("version").get<std::string>();
    r.provenance.timestamp = p.at("timestamp").get<std::string>();
    r.provenance.quad = p.at("quad");
    r.wall_time = j.at("wall_time").get<double>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DomainError(std::string("record: ") + e.what());
  }
}

void emit_results(const ResultRecord& r, OutputFormat format, const std::string& path) {
  const std::string body = format == OutputFormat::csv ? to_csv(r) : to_json(r).dump(2) + "\n";
  if (path.empty()) {
    std::cout << body << std::flush;
    if (!std::cout) throw IoError("cannot write to stdout");
    return;
  }
  const fs::path target(path);
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out << body;
    out.flush();
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot move output into place at " + path);
  }
}

}  // namespace qfric
