#include "qfric/rates.hpp"
#include "qfric/scenario.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace qfric;
namespace fs = std::filesystem;

namespace {

const std::string kData = QFRIC_DATA_DIR;

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const char* title, double limit_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool in_time = limit_s <= 0.0 || dt < limit_s;
  const bool ok = o.pass && in_time;
  if (!ok) ++failures;
  char timing[96];
  if (limit_s > 0.0) std::snprintf(timing, sizeof timing, "%.3f s, limit %.0f s", dt, limit_s);
  else std::snprintf(timing, sizeof timing, "%.3f s", dt);
  std::printf("%s criterion %2d: %s | %s [%s]%s\n", ok ? "PASS" : "FAIL", id, title, o.detail.c_str(), timing,
              in_time ? "" : " over time limit");
  std::fflush(stdout);
}

std::string sci(double x) {
  char b[32];
  std::snprintf(b, sizeof b, "%.3e", x);
  return b;
}

double uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

QuadratureSpec with_kmax(double k) {
  QuadratureSpec q;
  q.k_max = k;
  return q;
}

DetectorSpec bundled_detector() {
  DetectorSpec d;
  d.kappa = Eigen::Vector3d(0.3, -0.5, 1.0);
  d.omega = 0.1;
  d.z0 = 1.0;
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main() {
  const auto lorentz = load_model_file(kData + "/models/lorentz.json");
  const auto drude = load_model_file(kData + "/models/drude.json");

  criterion(1, "free-space rate is exactly zero", 1.0, [] {
    int n = 0, zero = 0;
    for (double beta : {0.0, 0.3, 0.6, 0.9, 0.99}) {
      for (double w : {0.1, 1.0, 10.0}) {
        DetectorSpec d;
        d.omega = w;
        const auto r = rate_free_space(d, MotionFrame(beta), with_kmax(1e4));
        ++n;
        if (r.gamma == 0.0) ++zero;
      }
    }
    return Outcome{zero == n, std::to_string(zero) + "/" + std::to_string(n) + " exactly 0"};
  });

  criterion(2, "static surface rate vanishes", 1.0, [&] {
    const auto r = rate_surface(bundled_detector(), MotionFrame(0.0), lorentz, with_kmax(50));
    return Outcome{r.gamma == 0.0, "gamma = " + sci(r.gamma)};
  });

  criterion(3, "Im r > 0 on the rate domain and gamma > 0", 10.0, [&] {
    const double beta = 0.5, w = 0.1;
    MotionFrame f(beta);
    const double k_lo = w / beta;
    int positive = 0;
    double worst = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 10; ++i) {
      for (int j = 0; j < 10; ++j) {
        const double k = k_lo * std::pow(50.0 / k_lo, (i + 0.5) / 10.0);
        const double ky = -10.0 + 20.0 * (j + 0.5) / 10.0;
        const auto rc = reflection_coefficients(lorentz, f, -k, ky, -w);
        const double m = std::min(rc.r11.imag(), rc.r22.imag());
        worst = std::min(worst, m);
        if (m > 0.0) ++positive;
      }
    }
    const auto r = rate_surface(bundled_detector(), f, lorentz, with_kmax(50));
    return Outcome{positive == 100 && r.gamma > 0.0 && r.converged,
                   std::to_string(positive) + "/100 positive, min Im r = " + sci(worst) + ", gamma = " + sci(r.gamma)};
  });

  criterion(4, "dispersion-integral reconstruction of chi", 30.0, [&] {
    QuadratureSpec q;
    double worst = 0.0;
    for (const auto* m : {&lorentz, &drude}) {
      for (int i = 0; i < 50; ++i) {
        const double w = std::pow(10.0, -2.0 + 4.0 * i / 49.0);
        const cdouble c = chi(*m, Response::electric, w);
        const cdouble k = kk_reconstruct(*m, Response::electric, w, q);
        worst = std::max(worst, std::abs(k - c) / std::abs(c));
      }
    }
    return Outcome{worst < 1e-5, "max relative residual " + sci(worst) + " (tol 1e-5)"};
  });

  criterion(5, "two-pole dispersion identity", 60.0, [&] {
    QuadratureSpec q;
    std::mt19937_64 rng(20240611);
    double worst = 0.0;
    int done = 0;
    while (done < 20) {
      const double a = (uniform(rng) < 0.5 ? -1 : 1) * (0.05 + 4.95 * uniform(rng));
      const double b = (uniform(rng) < 0.5 ? -1 : 1) * (0.05 + 4.95 * uniform(rng));
      if (std::abs(std::abs(a) - std::abs(b)) < 1e-3 * std::max(std::abs(a), std::abs(b))) continue;
      worst = std::max(worst, verify_identity_1(lorentz, a, b, q).rel_residual);
      ++done;
    }
    return Outcome{worst < 1e-6, "max relative residual " + sci(worst) + " over 20 pairs (tol 1e-6)"};
  });

  criterion(6, "dissipation identity of the moving-medium Green tensor", 10.0, [&] {
    QuadratureSpec q;
    std::mt19937_64 rng(5);
    double worst = 0.0;
    int done = 0;
    while (done < 50) {
      const double beta = 1.8 * uniform(rng) - 0.9;
      const double w = 0.05 + 3 * uniform(rng);
      const double kx = 6 * uniform(rng) - 3;
      const Eigen::Vector2d K(6 * uniform(rng) - 3, 6 * uniform(rng) - 3);
      if (std::abs(doppler(MotionFrame(beta), w, kx).omega_minus) < 1e-3 * w) continue;
      worst = std::max(worst, green_dissipation_identity(lorentz, MotionFrame(beta), kx, K, w, q).rel_residual);
      ++done;
    }
    return Outcome{worst < 1e-8, "max relative residual " + sci(worst) + " over 50 points (tol 1e-8)"};
  });

  criterion(7, "reciprocity under velocity reversal", 60.0, [&] {
    QuadratureSpec q;
    const Transverse a{0.0, 1.0}, b{0.4, 1.3};
    const auto mv = reciprocity_check(lorentz, MotionFrame(0.5), 1.5, 1.0, a, b, q);
    const auto st = reciprocity_check(lorentz, MotionFrame(0.0), 1.5, 1.0, a, b, q);
    const bool ok = mv.transpose_residual < 1e-6 && mv.naive_violation >= 10.0 * 1e-6 &&
                    mv.naive_violation >= 10.0 * mv.transpose_residual && st.transpose_residual < 1e-8;
    return Outcome{ok, "moving: reversed " + sci(mv.transpose_residual) + ", naive " + sci(mv.naive_violation) +
                           "; static: " + sci(st.transpose_residual)};
  });

  criterion(8, "rest-frame reflection equals textbook Fresnel", 1.0, [&] {
    double worst = 0.0;
    int n = 0;
    for (int i = 0; i < 10; ++i) {
      for (int j = 0; j < 10; ++j) {
        const double w = 0.05 + 0.35 * i;
        double k = 0.07 + 0.45 * j;
        if (std::abs(k - w) < 1e-3) k += 0.01;
        const double ky = 0.3 * k, kx = std::sqrt(k * k - ky * ky);
        const auto rc = reflection_coefficients(lorentz, MotionFrame(0.0), kx, ky, w);
        const cdouble eps = permittivity(lorentz, w), mu = permeability(lorentz, w);
        const cdouble kz1 = std::sqrt(cdouble(w * w - k * k, 0.0));
        cdouble kz2 = std::sqrt(eps * mu * w * w - k * k);
        if (kz2.imag() < 0.0) kz2 = -kz2;
        const cdouble rs = (mu * kz1 - kz2) / (mu * kz1 + kz2);
        const cdouble rp = (eps * kz1 - kz2) / (eps * kz1 + kz2);
        worst = std::max({worst, std::abs(rc.r11 - rs), std::abs(rc.r22 - rp), std::abs(rc.r12), std::abs(rc.r21)});
        ++n;
      }
    }
    return Outcome{n == 100 && worst < 1e-12, "max deviation " + sci(worst) + " over " + std::to_string(n) + " points"};
  });

  criterion(9, "rate decays with height within the envelope", 120.0, [&] {
    const auto d = bundled_detector();
    MotionFrame f(0.5);
    std::vector<double> ladder;
    for (int i = 0; i < 6; ++i) ladder.push_back(0.5 * std::pow(2.0, i));
    const auto rs = rate_vs_distance(d, f, lorentz, with_kmax(50), ladder);
    const double xi = envelope_xi_min(d, f);
    bool ok = rs.front().gamma > 0.0;
    double worst = 0.0;
    for (std::size_t i = 1; i < rs.size(); ++i) {
      const double ratio = rs[i].gamma / rs[i - 1].gamma;
      const double bound = std::exp(-2 * xi * (ladder[i] - ladder[i - 1]));
      ok = ok && rs[i].gamma < rs[i - 1].gamma && ratio <= bound && rs[i].converged;
      worst = std::max(worst, ratio / bound);
    }
    return Outcome{ok, "max step ratio / envelope " + sci(worst)};
  });

  criterion(10, "finite-time probability per unit time tends to the rate", 300.0, [&] {
    const auto d = bundled_detector();
    MotionFrame f(0.5);
    const auto q = with_kmax(50);
    const double gamma = rate_surface(d, f, lorentz, q).gamma;
    const auto r = finite_time_probability(d, f, lorentz, q, 1e5);
    const double dev = std::abs(r.per_time - gamma) / gamma;
    return Outcome{dev < 0.01 && r.converged, "T = 1e5: relative deviation " + sci(dev) + " (tol 1e-2)"};
  });

  criterion(11, "CLI output is byte-identical across runs", 0.0, [&] {
    const fs::path root = fs::temp_directory_path() / "qfric_acceptance_cli";
    fs::remove_all(root);
    std::vector<fs::path> scenarios;
    for (const auto& e : fs::directory_iterator(kData + "/scenarios"))
      if (e.path().extension() == ".json") scenarios.push_back(e.path());
    std::sort(scenarios.begin(), scenarios.end());
    int bad_exit = 0, mismatched = 0;
    for (int run = 0; run < 2; ++run) {
      const fs::path dir = root / ("run" + std::to_string(run));
      fs::create_directories(dir);
      for (const auto& s : scenarios) {
        const fs::path out = dir / (s.stem().string() + ".csv");
        const std::string cmd = std::string("\"") + QFRIC_CLI_PATH + "\" run --no-cache --format csv --scenario \"" +
                                s.string() + "\" --output \"" + out.string() + "\" 2>/dev/null";
        if (std::system(cmd.c_str()) != 0) ++bad_exit;
      }
    }
    std::size_t bytes = 0;
    for (const auto& s : scenarios) {
      const auto a = slurp(root / "run0" / (s.stem().string() + ".csv"));
      const auto b = slurp(root / "run1" / (s.stem().string() + ".csv"));
      if (a.empty() || a != b) ++mismatched;
      bytes += a.size();
    }
    return Outcome{bad_exit == 0 && mismatched == 0,
                   std::to_string(scenarios.size()) + " scenarios, " + std::to_string(bytes) + " bytes, " +
                       std::to_string(mismatched) + " mismatched, " + std::to_string(bad_exit) + " nonzero exits"};
  });

  std::printf("%s: %d criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
