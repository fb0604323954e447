#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "qfric/greens.hpp"

#include <cmath>
#include <functional>
#include <random>

using namespace qfric;

namespace {

SusceptibilityModel lorentz() {
  SusceptibilityModel m;
  m.electric_terms.push_back({1.0, 1.0, 0.1});
  return m;
}

SusceptibilityModel magnetodielectric() {
  SusceptibilityModel m;
  m.electric_terms.push_back({1.0, 1.0, 0.1});
  m.magnetic_terms.push_back({0.3, 1.7, 0.25});
  return m;
}

double uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Textbook half-space Fresnel amplitudes for incidence from vacuum, written
// with normal wavenumbers kz (Im kz >= 0 on both sides).
std::pair<cdouble, cdouble> textbook_fresnel(cdouble eps, cdouble mu, double k, double w) {
  const cdouble kz1 = std::sqrt(cdouble(w * w - k * k, 0.0));
  cdouble kz2 = std::sqrt(eps * mu * w * w - k * k);
  if (kz2.imag() < 0.0) kz2 = -kz2;
  const cdouble rs = (mu * kz1 - kz2) / (mu * kz1 + kz2);
  const cdouble rp = (eps * kz1 - kz2) / (eps * kz1 + kz2);
  return {rs, rp};
}

ComplexTensor3 simpson_tensor(const std::function<ComplexTensor3(double)>& f, double a, double b, int n) {
  if (n % 2) ++n;
  const double h = (b - a) / n;
  ComplexTensor3 s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * (h / 3.0);
}

}  // namespace

TEST_CASE("free-space Green tensor") {
  const ComplexTensor3 g0 = free_green_k(Eigen::Vector3d::Zero(), 1.0);
  CHECK(max_abs(g0 + ComplexTensor3::Identity()) < 1e-16);
  CHECK_THROWS_AS(free_green_k(Eigen::Vector3d(1, 0, 0), 0.0), DomainError);

  std::mt19937_64 rng(3);
  for (int i = 0; i < 20; ++i) {
    const Eigen::Vector3d k(4 * uniform(rng) - 2, 4 * uniform(rng) - 2, 4 * uniform(rng) - 2);
    const double w = 0.2 + 2 * uniform(rng);
    const ComplexTensor3 g = free_green_k(k, w);
    // Maxwell operator (k k - k^2 + w^2) G = -1.
    const ComplexTensor3 op = (k * k.transpose()).cast<cdouble>() -
                              (k.squaredNorm() - w * w) * ComplexTensor3::Identity();
    CHECK(max_abs(ComplexTensor3(op * g + ComplexTensor3::Identity())) < 1e-12 * (1 + max_abs(g)));
  }
  // Transverse entries decay like 1/k^2 along a fixed direction.
  const Eigen::Vector3d dir = Eigen::Vector3d(1, 2, -0.5).normalized();
  const RealTensor3<double> pt = RealTensor3<double>::Identity() - dir * dir.transpose();
  const double t1 = max_abs(ComplexTensor3(pt * free_green_k(100 * dir, 1.0) * pt));
  const double t2 = max_abs(ComplexTensor3(pt * free_green_k(1000 * dir, 1.0) * pt));
  CHECK(t2 < 0.011 * t1);
}

TEST_CASE("coincident imaginary part outside and inside the light cone") {
  CHECK(im_free_green_coincident(2.0, 1.0).isZero(0.0));
  CHECK(im_free_green_coincident(1.0, 1.0).isZero(0.0));
  for (double k : {1.0001, 3.0, 50.0}) CHECK(im_free_green_coincident(k, 1.0).isZero(0.0));
  const auto g = im_free_green_coincident(0.0, 1.0);
  CHECK(g(1, 1) == g(2, 2));
  CHECK(g(0, 0) > 0.0);
  CHECK(g(1, 1) > 0.0);
  CHECK(im_free_green_coincident(0.3, -1.2) == -im_free_green_coincident(0.3, 1.2));
}

TEST_CASE("coincident imaginary part against finite-eta K-plane quadrature") {
  const double kx = 0.5, w = 1.0;
  const double K0 = std::sqrt(w * w - kx * kx);
  auto plane = [&](double eta) {
    QuadratureSpec q;
    q.rel_tol = 1e-11;
    q.abs_tol = 1e-14;
    q.max_subdivisions = 20000;
    constexpr int nphi = 256;
    auto radial = [&](double K) {
      Eigen::Matrix3d acc = Eigen::Matrix3d::Zero();
      for (int j = 0; j < nphi; ++j) {
        const double phi = 2 * M_PI * j / nphi;
        acc += free_green_k(Eigen::Vector3d(kx, K * std::cos(phi), K * std::sin(phi)), w, eta).imag();
      }
      return Eigen::Matrix3d(acc * (K * 2 * M_PI / nphi / (4 * M_PI * M_PI)));
    };
    std::vector<double> bp{K0};
    for (double m : {1.0, 10.0, 100.0})
      for (double s : {-1.0, 1.0}) bp.push_back(K0 + s * m * eta);
    auto r = integrate_adaptive(radial, 0.0, 60.0, q, bp);
    REQUIRE(r.converged);
    return Eigen::Matrix3d(r.value);
  };
  const double e1 = 1e-2, e2 = 1e-3, e3 = 1e-4;
  const Eigen::Matrix3d g1 = plane(e1), g2 = plane(e2), g3 = plane(e3);
  // Quadratic through the three regulators, evaluated at eta = 0.
  const double l1 = e2 * e3 / ((e1 - e2) * (e1 - e3));
  const double l2 = e1 * e3 / ((e2 - e1) * (e2 - e3));
  const double l3 = e1 * e2 / ((e3 - e1) * (e3 - e2));
  const Eigen::Matrix3d extrap = l1 * g1 + l2 * g2 + l3 * g3;
  const Eigen::Matrix3d exact = im_free_green_coincident(kx, w);
  CHECK((extrap - exact).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(std::abs(exact(0, 0) - 0.1875) < 1e-15);
}

TEST_CASE("rest-frame reflection reproduces textbook Fresnel") {
  double worst = 0.0;
  for (const auto& m : {lorentz(), magnetodielectric()}) {
    int count = 0;
    for (int i = 0; i < 10; ++i) {
      for (int j = 0; j < 10; ++j) {
        const double w = 0.05 + 0.35 * i;
        const double k = 0.07 + 0.45 * j;
        if (std::abs(k - w) < 1e-3) continue;
        const double ky = 0.3 * k, kx = std::sqrt(k * k - ky * ky);
        const auto rc = reflection_coefficients(m, MotionFrame(0.0), kx, ky, w);
        const auto [rs, rp] = textbook_fresnel(permittivity(m, w), permeability(m, w), k, w);
        worst = std::max({worst, std::abs(rc.r11 - rs), std::abs(rc.r22 - rp)});
        CHECK(rc.r12 == 0.0);
        CHECK(rc.r21 == 0.0);
        ++count;
      }
    }
    CHECK(count >= 99);
  }
  CHECK(worst < 1e-12);

  // ky = 0 evanescent s wave in the xi form.
  auto m = lorentz();
  const double k = 2.0, w = 0.8;
  const auto rc = reflection_coefficients(m, MotionFrame(0.0), k, 0.0, w);
  const double xi = std::sqrt(k * k - w * w);
  const cdouble xim = std::sqrt(k * k - permittivity(m, w) * w * w);
  CHECK(std::abs(rc.r11 - (xi - xim) / (xi + xim)) < 1e-12);
}

TEST_CASE("reflection coefficient edge cases") {
  const auto vac = reflection_coefficients(SusceptibilityModel{}, MotionFrame(0.5), 0.3, 0.2, 1.0);
  CHECK(vac.r11 == 0.0);
  CHECK(vac.r22 == 0.0);
  CHECK_THROWS_AS(reflection_coefficients(lorentz(), MotionFrame(0.0), 0.6, 0.8, 1.0), DomainError);
  // Polarization vectors: analytic unit norm e.e = 1 and transversality.
  const auto rc = reflection_coefficients(lorentz(), MotionFrame(0.3), 1.2, -0.7, 0.9);
  CHECK(std::abs((rc.e1.transpose() * rc.e1).value() - 1.0) < 1e-15);
  CHECK(std::abs((rc.e2_reflected.transpose() * rc.e2_reflected).value() - 1.0) < 1e-14);
  const ComplexVector3<double> kr(1.2, -0.7, cdouble(0, 1) * rc.xi);
  CHECK(std::abs((kr.transpose() * rc.e2_reflected).value()) < 1e-14);
  CHECK(std::abs((kr.transpose() * rc.e1).value()) < 1e-14);
}

TEST_CASE("decaying branch for evanescent waves") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 200; ++i) {
    const double w = 0.01 + 3 * uniform(rng);
    const double kx = 6 * uniform(rng) - 3, ky = 6 * uniform(rng) - 3;
    if (kx * kx + ky * ky <= w * w * (1 + 1e-9)) continue;
    const cdouble xi = reflection_coefficients(lorentz(), MotionFrame(0.2), kx, ky, w).xi;
    CHECK(xi.imag() == 0.0);
    CHECK(xi.real() > 0.0);
  }
  CHECK(vacuum_xi(0.25, 1.0).imag() < 0.0);
  CHECK(vacuum_xi(0.25, -1.0).imag() > 0.0);
}

TEST_CASE("anomalous Doppler region has positive Im r") {
  auto m = lorentz();
  MotionFrame f(0.5);
  const double w = 0.1;
  for (int i = 0; i < 10; ++i) {
    for (int j = 0; j < 10; ++j) {
      const double k = w / 0.5 * (1.0 + 0.01) + 0.5 * i;
      const double ky = -5 + 1.1 * j;
      const auto rc = reflection_coefficients(m, f, -k, ky, -w);
      CHECK(rc.omega_minus > 0.0);
      CHECK(rc.r11.imag() > 0.0);
      CHECK(rc.r22.imag() > 0.0);
    }
  }
}

TEST_CASE("vacuum surface Green tensor is the free part") {
  QuadratureSpec q;
  SurfaceGeometry g{1.0};
  const auto gv = surface_green_coincident(SusceptibilityModel{}, MotionFrame(0.4), g, 0.3, 1.0, q);
  CHECK(max_abs(ComplexTensor3(gv - cdouble(0, 1) * im_free_green_coincident(0.3, 1.0).cast<cdouble>())) == 0.0);
}

TEST_CASE("reflected part against dense fixed-grid quadrature") {
  auto m = lorentz();
  MotionFrame f(0.0);
  const double w = 1.0, z0 = 0.7;
  QuadratureSpec q;
  q.rel_tol = 1e-10;
  SurfaceGeometry geom{z0};

  SUBCASE("evanescent kx") {
    const double kx = 1.5;
    auto dense = [&](double ky) {
      const auto rc = reflection_coefficients(m, f, kx, ky, w);
      return ComplexTensor3(rc.reflected_dyad() * (std::exp(-2.0 * rc.xi * z0) / (2.0 * rc.xi) / (2 * M_PI)));
    };
    const ComplexTensor3 ref = simpson_tensor(dense, -40.0, 40.0, 200000);
    const ComplexTensor3 got = surface_green_coincident(m, f, geom, kx, w, q);
    CHECK(max_abs(ComplexTensor3((got.imag() - ref.imag()).cast<cdouble>())) < 1e-6 * max_abs(ref));
    CHECK(max_abs(ComplexTensor3(got - ref)) < 1e-6 * max_abs(ref));
  }
  SUBCASE("propagating kx") {
    const double kx = 0.5, K0 = std::sqrt(w * w - kx * kx);
    // Inside the cone: ky = K0 sin th, dky / xi = i dth; outside: ky = +-K0 cosh t, dky / xi = dt.
    auto inside = [&](double th) {
      const double ky = K0 * std::sin(th);
      const cdouble xi(0.0, -K0 * std::cos(th));
      const auto rc = reflection_coefficients_with_xi(m, f, kx, ky, w, xi);
      return ComplexTensor3(rc.reflected_dyad() * (cdouble(0, 1) * std::exp(-2.0 * xi * z0) / (4 * M_PI)));
    };
    auto outside = [&](double t) {
      const double xi = K0 * std::sinh(t);
      ComplexTensor3 s = ComplexTensor3::Zero();
      for (double sign : {-1.0, 1.0}) {
        const auto rc = reflection_coefficients_with_xi(m, f, kx, sign * K0 * std::cosh(t), w, xi);
        s += rc.reflected_dyad() * (std::exp(-2.0 * xi * z0) / (4 * M_PI));
      }
      return s;
    };
    const ComplexTensor3 ref = simpson_tensor(inside, -M_PI / 2, M_PI / 2, 20000) +
                               simpson_tensor(outside, 0.0, 6.0, 60000);
    const ComplexTensor3 got = surface_green_coincident(m, f, geom, kx, w, q);
    const ComplexTensor3 refl = got - cdouble(0, 1) * im_free_green_coincident(kx, w).cast<cdouble>();
    CHECK(max_abs(ComplexTensor3(refl - ref)) < 1e-6 * max_abs(ref));
  }
}

TEST_CASE("reflected part decays with height") {
  auto m = lorentz();
  MotionFrame f(0.0);
  QuadratureSpec q;
  const double kx = 1.5, w = 1.0;
  const double xi_min = std::sqrt(kx * kx - w * w);
  double prev_mag = 0.0, prev_zz = 0.0, prev_z = 0.0;
  for (int i = 0; i < 6; ++i) {
    const double z0 = 0.25 * std::pow(2.0, i);
    const Transverse p{0.0, z0};
    const auto r = reflected_green(m, f, kx, p, p, w, q);
    const double mag = max_abs(r.value);
    const double zz = r.value(2, 2).imag();
    CHECK(zz > 0.0);
    if (i > 0) {
      CHECK(mag < prev_mag);
      CHECK(zz <= prev_zz * std::exp(-2.0 * xi_min * (z0 - prev_z)));
    }
    prev_mag = mag;
    prev_zz = zz;
    prev_z = z0;
  }
  const Transverse far{0.0, 1e3};
  CHECK(max_abs(reflected_green(m, f, kx, far, far, w, q).value) <= std::exp(-2.0 * xi_min * 1e3));
}

TEST_CASE("dissipation identity in the homogeneous moving medium") {
  QuadratureSpec q;
  const auto vac = green_dissipation_identity(SusceptibilityModel{}, MotionFrame(0.3), 2.0,
                                              Eigen::Vector2d(0.5, -0.4), 1.0, q);
  CHECK(max_abs(vac.lhs) == 0.0);
  CHECK(max_abs(vac.rhs) < 1e-16);
  const Eigen::Vector3d kv(2.0, 0.5, -0.4);
  CHECK(max_abs(ComplexTensor3(vac.green - free_green_k(kv, 1.0))) < 1e-14);

  for (double beta : {0.0, 0.3}) {
    const auto r = green_dissipation_identity(lorentz(), MotionFrame(beta), 0.7,
                                              Eigen::Vector2d(0.4, 1.1), 0.9, q);
    CHECK(r.rel_residual < 1e-8);
    CHECK(max_abs(r.lhs) > 0.0);
  }
  std::mt19937_64 rng(5);
  for (int i = 0; i < 50; ++i) {
    const double beta = 1.8 * uniform(rng) - 0.9;
    const double w = 0.05 + 3 * uniform(rng);
    const double kx = 6 * uniform(rng) - 3;
    const Eigen::Vector2d K(6 * uniform(rng) - 3, 6 * uniform(rng) - 3);
    for (const auto& m : {lorentz(), magnetodielectric()}) {
      const auto r = green_dissipation_identity(m, MotionFrame(beta), kx, K, w, q);
      CHECK(r.rel_residual < 1e-8);
    }
  }
  CHECK_THROWS_AS(green_dissipation_identity(lorentz(), MotionFrame(0.5), 2.0, Eigen::Vector2d(1, 1), 1.0, q),
                  DomainError);
}

TEST_CASE("reciprocity structure of the reflected Green tensor") {
  QuadratureSpec q;
  const Transverse a{0.2, 0.6}, b{-0.3, 0.9};
  const auto rest = reciprocity_check(lorentz(), MotionFrame(0.0), 1.4, 1.0, a, b, q);
  CHECK(rest.transpose_residual < 1e-8);
  CHECK(rest.naive_violation < 1e-8);
  const auto moving = reciprocity_check(lorentz(), MotionFrame(0.5), 1.4, 1.0, a, b, q);
  CHECK(moving.transpose_residual < 1e-6);
  CHECK(moving.naive_violation > 10.0 * std::max(moving.transpose_residual, 1e-6));
  const auto prop = reciprocity_check(lorentz(), MotionFrame(0.5), 0.4, 1.0, a, b, q);
  CHECK(prop.transpose_residual < 1e-6);
  CHECK(prop.naive_violation > 10.0 * std::max(prop.transpose_residual, 1e-6));
  const auto vac = reciprocity_check(SusceptibilityModel{}, MotionFrame(0.5), 1.4, 1.0, a, b, q);
  CHECK(vac.transpose_residual == 0.0);
  CHECK(vac.naive_violation == 0.0);
}
