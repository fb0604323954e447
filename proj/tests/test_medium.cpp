#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "qfric/medium.hpp"

#include <cmath>
#include <random>

using namespace qfric;

namespace {

SusceptibilityModel lorentz() {
  SusceptibilityModel m;
  m.electric_terms.push_back({1.0, 1.0, 0.1});
  m.label = "lorentz";
  return m;
}

SusceptibilityModel drude() {
  SusceptibilityModel m;
  m.electric_terms.push_back({1.0, 0.0, 0.1});
  return m;
}

double uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

TEST_CASE("chi closed form") {
  auto m = lorentz();
  CHECK(chi(m, Response::electric, 0.0) == cdouble(1.0, 0.0));
  CHECK(chi(SusceptibilityModel{}, Response::electric, 3.7) == cdouble(0.0, 0.0));
  const auto ref = chi<long double>(m, Response::electric, std::complex<long double>(1.0L, 0.0L));
  const cdouble at1 = chi(m, Response::electric, 1.0);
  CHECK(std::abs(at1 - cdouble(0.0, 10.0)) < 1e-13);
  CHECK(std::abs(at1.imag() - static_cast<double>(ref.imag())) < 1e-14);
  CHECK(chi(m, Response::magnetic, 1.0) == cdouble(0.0, 0.0));
}

TEST_CASE("chi domain errors") {
  auto m = lorentz();
  CHECK_THROWS_AS(chi<double>(m, Response::electric, cdouble(1.0, -1e-9)), DomainError);
  CHECK_THROWS_AS(chi(drude(), Response::electric, 0.0), DomainError);
  CHECK_NOTHROW(chi<double>(m, Response::electric, cdouble(1.0, 0.5)));
}

TEST_CASE("reality condition and passivity on a log grid") {
  for (const auto& m : {lorentz(), drude()}) {
    for (int i = 0; i < 61; ++i) {
      const double w = std::pow(10.0, -3.0 + 0.1 * i);
      const cdouble p = chi(m, Response::electric, w);
      const cdouble n = chi(m, Response::electric, -w);
      CHECK(p.imag() > 0.0);
      CHECK(n == std::conj(p));
    }
  }
}

TEST_CASE("coupling amplitude") {
  auto m = lorentz();
  CHECK(coupling_amplitude(m, Response::electric, 0.0) == 0.0);
  CHECK(coupling_amplitude(SusceptibilityModel{}, Response::electric, 1.0) == 0.0);
  CHECK(std::abs(coupling_amplitude(m, Response::electric, 1.0) - std::sqrt(20.0 / M_PI)) < 1e-14);
  CHECK_THROWS_AS(coupling_amplitude(m, Response::electric, -0.1), DomainError);
  for (double w : {1e-3, 0.2, 0.99, 1.0, 3.0, 1e3}) {
    const double a = coupling_amplitude(m, Response::electric, w);
    const double im = chi(m, Response::electric, w).imag();
    CHECK(std::abs(a * a * M_PI / (2.0 * w) - im) <= 4e-16 * im);
  }
}

TEST_CASE("dispersion reconstruction") {
  QuadratureSpec quad;
  CHECK(kk_reconstruct(SusceptibilityModel{}, Response::electric, 1.0, quad) == cdouble(0.0));
  for (const auto& m : {lorentz(), drude()}) {
    double worst = 0.0;
    for (int i = 0; i < 50; ++i) {
      const double w = std::pow(10.0, -3.0 + 6.0 * i / 49.0);
      const cdouble kk = kk_reconstruct(m, Response::electric, w, quad);
      const cdouble ex = chi(m, Response::electric, w);
      worst = std::max(worst, std::abs(kk - ex) / std::abs(ex));
    }
    CHECK(worst < 1e-5);
  }
  auto m = lorentz();
  for (double w : {0.5, 2.0}) {
    const cdouble kk = kk_reconstruct(m, Response::electric, w, quad);
    CHECK(std::abs(kk - chi(m, Response::electric, w)) < 1e-8 * std::abs(kk));
  }
  CHECK_THROWS_AS(kk_reconstruct(m, Response::electric, 0.0, quad), DomainError);
}

TEST_CASE("whole-line Hilbert reconstruction") {
  auto m = lorentz();
  QuadratureSpec quad;
  auto g = [&](double w) { return chi(m, Response::electric, w); };
  for (double w : {-1.5, 0.3, 1.05, 4.0}) {
    const cdouble r = hilbert_reconstruct(g, w, quad, {-1.0, 1.0});
    CHECK(std::abs(r - g(w)) < 1e-7 * std::abs(g(w)));
  }
}

TEST_CASE("pole-decomposed identity") {
  QuadratureSpec quad;
  auto vac = verify_identity_1(SusceptibilityModel{}, 0.7, 1.3, quad);
  CHECK(vac.lhs == cdouble(0.0));
  CHECK(vac.rhs == cdouble(0.0));

  auto m = lorentz();
  auto r = verify_identity_1(m, 0.7, 1.3, quad);
  CHECK(r.abs_residual < 1e-6 * std::max(std::abs(r.lhs), 1.0));
  CHECK(std::abs(r.rhs) > 0.1);

  CHECK_THROWS_AS(verify_identity_1(m, 1.3 * (1 + 1e-12), 1.3, quad), DomainError);
  CHECK_THROWS_AS(verify_identity_1(m, -1.3, 1.3, quad), DomainError);

  std::mt19937_64 rng(20240611);
  int done = 0;
  while (done < 20) {
    const double a = (uniform(rng) < 0.5 ? -1 : 1) * (0.05 + 4.95 * uniform(rng));
    const double b = (uniform(rng) < 0.5 ? -1 : 1) * (0.05 + 4.95 * uniform(rng));
    if (std::abs(std::abs(a) - std::abs(b)) < 1e-3 * std::max(std::abs(a), std::abs(b))) continue;
    const double p = 0.05 + 4.95 * uniform(rng);
    auto rep = verify_identity_1(m, a, b, quad, Response::electric, done % 2 ? std::optional(p) : std::nullopt);
    CHECK(rep.rel_residual < 1e-6);
    ++done;
  }
}

TEST_CASE("identity for the magnetic response") {
  SusceptibilityModel m;
  m.magnetic_terms.push_back({0.2, 2.0, 0.3});
  QuadratureSpec quad;
  auto rep = verify_identity_1(m, 1.1, -2.4, quad, Response::magnetic);
  CHECK(rep.rel_residual < 1e-6);
  CHECK(std::abs(rep.rhs) > 0.0);
}

TEST_CASE("model file parsing") {
  auto m = load_model_file(QFRIC_DATA_DIR "/models/lorentz.json");
  REQUIRE(m.electric_terms.size() == 1);
  CHECK(m.electric_terms[0].damping == 0.1);
  auto d = load_model_file(QFRIC_DATA_DIR "/models/drude.json");
  CHECK(d.electric_terms[0].resonance == 0.0);
  auto rt = parse_model_json(model_to_json(m));
  CHECK(rt.electric_terms[0].plasma_strength == m.electric_terms[0].plasma_strength);
  CHECK(rt.label == m.label);

  CHECK_THROWS_AS(parse_model_json("{not json"), DomainError);
  CHECK_THROWS_AS(parse_model_json(R"({"electric_terms": [{"plasma_strength": 1, "resonance": 1}]})"),
                  DomainError);
  CHECK_THROWS_AS(parse_model_json(R"({"electric_terms": [{"plasma_strength": 1, "resonance": 1, "damping": 0}]})"),
                  DomainError);
  CHECK_THROWS_AS(load_model_file("/nonexistent/model.json"), IoError);
  try {
    parse_model_json(R"({"electric_terms": [{"plasma_strength": -1, "resonance": 1, "damping": 0.1}]})");
  } catch (const DomainError& e) {
    CHECK(std::string(e.what()).find("electric_terms[0]") != std::string::npos);
  }
}
