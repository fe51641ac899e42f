#include <doctest.h>

#include <chrono>
#include <cmath>
#include <random>
#include <stdexcept>

#include "mcfent/bell_metrics.hpp"
#include "oracles.hpp"

using namespace mcfent;

namespace {

// Correlated-subspace block M(i, j) = <ii|S|jj> recovered from the oracle by
// polarization, never touching the library operator.
CMatrix correlated_block_oracle(int d) {
  auto value = [d](const CVector& c) {
    CVector amp = CVector::Zero(d * d);
    for (int i = 0; i < d; ++i) amp(i * d + i) = c(i);
    amp.normalize();
    return oracle::cglmp_probability_form(amp * amp.adjoint(), d);
  };
  CMatrix m(d, d);
  for (int i = 0; i < d; ++i) {
    CVector e = CVector::Zero(d);
    e(i) = 1.0;
    m(i, i) = value(e);
  }
  for (int i = 0; i < d; ++i) {
    for (int j = i + 1; j < d; ++j) {
      CVector a = CVector::Zero(d), b = CVector::Zero(d);
      a(i) = 1.0;
      a(j) = 1.0;
      b(i) = 1.0;
      b(j) = cplx(0.0, 1.0);
      const double re = value(a) - 0.5 * (m(i, i).real() + m(j, j).real());
      const double im = value(b) - 0.5 * (m(i, i).real() + m(j, j).real());
      m(i, j) = cplx(re, -im);
      m(j, i) = std::conj(m(i, j));
    }
  }
  return m;
}

}  // namespace

TEST_CASE("CGLMP value of maximally entangled states") {
  const CGLMPContext c4 = cglmp_context(4);
  const DensityMatrix beta4 = density_from_pure(maximally_entangled(4));
  CHECK(cglmp_value(beta4, c4) == doctest::Approx(kCglmpBetaD4).epsilon(5e-4 / 2.9));
  CHECK(oracle::cglmp_probability_form(beta4.matrix(), 4) == doctest::Approx(cglmp_value(beta4, c4)).epsilon(1e-12));

  const DensityMatrix beta2 = density_from_pure(maximally_entangled(2));
  CHECK(std::abs(cglmp_value(beta2, cglmp_context(2)) - 2.0 * std::sqrt(2.0)) < 1e-12);
  CHECK(std::abs(oracle::cglmp_probability_form(beta2.matrix(), 2) - 2.0 * std::sqrt(2.0)) < 1e-12);

  // published d = 3 value for the maximally entangled state
  const DensityMatrix beta3 = density_from_pure(maximally_entangled(3));
  CHECK(cglmp_value(beta3, cglmp_context(3)) == doctest::Approx(2.8729).epsilon(1e-4));
}

TEST_CASE("CGLMP value of white noise vanishes") {
  for (int d : {2, 3, 4, 5}) CHECK(std::abs(cglmp_value(DensityMatrix::maximally_mixed(d), cglmp_context(d))) < 1e-10);
}

TEST_CASE("CGLMP operator agrees with the probability form on random states") {
  std::mt19937_64 rng(101);
  for (int d : {2, 3, 4}) {
    const CGLMPContext ctx = cglmp_context(d);
    for (int trial = 0; trial < 15; ++trial) {
      const DensityMatrix rho = oracle::random_density(d, rng, 1 + trial % (d * d));
      CHECK(std::abs(cglmp_value(rho, ctx) - oracle::cglmp_probability_form(rho.matrix(), d)) < 1e-9);
    }
  }
}

TEST_CASE("product states never violate the local bound") {
  std::mt19937_64 rng(55);
  for (int d : {2, 3, 4}) {
    const CGLMPContext ctx = cglmp_context(d);
    for (int trial = 0; trial < 30; ++trial) {
      const CVector a = oracle::random_unit_vector(d, rng);
      const CVector b = oracle::random_unit_vector(d, rng);
      CVector amp(d * d);
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) amp(i * d + j) = a(i) * b(j);
      CHECK(cglmp_value(density_from_pure(PureState(d, amp)), ctx) <= kCglmpLocalBound + 1e-9);
    }
  }
}

TEST_CASE("Bell operator is Hermitian and the measurement bases are unitary") {
  const CGLMPContext ctx = cglmp_context(4);
  CHECK((ctx.bell_operator - ctx.bell_operator.adjoint()).norm() < 1e-12);
  for (const CMatrix& b : ctx.measurement_bases) CHECK((b.adjoint() * b - CMatrix::Identity(4, 4)).norm() < 1e-12);
  CHECK_THROWS_AS(cglmp_context(1), std::invalid_argument);
  CHECK_THROWS_AS(cglmp_value(density_from_pure(maximally_entangled(2)), ctx), std::invalid_argument);
}

TEST_CASE("CGLMP optimum over correlated states matches the leading eigenvalue") {
  const auto t0 = std::chrono::steady_clock::now();
  const CglmpOptimum opt = optimize_cglmp_state(4);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(seconds < 30.0);
  CHECK(opt.value == doctest::Approx(kCglmpMaxD4).epsilon(1e-3 / 2.97));

  Eigen::SelfAdjointEigenSolver<CMatrix> es(correlated_block_oracle(4));
  CHECK(opt.value == doctest::Approx(es.eigenvalues()(3)).epsilon(1e-7));

  // the optimum is symmetric and less entangled than |beta>
  const auto& c = opt.coefficients;
  REQUIRE(c.size() == 4);
  CHECK(c[0] == doctest::Approx(c[3]).epsilon(0.02));
  CHECK(c[1] == doctest::Approx(c[2]).epsilon(0.02));
  CHECK(c[0] > c[1]);
  const DensityMatrix best = density_from_pure(make_correlated_state(c));
  CHECK(cglmp_value(best, cglmp_context(4)) == doctest::Approx(opt.value).epsilon(1e-12));
  CHECK(schmidt_number(best) < 4.0);
}

TEST_CASE("Wootters concurrence of standard two-qubit states") {
  CMatrix phi = CMatrix::Zero(4, 4);
  phi(0, 0) = phi(0, 3) = phi(3, 0) = phi(3, 3) = 0.5;
  CHECK(wootters_concurrence(phi) == doctest::Approx(1.0));
  CHECK(wootters_concurrence(CMatrix::Identity(4, 4) / 4.0) == doctest::Approx(0.0));
  CMatrix prod = CMatrix::Zero(4, 4);
  prod(1, 1) = 1.0;
  CHECK(wootters_concurrence(prod) == doctest::Approx(0.0));
  // cos(t)|00> + sin(t)|11> has concurrence sin(2t)
  const double t = 0.3;
  CMatrix partial = CMatrix::Zero(4, 4);
  partial(0, 0) = std::cos(t) * std::cos(t);
  partial(3, 3) = std::sin(t) * std::sin(t);
  partial(0, 3) = partial(3, 0) = std::cos(t) * std::sin(t);
  CHECK(wootters_concurrence(partial) == doctest::Approx(std::sin(2 * t)));
  CHECK_THROWS_AS(wootters_concurrence(CMatrix::Identity(3, 3)), std::invalid_argument);
}

TEST_CASE("subspace concurrence on the maximally entangled state and Werner states") {
  const DensityMatrix beta = density_from_pure(maximally_entangled(4));
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) CHECK(std::abs(subspace_concurrence(beta, i, j) - 1.0) < 1e-10);

  for (double v : {0.0, 1.0 / 3.0, 0.5, 0.8, 1.0}) {
    const DensityMatrix w(4, oracle::werner_embedded(4, 1, 3, v));
    CHECK(std::abs(subspace_concurrence(w, 1, 3) - oracle::werner_concurrence(v)) < 1e-8);
  }
  // no weight in the subspace
  CMatrix outside = CMatrix::Zero(16, 16);
  outside(1 * 4 + 2, 1 * 4 + 2) = 1.0;
  CHECK(subspace_concurrence(DensityMatrix(4, outside), 0, 3) == 0.0);
  CHECK_THROWS_AS(subspace_concurrence(beta, 2, 2), std::invalid_argument);
}

TEST_CASE("violation significance") {
  CHECK(violation_sigma(2.27, 0.06) == doctest::Approx(4.5));
  CHECK_THROWS_AS(violation_sigma(2.5, 0.0), std::invalid_argument);
}

TEST_CASE("standard metric set") {
  const auto metrics = standard_metric_set(4);
  REQUIRE(metrics.size() == 10);
  CHECK(metrics.front().name == "fidelity");
  CHECK(metrics.back().name == "cglmp_I4");
  const DensityMatrix beta = density_from_pure(maximally_entangled(4));
  for (const auto& m : metrics) {
    const double v = m.evaluate(beta);
    if (m.name == "schmidt_number") CHECK(v == doctest::Approx(4.0));
    else if (m.name == "cglmp_I4") CHECK(v == doctest::Approx(kCglmpBetaD4).epsilon(2e-4));
    else CHECK(v == doctest::Approx(1.0));
  }
}
