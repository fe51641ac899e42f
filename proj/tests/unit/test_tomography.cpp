#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "mcfent/bell_metrics.hpp"
#include "mcfent/tomography.hpp"
#include "oracles.hpp"

using namespace mcfent;

namespace {

const TomographyModel& ideal_model() {
  static const TomographyModel model(standard_settings(4), EfficiencyModel::ideal(4));
  return model;
}

CountsRecord counts_for(const DensityMatrix& rho, double pairs, std::uint64_t seed, CountMode mode,
                        const EfficiencyModel& eff = EfficiencyModel::ideal(4)) {
  return simulate_counts(rho, standard_settings(rho.dim()).setting_pairs(), pairs, 1.0, eff, seed, mode);
}

bool non_decreasing(const std::vector<double>& h) {
  for (std::size_t k = 1; k < h.size(); ++k)
    if (h[k] < h[k - 1] - 1e-9 * std::abs(h[k - 1])) return false;
  return true;
}

}  // namespace

TEST_CASE("standard protocol is informationally complete") {
  const TomographyProtocol p = standard_settings(4);
  CHECK(p.per_photon_settings.size() == 16);
  CHECK(p.size() == 256);
  CHECK(p.per_photon_settings[0].id() == "1");
  CHECK(p.per_photon_settings[4].id() == "1+2");
  CHECK(p.per_photon_settings[5].id() == "1+2@0.5");
  CHECK(measurement_rank(p) == 256);
  CHECK(measurement_rank(standard_settings(2)) == 16);
  CHECK(measurement_rank(standard_settings(3)) == 81);

  // one-core settings alone only see the diagonal
  TomographyProtocol diag;
  diag.dim = 4;
  for (int i = 0; i < 4; ++i) diag.per_photon_settings.push_back(MeasurementSetting::one_core(4, i));
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) diag.joint_settings.push_back({a, b});
  CHECK(measurement_rank(diag) == 16);
  const TomographyModel m(diag, EfficiencyModel::ideal(4));
  CHECK_THROWS_AS(m.linear_inversion(std::vector<std::int64_t>(16, 5)), std::runtime_error);
}

TEST_CASE("linear inversion and MLE agree on exact data from an interior state") {
  std::mt19937_64 rng(17);
  const DensityMatrix rho = oracle::random_density(4, rng);
  const TomographyModel& model = ideal_model();
  const auto counts = model.ordered_counts(counts_for(rho, 1e13, 1, CountMode::expected));
  const CMatrix li = model.linear_inversion(counts);
  CHECK((li - rho.matrix()).norm() < 1e-8);
  const ReconstructionResult r = model.mle(counts);
  CHECK(r.converged);
  CHECK((r.rho.matrix() - li).norm() < 1e-8);
  CHECK(non_decreasing(r.history));
}

TEST_CASE("MLE on noisy data from a pure state stays physical and is monotone") {
  const DensityMatrix beta = density_from_pure(maximally_entangled(4));
  const ReconstructionResult r = mle_reconstruct(counts_for(beta, 4e4, 5, CountMode::poisson), standard_settings(4),
                                                 EfficiencyModel::ideal(4));
  CHECK(r.converged);
  CHECK(r.rho.eigenvalues()(0) >= -1e-12);
  CHECK(std::abs(r.rho.matrix().trace() - cplx(1.0, 0.0)) < 1e-12);
  CHECK(non_decreasing(r.history));
  CHECK(fidelity_to_pure(r.rho, maximally_entangled(4)) > 0.98);
  CHECK(r.flux_scale == doctest::Approx(4e4).epsilon(0.02));
}

TEST_CASE("MLE under the experimental efficiency model recovers the state") {
  const DensityMatrix beta = density_from_pure(maximally_entangled(4));
  const EfficiencyModel exp = EfficiencyModel::experimental();
  const ReconstructionResult r =
      mle_reconstruct(counts_for(beta, 1e7, 3, CountMode::poisson, exp), standard_settings(4), exp);
  CHECK(fidelity_to_pure(r.rho, maximally_entangled(4)) > 0.995);
}

TEST_CASE("reconstruction is equivariant under relabeling the cores") {
  std::mt19937_64 rng(23);
  const DensityMatrix rho = oracle::random_density(4, rng, 2);
  const std::vector<int> perm{2, 0, 3, 1};
  CMatrix p = CMatrix::Zero(4, 4);
  for (int i = 0; i < 4; ++i) p(perm[i], i) = 1.0;
  const DensityMatrix moved = apply_local_unitary(rho, p, p);

  const auto r0 = ideal_model().mle(ideal_model().ordered_counts(counts_for(rho, 1e9, 1, CountMode::expected)));
  const auto r1 = ideal_model().mle(ideal_model().ordered_counts(counts_for(moved, 1e9, 1, CountMode::expected)));
  const DensityMatrix back = apply_local_unitary(r0.rho, p, p);
  CHECK(trace_distance(back.matrix(), r1.rho.matrix()) < 1e-3);
  CHECK(trace_distance(r1.rho.matrix(), moved.matrix()) < 1e-3);
}

TEST_CASE("project_to_physical clips negative eigenvalues") {
  CMatrix h = CMatrix::Zero(4, 4);
  h(0, 0) = 0.7;
  h(1, 1) = 0.5;
  h(2, 2) = -0.2;
  const DensityMatrix rho = project_to_physical(h, 2);
  CHECK(rho(0, 0).real() == doctest::Approx(0.7 / 1.2));
  CHECK(rho(2, 2).real() == doctest::Approx(0.0));
  CHECK_THROWS_AS(project_to_physical(-CMatrix::Identity(4, 4), 2), std::runtime_error);
}

TEST_CASE("MLE error paths") {
  const TomographyModel& model = ideal_model();
  CHECK_THROWS_AS(model.mle(std::vector<std::int64_t>(10, 1)), std::invalid_argument);
  CHECK_THROWS_AS(model.mle(std::vector<std::int64_t>(256, 0)), std::invalid_argument);
  std::vector<std::int64_t> neg(256, 3);
  neg[4] = -1;
  CHECK_THROWS_AS(model.mle(neg), std::invalid_argument);
  CountsRecord partial;
  partial.add("1", "1", 3);
  CHECK_THROWS_AS(model.ordered_counts(partial), std::invalid_argument);
}

TEST_CASE("bootstrap errors shrink as one over root counts") {
  // Werner-like state with a visible error bar on the concurrence
  CMatrix m = 0.8 * density_from_pure(maximally_entangled(4)).matrix() + 0.2 * CMatrix::Identity(16, 16) / 16.0;
  const DensityMatrix rho(4, m);
  const std::vector<NamedMetric> metrics{
      {"purity", [](const DensityMatrix& r) { return purity(r); }},
      {"concurrence_12", [](const DensityMatrix& r) { return subspace_concurrence(r, 0, 1); }},
  };
  BootstrapOptions opts;
  opts.resamples = 120;
  opts.seed = 77;
  const auto low = bootstrap_errors(counts_for(rho, 2e4, 1, CountMode::expected), ideal_model(), metrics, opts);
  const auto high = bootstrap_errors(counts_for(rho, 4e4, 1, CountMode::expected), ideal_model(), metrics, opts);
  CHECK(low.succeeded == 120);
  for (std::size_t k = 0; k < metrics.size(); ++k) {
    const double ratio = low.metrics[k].std / high.metrics[k].std;
    CHECK(ratio == doctest::Approx(std::sqrt(2.0)).epsilon(0.2));
  }
}

TEST_CASE("bootstrap is independent of the thread count and validates its input") {
  const DensityMatrix beta = density_from_pure(maximally_entangled(2));
  const TomographyModel model(standard_settings(2), EfficiencyModel::ideal(2));
  const CountsRecord counts =
      simulate_counts(beta, standard_settings(2).setting_pairs(), 1e4, 1.0, EfficiencyModel::ideal(2), 4);
  const std::vector<NamedMetric> metrics{{"purity", [](const DensityMatrix& r) { return purity(r); }}};
  BootstrapOptions opts;
  opts.resamples = 60;
  opts.seed = 9;
  opts.threads = 1;
  const auto one = bootstrap_errors(counts, model, metrics, opts);
  opts.threads = 3;
  const auto three = bootstrap_errors(counts, model, metrics, opts);
  CHECK(one.metrics[0].mean == three.metrics[0].mean);
  CHECK(one.metrics[0].std == three.metrics[0].std);
  opts.resamples = 10;
  CHECK_THROWS_AS(bootstrap_errors(counts, model, metrics, opts), std::invalid_argument);
}
