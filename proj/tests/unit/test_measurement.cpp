#include <doctest.h>

#include <cmath>
#include <random>
#include <set>
#include <stdexcept>

#include "mcfent/measurement.hpp"
#include "mcfent/qstate.hpp"
#include "oracles.hpp"

using namespace mcfent;

TEST_CASE("setting ids round-trip") {
  const auto s = MeasurementSetting::two_core(4, 0, 1, kPi / 2);
  CHECK(s.id() == "1+2@0.5");
  CHECK(MeasurementSetting::one_core(4, 3).id() == "4");
  CHECK(MeasurementSetting::two_core(4, 2, 3, 0.0).id() == "3+4");
  for (const char* id : {"1", "2+3", "1+4@0.5", "1@0.25+2@1.5+3+4@1"}) {
    CHECK(MeasurementSetting::parse(id, 4).id() == id);
  }
  const auto parsed = MeasurementSetting::parse("1+2@0.5", 4);
  CHECK(parsed.cores() == std::vector<int>{0, 1});
  CHECK(parsed.phases()[1] == doctest::Approx(kPi / 2));
  const CVector v = parsed.projector_vector();
  CHECK(std::abs(v(0) - cplx(1.0 / std::sqrt(2.0), 0.0)) < 1e-15);
  CHECK(std::abs(v(1) - cplx(0.0, 1.0 / std::sqrt(2.0))) < 1e-15);
  CHECK(v.norm() == doctest::Approx(1.0));
}

TEST_CASE("malformed setting ids are rejected") {
  for (const char* id : {"", "0", "5", "1+1", "1+", "a", "1@x", "1@", "+2"}) {
    CHECK_THROWS_AS(MeasurementSetting::parse(id, 4), std::invalid_argument);
  }
  CHECK_THROWS_AS(MeasurementSetting(4, {}), std::invalid_argument);
  CHECK_THROWS_AS(MeasurementSetting(4, {0, 1}, {0.0}), std::invalid_argument);
}

TEST_CASE("ideal efficiency model") {
  const EfficiencyModel ideal = EfficiencyModel::ideal(4);
  const double expected[4] = {1.0, 0.25, 1.0 / 9.0, 0.0625};
  for (int n = 1; n <= 4; ++n) {
    CHECK(ideal.from_one_core(n) == doctest::Approx(expected[n - 1]).epsilon(1e-15));
    CHECK(ideal.projection_factor(n) == doctest::Approx(1.0 / n));
  }
  CHECK_THROWS_AS(ideal.from_one_core(5), std::invalid_argument);
  CHECK(ideal.name() == "ideal");

  const EfficiencyModel exp = EfficiencyModel::experimental();
  CHECK(exp.from_one_core(1) == doctest::Approx(0.54));
  CHECK(exp.from_one_core(4) == doctest::Approx(0.036));
  CHECK(efficiency_from_name("experimental", 4).per_n_efficiency() == exp.per_n_efficiency());
  CHECK_THROWS_AS(efficiency_from_name("perfect", 4), std::invalid_argument);
  CHECK_THROWS_AS(EfficiencyModel::custom({0.5, 1.2}), std::invalid_argument);
}

TEST_CASE("detection probability of two-core projections") {
  const DensityMatrix beta = density_from_pure(maximally_entangled(4));
  const EfficiencyModel eff = EfficiencyModel::ideal(4);
  // <psi psi|beta> = 1/2 for psi = (|1> + |2>)/sqrt2, Born 1/4, then 1/2 per photon
  const auto s12 = MeasurementSetting::two_core(4, 0, 1, 0.0);
  CHECK(detection_probability(beta, s12, s12, eff) == doctest::Approx(1.0 / 16.0).epsilon(1e-14));
  // all four cores: overlap 1/2, Born 1/4, then 1/4 per photon
  const MeasurementSetting all(4, {0, 1, 2, 3});
  CHECK(detection_probability(beta, all, all, eff) == doctest::Approx(1.0 / 64.0).epsilon(1e-14));
  const auto one = MeasurementSetting::one_core(4, 0);
  CHECK(detection_probability(beta, one, one, eff) == doctest::Approx(0.25));
  CHECK(detection_probability(beta, one, MeasurementSetting::one_core(4, 1), eff) == 0.0);
  // experimental efficiencies scale the same Born term
  const EfficiencyModel exp = EfficiencyModel::experimental();
  CHECK(detection_probability(beta, s12, s12, exp) == doctest::Approx(0.25 * 0.26 * 0.26).epsilon(1e-12));
}

TEST_CASE("cosine fit recovers exact fringes") {
  const std::vector<double> phases = phase_sweep(16);
  CHECK(phases.size() == 16);
  std::vector<double> values;
  for (double p : phases) values.push_back(100.0 + 60.0 * std::cos(p - 1.2));
  const CosineFit fit = fit_cosine(phases, values);
  CHECK(fit.mean == doctest::Approx(100.0));
  CHECK(fit.amplitude == doctest::Approx(60.0));
  CHECK(fit.phase_of_max == doctest::Approx(1.2));
  CHECK(fit.visibility == doctest::Approx(0.6));
  CHECK_THROWS_AS(fit_cosine({0.0, 1.0, 2.0}, {1.0, 2.0, 3.0}), std::invalid_argument);
}

TEST_CASE("predicted fringes of the entangled state have unit visibility and covariant phase") {
  const DensityMatrix beta = density_from_pure(maximally_entangled(4));
  const EfficiencyModel eff = EfficiencyModel::ideal(4);
  const FringeCurve a = predict_fringe(beta, 0, 3, 0.0, phase_sweep(16), eff);
  CHECK(a.fit.visibility == doctest::Approx(1.0).epsilon(1e-9));
  const FringeCurve b = predict_fringe(beta, 0, 3, kPi / 2, phase_sweep(16), eff);
  CHECK(b.fit.visibility == doctest::Approx(1.0).epsilon(1e-9));
  // |ii> + |jj>: photon 2 must carry the opposite phase of photon 1
  double shift = a.fit.phase_of_max - b.fit.phase_of_max;
  shift = std::remainder(shift, 2.0 * kPi);
  CHECK(std::abs(std::abs(shift) - kPi / 2) < 1e-9);

  const FringeCurve mixed = predict_fringe(DensityMatrix::maximally_mixed(4), 0, 1, 0.0, phase_sweep(16), eff);
  CHECK(mixed.fit.visibility < 1e-9);
  CHECK_THROWS_AS(predict_fringe(beta, 1, 1, 0.0, phase_sweep(16), eff), std::invalid_argument);
}

TEST_CASE("counts record keeps insertion order and rejects duplicates") {
  CountsRecord r;
  r.add("1", "1", 10);
  r.add("1", "2", 3);
  r.add("2", "1", 0);
  CHECK(r.size() == 3);
  CHECK(r.entries()[1].setting_2 == "2");
  CHECK(r.at("1", "2") == 3);
  CHECK(r.total() == 13);
  CHECK(r.contains("2", "1"));
  CHECK_FALSE(r.contains("2", "2"));
  CHECK_THROWS_AS(r.at("2", "2"), std::out_of_range);
  CHECK_THROWS_AS(r.add("1", "1", 4), std::invalid_argument);
  CHECK_THROWS_AS(r.add("3", "3", -1), std::invalid_argument);
  const CountsRecord s = r.with_counts({1, 2, 3});
  CHECK(s.at("2", "1") == 3);
  CHECK_THROWS_AS(r.with_counts({1}), std::invalid_argument);
}

TEST_CASE("derived seeds are distinct and deterministic") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t k = 0; k < 1000; ++k) seen.insert(derive_seed(42, k));
  CHECK(seen.size() == 1000);
  CHECK(derive_seed(42, 7) == derive_seed(42, 7));
  CHECK(derive_seed(42, 7) != derive_seed(43, 7));
}

TEST_CASE("simulated counts follow Poisson statistics around the expected value") {
  const DensityMatrix beta = density_from_pure(maximally_entangled(4));
  const auto one = MeasurementSetting::one_core(4, 2);
  const std::vector<SettingPair> pairs{{one, one}};
  const EfficiencyModel eff = EfficiencyModel::ideal(4);
  // rate * time * 1/4 = 50
  const double mu = 50.0;
  const int runs = 4000;
  double sum = 0.0, sum2 = 0.0;
  for (int s = 0; s < runs; ++s) {
    const double n = static_cast<double>(simulate_counts(beta, pairs, 200.0, 1.0, eff, s).at("3", "3"));
    sum += n;
    sum2 += n * n;
  }
  const double mean = sum / runs;
  const double var = sum2 / runs - mean * mean;
  CHECK(std::abs(mean - mu) < 4.0 * std::sqrt(mu / runs));
  CHECK(var == doctest::Approx(mu).epsilon(0.1));

  const CountsRecord exact = simulate_counts(beta, pairs, 200.0, 1.0, eff, 1, CountMode::expected);
  CHECK(exact.at("3", "3") == 50);
  CHECK_THROWS_AS(simulate_counts(beta, pairs, 0.0, 1.0, eff, 1), std::invalid_argument);
}

TEST_CASE("simulation is reproducible for a fixed seed") {
  const DensityMatrix beta = density_from_pure(maximally_entangled(4));
  std::vector<SettingPair> pairs;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) pairs.push_back({MeasurementSetting::one_core(4, i), MeasurementSetting::one_core(4, j)});
  const auto a = simulate_counts(beta, pairs, 1e4, 60.0, EfficiencyModel::experimental(), 99);
  const auto b = simulate_counts(beta, pairs, 1e4, 60.0, EfficiencyModel::experimental(), 99);
  const auto c = simulate_counts(beta, pairs, 1e4, 60.0, EfficiencyModel::experimental(), 100);
  bool any_diff = false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a.entries()[k].counts == b.entries()[k].counts);
    any_diff |= a.entries()[k].counts != c.entries()[k].counts;
  }
  CHECK(any_diff);
}

TEST_CASE("SLM masks encode the setting phases") {
  const SlmGeometry g = SlmGeometry::standard(4);
  CHECK_NOTHROW(g.validate());
  const PhaseImage flat = slm_mask(MeasurementSetting::two_core(4, 0, 1, 0.0), g);
  const PhaseImage half = slm_mask(MeasurementSetting::two_core(4, 0, 1, kPi), g);
  CHECK(flat.width == 792);
  CHECK(flat.height == 600);
  CHECK(flat.levels.size() == 792u * 600u);

  // core 2 occupies the top-right quadrant; a pi shift moves its grating by 128 levels
  const int x = 396 + 5, y = 10;
  CHECK((half.at(x, y) - flat.at(x, y) + 256) % 256 == 128);
  // core 1 keeps zero phase in both masks
  CHECK(half.at(5, 10) == flat.at(5, 10));
  // unselected core 3 (bottom right) carries the dump grating along y
  CHECK(flat.at(500, 300) != flat.at(500, 301));
  CHECK(flat.at(500, 300) == flat.at(501, 300));

  SlmGeometry bad = g;
  bad.regions[1].x0 = 100;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}
