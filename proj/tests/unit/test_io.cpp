#include <doctest.h>

#include <random>
#include <sstream>
#include <stdexcept>

#include "mcfent/io.hpp"
#include "oracles.hpp"

using namespace mcfent;

TEST_CASE("density matrix JSON round trip is exact") {
  std::mt19937_64 rng(8);
  const DensityMatrix rho = oracle::random_density(4, rng, 5);
  const json j = density_to_json(rho);
  CHECK(j["kind"] == "density_matrix");
  CHECK(j["dim"] == 4);
  CHECK(j["re"].size() == 16);
  const DensityMatrix back = density_from_json(json::parse(j.dump()));
  CHECK((back.matrix() - rho.matrix()).norm() == 0.0);
}

TEST_CASE("density JSON input is validated") {
  json j = density_to_json(DensityMatrix::maximally_mixed(2));
  json wrong_kind = j;
  wrong_kind["kind"] = "pure_state";
  CHECK_THROWS(density_from_json(wrong_kind));
  json short_rows = j;
  short_rows["re"].erase(0);
  CHECK_THROWS(density_from_json(short_rows));
  json not_trace_one = j;
  not_trace_one["re"][0][0] = 0.5;
  CHECK_THROWS_AS(density_from_json(not_trace_one), std::invalid_argument);
}

TEST_CASE("pure state JSON stores the coefficient matrix") {
  const std::vector<double> c{0.45, 0.58, 0.50, 0.45};
  const PureState psi = make_correlated_state(c);
  const json j = pure_state_to_json(psi);
  CHECK(j["re"].size() == 4);
  CHECK(j["re"][1][1].get<double>() == doctest::Approx(psi.amplitude(1, 1).real()));
  const PureState back = pure_state_from_json(j);
  CHECK((back.amplitudes() - psi.amplitudes()).norm() < 1e-15);
}

TEST_CASE("counts CSV round trip") {
  CountsRecord rec;
  rec.integration_time = 60.0;
  rec.pair_rate = 800.0;
  rec.seed = 20161;
  rec.add("1", "1", 4123);
  rec.add("1+2@0.5", "3+4", 17);
  rec.add("2", "1", 0);
  std::ostringstream out;
  write_counts_csv(out, rec);
  std::istringstream in(out.str());
  const CountsRecord back = read_counts_csv(in);
  CHECK(back.size() == 3);
  CHECK(back.at("1+2@0.5", "3+4") == 17);
  CHECK(back.entries()[2].setting_1 == "2");
  CHECK(back.integration_time == 60.0);
  CHECK(back.pair_rate == 800.0);
  CHECK(back.seed == 20161);
  std::ostringstream again;
  write_counts_csv(again, back);
  CHECK(again.str() == out.str());
}

TEST_CASE("malformed counts tables report the line") {
  auto parse = [](const std::string& text) {
    std::istringstream in(text);
    return read_counts_csv(in);
  };
  CHECK_THROWS_WITH_AS(parse("a,b,c\n1,1,3\n"), doctest::Contains("line 1"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse("setting_1,setting_2,counts\n1,1,3\n1,2\n"), doctest::Contains("line 3"),
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse("setting_1,setting_2,counts\n1,1,3.5\n"), doctest::Contains("integer"),
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse("setting_1,setting_2,counts\n1,1,3\n1,1,4\n"), doctest::Contains("duplicate"),
                       std::invalid_argument);
  CHECK_THROWS_AS(parse("# only a comment\n"), std::invalid_argument);
}

TEST_CASE("PGM output") {
  PhaseImage img;
  img.width = 3;
  img.height = 2;
  img.levels = {0, 1, 2, 253, 254, 255};
  std::ostringstream out;
  write_pgm(out, img);
  const std::string s = out.str();
  CHECK(s.rfind("P5\n3 2\n255\n", 0) == 0);
  CHECK(s.size() == std::string("P5\n3 2\n255\n").size() + 6);
  CHECK(static_cast<unsigned char>(s.back()) == 255);
}

TEST_CASE("numbers print in shortest round-trip form") {
  CHECK(format_number(0.5) == "0.5");
  CHECK(format_number(60.0) == "60");
  CHECK(format_number(1e-9) == "1e-09");
  CHECK(std::stod(format_number(0.1 + 0.2)) == 0.1 + 0.2);
}

TEST_CASE("Bell operator export") {
  const json j = cglmp_to_json(cglmp_context(2));
  CHECK(j["dim"] == 2);
  CHECK(j["kind"] == "cglmp_bell_operator");
  CHECK(j["re"].size() == 4);
  CHECK(j["measurement_bases"].contains("B2"));
}
