#include "mcfent/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mcfent {

namespace {

json matrix_part(const CMatrix& m, bool imaginary) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(imaginary ? m(r, c).imag() : m(r, c).real());
    rows.push_back(std::move(row));
  }
  return rows;
}

CMatrix matrix_from_parts(const json& j, Eigen::Index n) {
  const json& re = j.at("re");
  const json& im = j.at("im");
  if (re.size() != static_cast<std::size_t>(n) || im.size() != static_cast<std::size_t>(n)) {
    throw std::invalid_argument("matrix must have " + std::to_string(n) + " rows");
  }
  CMatrix m(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    if (re[r].size() != static_cast<std::size_t>(n) || im[r].size() != static_cast<std::size_t>(n)) {
      throw std::invalid_argument("matrix row " + std::to_string(r) + " has the wrong length");
    }
    for (Eigen::Index c = 0; c < n; ++c) m(r, c) = cplx(re[r][c].get<double>(), im[r][c].get<double>());
  }
  return m;
}

}  // namespace

json density_to_json(const DensityMatrix& rho) {
  json j;
  j["kind"] = "density_matrix";
  j["dim"] = rho.dim();
  j["re"] = matrix_part(rho.matrix(), false);
  j["im"] = matrix_part(rho.matrix(), true);
  j["tolerance"] = {{"hermitian", DensityMatrix::kHermitianTol},
                    {"trace", DensityMatrix::kTraceTol},
                    {"min_eigenvalue", DensityMatrix::kPsdTol}};
  return j;
}

DensityMatrix density_from_json(const json& j) {
  if (j.contains("kind") && j.at("kind") != "density_matrix") throw std::invalid_argument("density json: kind must be density_matrix");
  const int d = j.at("dim").get<int>();
  if (d < 2) throw std::invalid_argument("density json: dim must be at least 2");
  return DensityMatrix(d, matrix_from_parts(j, static_cast<Eigen::Index>(d) * d));
}

json pure_state_to_json(const PureState& psi) {
  json j;
  j["kind"] = "pure_state";
  j["dim"] = psi.dim();
  const CMatrix c = psi.coefficient_matrix();
  j["re"] = matrix_part(c, false);
  j["im"] = matrix_part(c, true);
  j["tolerance"] = {{"norm", 1e-12}};
  return j;
}

PureState pure_state_from_json(const json& j) {
  if (j.contains("kind") && j.at("kind") != "pure_state") throw std::invalid_argument("state json: kind must be pure_state");
  const int d = j.at("dim").get<int>();
  if (d < 2) throw std::invalid_argument("state json: dim must be at least 2");
  const CMatrix c = matrix_from_parts(j, d);
  CVector amps(static_cast<Eigen::Index>(d) * d);
  for (int i = 0; i < d; ++i)
    for (int k = 0; k < d; ++k) amps(pair_index(i, k, d)) = c(i, k);
  return PureState(d, std::move(amps));
}

json cglmp_to_json(const CGLMPContext& ctx) {
  json j;
  j["kind"] = "cglmp_bell_operator";
  j["dim"] = ctx.dim;
  j["local_bound"] = kCglmpLocalBound;
  j["re"] = matrix_part(ctx.bell_operator, false);
  j["im"] = matrix_part(ctx.bell_operator, true);
  json bases = json::object();
  const char* names[] = {"A1", "A2", "B1", "B2"};
  for (int k = 0; k < 4; ++k) {
    bases[names[k]] = {{"re", matrix_part(ctx.measurement_bases[k], false)},
                       {"im", matrix_part(ctx.measurement_bases[k], true)}};
  }
  j["measurement_bases"] = std::move(bases);
  return j;
}

std::string format_number(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

void write_counts_csv(std::ostream& out, const CountsRecord& counts) {
  out << "# mcfent coincidence counts\n";
  out << "# integration_time_s=" << format_number(counts.integration_time) << '\n';
  out << "# pair_rate_hz=" << format_number(counts.pair_rate) << '\n';
  out << "# seed=" << counts.seed << '\n';
  out << "setting_1,setting_2,counts\n";
  for (const auto& e : counts.entries()) out << e.setting_1 << ',' << e.setting_2 << ',' << e.counts << '\n';
}

CountsRecord read_counts_csv(std::istream& in) {
  CountsRecord rec;
  std::string line;
  bool header_seen = false;
  int line_no = 0;
  auto fail = [&](const std::string& why) {
    throw std::invalid_argument("counts table line " + std::to_string(line_no) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      std::string key = line.substr(1, eq - 1);
      key.erase(0, key.find_first_not_of(' '));
      const std::string value = line.substr(eq + 1);
      try {
        if (key == "integration_time_s") rec.integration_time = std::stod(value);
        else if (key == "pair_rate_hz") rec.pair_rate = std::stod(value);
        else if (key == "seed") rec.seed = std::stoull(value);
      } catch (const std::exception&) {
        fail("bad value for " + key);
      }
      continue;
    }
    if (!header_seen) {
      if (line != "setting_1,setting_2,counts") fail("expected header 'setting_1,setting_2,counts'");
      header_seen = true;
      continue;
    }
    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string::npos ? c1 : line.find(',', c1 + 1);
    if (c2 == std::string::npos) fail("expected three columns");
    const std::string value = line.substr(c2 + 1);
    std::int64_t n = 0;
    const auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), n);
    if (ec != std::errc() || p != value.data() + value.size()) fail("counts must be an integer");
    try {
      rec.add(line.substr(0, c1), line.substr(c1 + 1, c2 - c1 - 1), n);
    } catch (const std::invalid_argument& e) {
      fail(e.what());
    }
  }
  if (!header_seen) throw std::invalid_argument("counts table has no header row");
  return rec;
}

void write_pgm(std::ostream& out, const PhaseImage& image) {
  out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.levels.data()), static_cast<std::streamsize>(image.levels.size()));
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return json::parse(in);
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path);
}

}  // namespace mcfent
