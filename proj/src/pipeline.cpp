#include "mcfent/pipeline.hpp"

#include <cmath>
#include <filesystem>
#include <functional>
#include <limits>
#include <sstream>

#include <Eigen/Core>

namespace mcfent {

namespace {

constexpr std::uint64_t kStageOneCore = 1;
constexpr std::uint64_t kStageTomography = 2;
constexpr std::uint64_t kStageBootstrap = 3;
constexpr std::uint64_t kStageFringes = 4;

[[noreturn]] void config_fail(const std::string& message) { throw ConfigError("config: " + message); }

// Walks a JSON object and rejects keys that were never read.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) config_fail(where_ + " must be an object");
  }
  ~Reader() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& item : j_.items()) {
      bool used = false;
      for (const auto& k : used_) used = used || k == item.key();
      if (!used) config_fail("unknown key '" + where_ + "." + item.key() + "' (lengths and wavelengths use *_m keys)");
    }
  }
  bool has(const std::string& key) {
    used_.push_back(key);
    return j_.contains(key);
  }
  const json& at(const std::string& key) {
    used_.push_back(key);
    if (!j_.contains(key)) config_fail("missing key '" + where_ + "." + key + "'");
    return j_.at(key);
  }
  template <typename T>
  T get(const std::string& key) {
    try {
      return at(key).get<T>();
    } catch (const json::exception& e) {
      config_fail("bad value for '" + where_ + "." + key + "': " + e.what());
    }
  }
  template <typename T>
  T get_or(const std::string& key, T fallback) {
    return has(key) ? get<T>(key) : fallback;
  }

 private:
  const json& j_;
  std::string where_;
  std::vector<std::string> used_;
};

RMatrix matrix_from_rows(const std::vector<std::vector<double>>& rows, int dim, const std::string& what) {
  if (static_cast<int>(rows.size()) != dim) config_fail(what + " must have " + std::to_string(dim) + " rows");
  RMatrix m(dim, dim);
  for (int r = 0; r < dim; ++r) {
    if (static_cast<int>(rows[r].size()) != dim) config_fail(what + " row " + std::to_string(r + 1) + " has the wrong length");
    for (int c = 0; c < dim; ++c) m(r, c) = rows[r][c];
  }
  return m;
}

std::vector<SettingPair> one_core_pairs(int d) {
  std::vector<SettingPair> pairs;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) pairs.push_back({MeasurementSetting::one_core(d, i), MeasurementSetting::one_core(d, j)});
  return pairs;
}

DensityMatrix transported_state(const ExperimentConfig& cfg) {
  const DensityMatrix source = density_from_pure(make_correlated_state(std::span<const cplx>(cfg.state_coefficients)));
  return apply_channel(source, cfg.channel);
}

template <typename F>
auto stage(const std::string& name, F&& body) -> decltype(body()) {
  try {
    return body();
  } catch (const StageError&) {
    throw;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

std::string to_csv_value(double v) { return std::isfinite(v) ? format_number(v) : std::string("nan"); }

}  // namespace

void ExperimentConfig::validate() const {
  if (dim < 2) config_fail("dim must be at least 2");
  if (static_cast<int>(state_coefficients.size()) != dim) config_fail("state needs exactly dim coefficients");
  bool nonzero = false;
  for (const auto& c : state_coefficients) nonzero = nonzero || std::abs(c) > 0.0;
  if (!nonzero) config_fail("state coefficients are all zero");
  if (channel.dim != dim) config_fail("channel dimension differs from dim");
  try {
    channel.validate();
  } catch (const std::invalid_argument& e) {
    config_fail(e.what());
  }
  if (efficiency.max_cores() < 2) config_fail("efficiency table must cover one- and two-core settings");
  if (!(pair_rate > 0.0) || !std::isfinite(pair_rate)) config_fail("pair_rate_hz must be positive");
  if (!(integration_time > 0.0) || !std::isfinite(integration_time)) config_fail("integration_time_s must be positive");
  if (bootstrap_resamples < 50) config_fail("bootstrap.resamples must be at least 50");
  if (mle.max_iterations < 1 || !(mle.tolerance > 0.0)) config_fail("tomography options out of range");
  if (fringe_points < 4) config_fail("fringes.points must be at least 4");
  for (const auto& [i, j] : fringe_pairs) {
    if (i < 0 || j < 0 || i >= dim || j >= dim || i == j) config_fail("fringe pairs need two distinct cores in 1..dim");
  }
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig cfg;
  Reader root(j, "config");
  cfg.name = root.get_or<std::string>("name", "custom");
  cfg.dim = root.get<int>("dim");
  if (cfg.dim < 2 || cfg.dim > 16) config_fail("dim must be in 2..16");
  const int d = cfg.dim;
  if (!root.has("seed")) config_fail("missing key 'config.seed' (runs are always explicitly seeded)");
  cfg.seed = root.get<std::uint64_t>("seed");
  cfg.output_dir = root.get_or<std::string>("output_dir", "");

  {
    Reader state(root.at("state"), "state");
    const auto re = state.get<std::vector<double>>("coefficients_re");
    const auto im = state.get_or<std::vector<double>>("coefficients_im", std::vector<double>(re.size(), 0.0));
    if (re.size() != im.size()) config_fail("state.coefficients_re and coefficients_im differ in length");
    for (std::size_t k = 0; k < re.size(); ++k) cfg.state_coefficients.emplace_back(re[k], im[k]);
  }
  {
    Reader ch(root.at("channel"), "channel");
    ChannelParams& p = cfg.channel;
    p.dim = d;
    p.group_indices = ch.get<std::vector<double>>("group_indices");
    p.length_1 = ch.get<double>("length_1_m");
    const bool has_l2 = ch.has("length_2_m");
    const bool has_dl = ch.has("length_mismatch_m");
    if (has_l2 == has_dl) config_fail("channel needs exactly one of length_2_m and length_mismatch_m");
    p.length_2 = has_l2 ? ch.get<double>("length_2_m") : p.length_1 - ch.get<double>("length_mismatch_m");
    p.center_wavelength = ch.get<double>("center_wavelength_m");
    p.fwhm_bandwidth = ch.get<double>("bandwidth_fwhm_m");
    p.crosstalk_fraction = ch.get_or<double>("crosstalk_fraction", 0.0);
    p.residual_pair_visibility =
        ch.has("residual_pair_visibility")
            ? matrix_from_rows(ch.get<std::vector<std::vector<double>>>("residual_pair_visibility"), d,
                               "channel.residual_pair_visibility")
            : RMatrix::Ones(d, d);
    p.phase_biases = ch.get_or<std::vector<double>>("phase_biases_rad", std::vector<double>(d, 0.0));
    p.rotation_1 = ch.get_or<int>("rotation_1_deg", 0);
  }
  {
    Reader m(root.at("measurement"), "measurement");
    const json& eff = m.at("efficiency");
    try {
      cfg.efficiency = eff.is_string() ? efficiency_from_name(eff.get<std::string>(), d)
                                       : EfficiencyModel::custom(eff.get<std::vector<double>>());
    } catch (const std::exception& e) {
      config_fail(std::string("measurement.efficiency: ") + e.what());
    }
    cfg.pair_rate = m.get<double>("pair_rate_hz");
    cfg.integration_time = m.get_or<double>("integration_time_s", 60.0);
    const auto mode = m.get_or<std::string>("count_mode", "poisson");
    if (mode == "poisson") cfg.count_mode = CountMode::poisson;
    else if (mode == "expected") cfg.count_mode = CountMode::expected;
    else config_fail("measurement.count_mode must be 'poisson' or 'expected'");
  }
  if (root.has("tomography")) {
    Reader t(root.at("tomography"), "tomography");
    cfg.mle.max_iterations = t.get_or<int>("max_iterations", cfg.mle.max_iterations);
    cfg.mle.tolerance = t.get_or<double>("tolerance", cfg.mle.tolerance);
  }
  if (root.has("bootstrap")) {
    Reader b(root.at("bootstrap"), "bootstrap");
    cfg.bootstrap_resamples = b.get_or<int>("resamples", cfg.bootstrap_resamples);
  }
  cfg.fringe_phi1 = {0.0, kPi / 2};
  if (root.has("fringes")) {
    Reader f(root.at("fringes"), "fringes");
    if (f.has("pairs")) {
      for (const auto& pr : f.get<std::vector<std::vector<int>>>("pairs")) {
        if (pr.size() != 2) config_fail("fringes.pairs entries must be [i, j]");
        cfg.fringe_pairs.emplace_back(pr[0] - 1, pr[1] - 1);
      }
    }
    cfg.fringe_phi1 = f.get_or<std::vector<double>>("phi1_rad", cfg.fringe_phi1);
    cfg.fringe_points = f.get_or<int>("points", cfg.fringe_points);
  }
  cfg.validate();
  return cfg;
}

json config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["name"] = cfg.name;
  j["dim"] = cfg.dim;
  j["seed"] = cfg.seed;
  json re = json::array(), im = json::array();
  for (const auto& c : cfg.state_coefficients) {
    re.push_back(c.real());
    im.push_back(c.imag());
  }
  j["state"] = {{"coefficients_re", re}, {"coefficients_im", im}};
  const ChannelParams& p = cfg.channel;
  json vis = json::array();
  for (Eigen::Index r = 0; r < p.residual_pair_visibility.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < p.residual_pair_visibility.cols(); ++c) row.push_back(p.residual_pair_visibility(r, c));
    vis.push_back(row);
  }
  j["channel"] = {{"group_indices", p.group_indices},
                  {"length_1_m", p.length_1},
                  {"length_2_m", p.length_2},
                  {"center_wavelength_m", p.center_wavelength},
                  {"bandwidth_fwhm_m", p.fwhm_bandwidth},
                  {"crosstalk_fraction", p.crosstalk_fraction},
                  {"residual_pair_visibility", vis},
                  {"phase_biases_rad", p.phase_biases},
                  {"rotation_1_deg", p.rotation_1}};
  json eff = cfg.efficiency.mode() == EfficiencyModel::Mode::custom ? json(cfg.efficiency.per_n_efficiency())
                                                                    : json(cfg.efficiency.name());
  j["measurement"] = {{"efficiency", eff},
                      {"pair_rate_hz", cfg.pair_rate},
                      {"integration_time_s", cfg.integration_time},
                      {"count_mode", cfg.count_mode == CountMode::poisson ? "poisson" : "expected"}};
  j["tomography"] = {{"max_iterations", cfg.mle.max_iterations}, {"tolerance", cfg.mle.tolerance}};
  j["bootstrap"] = {{"resamples", cfg.bootstrap_resamples}};
  json pairs = json::array();
  for (const auto& [a, b] : cfg.fringe_pairs) pairs.push_back({a + 1, b + 1});
  j["fringes"] = {{"pairs", pairs}, {"phi1_rad", cfg.fringe_phi1}, {"points", cfg.fringe_points}};
  if (!cfg.output_dir.empty()) j["output_dir"] = cfg.output_dir;
  return j;
}

ExperimentConfig load_config(const std::string& path) {
  json j;
  try {
    j = read_json_file(path);
  } catch (const std::exception& e) {
    throw ConfigError("config: " + std::string(e.what()));
  }
  return config_from_json(j);
}

std::vector<std::string> preset_names() { return {"ideal", "paper", "fig4"}; }

ExperimentConfig preset_config(const std::string& name) {
  ExperimentConfig cfg;
  cfg.name = name;
  cfg.dim = 4;
  cfg.seed = 20161;
  cfg.fringe_phi1 = {0.0, kPi / 2};
  cfg.fringe_pairs = {{0, 1}, {1, 2}, {2, 3}, {3, 0}};
  cfg.channel = ChannelParams::ideal(4);
  if (name == "ideal") {
    cfg.state_coefficients.assign(4, cplx(1.0, 0.0));
    cfg.efficiency = EfficiencyModel::ideal(4);
    cfg.pair_rate = 1e9;
    cfg.count_mode = CountMode::expected;
    cfg.bootstrap_resamples = 50;
  } else if (name == "paper") {
    // Fitted to the reported crosstalk, fringe visibilities, concurrences,
    // fidelity, purity and Schmidt number. The absolute rate (3e3..5e3
    // counts on the diagonal one-core pairs in 60 s) sets the bootstrap
    // error of I4 to the reported order.
    cfg.state_coefficients = {0.45, 0.58, 0.50, 0.45};
    ChannelParams& p = cfg.channel;
    p.group_indices = {1.4670, 1.4672, 1.46745, 1.46765};
    p.length_1 = 0.300;
    p.length_2 = 0.295;
    p.fwhm_bandwidth = 8.3e-9;
    p.crosstalk_fraction = 0.02;
    p.residual_pair_visibility.resize(4, 4);
    p.residual_pair_visibility << 1.0, 0.915, 0.880, 0.910,
                                  0.915, 1.0, 0.775, 0.730,
                                  0.880, 0.775, 1.0, 0.955,
                                  0.910, 0.730, 0.955, 1.0;
    p.phase_biases = {0.0, 0.35, -0.6, 0.9};
    cfg.efficiency = EfficiencyModel::experimental();
    cfg.pair_rate = 800.0;
    cfg.bootstrap_resamples = 200;
  } else if (name == "fig4") {
    // Interference filters removed: >150 nm bandwidth, 1 cm length mismatch,
    // 6.5e-4 group-index difference between cores 1 and 4.
    cfg.state_coefficients.assign(4, cplx(1.0, 0.0));
    ChannelParams& p = cfg.channel;
    p.group_indices = {1.4670, 1.4672, 1.46745, 1.46765};
    p.length_1 = 0.30;
    p.length_2 = 0.29;
    p.fwhm_bandwidth = 150e-9;
    cfg.efficiency = EfficiencyModel::experimental();
    cfg.pair_rate = 2300.0;
    cfg.bootstrap_resamples = 50;
    cfg.fringe_pairs = {{0, 3}};
    cfg.fringe_phi1 = {0.0};
  } else {
    throw ConfigError("config: unknown preset '" + name + "' (expected ideal, paper or fig4)");
  }
  cfg.validate();
  return cfg;
}

std::string config_hash(const ExperimentConfig& cfg) {
  ExperimentConfig copy = cfg;
  copy.output_dir.clear();
  const std::string text = config_to_json(copy).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream out;
  out << std::hex;
  out.width(16);
  out.fill('0');
  out << h;
  return out.str();
}

double crosstalk_summary(const CountsRecord& counts, int dim) {
  double unwanted = 0.0;
  double total = 0.0;
  for (int i = 0; i < dim; ++i) {
    for (int j = 0; j < dim; ++j) {
      const std::string s1 = std::to_string(i + 1);
      const std::string s2 = std::to_string(j + 1);
      if (!counts.contains(s1, s2)) throw std::invalid_argument("crosstalk_summary: missing one-core pair " + s1 + " / " + s2);
      const double n = static_cast<double>(counts.at(s1, s2));
      total += n;
      if (i != j) unwanted += n;
    }
  }
  if (!(total > 0.0)) throw std::invalid_argument("crosstalk_summary: no one-core coincidences");
  return unwanted / total;
}

FringeReport fringe_report(const ExperimentConfig& cfg, const std::vector<std::pair<int, int>>& pairs) {
  cfg.validate();
  const DensityMatrix rho = transported_state(cfg);
  const std::vector<double> sweep = phase_sweep(cfg.fringe_points);
  const std::uint64_t stage_seed = derive_seed(cfg.seed, kStageFringes);
  FringeReport report;
  std::uint64_t row_index = 0;
  for (const auto& [i, j] : pairs) {
    if (i == j) throw std::invalid_argument("fringe_report: cores must differ");
    for (double phi1 : cfg.fringe_phi1) {
      std::vector<SettingPair> settings;
      const auto s1 = MeasurementSetting::two_core(cfg.dim, i, j, phi1);
      for (double phi2 : sweep) settings.push_back({s1, MeasurementSetting::two_core(cfg.dim, i, j, phi2)});
      const CountsRecord counts = simulate_counts(rho, settings, cfg.pair_rate, cfg.integration_time, cfg.efficiency,
                                                  derive_seed(stage_seed, row_index++), cfg.count_mode);
      FringeRow row;
      row.core_i = i;
      row.core_j = j;
      row.phi1 = phi1;
      row.curve.phases = sweep;
      for (const auto& e : counts.entries()) row.curve.values.push_back(static_cast<double>(e.counts));
      row.curve.fit = fit_cosine(row.curve.phases, row.curve.values);
      report.rows.push_back(std::move(row));
    }
  }
  if (!report.rows.empty()) {
    double sum = 0.0;
    for (const auto& r : report.rows) sum += r.curve.fit.visibility;
    report.mean_visibility = sum / report.rows.size();
    if (report.rows.size() > 1) {
      double ss = 0.0;
      for (const auto& r : report.rows) ss += std::pow(r.curve.fit.visibility - report.mean_visibility, 2);
      report.visibility_sem = std::sqrt(ss / (report.rows.size() - 1) / report.rows.size());
    }
  }
  return report;
}

FringeReport fringe_report(const ExperimentConfig& cfg) { return fringe_report(cfg, cfg.fringe_pairs); }

std::vector<MetricRow> evaluate_metrics(const DensityMatrix& rho) {
  std::vector<MetricRow> rows;
  for (const auto& m : standard_metric_set(rho.dim())) rows.push_back({m.name, m.evaluate(rho), 0.0, 0.0});
  return rows;
}

const MetricRow& Report::metric(const std::string& name) const {
  for (const auto& m : metrics)
    if (m.name == name) return m;
  throw std::out_of_range("report has no metric '" + name + "'");
}

json Report::to_json() const {
  json j;
  j["config_name"] = config_name;
  json metrics_json = json::array();
  for (const auto& m : metrics) {
    metrics_json.push_back({{"name", m.name}, {"value", m.value}, {"bootstrap_mean", m.bootstrap_mean},
                            {"bootstrap_std", m.bootstrap_std}});
  }
  j["metrics"] = std::move(metrics_json);
  j["cglmp_violation_sigma"] = std::isfinite(violation_sigma) ? json(violation_sigma) : json(nullptr);
  j["crosstalk"] = {{"value", crosstalk}, {"std", crosstalk_std}};
  json rows = json::array();
  for (const auto& r : fringes.rows) {
    rows.push_back({{"pair", {r.core_i + 1, r.core_j + 1}},
                    {"phi1_rad", r.phi1},
                    {"visibility", r.curve.fit.visibility},
                    {"phase_of_max_rad", r.curve.fit.phase_of_max}});
  }
  j["fringes"] = {{"rows", rows}, {"mean_visibility", fringes.mean_visibility}, {"visibility_sem", fringes.visibility_sem}};
  j["reconstruction"] = {{"log_likelihood", reconstruction.log_likelihood},
                         {"flux_scale", reconstruction.flux_scale},
                         {"iterations", reconstruction.iterations},
                         {"converged", reconstruction.converged},
                         {"residual_rms_counts", reconstruction.residual},
                         {"rephase_angles_rad", rephase_angles}};
  j["bootstrap"] = {{"requested", bootstrap_requested}, {"succeeded", bootstrap_succeeded}};
  j["rho"] = density_to_json(rho);
  j["provenance"] = {{"config_hash", config_hash},
                     {"seed", seed},
                     {"mcfent_version", kVersion},
                     {"eigen_version", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                           "." + std::to_string(EIGEN_MINOR_VERSION)}};
  return j;
}

std::string metrics_csv(const Report& report) {
  std::string out = "metric,value,bootstrap_mean,bootstrap_std\n";
  for (const auto& m : report.metrics) {
    out += m.name + ',' + to_csv_value(m.value) + ',' + to_csv_value(m.bootstrap_mean) + ',' +
           to_csv_value(m.bootstrap_std) + '\n';
  }
  out += "crosstalk," + to_csv_value(report.crosstalk) + ',' + to_csv_value(report.crosstalk) + ',' +
         to_csv_value(report.crosstalk_std) + '\n';
  out += "mean_fringe_visibility," + to_csv_value(report.fringes.mean_visibility) + ',' +
         to_csv_value(report.fringes.mean_visibility) + ',' + to_csv_value(report.fringes.visibility_sem) + '\n';
  return out;
}

std::string density_bars_csv(const DensityMatrix& rho) {
  const int d = rho.dim();
  std::string out = "row,col,re,im\n";
  for (int r = 0; r < d * d; ++r) {
    for (int c = 0; c < d * d; ++c) {
      out += std::to_string(r / d + 1) + std::to_string(r % d + 1) + ',' + std::to_string(c / d + 1) +
             std::to_string(c % d + 1) + ',' + format_number(rho(r, c).real()) + ',' + format_number(rho(r, c).imag()) + '\n';
    }
  }
  return out;
}

std::string fringes_csv(const FringeReport& fringes) {
  std::string out = "core_i,core_j,phi1_rad,visibility,phase_of_max_rad,mean_counts\n";
  for (const auto& r : fringes.rows) {
    out += std::to_string(r.core_i + 1) + ',' + std::to_string(r.core_j + 1) + ',' + format_number(r.phi1) + ',' +
           format_number(r.curve.fit.visibility) + ',' + format_number(r.curve.fit.phase_of_max) + ',' +
           format_number(r.curve.fit.mean) + '\n';
  }
  return out;
}

std::string fringe_sweeps_csv(const FringeReport& fringes) {
  std::string out = "core_i,core_j,phi1_rad,phi2_rad,counts\n";
  for (const auto& r : fringes.rows) {
    for (std::size_t k = 0; k < r.curve.phases.size(); ++k) {
      out += std::to_string(r.core_i + 1) + ',' + std::to_string(r.core_j + 1) + ',' + format_number(r.phi1) + ',' +
             format_number(r.curve.phases[k]) + ',' + format_number(r.curve.values[k]) + '\n';
    }
  }
  return out;
}

Report run_experiment(const ExperimentConfig& cfg, const std::optional<std::string>& out_dir, unsigned threads) {
  cfg.validate();
  const std::string dir = out_dir.value_or(cfg.output_dir);
  auto write = [&](const std::string& file, const std::string& text) {
    if (dir.empty()) return;
    stage("write", [&] {
      write_text_file((std::filesystem::path(dir) / file).string(), text);
      return 0;
    });
  };
  if (!dir.empty()) {
    stage("write", [&] {
      std::filesystem::create_directories(dir);
      return 0;
    });
  }
  ExperimentConfig echo = cfg;
  echo.output_dir.clear();
  write("config.json", config_to_json(echo).dump(2) + "\n");

  const int d = cfg.dim;
  const DensityMatrix source = stage("source", [&] {
    return density_from_pure(make_correlated_state(std::span<const cplx>(cfg.state_coefficients)));
  });
  const DensityMatrix transported = stage("channel", [&] { return apply_channel(source, cfg.channel); });

  const TomographyProtocol protocol = standard_settings(d);
  const CountsRecord one_core = stage("simulate", [&] {
    return simulate_counts(transported, one_core_pairs(d), cfg.pair_rate, cfg.integration_time, cfg.efficiency,
                           derive_seed(cfg.seed, kStageOneCore), cfg.count_mode);
  });
  const CountsRecord tomo = stage("simulate", [&] {
    return simulate_counts(transported, protocol.setting_pairs(), cfg.pair_rate, cfg.integration_time, cfg.efficiency,
                           derive_seed(cfg.seed, kStageTomography), cfg.count_mode);
  });
  {
    std::ostringstream a, b;
    write_counts_csv(a, one_core);
    write_counts_csv(b, tomo);
    write("counts_onecore.csv", a.str());
    write("counts_tomography.csv", b.str());
  }

  const TomographyModel model = stage("reconstruct", [&] { return TomographyModel(protocol, cfg.efficiency); });
  ReconstructionResult rec = stage("reconstruct", [&] { return model.mle(model.ordered_counts(tomo), cfg.mle); });
  const DensityMatrix rephased = stage("reconstruct", [&] { return rephase(rec.rho); });
  write("rho_raw.json", density_to_json(rec.rho).dump(2) + "\n");
  write("rho.json", density_to_json(rephased).dump(2) + "\n");

  Report report{.config_name = cfg.name,
                .config_hash = config_hash(cfg),
                .seed = cfg.seed,
                .rho_raw = rec.rho,
                .rho = rephased,
                .rephase_angles = rephase_angles(rec.rho),
                .reconstruction = std::move(rec),
                .metrics = {},
                .fringes = {}};
  report.metrics = stage("metrics", [&] { return evaluate_metrics(report.rho); });

  const BootstrapResult boot = stage("bootstrap", [&] {
    BootstrapOptions opts;
    opts.resamples = cfg.bootstrap_resamples;
    opts.seed = derive_seed(cfg.seed, kStageBootstrap);
    opts.threads = threads;
    opts.mle = cfg.mle;
    return bootstrap_errors(tomo, model, standard_metric_set(d), opts);
  });
  report.bootstrap_requested = boot.requested;
  report.bootstrap_succeeded = boot.succeeded;
  for (auto& row : report.metrics) {
    for (const auto& s : boot.metrics) {
      if (s.name == row.name) {
        row.bootstrap_mean = s.mean;
        row.bootstrap_std = s.std;
      }
    }
  }

  stage("metrics", [&] {
    report.crosstalk = crosstalk_summary(one_core, d);
    double unwanted = 0.0, total = 0.0;
    for (const auto& e : one_core.entries()) {
      total += static_cast<double>(e.counts);
      if (e.setting_1 != e.setting_2) unwanted += static_cast<double>(e.counts);
    }
    report.crosstalk_std = std::sqrt(unwanted * (total - unwanted) / (total * total * total));
    const MetricRow& bell = report.metric("cglmp_I" + std::to_string(d));
    report.violation_sigma = bell.bootstrap_std > 0.0 ? violation_sigma(bell.value, bell.bootstrap_std)
                                                      : std::numeric_limits<double>::infinity();
    return 0;
  });

  report.fringes = stage("fringes", [&] { return fringe_report(cfg); });

  write("metrics.csv", metrics_csv(report));
  write("density_bars.csv", density_bars_csv(report.rho));
  write("fringes.csv", fringes_csv(report.fringes));
  write("fringe_sweeps.csv", fringe_sweeps_csv(report.fringes));
  write("report.json", report.to_json().dump(2) + "\n");
  return report;
}

}  // namespace mcfent
