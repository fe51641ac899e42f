// mcfent: simulate, reconstruct and analyze two-ququart multi-core fiber
// entanglement experiments.
//
// Exit codes: 0 success, 2 configuration error, 3 stage failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "mcfent/pipeline.hpp"

namespace fs = std::filesystem;
using namespace mcfent;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitStage = 3;

struct Common {
  std::string config_path;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::optional<int> resamples;
  std::string out_dir;
};

void add_common(CLI::App* cmd, Common& c, bool with_resamples) {
  cmd->add_option("--config", c.config_path, "Experiment config (JSON)");
  cmd->add_option("--preset", c.preset, "Built-in config")->check(CLI::IsMember(preset_names()));
  cmd->add_option("--seed", c.seed, "Override the config seed");
  if (with_resamples) cmd->add_option("--resamples", c.resamples, "Bootstrap resamples (>= 50)");
  cmd->add_option("--out", c.out_dir, "Output directory");
}

ExperimentConfig resolve_config(const Common& c) {
  if (c.config_path.empty() == c.preset.empty()) throw ConfigError("config: give exactly one of --config and --preset");
  ExperimentConfig cfg = c.preset.empty() ? load_config(c.config_path) : preset_config(c.preset);
  if (c.seed) cfg.seed = *c.seed;
  if (c.resamples) cfg.bootstrap_resamples = *c.resamples;
  if (!c.out_dir.empty()) cfg.output_dir = c.out_dir;
  cfg.validate();
  return cfg;
}

std::string require_out(const std::string& dir) {
  const std::string d = dir.empty() ? "." : dir;
  fs::create_directories(d);
  return d;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

CountsRecord load_counts(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  try {
    return read_counts_csv(in);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void print_metrics(const std::vector<MetricRow>& rows, bool with_std) {
  for (const auto& m : rows) {
    std::printf("  %-18s %9.4f", m.name.c_str(), m.value);
    if (with_std) std::printf("  +- %.4f", m.bootstrap_std);
    std::printf("\n");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-ququart multi-core fiber entanglement: simulation, tomography and Bell analysis"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  Common sim_opts, report_opts, fringe_opts;
  auto* simulate = app.add_subcommand("simulate", "Simulate one-core and tomography coincidence counts");
  add_common(simulate, sim_opts, false);

  auto* report = app.add_subcommand("report", "Run the full pipeline and write a report");
  add_common(report, report_opts, true);
  unsigned threads = 0;
  report->add_option("--threads", threads, "Bootstrap worker threads (0: all cores)");

  auto* fringes = app.add_subcommand("fringes", "Simulate and fit two-core interference fringes");
  add_common(fringes, fringe_opts, false);
  std::optional<int> rotation;
  std::vector<std::string> pair_args;
  fringes->add_option("--rotation", rotation, "Rotation of MCF1 in degrees (multiple of 90)");
  fringes->add_option("--pair", pair_args, "Core pair as i,j (1-based); repeatable");

  std::string counts_path, efficiency_name = "experimental", rho_path;
  Common rec_opts;
  auto* reconstruct = app.add_subcommand("reconstruct", "Maximum-likelihood state from a counts table");
  reconstruct->add_option("--counts", counts_path, "Counts table (CSV)")->required();
  reconstruct->add_option("--efficiency", efficiency_name, "ideal or experimental")->check(CLI::IsMember({"ideal", "experimental"}));
  reconstruct->add_option("--out", rec_opts.out_dir, "Output directory");

  Common an_opts;
  auto* analyze = app.add_subcommand("analyze", "Entanglement metrics of a state, with bootstrap errors from counts");
  auto* rho_opt = analyze->add_option("--rho", rho_path, "Density matrix (JSON)");
  analyze->add_option("--counts", counts_path, "Counts table (CSV); enables bootstrap errors")->excludes(rho_opt);
  analyze->add_option("--efficiency", efficiency_name, "ideal or experimental")->check(CLI::IsMember({"ideal", "experimental"}));
  analyze->add_option("--seed", an_opts.seed, "Bootstrap seed");
  analyze->add_option("--resamples", an_opts.resamples, "Bootstrap resamples (>= 50)");
  analyze->add_option("--out", an_opts.out_dir, "Output directory");

  std::vector<std::string> mask_settings;
  std::string mask_dir;
  int mask_dim = 4;
  auto* masks = app.add_subcommand("masks", "Export SLM phase masks as PGM images");
  masks->add_option("--setting", mask_settings, "Setting id, e.g. 1+2@0.5; default: the 16 tomography settings");
  masks->add_option("--dim", mask_dim, "Number of cores");
  masks->add_option("--out", mask_dir, "Output directory");

  std::string presets_dir;
  auto* presets = app.add_subcommand("presets", "Write the built-in configs as JSON");
  presets->add_option("--out", presets_dir, "Output directory");

  int bell_dim = 4;
  std::string bell_out;
  auto* bell = app.add_subcommand("bell-operator", "Export the CGLMP Bell operator and measurement bases");
  bell->add_option("--dim", bell_dim, "Dimension d");
  bell->add_option("--out", bell_out, "Output file (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*simulate) {
      const ExperimentConfig cfg = resolve_config(sim_opts);
      const std::string dir = require_out(cfg.output_dir);
      const DensityMatrix rho = apply_channel(
          density_from_pure(make_correlated_state(std::span<const cplx>(cfg.state_coefficients))), cfg.channel);
      const auto protocol = standard_settings(cfg.dim);
      std::vector<SettingPair> one_core;
      for (int i = 0; i < cfg.dim; ++i)
        for (int j = 0; j < cfg.dim; ++j)
          one_core.push_back({MeasurementSetting::one_core(cfg.dim, i), MeasurementSetting::one_core(cfg.dim, j)});
      const CountsRecord a = simulate_counts(rho, one_core, cfg.pair_rate, cfg.integration_time, cfg.efficiency,
                                             derive_seed(cfg.seed, 1), cfg.count_mode);
      const CountsRecord b = simulate_counts(rho, protocol.setting_pairs(), cfg.pair_rate, cfg.integration_time,
                                             cfg.efficiency, derive_seed(cfg.seed, 2), cfg.count_mode);
      std::ofstream fa(fs::path(dir) / "counts_onecore.csv"), fb(fs::path(dir) / "counts_tomography.csv");
      write_counts_csv(fa, a);
      write_counts_csv(fb, b);
      std::printf("wrote %zu + %zu setting pairs to %s (crosstalk %.4f)\n", a.size(), b.size(), dir.c_str(),
                  crosstalk_summary(a, cfg.dim));
    } else if (*report) {
      const ExperimentConfig cfg = resolve_config(report_opts);
      const std::string dir = require_out(cfg.output_dir);
      const Report r = run_experiment(cfg, dir, threads);
      std::printf("%s  (seed %llu, config %s)\n", cfg.name.c_str(), static_cast<unsigned long long>(cfg.seed),
                  r.config_hash.c_str());
      print_metrics(r.metrics, true);
      std::printf("  %-18s %9.4f  +- %.4f\n", "crosstalk", r.crosstalk, r.crosstalk_std);
      std::printf("  %-18s %9.4f  +- %.4f\n", "fringe visibility", r.fringes.mean_visibility, r.fringes.visibility_sem);
      std::printf("  CGLMP violation: %.2f standard deviations\n", r.violation_sigma);
      std::printf("artifacts in %s\n", dir.c_str());
    } else if (*fringes) {
      ExperimentConfig cfg = resolve_config(fringe_opts);
      if (rotation) cfg.channel.rotation_1 = *rotation;
      std::vector<std::pair<int, int>> pairs = cfg.fringe_pairs;
      if (!pair_args.empty()) {
        pairs.clear();
        for (const auto& p : pair_args) {
          int i = 0, j = 0;
          char comma = 0;
          std::istringstream in(p);
          if (!(in >> i >> comma >> j) || comma != ',') throw ConfigError("--pair expects i,j");
          pairs.emplace_back(i - 1, j - 1);
        }
      }
      cfg.fringe_pairs = pairs;
      cfg.validate();
      const FringeReport fr = fringe_report(cfg);
      std::fputs(fringes_csv(fr).c_str(), stdout);
      std::printf("# mean visibility %.4f +- %.4f\n", fr.mean_visibility, fr.visibility_sem);
      if (!cfg.output_dir.empty()) {
        const std::string dir = require_out(cfg.output_dir);
        write_text_file((fs::path(dir) / "fringes.csv").string(), fringes_csv(fr));
        write_text_file((fs::path(dir) / "fringe_sweeps.csv").string(), fringe_sweeps_csv(fr));
      }
    } else if (*reconstruct) {
      const CountsRecord counts = load_counts(counts_path);
      const int dim = 4;
      const auto eff = efficiency_from_name(efficiency_name, dim);
      const auto rec = mle_reconstruct(counts, standard_settings(dim), eff);
      const DensityMatrix rho = rephase(rec.rho);
      const std::string dir = require_out(rec_opts.out_dir);
      write_text_file((fs::path(dir) / "rho_raw.json").string(), density_to_json(rec.rho).dump(2) + "\n");
      write_text_file((fs::path(dir) / "rho.json").string(), density_to_json(rho).dump(2) + "\n");
      json diag = {{"log_likelihood", rec.log_likelihood}, {"flux_scale", rec.flux_scale},
                   {"iterations", rec.iterations},         {"converged", rec.converged},
                   {"residual_rms_counts", rec.residual}};
      write_text_file((fs::path(dir) / "reconstruction.json").string(), diag.dump(2) + "\n");
      std::printf("%s after %d iterations, log-likelihood %.6f; wrote %s/rho.json\n",
                  rec.converged ? "converged" : "NOT converged", rec.iterations, rec.log_likelihood, dir.c_str());
      if (!rec.converged) return kExitStage;
    } else if (*analyze) {
      std::vector<MetricRow> rows;
      bool with_std = false;
      if (!rho_path.empty()) {
        json j;
        try {
          j = json::parse(slurp(rho_path));
        } catch (const json::exception& e) {
          throw ConfigError(rho_path + ": " + e.what());
        }
        rows = evaluate_metrics(rephase(density_from_json(j)));
      } else if (!counts_path.empty()) {
        const CountsRecord counts = load_counts(counts_path);
        const auto eff = efficiency_from_name(efficiency_name, 4);
        const TomographyModel model(standard_settings(4), eff);
        const auto rec = model.mle(model.ordered_counts(counts));
        rows = evaluate_metrics(rephase(rec.rho));
        BootstrapOptions opts;
        opts.resamples = an_opts.resamples.value_or(200);
        opts.seed = an_opts.seed.value_or(counts.seed);
        const auto boot = bootstrap_errors(counts, model, standard_metric_set(4), opts);
        for (auto& r : rows)
          for (const auto& s : boot.metrics)
            if (s.name == r.name) {
              r.bootstrap_mean = s.mean;
              r.bootstrap_std = s.std;
            }
        with_std = true;
      } else {
        throw ConfigError("analyze needs --rho or --counts");
      }
      print_metrics(rows, with_std);
      if (!an_opts.out_dir.empty()) {
        std::string csv = "metric,value,bootstrap_mean,bootstrap_std\n";
        for (const auto& m : rows) {
          csv += m.name + ',' + format_number(m.value) + ',' + format_number(m.bootstrap_mean) + ',' +
                 format_number(m.bootstrap_std) + '\n';
        }
        write_text_file((fs::path(require_out(an_opts.out_dir)) / "metrics.csv").string(), csv);
      }
    } else if (*masks) {
      const std::string dir = require_out(mask_dir);
      std::vector<MeasurementSetting> settings;
      if (mask_settings.empty()) {
        settings = standard_settings(mask_dim).per_photon_settings;
      } else {
        for (const auto& id : mask_settings) settings.push_back(MeasurementSetting::parse(id, mask_dim));
      }
      const SlmGeometry geometry = SlmGeometry::standard(mask_dim);
      for (const auto& s : settings) {
        std::string name = s.id();
        for (char& ch : name)
          if (ch == '+') ch = '_';
          else if (ch == '@') ch = 'p';
        const auto path = fs::path(dir) / ("mask_" + name + ".pgm");
        std::ofstream out(path, std::ios::binary);
        write_pgm(out, slm_mask(s, geometry));
        std::printf("%s -> %s\n", s.id().c_str(), path.string().c_str());
      }
    } else if (*presets) {
      const std::string dir = require_out(presets_dir);
      for (const auto& name : preset_names()) {
        write_text_file((fs::path(dir) / (name + ".json")).string(), config_to_json(preset_config(name)).dump(2) + "\n");
      }
      std::printf("wrote %zu presets to %s\n", preset_names().size(), dir.c_str());
    } else if (*bell) {
      const std::string text = cglmp_to_json(cglmp_context(bell_dim)).dump(2) + "\n";
      if (bell_out.empty()) std::fputs(text.c_str(), stdout);
      else write_text_file(bell_out, text);
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitStage;
  }
  return 0;
}
