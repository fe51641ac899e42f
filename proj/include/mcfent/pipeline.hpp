#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mcfent/bell_metrics.hpp"
#include "mcfent/channel.hpp"
#include "mcfent/io.hpp"
#include "mcfent/measurement.hpp"
#include "mcfent/tomography.hpp"

namespace mcfent {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& message)
      : std::runtime_error(stage + ": " + message), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct ExperimentConfig {
  std::string name = "custom";
  int dim = 4;
  std::vector<cplx> state_coefficients;
  ChannelParams channel;
  EfficiencyModel efficiency = EfficiencyModel::ideal(4);
  double pair_rate = 0.0;          // pairs / s
  double integration_time = 60.0;  // s, per setting pair
  CountMode count_mode = CountMode::poisson;
  MleOptions mle;
  int bootstrap_resamples = 200;
  std::uint64_t seed = 0;
  std::vector<std::pair<int, int>> fringe_pairs;  // 0-based cores
  std::vector<double> fringe_phi1;
  int fringe_points = 16;
  std::string output_dir;

  /// Throws ConfigError.
  void validate() const;
};

/// Strict parser: unknown keys and unit mistakes raise ConfigError.
ExperimentConfig config_from_json(const json& j);
json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::string& path);

/// "ideal", "paper" or "fig4".
ExperimentConfig preset_config(const std::string& name);
std::vector<std::string> preset_names();

/// FNV-1a 64 of the canonical config text (output_dir excluded), hex.
std::string config_hash(const ExperimentConfig& cfg);

/// (non-matching one-core coincidences) / (all d^2 one-core coincidences).
double crosstalk_summary(const CountsRecord& counts, int dim = 4);

struct FringeRow {
  int core_i = 0;  // 0-based
  int core_j = 0;
  double phi1 = 0.0;
  FringeCurve curve;  // phases, counts, fit
};

struct FringeReport {
  std::vector<FringeRow> rows;
  double mean_visibility = 0.0;
  double visibility_sem = 0.0;  // standard error over rows
};

/// Simulated phi2 sweeps for every pair and every phi1 of the config,
/// fitted with a cosine.
FringeReport fringe_report(const ExperimentConfig& cfg, const std::vector<std::pair<int, int>>& pairs);
FringeReport fringe_report(const ExperimentConfig& cfg);

struct MetricRow {
  std::string name;
  double value = 0.0;  // on the point estimate
  double bootstrap_mean = 0.0;
  double bootstrap_std = 0.0;
};

struct Report {
  std::string config_name;
  std::string config_hash;
  std::uint64_t seed = 0;
  DensityMatrix rho_raw;  // maximum-likelihood estimate
  DensityMatrix rho;      // re-phased estimate; metrics refer to this one
  std::vector<double> rephase_angles;
  ReconstructionResult reconstruction;
  std::vector<MetricRow> metrics;
  int bootstrap_succeeded = 0;
  int bootstrap_requested = 0;
  double crosstalk = 0.0;
  double crosstalk_std = 0.0;
  FringeReport fringes;
  double violation_sigma = 0.0;

  const MetricRow& metric(const std::string& name) const;
  json to_json() const;
};

/// source -> channel -> counts -> tomography -> metrics -> bootstrap -> fringes.
/// Writes intermediate artifacts to `out_dir` when it is non-empty (falls
/// back to cfg.output_dir). Failures raise StageError.
Report run_experiment(const ExperimentConfig& cfg, const std::optional<std::string>& out_dir = std::nullopt,
                      unsigned threads = 0);

/// Metrics table as CSV: metric,value,bootstrap_mean,bootstrap_std.
std::string metrics_csv(const Report& report);
/// Re/Im density-matrix bar values, rows labeled by 1-based core pairs.
std::string density_bars_csv(const DensityMatrix& rho);
std::string fringes_csv(const FringeReport& fringes);
std::string fringe_sweeps_csv(const FringeReport& fringes);

/// Everything run_experiment reports for an already-reconstructed state.
std::vector<MetricRow> evaluate_metrics(const DensityMatrix& rho);

inline constexpr const char* kVersion = "0.1.0";

}  // namespace mcfent
