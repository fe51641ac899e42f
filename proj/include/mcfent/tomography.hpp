#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mcfent/measurement.hpp"
#include "mcfent/qstate.hpp"

namespace mcfent {

/// Per-photon settings and the ordered list of joint setting pairs.
struct TomographyProtocol {
  int dim = 4;
  std::vector<MeasurementSetting> per_photon_settings;
  std::vector<std::pair<int, int>> joint_settings;  // indices into per_photon_settings

  std::size_t size() const { return joint_settings.size(); }
  std::vector<SettingPair> setting_pairs() const;
};

/// d one-core settings |i>, then for every i < j the two-core settings
/// (|i> + |j>)/sqrt(2) and (|i> + i|j>)/sqrt(2); joint settings are all
/// ordered pairs (d^4 for the standard set).
TomographyProtocol standard_settings(int dim = 4);

/// Row k maps vec(rho) (column-major) to Tr(Pi_k rho).
CMatrix measurement_matrix(const TomographyProtocol& protocol);
Eigen::Index measurement_rank(const TomographyProtocol& protocol);

struct MleOptions {
  int max_iterations = 5000;
  double tolerance = 1e-10;  // relative log-likelihood change
  int memory = 12;           // L-BFGS history length
};

struct ReconstructionResult {
  DensityMatrix rho;
  double log_likelihood = 0.0;  // Poisson, at the fitted flux scale, without ln(n!)
  double flux_scale = 0.0;      // pairs per unit probability and efficiency
  int iterations = 0;
  bool converged = false;
  double residual = 0.0;  // RMS of modeled minus observed counts
  std::vector<double> history;  // objective after every accepted step
};

/// Forward model of one protocol under one efficiency model; caches the
/// joint projector vectors and the linear-inversion factorization, so it can
/// be shared between many reconstructions (it is immutable after
/// construction and safe for concurrent use).
class TomographyModel {
 public:
  TomographyModel(TomographyProtocol protocol, EfficiencyModel efficiency);

  const TomographyProtocol& protocol() const { return protocol_; }
  const EfficiencyModel& efficiency() const { return efficiency_; }
  int dim() const { return protocol_.dim; }

  /// Counts in protocol order; throws std::invalid_argument for missing pairs.
  std::vector<std::int64_t> ordered_counts(const CountsRecord& counts) const;

  /// eta_k Tr(Pi_k rho) in protocol order.
  RVector expected_probabilities(const CMatrix& rho) const;

  /// Hermitian, unit-trace least-squares estimate (may be non-PSD).
  CMatrix linear_inversion(const std::vector<std::int64_t>& counts) const;

  ReconstructionResult mle(const std::vector<std::int64_t>& counts, const MleOptions& opts = {}) const;

 private:
  TomographyProtocol protocol_;
  EfficiencyModel efficiency_;
  CMatrix vectors_;  // column k: psi_1 (x) psi_2 of joint setting k
  RVector eta_;
  Eigen::ColPivHouseholderQR<CMatrix> inversion_;
};

CMatrix linear_inversion(const CountsRecord& counts, const TomographyProtocol& protocol, const EfficiencyModel& eff);

ReconstructionResult mle_reconstruct(const CountsRecord& counts, const TomographyProtocol& protocol,
                                     const EfficiencyModel& eff, const MleOptions& opts = {});

/// Nearest-in-spectrum density matrix: negative eigenvalues clipped, trace renormalized.
DensityMatrix project_to_physical(const CMatrix& hermitian, int dim);

struct NamedMetric {
  std::string name;
  std::function<double(const DensityMatrix&)> evaluate;
};

struct MetricSummary {
  std::string name;
  double mean = 0.0;
  double std = 0.0;
};

struct BootstrapResult {
  std::vector<MetricSummary> metrics;
  int requested = 0;
  int succeeded = 0;
  std::vector<std::string> failures;  // "resample k: message"
};

struct BootstrapOptions {
  int resamples = 200;
  std::uint64_t seed = 0;
  unsigned threads = 0;  // 0: hardware concurrency
  MleOptions mle;
};

/// Parametric Poisson bootstrap: every count is redrawn as Poisson(observed),
/// the state is re-estimated by maximum likelihood and each metric evaluated.
/// Results do not depend on the thread count. Throws std::runtime_error if
/// fewer than 90% of the resamples succeed.
BootstrapResult bootstrap_errors(const CountsRecord& counts, const TomographyModel& model,
                                 const std::vector<NamedMetric>& metrics, const BootstrapOptions& opts);

BootstrapResult bootstrap_errors(const CountsRecord& counts, const TomographyProtocol& protocol,
                                 const EfficiencyModel& eff, const std::vector<NamedMetric>& metrics,
                                 int n_resamples, std::uint64_t seed);

}  // namespace mcfent
