#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mcfent/qstate.hpp"
#include "mcfent/types.hpp"

namespace mcfent {

/// One photon's projection state (1/sqrt(N)) Sum_k e^{i phi_k} |c_k>.
///
/// Cores are 0-based here; ids and every other user-facing form use 1-based
/// cores. The id grammar is terms joined by '+', each term `core` or
/// `core@p` where p is the phase in units of pi, e.g. "1+2@0.5" is
/// (|1> + i|2>)/sqrt(2).
class MeasurementSetting {
 public:
  MeasurementSetting(int dim, std::vector<int> cores, std::vector<double> phases = {});

  static MeasurementSetting one_core(int dim, int core);
  static MeasurementSetting two_core(int dim, int core_a, int core_b, double phase_b);
  static MeasurementSetting parse(std::string_view id, int dim);

  int dim() const { return dim_; }
  int size() const { return static_cast<int>(cores_.size()); }
  const std::vector<int>& cores() const { return cores_; }
  const std::vector<double>& phases() const { return phases_; }
  std::string id() const;

  /// Unit vector with entries e^{i phi_k}/sqrt(N) on the selected cores.
  CVector projector_vector() const;

 private:
  int dim_;
  std::vector<int> cores_;
  std::vector<double> phases_;
};

/// Coupling efficiency from one core to the single-mode fiber, as a function
/// of the number N of cores in the projected superposition.
class EfficiencyModel {
 public:
  enum class Mode { ideal, experimental, custom };

  static EfficiencyModel ideal(int dim = 4);
  /// Measured values for N = 1..4: 54%, 13%, 4.8%, 3.6%.
  static EfficiencyModel experimental();
  static EfficiencyModel custom(std::vector<double> per_n_efficiency);

  Mode mode() const { return mode_; }
  std::string name() const;
  int max_cores() const { return static_cast<int>(per_n_.size()); }
  const std::vector<double>& per_n_efficiency() const { return per_n_; }

  /// From-one-core efficiency; 1/N^2 in the ideal case.
  double from_one_core(int n) const;

  /// Factor multiplying the Born probability of an N-core projection,
  /// N * from_one_core(N); 1/N in the ideal case.
  double projection_factor(int n) const;

 private:
  EfficiencyModel(Mode mode, std::vector<double> per_n);
  Mode mode_;
  std::vector<double> per_n_;
};

EfficiencyModel efficiency_from_name(std::string_view name, int dim);

/// Per-pair coincidence probability eta_1(N_1) eta_2(N_2) <psi_1 psi_2|rho|psi_1 psi_2>.
double detection_probability(const DensityMatrix& rho, const MeasurementSetting& s1, const MeasurementSetting& s2,
                             const EfficiencyModel& eff);

/// a + b cos(phi) + c sin(phi) fitted by least squares.
struct CosineFit {
  double mean = 0.0;
  double amplitude = 0.0;
  double phase_of_max = 0.0;  // in [0, 2 pi)
  double visibility = 0.0;    // amplitude / mean, clamped to [0, 1]
};

CosineFit fit_cosine(const std::vector<double>& phases, const std::vector<double>& values);

struct FringeCurve {
  std::vector<double> phases;
  std::vector<double> values;
  CosineFit fit;
};

/// Evenly spaced sweep over [0, 2 pi).
std::vector<double> phase_sweep(int points = 16);

/// Photon 1 on (|i> + e^{i phi1}|j>)/sqrt(2), photon 2 on (|i> + e^{i phi2}|j>)/sqrt(2)
/// for every phi2 in `sweep`. Throws for i == j or fewer than four points.
FringeCurve predict_fringe(const DensityMatrix& rho, int i, int j, double phi1, const std::vector<double>& sweep,
                           const EfficiencyModel& eff);

struct SettingPair {
  MeasurementSetting first;
  MeasurementSetting second;
};

/// Coincidence counts keyed by (setting_1 id, setting_2 id), kept in
/// insertion order.
class CountsRecord {
 public:
  struct Entry {
    std::string setting_1;
    std::string setting_2;
    std::int64_t counts;
  };

  double integration_time = 0.0;  // s
  double pair_rate = 0.0;         // pairs / s
  std::uint64_t seed = 0;

  void add(std::string setting_1, std::string setting_2, std::int64_t counts);
  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool contains(const std::string& s1, const std::string& s2) const;
  /// Throws std::out_of_range when the pair is absent.
  std::int64_t at(const std::string& s1, const std::string& s2) const;
  std::int64_t total() const;
  /// Same keys, counts replaced.
  CountsRecord with_counts(const std::vector<std::int64_t>& counts) const;

 private:
  std::vector<Entry> entries_;
  std::map<std::pair<std::string, std::string>, std::size_t> index_;
};

enum class CountMode {
  poisson,   // counts ~ Poisson(rate * time * p)
  expected,  // counts = round(rate * time * p), the infinite-statistics limit
};

/// Seed for stream `index` derived from a master seed (splitmix64 mixing).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

CountsRecord simulate_counts(const DensityMatrix& rho, const std::vector<SettingPair>& pairs, double pair_rate,
                             double integration_time, const EfficiencyModel& eff, std::uint64_t seed,
                             CountMode mode = CountMode::poisson);

struct SlmRegion {
  int x0 = 0;
  int y0 = 0;
  int width = 0;
  int height = 0;
};

/// SLM layout: one rectangular subsection per core.
struct SlmGeometry {
  int width = 792;
  int height = 600;
  double pixel_pitch = 20e-6;  // m
  std::vector<SlmRegion> regions;
  int blaze_period_px = 16;
  // Cores outside the projected superposition get a grating of this period
  // along y, which steers their light off the single-mode fiber.
  int dump_period_px = 4;

  /// 2x2 quadrants for four cores (core 1 top-left, then clockwise), vertical
  /// strips otherwise.
  static SlmGeometry standard(int dim = 4);
  void validate() const;
};

/// 8-bit phase image, level = floor(256 * phase / 2 pi), row-major.
struct PhaseImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> levels;

  std::uint8_t at(int x, int y) const { return levels[static_cast<std::size_t>(y) * width + x]; }
};

PhaseImage slm_mask(const MeasurementSetting& setting, const SlmGeometry& geometry);

}  // namespace mcfent
