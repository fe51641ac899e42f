#include "mcfent/measurement.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <random>
#include <set>
#include <stdexcept>

namespace mcfent {

namespace {

std::string shortest(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

double wrap_two_pi(double phase) {
  double p = std::fmod(phase, 2.0 * kPi);
  if (p < 0.0) p += 2.0 * kPi;
  return p;
}

}  // namespace

MeasurementSetting::MeasurementSetting(int dim, std::vector<int> cores, std::vector<double> phases)
    : dim_(dim), cores_(std::move(cores)), phases_(std::move(phases)) {
  if (dim_ < 2) throw std::invalid_argument("setting: dim must be at least 2");
  if (cores_.empty()) throw std::invalid_argument("setting: no cores selected");
  if (phases_.empty()) phases_.assign(cores_.size(), 0.0);
  if (phases_.size() != cores_.size()) throw std::invalid_argument("setting: one phase per core required");
  std::set<int> seen;
  for (int c : cores_) {
    if (c < 0 || c >= dim_) throw std::invalid_argument("setting: core " + std::to_string(c + 1) + " out of range");
    if (!seen.insert(c).second) throw std::invalid_argument("setting: duplicate core " + std::to_string(c + 1));
  }
  for (double p : phases_)
    if (!std::isfinite(p)) throw std::invalid_argument("setting: non-finite phase");
}

MeasurementSetting MeasurementSetting::one_core(int dim, int core) { return MeasurementSetting(dim, {core}); }

MeasurementSetting MeasurementSetting::two_core(int dim, int core_a, int core_b, double phase_b) {
  return MeasurementSetting(dim, {core_a, core_b}, {0.0, phase_b});
}

std::string MeasurementSetting::id() const {
  std::string out;
  for (std::size_t k = 0; k < cores_.size(); ++k) {
    if (k) out += '+';
    out += std::to_string(cores_[k] + 1);
    const double units = wrap_two_pi(phases_[k]) / kPi;
    if (units != 0.0 && units < 2.0) out += '@' + shortest(units);
  }
  return out;
}

MeasurementSetting MeasurementSetting::parse(std::string_view id, int dim) {
  std::vector<int> cores;
  std::vector<double> phases;
  std::size_t pos = 0;
  while (pos <= id.size()) {
    const std::size_t end = std::min(id.find('+', pos), id.size());
    const std::string_view term = id.substr(pos, end - pos);
    const std::size_t at = term.find('@');
    const std::string_view core_text = term.substr(0, at);
    int core = 0;
    auto [p, ec] = std::from_chars(core_text.data(), core_text.data() + core_text.size(), core);
    if (ec != std::errc() || p != core_text.data() + core_text.size() || core_text.empty()) {
      throw std::invalid_argument("setting id '" + std::string(id) + "': bad core in term '" + std::string(term) + "'");
    }
    double units = 0.0;
    if (at != std::string_view::npos) {
      const std::string_view ph = term.substr(at + 1);
      auto [q, ec2] = std::from_chars(ph.data(), ph.data() + ph.size(), units);
      if (ec2 != std::errc() || q != ph.data() + ph.size() || ph.empty()) {
        throw std::invalid_argument("setting id '" + std::string(id) + "': bad phase in term '" + std::string(term) + "'");
      }
    }
    cores.push_back(core - 1);
    phases.push_back(units * kPi);
    pos = end + 1;
  }
  return MeasurementSetting(dim, std::move(cores), std::move(phases));
}

CVector MeasurementSetting::projector_vector() const {
  CVector v = CVector::Zero(dim_);
  const double amp = 1.0 / std::sqrt(static_cast<double>(cores_.size()));
  for (std::size_t k = 0; k < cores_.size(); ++k) v(cores_[k]) = std::polar(amp, phases_[k]);
  return v;
}

EfficiencyModel::EfficiencyModel(Mode mode, std::vector<double> per_n) : mode_(mode), per_n_(std::move(per_n)) {
  if (per_n_.empty()) throw std::invalid_argument("efficiency: empty table");
  for (double e : per_n_)
    if (!(e > 0.0 && e <= 1.0)) throw std::invalid_argument("efficiency: values must lie in (0, 1]");
}

EfficiencyModel EfficiencyModel::ideal(int dim) {
  std::vector<double> e;
  for (int n = 1; n <= dim; ++n) e.push_back(1.0 / (static_cast<double>(n) * n));
  return EfficiencyModel(Mode::ideal, std::move(e));
}

EfficiencyModel EfficiencyModel::experimental() {
  return EfficiencyModel(Mode::experimental, {0.54, 0.13, 0.048, 0.036});
}

EfficiencyModel EfficiencyModel::custom(std::vector<double> per_n_efficiency) {
  return EfficiencyModel(Mode::custom, std::move(per_n_efficiency));
}

std::string EfficiencyModel::name() const {
  switch (mode_) {
    case Mode::ideal: return "ideal";
    case Mode::experimental: return "experimental";
    case Mode::custom: return "custom";
  }
  return "custom";
}

double EfficiencyModel::from_one_core(int n) const {
  if (n < 1 || n > max_cores()) {
    throw std::invalid_argument("efficiency: no value for a " + std::to_string(n) + "-core superposition");
  }
  return per_n_[n - 1];
}

double EfficiencyModel::projection_factor(int n) const { return n * from_one_core(n); }

EfficiencyModel efficiency_from_name(std::string_view name, int dim) {
  if (name == "ideal") return EfficiencyModel::ideal(dim);
  if (name == "experimental") return EfficiencyModel::experimental();
  throw std::invalid_argument("unknown efficiency model '" + std::string(name) + "'");
}

double detection_probability(const DensityMatrix& rho, const MeasurementSetting& s1, const MeasurementSetting& s2,
                             const EfficiencyModel& eff) {
  if (s1.dim() != rho.dim() || s2.dim() != rho.dim()) throw std::invalid_argument("detection_probability: dimension mismatch");
  const CVector v1 = s1.projector_vector();
  const CVector v2 = s2.projector_vector();
  const int d = rho.dim();
  CVector joint(d * d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) joint(pair_index(i, j, d)) = v1(i) * v2(j);
  const double born = std::max(0.0, (joint.adjoint() * rho.matrix() * joint)(0, 0).real());
  return std::min(1.0, eff.projection_factor(s1.size()) * eff.projection_factor(s2.size()) * born);
}

CosineFit fit_cosine(const std::vector<double>& phases, const std::vector<double>& values) {
  if (phases.size() != values.size()) throw std::invalid_argument("fit_cosine: size mismatch");
  if (phases.size() < 4) throw std::invalid_argument("fit_cosine: need at least 4 points");
  const Eigen::Index n = static_cast<Eigen::Index>(phases.size());
  RMatrix design(n, 3);
  RVector y(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    design(k, 0) = 1.0;
    design(k, 1) = std::cos(phases[k]);
    design(k, 2) = std::sin(phases[k]);
    y(k) = values[k];
  }
  const RVector coef = design.colPivHouseholderQr().solve(y);
  CosineFit fit;
  fit.mean = coef(0);
  fit.amplitude = std::hypot(coef(1), coef(2));
  fit.phase_of_max = wrap_two_pi(std::atan2(coef(2), coef(1)));
  fit.visibility = fit.mean > 0.0 ? std::clamp(fit.amplitude / fit.mean, 0.0, 1.0) : 0.0;
  return fit;
}

std::vector<double> phase_sweep(int points) {
  if (points < 1) throw std::invalid_argument("phase_sweep: need at least one point");
  std::vector<double> out(points);
  for (int k = 0; k < points; ++k) out[k] = 2.0 * kPi * k / points;
  return out;
}

FringeCurve predict_fringe(const DensityMatrix& rho, int i, int j, double phi1, const std::vector<double>& sweep,
                           const EfficiencyModel& eff) {
  if (i == j) throw std::invalid_argument("predict_fringe: cores must differ");
  if (sweep.size() < 4) throw std::invalid_argument("predict_fringe: need at least 4 sweep points");
  FringeCurve curve;
  curve.phases = sweep;
  const auto s1 = MeasurementSetting::two_core(rho.dim(), i, j, phi1);
  for (double phi2 : sweep) {
    curve.values.push_back(detection_probability(rho, s1, MeasurementSetting::two_core(rho.dim(), i, j, phi2), eff));
  }
  curve.fit = fit_cosine(curve.phases, curve.values);
  return curve;
}

void CountsRecord::add(std::string setting_1, std::string setting_2, std::int64_t counts) {
  if (counts < 0) throw std::invalid_argument("counts must be non-negative");
  auto key = std::make_pair(setting_1, setting_2);
  if (index_.count(key)) throw std::invalid_argument("duplicate setting pair " + setting_1 + " / " + setting_2);
  index_.emplace(std::move(key), entries_.size());
  entries_.push_back({std::move(setting_1), std::move(setting_2), counts});
}

bool CountsRecord::contains(const std::string& s1, const std::string& s2) const {
  return index_.count({s1, s2}) != 0;
}

std::int64_t CountsRecord::at(const std::string& s1, const std::string& s2) const {
  const auto it = index_.find({s1, s2});
  if (it == index_.end()) throw std::out_of_range("no counts for setting pair " + s1 + " / " + s2);
  return entries_[it->second].counts;
}

std::int64_t CountsRecord::total() const {
  std::int64_t sum = 0;
  for (const auto& e : entries_) sum += e.counts;
  return sum;
}

CountsRecord CountsRecord::with_counts(const std::vector<std::int64_t>& counts) const {
  if (counts.size() != entries_.size()) throw std::invalid_argument("with_counts: size mismatch");
  CountsRecord out;
  out.integration_time = integration_time;
  out.pair_rate = pair_rate;
  out.seed = seed;
  for (std::size_t k = 0; k < counts.size(); ++k) out.add(entries_[k].setting_1, entries_[k].setting_2, counts[k]);
  return out;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

CountsRecord simulate_counts(const DensityMatrix& rho, const std::vector<SettingPair>& pairs, double pair_rate,
                             double integration_time, const EfficiencyModel& eff, std::uint64_t seed, CountMode mode) {
  if (!(pair_rate > 0.0)) throw std::invalid_argument("simulate_counts: pair rate must be positive");
  if (!(integration_time > 0.0)) throw std::invalid_argument("simulate_counts: integration time must be positive");
  CountsRecord record;
  record.integration_time = integration_time;
  record.pair_rate = pair_rate;
  record.seed = seed;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const double expected = pair_rate * integration_time * detection_probability(rho, pairs[k].first, pairs[k].second, eff);
    std::int64_t n = 0;
    if (mode == CountMode::expected) {
      n = std::llround(expected);
    } else if (expected > 0.0) {
      std::mt19937_64 rng(derive_seed(seed, k));
      n = std::poisson_distribution<std::int64_t>(expected)(rng);
    }
    record.add(pairs[k].first.id(), pairs[k].second.id(), n);
  }
  return record;
}

SlmGeometry SlmGeometry::standard(int dim) {
  SlmGeometry g;
  if (dim == 4) {
    const int hw = g.width / 2;
    const int hh = g.height / 2;
    g.regions = {{0, 0, hw, hh}, {hw, 0, g.width - hw, hh}, {hw, hh, g.width - hw, g.height - hh}, {0, hh, hw, g.height - hh}};
  } else {
    for (int k = 0; k < dim; ++k) {
      const int x0 = g.width * k / dim;
      g.regions.push_back({x0, 0, g.width * (k + 1) / dim - x0, g.height});
    }
  }
  return g;
}

void SlmGeometry::validate() const {
  if (width <= 0 || height <= 0) throw std::invalid_argument("slm: empty pixel array");
  if (blaze_period_px < 2 || dump_period_px < 2) throw std::invalid_argument("slm: grating period below 2 pixels");
  for (std::size_t a = 0; a < regions.size(); ++a) {
    const auto& r = regions[a];
    if (r.width <= 0 || r.height <= 0 || r.x0 < 0 || r.y0 < 0 || r.x0 + r.width > width || r.y0 + r.height > height) {
      throw std::invalid_argument("slm: subsection " + std::to_string(a + 1) + " outside the pixel array");
    }
    for (std::size_t b = 0; b < a; ++b) {
      const auto& o = regions[b];
      const bool disjoint = r.x0 >= o.x0 + o.width || o.x0 >= r.x0 + r.width || r.y0 >= o.y0 + o.height ||
                            o.y0 >= r.y0 + r.height;
      if (!disjoint) {
        throw std::invalid_argument("slm: subsections " + std::to_string(b + 1) + " and " + std::to_string(a + 1) + " overlap");
      }
    }
  }
}

PhaseImage slm_mask(const MeasurementSetting& setting, const SlmGeometry& geometry) {
  geometry.validate();
  if (static_cast<int>(geometry.regions.size()) < setting.dim()) {
    throw std::invalid_argument("slm: geometry has fewer subsections than cores");
  }
  PhaseImage img;
  img.width = geometry.width;
  img.height = geometry.height;
  img.levels.assign(static_cast<std::size_t>(img.width) * img.height, 0);

  auto level = [](double cycles) {
    const double frac = cycles - std::floor(cycles);
    return static_cast<std::uint8_t>(std::min(255.0, std::floor(frac * 256.0)));
  };

  for (int core = 0; core < setting.dim(); ++core) {
    const auto& r = geometry.regions[core];
    const auto it = std::find(setting.cores().begin(), setting.cores().end(), core);
    const bool selected = it != setting.cores().end();
    const double shift = selected ? wrap_two_pi(setting.phases()[it - setting.cores().begin()]) / (2.0 * kPi) : 0.0;
    for (int y = r.y0; y < r.y0 + r.height; ++y) {
      for (int x = r.x0; x < r.x0 + r.width; ++x) {
        const double cycles = selected ? static_cast<double>(x - r.x0) / geometry.blaze_period_px + shift
                                       : static_cast<double>(y - r.y0) / geometry.dump_period_px;
        img.levels[static_cast<std::size_t>(y) * img.width + x] = level(cycles);
      }
    }
  }
  return img;
}

}  // namespace mcfent
