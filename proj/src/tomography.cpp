#include "mcfent/tomography.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <deque>
#include <limits>
#include <random>
#include <stdexcept>
#include <thread>

namespace mcfent {

std::vector<SettingPair> TomographyProtocol::setting_pairs() const {
  std::vector<SettingPair> out;
  out.reserve(joint_settings.size());
  for (const auto& [a, b] : joint_settings) out.push_back({per_photon_settings.at(a), per_photon_settings.at(b)});
  return out;
}

TomographyProtocol standard_settings(int dim) {
  if (dim < 2) throw std::invalid_argument("standard_settings: dim must be at least 2");
  TomographyProtocol p;
  p.dim = dim;
  for (int i = 0; i < dim; ++i) p.per_photon_settings.push_back(MeasurementSetting::one_core(dim, i));
  for (int i = 0; i < dim; ++i) {
    for (int j = i + 1; j < dim; ++j) {
      p.per_photon_settings.push_back(MeasurementSetting::two_core(dim, i, j, 0.0));
      p.per_photon_settings.push_back(MeasurementSetting::two_core(dim, i, j, kPi / 2));
    }
  }
  const int n = static_cast<int>(p.per_photon_settings.size());
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) p.joint_settings.emplace_back(a, b);
  return p;
}

namespace {

CMatrix joint_vectors(const TomographyProtocol& protocol) {
  const int d = protocol.dim;
  CMatrix v(d * d, static_cast<Eigen::Index>(protocol.size()));
  for (std::size_t k = 0; k < protocol.size(); ++k) {
    const auto& [a, b] = protocol.joint_settings[k];
    const CVector v1 = protocol.per_photon_settings.at(a).projector_vector();
    const CVector v2 = protocol.per_photon_settings.at(b).projector_vector();
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) v(pair_index(i, j, d), static_cast<Eigen::Index>(k)) = v1(i) * v2(j);
  }
  return v;
}

CMatrix matrix_from_vectors(const CMatrix& vectors) {
  const Eigen::Index n = vectors.rows();
  CMatrix a(vectors.cols(), n * n);
  for (Eigen::Index k = 0; k < vectors.cols(); ++k)
    for (Eigen::Index c = 0; c < n; ++c)
      for (Eigen::Index r = 0; r < n; ++r) a(k, r + c * n) = std::conj(vectors(r, k)) * vectors(c, k);
  return a;
}

CMatrix hermitian_sqrt(const CMatrix& m) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(m);
  const RVector s = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * s.asDiagonal() * es.eigenvectors().adjoint();
}

// Profile log-likelihood in the Cholesky-like factor T, rho = T^dag T / Tr(T^dag T),
// measured from the saturated model (mu_k = n_k):
//   f(T) = sum_{n_k > 0} n_k ln(eta_k q_k / (n_k Q)),  q_k = |T v_k|^2,  Q = sum_k eta_k q_k / N.
// f <= 0 with equality at an exact fit; each term is formed from a small ratio
// so differences near the optimum keep full precision at any count scale.
// Gradient 2 dF/d(conj T) = 2 T R, R = sum_k w_k v_k v_k^dag.
struct Objective {
  const CMatrix& vectors;
  const RVector& eta;
  const RVector& counts;
  double total;

  double value(const CMatrix& t, CMatrix* gradient) const {
    const CMatrix tv = t * vectors;
    const RVector q = tv.colwise().squaredNorm().transpose();
    const double big_q = eta.dot(q);
    if (!(big_q > 0.0)) return -std::numeric_limits<double>::infinity();
    const double mean_q = big_q / total;
    double f = 0.0;
    RVector w(q.size());
    for (Eigen::Index k = 0; k < q.size(); ++k) {
      if (counts(k) > 0.0) {
        if (!(q(k) > 0.0)) return -std::numeric_limits<double>::infinity();
        const double ref = counts(k) * mean_q;
        f += counts(k) * std::log1p((eta(k) * q(k) - ref) / ref);
        w(k) = counts(k) / q(k) - total * eta(k) / big_q;
      } else {
        w(k) = -total * eta(k) / big_q;
      }
    }
    if (gradient) {
      const CMatrix r = (vectors.array().rowwise() * w.transpose().cast<cplx>().array()).matrix() * vectors.adjoint();
      *gradient = 2.0 * t * r;
    }
    return f;
  }

  // f(T + S) - f(T) from S V directly, so the difference keeps full relative
  // precision even when both values agree to many digits.
  double delta(const CMatrix& t, const CMatrix& step) const {
    const CMatrix tv = t * vectors;
    const CMatrix sv = step * vectors;
    const RVector a = tv.colwise().squaredNorm().transpose().cwiseProduct(eta);
    const RVector b = ((2.0 * tv.conjugate().cwiseProduct(sv).real() + sv.cwiseAbs2()).colwise().sum().transpose())
                          .cwiseProduct(eta);
    double d = -total * std::log1p(b.sum() / a.sum());
    for (Eigen::Index k = 0; k < a.size(); ++k) {
      if (counts(k) > 0.0) d += counts(k) * std::log1p(b(k) / a(k));
    }
    return std::isnan(d) ? -std::numeric_limits<double>::infinity() : d;
  }
};

RVector pack(const CMatrix& m) {
  const Eigen::Index n = m.size();
  RVector x(2 * n);
  for (Eigen::Index k = 0; k < n; ++k) {
    x(k) = m.data()[k].real();
    x(n + k) = m.data()[k].imag();
  }
  return x;
}

CMatrix unpack(const RVector& x, Eigen::Index rows) {
  CMatrix m(rows, rows);
  const Eigen::Index n = m.size();
  for (Eigen::Index k = 0; k < n; ++k) m.data()[k] = cplx(x(k), x(n + k));
  return m;
}

}  // namespace

CMatrix measurement_matrix(const TomographyProtocol& protocol) { return matrix_from_vectors(joint_vectors(protocol)); }

Eigen::Index measurement_rank(const TomographyProtocol& protocol) {
  Eigen::ColPivHouseholderQR<CMatrix> qr(measurement_matrix(protocol));
  qr.setThreshold(1e-10);
  return qr.rank();
}

TomographyModel::TomographyModel(TomographyProtocol protocol, EfficiencyModel efficiency)
    : protocol_(std::move(protocol)), efficiency_(std::move(efficiency)) {
  if (protocol_.size() == 0) throw std::invalid_argument("tomography: empty protocol");
  for (const auto& s : protocol_.per_photon_settings) {
    if (s.dim() != protocol_.dim) throw std::invalid_argument("tomography: setting dimension differs from protocol");
  }
  vectors_ = joint_vectors(protocol_);
  eta_.resize(static_cast<Eigen::Index>(protocol_.size()));
  for (std::size_t k = 0; k < protocol_.size(); ++k) {
    const auto& [a, b] = protocol_.joint_settings[k];
    eta_(static_cast<Eigen::Index>(k)) = efficiency_.projection_factor(protocol_.per_photon_settings.at(a).size()) *
                                         efficiency_.projection_factor(protocol_.per_photon_settings.at(b).size());
  }
  inversion_.compute(matrix_from_vectors(vectors_));
}

std::vector<std::int64_t> TomographyModel::ordered_counts(const CountsRecord& counts) const {
  std::vector<std::int64_t> out;
  out.reserve(protocol_.size());
  for (const auto& [a, b] : protocol_.joint_settings) {
    const std::string s1 = protocol_.per_photon_settings.at(a).id();
    const std::string s2 = protocol_.per_photon_settings.at(b).id();
    if (!counts.contains(s1, s2)) throw std::invalid_argument("counts missing setting pair " + s1 + " / " + s2);
    out.push_back(counts.at(s1, s2));
  }
  return out;
}

RVector TomographyModel::expected_probabilities(const CMatrix& rho) const {
  RVector p(vectors_.cols());
  for (Eigen::Index k = 0; k < vectors_.cols(); ++k) {
    p(k) = eta_(k) * (vectors_.col(k).adjoint() * rho * vectors_.col(k))(0, 0).real();
  }
  return p;
}

CMatrix TomographyModel::linear_inversion(const std::vector<std::int64_t>& counts) const {
  const Eigen::Index n = vectors_.rows();
  if (static_cast<Eigen::Index>(counts.size()) != vectors_.cols()) throw std::invalid_argument("linear_inversion: count vector size mismatch");
  if (inversion_.rank() < n * n) {
    throw std::runtime_error("linear_inversion: measurement matrix is singular (rank " + std::to_string(inversion_.rank()) +
                             " < " + std::to_string(n * n) + ")");
  }
  CVector y(vectors_.cols());
  for (Eigen::Index k = 0; k < y.size(); ++k) y(k) = static_cast<double>(counts[k]) / eta_(k);
  const CVector x = inversion_.solve(y);
  CMatrix rho = Eigen::Map<const CMatrix>(x.data(), n, n);
  rho = 0.5 * (rho + rho.adjoint()).eval();
  const double tr = rho.trace().real();
  if (!(tr > 0.0)) throw std::runtime_error("linear_inversion: non-positive trace, counts are corrupted or all zero");
  return rho / tr;
}

DensityMatrix project_to_physical(const CMatrix& hermitian, int dim) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (hermitian + hermitian.adjoint()));
  const RVector lambda = es.eigenvalues().cwiseMax(0.0);
  if (!(lambda.sum() > 0.0)) throw std::runtime_error("project_to_physical: no positive spectrum");
  CMatrix rho = es.eigenvectors() * (lambda / lambda.sum()).asDiagonal() * es.eigenvectors().adjoint();
  return DensityMatrix(dim, std::move(rho));
}

ReconstructionResult TomographyModel::mle(const std::vector<std::int64_t>& counts, const MleOptions& opts) const {
  const Eigen::Index n = vectors_.rows();
  const Eigen::Index k_count = vectors_.cols();
  if (static_cast<Eigen::Index>(counts.size()) != k_count) throw std::invalid_argument("mle: count vector size mismatch");
  RVector nk(k_count);
  for (Eigen::Index k = 0; k < k_count; ++k) {
    if (counts[k] < 0) throw std::invalid_argument("mle: negative counts");
    nk(k) = static_cast<double>(counts[k]);
  }
  const double total = nk.sum();
  if (!(total > 0.0)) throw std::invalid_argument("mle: all counts are zero");

  // Start from linear inversion, clipped to the physical set, unless it is
  // far from physical; a small admixture of I keeps every q_k > 0.
  CMatrix start = CMatrix::Identity(n, n) / static_cast<double>(n);
  try {
    const CMatrix li = linear_inversion(counts);
    Eigen::SelfAdjointEigenSolver<CMatrix> es(li, Eigen::EigenvaluesOnly);
    const double negative_mass = -es.eigenvalues().cwiseMin(0.0).sum();
    if (negative_mass <= 0.2) start = project_to_physical(li, protocol_.dim).matrix();
  } catch (const std::runtime_error&) {
  }
  constexpr double kStartMixing = 1e-3;
  start = (1.0 - kStartMixing) * start + kStartMixing * CMatrix::Identity(n, n) / static_cast<double>(n);

  const Objective objective{vectors_, eta_, nk, total};
  // saturated log-likelihood sum n ln n - N; f is measured from it
  double ll_offset = -total;
  for (Eigen::Index k = 0; k < k_count; ++k)
    if (nk(k) > 0.0) ll_offset += nk(k) * std::log(nk(k));

  CMatrix grad_m;
  CMatrix t = hermitian_sqrt(start);
  RVector x = pack(t);
  double f = objective.value(t, &grad_m);
  RVector g = pack(grad_m);

  std::deque<std::pair<RVector, RVector>> memory;  // (s, y) for the ascent problem
  std::vector<double> history{f + ll_offset};
  bool converged = false;
  int small_steps = 0;
  int iter = 0;
  for (; iter < opts.max_iterations; ++iter) {
    // two-loop recursion on the minimization problem of -f
    RVector q = -g;
    std::vector<double> alpha(memory.size());
    for (std::size_t m = memory.size(); m-- > 0;) {
      const auto& [s, y] = memory[m];
      alpha[m] = s.dot(q) / y.dot(s);
      q -= alpha[m] * y;
    }
    double gamma = 0.0;
    if (!memory.empty()) {
      const auto& [s, y] = memory.back();
      gamma = s.dot(y) / y.dot(y);
    } else {
      gamma = 1e-2 * x.norm() / std::max(g.norm(), 1e-300);
    }
    q *= gamma;
    for (std::size_t m = 0; m < memory.size(); ++m) {
      const auto& [s, y] = memory[m];
      const double beta = y.dot(q) / y.dot(s);
      q += (alpha[m] - beta) * s;
    }
    RVector dir = -q;  // ascent direction for f
    double slope = g.dot(dir);
    if (!(slope > 0.0)) {
      memory.clear();
      dir = g * (1e-2 * x.norm() / std::max(g.norm(), 1e-300));
      slope = g.dot(dir);
      if (!(slope > 0.0)) {
        converged = true;
        break;
      }
    }

    double step = 1.0;
    double f_new = f;
    RVector x_new;
    CMatrix t_new;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      x_new = x + step * dir;
      t_new = unpack(x_new, n);
      const double gain = objective.delta(t, t_new - t);
      f_new = f + gain;
      if (std::isfinite(gain) && gain >= 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (!memory.empty()) {
        memory.clear();
        continue;
      }
      // steepest ascent cannot improve f: stationary to working precision
      converged = true;
      break;
    }

    objective.value(t_new, &grad_m);
    const RVector g_new = pack(grad_m);
    const RVector s = x_new - x;
    const RVector y = g - g_new;  // gradient change of -f
    if (s.dot(y) > 1e-16 * s.norm() * y.norm()) {
      memory.emplace_back(s, y);
      if (static_cast<int>(memory.size()) > opts.memory) memory.pop_front();
    }
    const double change = f_new - f;
    x = x_new;
    t = t_new;
    g = g_new;
    f = f_new;
    history.push_back(f + ll_offset);

    // f is invariant under T -> cT; keep |T| near 1 for conditioning
    const double scale = x.norm();
    if (scale > 1e3 || scale < 1e-3) {
      x /= scale;
      t /= scale;
      g *= scale;
      memory.clear();
    }

    // relative to the distance from the saturated model, which stays O(#settings)
    // for well-modeled data instead of growing like N ln N
    if (change <= opts.tolerance * std::max(1.0, std::abs(f))) {
      if (++small_steps >= 3) {
        converged = true;
        ++iter;
        break;
      }
    } else {
      small_steps = 0;
    }
  }

  CMatrix rho = t.adjoint() * t;
  rho = 0.5 * (rho + rho.adjoint()).eval();
  rho /= rho.trace().real();
  const RVector model_p = expected_probabilities(rho);
  const double scale = total / model_p.sum();
  double ll = 0.0;
  double sq = 0.0;
  for (Eigen::Index k = 0; k < k_count; ++k) {
    const double mu = scale * model_p(k);
    if (nk(k) > 0.0) ll += nk(k) * std::log(mu);
    ll -= mu;
    sq += (mu - nk(k)) * (mu - nk(k));
  }

  ReconstructionResult result{DensityMatrix(protocol_.dim, std::move(rho)), 0.0, 0.0, 0, false, 0.0, {}};
  result.log_likelihood = ll;
  result.flux_scale = scale;
  result.iterations = iter;
  result.converged = converged;
  result.residual = std::sqrt(sq / static_cast<double>(k_count));
  result.history = std::move(history);
  return result;
}

CMatrix linear_inversion(const CountsRecord& counts, const TomographyProtocol& protocol, const EfficiencyModel& eff) {
  const TomographyModel model(protocol, eff);
  return model.linear_inversion(model.ordered_counts(counts));
}

ReconstructionResult mle_reconstruct(const CountsRecord& counts, const TomographyProtocol& protocol,
                                     const EfficiencyModel& eff, const MleOptions& opts) {
  const TomographyModel model(protocol, eff);
  return model.mle(model.ordered_counts(counts), opts);
}

BootstrapResult bootstrap_errors(const CountsRecord& counts, const TomographyModel& model,
                                 const std::vector<NamedMetric>& metrics, const BootstrapOptions& opts) {
  if (opts.resamples < 50) throw std::invalid_argument("bootstrap: at least 50 resamples required");
  const std::vector<std::int64_t> observed = model.ordered_counts(counts);
  const int n_res = opts.resamples;
  std::vector<std::vector<double>> values(n_res);
  std::vector<std::string> errors(n_res);

  auto run_one = [&](int r) {
    try {
      std::mt19937_64 rng(derive_seed(opts.seed, static_cast<std::uint64_t>(r)));
      std::vector<std::int64_t> drawn(observed.size());
      for (std::size_t k = 0; k < observed.size(); ++k) {
        drawn[k] = observed[k] > 0
                       ? std::poisson_distribution<std::int64_t>(static_cast<double>(observed[k]))(rng)
                       : 0;
      }
      const ReconstructionResult rec = model.mle(drawn, opts.mle);
      std::vector<double> row;
      for (const auto& m : metrics) {
        const double v = m.evaluate(rec.rho);
        if (!std::isfinite(v)) throw std::runtime_error("metric " + m.name + " is not finite");
        row.push_back(v);
      }
      values[r] = std::move(row);
    } catch (const std::exception& e) {
      errors[r] = e.what();
    }
  };

  unsigned threads = opts.threads ? opts.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(n_res));
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < threads; ++w) {
    pool.emplace_back([&] {
      for (int r; (r = next.fetch_add(1)) < n_res;) run_one(r);
    });
  }
  for (int r; (r = next.fetch_add(1)) < n_res;) run_one(r);
  for (auto& th : pool) th.join();

  BootstrapResult out;
  out.requested = n_res;
  for (int r = 0; r < n_res; ++r) {
    if (!errors[r].empty()) out.failures.push_back("resample " + std::to_string(r) + ": " + errors[r]);
  }
  out.succeeded = n_res - static_cast<int>(out.failures.size());
  if (out.succeeded < (9 * n_res + 9) / 10) {
    throw std::runtime_error("bootstrap: only " + std::to_string(out.succeeded) + " of " + std::to_string(n_res) +
                             " resamples succeeded");
  }
  for (std::size_t m = 0; m < metrics.size(); ++m) {
    double sum = 0.0;
    for (int r = 0; r < n_res; ++r)
      if (errors[r].empty()) sum += values[r][m];
    const double mean = sum / out.succeeded;
    double ss = 0.0;
    for (int r = 0; r < n_res; ++r)
      if (errors[r].empty()) ss += (values[r][m] - mean) * (values[r][m] - mean);
    out.metrics.push_back({metrics[m].name, mean, out.succeeded > 1 ? std::sqrt(ss / (out.succeeded - 1)) : 0.0});
  }
  return out;
}

BootstrapResult bootstrap_errors(const CountsRecord& counts, const TomographyProtocol& protocol,
                                 const EfficiencyModel& eff, const std::vector<NamedMetric>& metrics,
                                 int n_resamples, std::uint64_t seed) {
  const TomographyModel model(protocol, eff);
  BootstrapOptions opts;
  opts.resamples = n_resamples;
  opts.seed = seed;
  return bootstrap_errors(counts, model, metrics, opts);
}

}  // namespace mcfent
