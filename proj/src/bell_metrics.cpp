#include "mcfent/bell_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>

namespace mcfent {

double wootters_concurrence(const CMatrix& rho2) {
  if (rho2.rows() != 4 || rho2.cols() != 4) throw std::invalid_argument("wootters_concurrence: need a 4x4 matrix");
  CMatrix yy = CMatrix::Zero(4, 4);
  // sigma_y (x) sigma_y
  yy(0, 3) = -1.0;
  yy(1, 2) = 1.0;
  yy(2, 1) = 1.0;
  yy(3, 0) = -1.0;
  const CMatrix h = 0.5 * (rho2 + rho2.adjoint());
  const CMatrix tilde = yy * h.conjugate() * yy;
  // eigenvalues of sqrt(rho) tilde sqrt(rho) are the squared lambda_k
  Eigen::SelfAdjointEigenSolver<CMatrix> es(h);
  const RVector s = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const CMatrix root = es.eigenvectors() * s.asDiagonal() * es.eigenvectors().adjoint();
  const CMatrix m = root * tilde * root;
  Eigen::SelfAdjointEigenSolver<CMatrix> es2(0.5 * (m + m.adjoint()), Eigen::EigenvaluesOnly);
  RVector lambda = es2.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  std::sort(lambda.data(), lambda.data() + 4, std::greater<>());
  return std::max(0.0, lambda(0) - lambda(1) - lambda(2) - lambda(3));
}

double subspace_concurrence(const DensityMatrix& rho, int i, int j) {
  const int d = rho.dim();
  if (i == j) throw std::invalid_argument("subspace_concurrence: cores must differ");
  if (i < 0 || j < 0 || i >= d || j >= d) throw std::invalid_argument("subspace_concurrence: core out of range");
  const std::array<int, 4> idx{pair_index(i, i, d), pair_index(i, j, d), pair_index(j, i, d), pair_index(j, j, d)};
  CMatrix sub(4, 4);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) sub(r, c) = rho(idx[r], idx[c]);
  const double tr = sub.trace().real();
  if (tr < 1e-10) return 0.0;
  return wootters_concurrence(sub / tr);
}

namespace {

CMatrix party_basis(int d, double offset, double sign) {
  // column k: (1/sqrt d) sum_j exp(i 2 pi j (sign k + offset) / d) |j>
  CMatrix b(d, d);
  const double amp = 1.0 / std::sqrt(static_cast<double>(d));
  for (int k = 0; k < d; ++k)
    for (int j = 0; j < d; ++j) b(j, k) = std::polar(amp, 2.0 * kPi * j * (sign * k + offset) / d);
  return b;
}

int mod(int a, int d) { return ((a % d) + d) % d; }

}  // namespace

CGLMPContext cglmp_context(int dim) {
  if (dim < 2) throw std::invalid_argument("cglmp_context: dim must be at least 2");
  const int d = dim;
  CGLMPContext ctx;
  ctx.dim = d;
  ctx.measurement_bases = {party_basis(d, 0.0, 1.0), party_basis(d, 0.5, 1.0), party_basis(d, 0.25, -1.0),
                           party_basis(d, -0.25, -1.0)};

  // coefficient tables c[a][b](j, l) multiplying P(A_a = j, B_b = l)
  std::array<std::array<RMatrix, 2>, 2> coef;
  for (auto& row : coef)
    for (auto& m : row) m = RMatrix::Zero(d, d);
  // P(A_a = B_b + k): A outcome (l + k), B outcome l
  auto add_a_ahead = [&](int a, int b, int k, double w) {
    for (int l = 0; l < d; ++l) coef[a][b](mod(l + k, d), l) += w;
  };
  // P(B_b = A_a + k): A outcome j, B outcome (j + k)
  auto add_b_ahead = [&](int b, int a, int k, double w) {
    for (int j = 0; j < d; ++j) coef[a][b](j, mod(j + k, d)) += w;
  };
  for (int k = 0; k < d / 2; ++k) {
    const double w = 1.0 - 2.0 * k / (d - 1);
    add_a_ahead(0, 0, k, w);
    add_b_ahead(0, 1, k + 1, w);
    add_a_ahead(1, 1, k, w);
    add_b_ahead(1, 0, k, w);
    add_a_ahead(0, 0, -k - 1, -w);
    add_b_ahead(0, 1, -k, -w);
    add_a_ahead(1, 1, -k - 1, -w);
    add_b_ahead(1, 0, -k - 1, -w);
  }

  const int n = d * d;
  ctx.bell_operator = CMatrix::Zero(n, n);
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      const CMatrix& ba = ctx.measurement_bases[a];
      const CMatrix& bb = ctx.measurement_bases[2 + b];
      for (int j = 0; j < d; ++j) {
        for (int l = 0; l < d; ++l) {
          const double c = coef[a][b](j, l);
          if (c == 0.0) continue;
          CVector v(n);
          for (int x = 0; x < d; ++x)
            for (int y = 0; y < d; ++y) v(pair_index(x, y, d)) = ba(x, j) * bb(y, l);
          ctx.bell_operator += c * v * v.adjoint();
        }
      }
    }
  }
  ctx.bell_operator = 0.5 * (ctx.bell_operator + ctx.bell_operator.adjoint()).eval();
  return ctx;
}

double cglmp_value(const DensityMatrix& rho, const CGLMPContext& ctx) {
  if (rho.dim() != ctx.dim) throw std::invalid_argument("cglmp_value: dimension mismatch");
  const cplx v = (ctx.bell_operator * rho.matrix()).trace();
  if (std::abs(v.imag()) > 1e-10) throw std::logic_error("cglmp_value: complex expectation value");
  return v.real();
}

namespace {

double quadratic(const RMatrix& s, const std::vector<double>& c) {
  const Eigen::Map<const RVector> x(c.data(), static_cast<Eigen::Index>(c.size()));
  return x.dot(s * x) / x.squaredNorm();
}

// visits every composition of `steps` into `parts` non-negative integers
template <typename F>
void for_each_composition(int parts, int steps, std::vector<int>& buf, int pos, int left, F&& visit) {
  if (pos == parts - 1) {
    buf[pos] = left;
    visit(buf);
    return;
  }
  for (int v = 0; v <= left; ++v) {
    buf[pos] = v;
    for_each_composition(parts, steps, buf, pos + 1, left - v, visit);
  }
}

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

}  // namespace

CglmpOptimum optimize_cglmp_state(int dim) {
  if (dim < 2) throw std::invalid_argument("optimize_cglmp_state: dim must be at least 2");
  const int d = dim;
  const CGLMPContext ctx = cglmp_context(d);
  // restriction of the Bell operator to span{|ii>}; real coefficients see its real part
  RMatrix s(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) s(i, j) = ctx.bell_operator(pair_index(i, i, d), pair_index(j, j, d)).real();

  constexpr long kMaxGridPoints = 2'000'000;
  int steps = 100;
  while (steps > 4 && binomial(steps + d - 1, d - 1) > kMaxGridPoints) steps /= 2;

  constexpr int kStarts = 8;
  std::vector<std::pair<double, std::vector<double>>> best;  // ascending by value
  CglmpOptimum out;
  out.grid_resolution = 1.0 / steps;
  std::vector<int> buf(d);
  std::vector<double> c(d);
  for_each_composition(d, steps, buf, 0, steps, [&](const std::vector<int>& w) {
    for (int i = 0; i < d; ++i) c[i] = std::sqrt(static_cast<double>(w[i]) / steps);
    ++out.grid_points;
    const double v = quadratic(s, c);
    if (static_cast<int>(best.size()) < kStarts || v > best.front().first + 1e-15) {
      best.emplace_back(v, c);
      std::stable_sort(best.begin(), best.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
      if (static_cast<int>(best.size()) > kStarts) best.erase(best.begin());
    }
  });

  out.value = -1e300;
  for (auto it = best.rbegin(); it != best.rend(); ++it) {
    std::vector<double> x = it->second;
    double v = it->first;
    double step = 0.5 / steps;
    int sweeps = 0;
    while (step > 1e-12 && sweeps < 100000) {
      bool improved = false;
      for (int i = 0; i < d; ++i) {
        for (double dir : {1.0, -1.0}) {
          std::vector<double> trial = x;
          trial[i] = std::max(0.0, trial[i] + dir * step);
          const double norm = std::sqrt(std::inner_product(trial.begin(), trial.end(), trial.begin(), 0.0));
          if (norm == 0.0) continue;
          for (double& t : trial) t /= norm;
          const double tv = quadratic(s, trial);
          if (tv > v + 1e-15) {
            v = tv;
            x = std::move(trial);
            improved = true;
          }
        }
      }
      ++sweeps;
      if (!improved) step *= 0.5;
    }
    out.refinement_sweeps += sweeps;
    ++out.starts;
    if (v > out.value) {
      out.value = v;
      out.coefficients = x;
    }
  }
  return out;
}

double violation_sigma(double value, double std) {
  if (!(std > 0.0)) throw std::invalid_argument("violation_sigma: standard deviation must be positive");
  return (value - kCglmpLocalBound) / std;
}

std::vector<NamedMetric> standard_metric_set(int dim) {
  auto ctx = std::make_shared<const CGLMPContext>(cglmp_context(dim));
  const PureState beta = maximally_entangled(dim);
  std::vector<NamedMetric> out;
  out.push_back({"fidelity", [beta](const DensityMatrix& r) { return fidelity_to_pure(rephase(r), beta); }});
  out.push_back({"purity", [](const DensityMatrix& r) { return purity(r); }});
  out.push_back({"schmidt_number", [](const DensityMatrix& r) { return schmidt_number(r); }});
  for (int i = 0; i < dim; ++i) {
    for (int j = i + 1; j < dim; ++j) {
      out.push_back({"concurrence_" + std::to_string(i + 1) + std::to_string(j + 1),
                     [i, j](const DensityMatrix& r) { return subspace_concurrence(r, i, j); }});
    }
  }
  out.push_back({"cglmp_I" + std::to_string(dim), [ctx](const DensityMatrix& r) { return cglmp_value(rephase(r), *ctx); }});
  return out;
}

}  // namespace mcfent
