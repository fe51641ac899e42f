#include "mcfent/channel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mcfent {

namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw std::invalid_argument("channel: " + message);
}

RMatrix residual_or_unit(const ChannelParams& p) {
  if (p.residual_pair_visibility.size() == 0) return RMatrix::Ones(p.dim, p.dim);
  return p.residual_pair_visibility;
}

// Two-photon group delay of |a>_1 |b>_2 in physical core labels.
double two_photon_delay(const ChannelParams& p, int a, int b) {
  return (p.group_indices[a] * p.length_1 - p.group_indices[b] * p.length_2) / kSpeedOfLight;
}

}  // namespace

ChannelParams ChannelParams::ideal(int dim) {
  ChannelParams p;
  p.dim = dim;
  p.group_indices.assign(dim, 1.468);
  p.residual_pair_visibility = RMatrix::Ones(dim, dim);
  p.phase_biases.assign(dim, 0.0);
  return p;
}

double ChannelParams::group_index_spread() const {
  if (group_indices.empty()) return 0.0;
  const auto [lo, hi] = std::minmax_element(group_indices.begin(), group_indices.end());
  return *hi - *lo;
}

void ChannelParams::validate() const {
  require(dim >= 2, "dim must be at least 2");
  require(static_cast<int>(group_indices.size()) == dim, "group_indices must have dim entries");
  for (double n : group_indices) require(n >= 1.0 && n <= 4.0, "group index outside [1, 4]");
  require(length_1 >= 0.0 && length_2 >= 0.0, "fiber lengths must be non-negative");
  require(length_1 < 1e6 && length_2 < 1e6, "fiber length above 1000 km; lengths are in meters");
  require(center_wavelength > 1e-7 && center_wavelength < 1e-5,
          "center wavelength must be given in meters (100 nm .. 10 um)");
  require(fwhm_bandwidth > 0.0 && fwhm_bandwidth < center_wavelength,
          "bandwidth must be positive, in meters, and below the center wavelength");
  require(crosstalk_fraction >= 0.0 && crosstalk_fraction <= 1.0, "crosstalk fraction outside [0, 1]");
  require(static_cast<int>(phase_biases.size()) == dim, "phase_biases must have dim entries");
  require(360 % dim == 0 && rotation_1 % (360 / dim) == 0,
          "rotation_1 must be a multiple of " + std::to_string(360 / std::max(dim, 1)) + " degrees");

  const RMatrix v = residual_or_unit(*this);
  require(v.rows() == dim && v.cols() == dim, "residual_pair_visibility must be dim x dim");
  for (int i = 0; i < dim; ++i) {
    require(std::abs(v(i, i) - 1.0) < 1e-12, "residual_pair_visibility diagonal must be 1");
    for (int j = 0; j < dim; ++j) {
      require(v(i, j) >= 0.0 && v(i, j) <= 1.0, "residual visibility outside [0, 1]");
      require(std::abs(v(i, j) - v(j, i)) < 1e-12, "residual_pair_visibility must be symmetric");
    }
  }
  Eigen::SelfAdjointEigenSolver<RMatrix> es(v.cwiseSqrt().eval(), Eigen::EigenvaluesOnly);
  require(es.eigenvalues()(0) >= -1e-12,
          "element-wise square root of residual_pair_visibility is not positive semidefinite");
}

double spectral_fwhm_hz(const ChannelParams& params) {
  return kSpeedOfLight * params.fwhm_bandwidth / (params.center_wavelength * params.center_wavelength);
}

double gaussian_coherence(double delay_s, double fwhm_hz) {
  const double x = kPi * fwhm_hz * delay_s;
  return std::exp(-x * x / (4.0 * std::log(2.0)));
}

std::vector<int> rotation_permutation(int angle_deg, int dim) {
  if (dim < 2 || 360 % dim != 0) throw std::invalid_argument("rotation: unsupported core count");
  const int step = 360 / dim;
  if (angle_deg % step != 0) {
    throw std::invalid_argument("rotation angle " + std::to_string(angle_deg) + " is not a multiple of " +
                                std::to_string(step) + " degrees");
  }
  const int shift = ((angle_deg / step) % dim + dim) % dim;
  std::vector<int> perm(dim);
  for (int i = 0; i < dim; ++i) perm[i] = (i + shift) % dim;
  return perm;
}

double differential_delay(const ChannelParams& params, int i, int j) {
  const std::vector<int> perm = rotation_permutation(params.rotation_1, params.dim);
  return std::abs(two_photon_delay(params, perm[i], i) - two_photon_delay(params, perm[j], j));
}

double pair_coherence(const ChannelParams& params, int i, int j) {
  if (i == j) throw std::invalid_argument("pair_coherence: cores must differ");
  if (i < 0 || j < 0 || i >= params.dim || j >= params.dim) throw std::invalid_argument("pair_coherence: core out of range");
  const RMatrix v = residual_or_unit(params);
  return v(i, j) * gaussian_coherence(differential_delay(params, i, j), spectral_fwhm_hz(params));
}

DensityMatrix apply_channel(const DensityMatrix& rho, const ChannelParams& params) {
  params.validate();
  const int d = params.dim;
  if (rho.dim() != d) throw std::invalid_argument("apply_channel: state and channel dimensions differ");
  const int n = d * d;

  // 1. residual dephasing, W = sqrt(V) element-wise, factor W_ik W_jl
  const RMatrix w = residual_or_unit(params).cwiseSqrt();
  CMatrix m = rho.matrix();
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) m(r, c) *= w(r / d, c / d) * w(r % d, c % d);

  // 2-3. photon-1 relabeling followed by the static phase biases
  const std::vector<int> perm = rotation_permutation(params.rotation_1, d);
  CMatrix u1 = CMatrix::Zero(d, d);
  for (int i = 0; i < d; ++i) u1(perm[i], i) = std::polar(1.0, params.phase_biases[perm[i]]);
  CMatrix moved = CMatrix::Zero(n, n);
  for (int r = 0; r < n; ++r) {
    const int rr = pair_index(perm[r / d], r % d, d);
    const cplx pr = u1(perm[r / d], r / d);
    for (int c = 0; c < n; ++c) {
      const int cc = pair_index(perm[c / d], c % d, d);
      moved(rr, cc) = pr * m(r, c) * std::conj(u1(perm[c / d], c / d));
    }
  }

  // 4. group-delay dephasing, Gaussian kernel in the two-photon delay
  const double fwhm = spectral_fwhm_hz(params);
  std::vector<double> delay(n);
  for (int r = 0; r < n; ++r) delay[r] = two_photon_delay(params, r / d, r % d);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c)
      if (r != c) moved(r, c) *= gaussian_coherence(delay[r] - delay[c], fwhm);

  // 5. crosstalk
  const double eps = params.crosstalk_fraction;
  CMatrix out = (1.0 - eps) * moved;
  const double share = eps / static_cast<double>(d * (d - 1));
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (i != j) out(pair_index(i, j, d), pair_index(i, j, d)) += share;

  return DensityMatrix(d, std::move(out));
}

std::vector<double> cyclic_compensator_plan(int dim, double total_length) {
  if (dim < 2) throw std::invalid_argument("compensator: dim must be at least 2");
  if (!(total_length > 0.0)) throw std::invalid_argument("compensator: total length must be positive");
  std::vector<double> splices;
  for (int k = 1; k < dim; ++k) splices.push_back(total_length * k / dim);
  return splices;
}

std::vector<double> mode_group_delays(const std::vector<double>& group_indices, double total_length,
                                      const std::vector<double>& splices) {
  const int d = static_cast<int>(group_indices.size());
  if (d < 1) throw std::invalid_argument("mode delays: no cores");
  std::vector<double> bounds{0.0};
  for (double s : splices) {
    if (s <= bounds.back() || s >= total_length) throw std::invalid_argument("mode delays: splices must be ascending inside the fiber");
    bounds.push_back(s);
  }
  bounds.push_back(total_length);
  std::vector<double> delays(d, 0.0);
  for (int k = 0; k < d; ++k) {
    for (std::size_t seg = 0; seg + 1 < bounds.size(); ++seg) {
      const int core = static_cast<int>((k + seg) % d);
      delays[k] += group_indices[core] * (bounds[seg + 1] - bounds[seg]) / kSpeedOfLight;
    }
  }
  return delays;
}

}  // namespace mcfent
