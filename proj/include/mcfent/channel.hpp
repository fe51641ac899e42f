#pragma once

#include <vector>

#include "mcfent/qstate.hpp"
#include "mcfent/types.hpp"

namespace mcfent {

/// Transport noise of a pair of multi-core fibers.
///
/// Photon 1 travels through MCF1 (length_1), photon 2 through MCF2 (length_2).
/// All lengths and wavelengths are in meters, phases in radians, the rotation
/// of MCF1 in degrees.
struct ChannelParams {
  int dim = 4;
  std::vector<double> group_indices;
  double length_1 = 0.30;
  double length_2 = 0.30;
  double center_wavelength = 1560e-9;
  double fwhm_bandwidth = 8.3e-9;
  double crosstalk_fraction = 0.0;
  RMatrix residual_pair_visibility;  // symmetric, unit diagonal
  std::vector<double> phase_biases;
  int rotation_1 = 0;

  /// Noise-free channel: equal group indices, no crosstalk, unit visibilities.
  static ChannelParams ideal(int dim = 4);

  double length_mismatch() const { return length_1 - length_2; }
  double group_index_spread() const;

  /// Throws std::invalid_argument on size, range or unit violations, and when
  /// the element-wise square root of residual_pair_visibility is not
  /// positive semidefinite (required for apply_channel to stay physical).
  void validate() const;
};

/// Group-index spread quoted for the vendor four-core fiber.
inline constexpr double kPaperGroupIndexSpread = 6.5e-4;

/// Optical frequency FWHM c * dlambda / lambda^2, in Hz.
double spectral_fwhm_hz(const ChannelParams& params);

/// |g(tau)| for a Gaussian power spectrum of the given FWHM.
double gaussian_coherence(double delay_s, double fwhm_hz);

/// Cyclic relabeling of the cores of a fiber rotated about its axis, for cores
/// numbered sequentially around a circle. perm[i] is the core that core i
/// lands on. `angle_deg` must be a multiple of 360/dim (90 for four cores).
std::vector<int> rotation_permutation(int angle_deg, int dim = 4);

/// Differential two-photon delay between the correlated terms that start in
/// cores i and j, including the relabeling of MCF1 by its rotation.
double differential_delay(const ChannelParams& params, int i, int j);

/// Coherence V_ij retained between |i,i> and |j,j> after transport.
double pair_coherence(const ChannelParams& params, int i, int j);

/// Transport of a source state through both fibers:
///  1. residual pair dephasing (element-wise, geometric-mean pair factors)
///  2. relabeling of photon-1 cores by rotation_1
///  3. static phase_biases on photon 1
///  4. Gaussian group-delay dephasing of every two-photon coherence
///  5. incoherent crosstalk into the d(d-1) non-matching core pairs
DensityMatrix apply_channel(const DensityMatrix& rho, const ChannelParams& params);

/// Splice positions k * L / d, k = 1..d-1, for the cyclic core permutator.
std::vector<double> cyclic_compensator_plan(int dim, double total_length);

/// Group delay (seconds) accumulated by the mode launched in each core, when
/// the fiber is spliced at `splices` (ascending, meters) with a one-step cyclic
/// core shift core k -> core k+1 at each splice.
std::vector<double> mode_group_delays(const std::vector<double>& group_indices, double total_length,
                                      const std::vector<double>& splices);

}  // namespace mcfent
