#pragma once

#include <array>
#include <vector>

#include "mcfent/qstate.hpp"
#include "mcfent/tomography.hpp"

namespace mcfent {

inline constexpr double kCglmpLocalBound = 2.0;
/// Maximal CGLMP value for d = 4, reached by a non-maximally entangled state.
inline constexpr double kCglmpMaxD4 = 2.9727;
/// CGLMP value of the maximally entangled ququart pair.
inline constexpr double kCglmpBetaD4 = 2.8962;

/// Wootters concurrence of rho projected onto span{|ii>, |ij>, |ji>, |jj>}
/// and renormalized by the projected trace. Zero when that trace < 1e-10.
double subspace_concurrence(const DensityMatrix& rho, int i, int j);

/// Wootters concurrence of a 4x4 two-qubit density matrix.
double wootters_concurrence(const CMatrix& rho2);

struct CGLMPContext {
  int dim = 0;
  CMatrix bell_operator;  // d^2 x d^2, Tr(S rho) = I_d(rho)
  // A1, A2, B1, B2; column k is the eigenvector of outcome k
  std::array<CMatrix, 4> measurement_bases;
};

CGLMPContext cglmp_context(int dim);

/// Tr(S rho). Throws std::logic_error when the imaginary residue exceeds 1e-10.
double cglmp_value(const DensityMatrix& rho, const CGLMPContext& ctx);

struct CglmpOptimum {
  std::vector<double> coefficients;  // unit norm, non-negative
  double value = 0.0;
  double grid_resolution = 0.0;
  long grid_points = 0;
  int refinement_sweeps = 0;
  int starts = 0;
};

/// Maximizes I_d over correlated states Sum_i c_i |ii> with real c_i >= 0:
/// scan of the weight simplex c_i^2 at 0.01 resolution (coarsened for large
/// d to bound the grid size), then coordinate ascent from the best grid points.
CglmpOptimum optimize_cglmp_state(int dim);

/// (value - 2) / std.
double violation_sigma(double value, double std);

/// Fidelity to |beta>, purity, Schmidt number, the d(d-1)/2 subspace
/// concurrences and I_d, all evaluated on rephase(rho).
std::vector<NamedMetric> standard_metric_set(int dim);

}  // namespace mcfent
