#pragma once

#include <span>
#include <vector>

#include "mcfent/types.hpp"

namespace mcfent {

/// Pure two-qudit state over |i>_1 |j>_2, amplitude index i*dim + j.
class PureState {
 public:
  /// Normalizes `amplitudes`; throws std::invalid_argument for a zero vector
  /// or a length that is not a perfect square of `dim`.
  PureState(int dim, CVector amplitudes);

  int dim() const { return dim_; }
  const CVector& amplitudes() const { return amplitudes_; }
  cplx amplitude(int i, int j) const { return amplitudes_(pair_index(i, j, dim_)); }

  /// Amplitudes reshaped to a dim x dim coefficient matrix C(i, j).
  CMatrix coefficient_matrix() const;

 private:
  int dim_;
  CVector amplitudes_;
};

/// Hermitian, unit-trace, positive-semidefinite d^2 x d^2 operator.
///
/// The constructor checks all three invariants (1e-10 Hermiticity and trace,
/// -1e-9 smallest eigenvalue) and throws std::invalid_argument otherwise.
/// The stored matrix is exactly Hermitian: the anti-Hermitian residue that
/// passed the check is dropped.
class DensityMatrix {
 public:
  static constexpr double kHermitianTol = 1e-10;
  static constexpr double kTraceTol = 1e-10;
  static constexpr double kPsdTol = -1e-9;

  DensityMatrix(int dim, CMatrix matrix);

  /// The maximally mixed state I / d^2.
  static DensityMatrix maximally_mixed(int dim);

  int dim() const { return dim_; }
  int size() const { return dim_ * dim_; }
  const CMatrix& matrix() const { return matrix_; }
  cplx operator()(int row, int col) const { return matrix_(row, col); }

  /// Eigenvalues in ascending order.
  RVector eigenvalues() const;

 private:
  int dim_;
  CMatrix matrix_;
};

struct SchmidtDecomposition {
  RVector coefficients;  // descending, non-negative
  CMatrix left;          // columns: photon-1 basis vectors
  CMatrix right;         // columns: photon-2 basis vectors
};

enum class Subsystem { first = 1, second = 2 };

enum class SchmidtMethod {
  inverse_reduced_purity,  // K = 1 / Tr(rho_r^2), the default
  dominant_eigenvector,    // Schmidt coefficients of the leading eigenvector of rho
};

/// Sum_i coeffs[i] |i>|i>, normalized.
PureState make_correlated_state(std::span<const cplx> coeffs);
PureState make_correlated_state(std::span<const double> coeffs);

/// |beta> = (1/sqrt(d)) Sum_i |i>|i>.
PureState maximally_entangled(int dim);

DensityMatrix density_from_pure(const PureState& psi);

/// Reduced state of one photon. `subsystem` names the photon that is KEPT
/// after tracing out the other one.
CMatrix partial_trace(const DensityMatrix& rho, Subsystem keep);

SchmidtDecomposition schmidt_decompose(const PureState& psi);

double schmidt_number(const DensityMatrix& rho,
                      SchmidtMethod method = SchmidtMethod::inverse_reduced_purity);

/// sqrt(<phi|rho|phi>), equal to the Uhlmann fidelity for a pure target.
double fidelity_to_pure(const DensityMatrix& rho, const PureState& phi);

double purity(const DensityMatrix& rho);

/// Phases theta_k = arg <0,0|rho|k,k> applied as diag(e^{i theta_k}) on
/// photon 1, which makes every <0,0|rho|k,k> real and non-negative.
/// Elements with modulus below 1e-12 leave theta_k = 0.
DensityMatrix rephase(const DensityMatrix& rho);

/// The photon-1 phases used by rephase(), theta_0 = 0.
std::vector<double> rephase_angles(const DensityMatrix& rho);

/// (U1 (x) U2) rho (U1 (x) U2)^dagger.
DensityMatrix apply_local_unitary(const DensityMatrix& rho, const CMatrix& u1, const CMatrix& u2);

double trace_distance(const CMatrix& a, const CMatrix& b);

}  // namespace mcfent
