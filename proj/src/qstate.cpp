#include "mcfent/qstate.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include <unsupported/Eigen/KroneckerProduct>

namespace mcfent {

namespace {

int checked_dim_from_size(int dim, Eigen::Index size) {
  if (dim < 2) throw std::invalid_argument("dimension must be at least 2, got " + std::to_string(dim));
  if (size != static_cast<Eigen::Index>(dim) * dim) {
    throw std::invalid_argument("expected " + std::to_string(dim * dim) + " entries for dim " +
                                std::to_string(dim) + ", got " + std::to_string(size));
  }
  return dim;
}

}  // namespace

PureState::PureState(int dim, CVector amplitudes)
    : dim_(checked_dim_from_size(dim, amplitudes.size())), amplitudes_(std::move(amplitudes)) {
  const double norm = amplitudes_.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) throw std::invalid_argument("state vector has zero or non-finite norm");
  amplitudes_ /= norm;
}

CMatrix PureState::coefficient_matrix() const {
  CMatrix c(dim_, dim_);
  for (int i = 0; i < dim_; ++i)
    for (int j = 0; j < dim_; ++j) c(i, j) = amplitude(i, j);
  return c;
}

DensityMatrix::DensityMatrix(int dim, CMatrix matrix) : dim_(dim) {
  if (dim < 2) throw std::invalid_argument("dimension must be at least 2");
  const Eigen::Index n = static_cast<Eigen::Index>(dim) * dim;
  if (matrix.rows() != n || matrix.cols() != n) {
    throw std::invalid_argument("density matrix must be " + std::to_string(n) + "x" + std::to_string(n));
  }
  if (!matrix.allFinite()) throw std::invalid_argument("density matrix has non-finite entries");
  const double herm = (matrix - matrix.adjoint()).cwiseAbs().maxCoeff();
  if (herm > kHermitianTol) {
    throw std::invalid_argument("density matrix is not Hermitian (max deviation " + std::to_string(herm) + ")");
  }
  matrix_ = 0.5 * (matrix + matrix.adjoint());
  const double tr = matrix_.trace().real();
  if (std::abs(tr - 1.0) > kTraceTol) {
    throw std::invalid_argument("density matrix trace is " + std::to_string(tr) + ", expected 1");
  }
  const double min_eig = eigenvalues()(0);
  if (min_eig < kPsdTol) {
    throw std::invalid_argument("density matrix is not positive semidefinite (min eigenvalue " +
                                std::to_string(min_eig) + ")");
  }
}

DensityMatrix DensityMatrix::maximally_mixed(int dim) {
  const int n = dim * dim;
  return DensityMatrix(dim, CMatrix::Identity(n, n) / static_cast<double>(n));
}

RVector DensityMatrix::eigenvalues() const {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(matrix_, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

PureState make_correlated_state(std::span<const cplx> coeffs) {
  const int d = static_cast<int>(coeffs.size());
  if (d < 2) throw std::invalid_argument("need at least two coefficients");
  CVector amps = CVector::Zero(static_cast<Eigen::Index>(d) * d);
  for (int i = 0; i < d; ++i) amps(pair_index(i, i, d)) = coeffs[i];
  if (amps.norm() == 0.0) throw std::invalid_argument("correlated-state coefficients are all zero");
  return PureState(d, std::move(amps));
}

PureState make_correlated_state(std::span<const double> coeffs) {
  std::vector<cplx> c(coeffs.begin(), coeffs.end());
  return make_correlated_state(std::span<const cplx>(c));
}

PureState maximally_entangled(int dim) {
  if (dim < 2) throw std::invalid_argument("dimension must be at least 2");
  std::vector<cplx> ones(dim, cplx(1.0, 0.0));
  return make_correlated_state(std::span<const cplx>(ones));
}

DensityMatrix density_from_pure(const PureState& psi) {
  return DensityMatrix(psi.dim(), psi.amplitudes() * psi.amplitudes().adjoint());
}

CMatrix partial_trace(const DensityMatrix& rho, Subsystem keep) {
  const int d = rho.dim();
  CMatrix out = CMatrix::Zero(d, d);
  switch (keep) {
    case Subsystem::first:
      for (int i = 0; i < d; ++i)
        for (int k = 0; k < d; ++k)
          for (int j = 0; j < d; ++j) out(i, k) += rho(pair_index(i, j, d), pair_index(k, j, d));
      break;
    case Subsystem::second:
      for (int j = 0; j < d; ++j)
        for (int l = 0; l < d; ++l)
          for (int i = 0; i < d; ++i) out(j, l) += rho(pair_index(i, j, d), pair_index(i, l, d));
      break;
    default:
      throw std::invalid_argument("subsystem must be 1 or 2");
  }
  return out;
}

SchmidtDecomposition schmidt_decompose(const PureState& psi) {
  Eigen::JacobiSVD<CMatrix> svd(psi.coefficient_matrix(), Eigen::ComputeFullU | Eigen::ComputeFullV);
  // psi = sum_k s_k u_k (x) conj(v_k)
  return {svd.singularValues(), svd.matrixU(), svd.matrixV().conjugate()};
}

double schmidt_number(const DensityMatrix& rho, SchmidtMethod method) {
  if (method == SchmidtMethod::inverse_reduced_purity) {
    const CMatrix reduced = partial_trace(rho, Subsystem::first);
    return 1.0 / (reduced * reduced).trace().real();
  }
  Eigen::SelfAdjointEigenSolver<CMatrix> es(rho.matrix());
  const Eigen::Index top = es.eigenvalues().size() - 1;
  const PureState lead(rho.dim(), es.eigenvectors().col(top));
  const RVector lambda = schmidt_decompose(lead).coefficients.array().square();
  return lambda.sum() * lambda.sum() / lambda.array().square().sum();
}

double fidelity_to_pure(const DensityMatrix& rho, const PureState& phi) {
  if (rho.dim() != phi.dim()) throw std::invalid_argument("fidelity: dimension mismatch");
  const double overlap = (phi.amplitudes().adjoint() * rho.matrix() * phi.amplitudes())(0, 0).real();
  return std::sqrt(std::clamp(overlap, 0.0, 1.0));
}

double purity(const DensityMatrix& rho) {
  // Tr(rho^2) = sum |rho_ij|^2 for Hermitian rho
  return rho.matrix().cwiseAbs2().sum();
}

std::vector<double> rephase_angles(const DensityMatrix& rho) {
  const int d = rho.dim();
  std::vector<double> theta(d, 0.0);
  for (int k = 1; k < d; ++k) {
    const cplx element = rho(pair_index(0, 0, d), pair_index(k, k, d));
    if (std::abs(element) >= 1e-12) theta[k] = std::arg(element);
  }
  return theta;
}

DensityMatrix rephase(const DensityMatrix& rho) {
  const int d = rho.dim();
  const std::vector<double> theta = rephase_angles(rho);
  CMatrix m = CMatrix::Zero(d, d);
  for (int k = 0; k < d; ++k) m(k, k) = std::polar(1.0, theta[k]);
  return apply_local_unitary(rho, m, CMatrix::Identity(d, d));
}

DensityMatrix apply_local_unitary(const DensityMatrix& rho, const CMatrix& u1, const CMatrix& u2) {
  const int d = rho.dim();
  if (u1.rows() != d || u1.cols() != d || u2.rows() != d || u2.cols() != d) {
    throw std::invalid_argument("local unitary dimension mismatch");
  }
  const CMatrix u = Eigen::kroneckerProduct(u1, u2).eval();
  CMatrix out = u * rho.matrix() * u.adjoint();
  return DensityMatrix(d, std::move(out));
}

double trace_distance(const CMatrix& a, const CMatrix& b) {
  const CMatrix diff = a - b;
  Eigen::SelfAdjointEigenSolver<CMatrix> es(0.5 * (diff + diff.adjoint()), Eigen::EigenvaluesOnly);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

}  // namespace mcfent
