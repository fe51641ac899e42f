#pragma once

#include <complex>
#include <numbers>

#include <Eigen/Dense>

namespace mcfent {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kSpeedOfLight = 299792458.0;  // m/s

// Index of the two-photon basis state |i>_1 |j>_2, 0-based, row-major.
constexpr int pair_index(int i, int j, int dim) { return i * dim + j; }

}  // namespace mcfent
