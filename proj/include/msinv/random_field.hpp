#pragma once

#include <vector>

#include "msinv/fem.hpp"

namespace msinv {

enum class KernelForm { SquaredExponential, Exponential };

/// Separable stationary covariance with per-axis correlation lengths.
/// SquaredExponential: s^2 exp(-dx1^2/(2 l1^2) - dx2^2/(2 l2^2)).
/// Exponential:        s^2 exp(-|dx1|/l1 - |dx2|/l2).
struct CovarianceKernel {
  double variance = 1.0;
  double l1 = 1.0, l2 = 1.0;
  KernelForm form = KernelForm::SquaredExponential;

  double operator()(const Eigen::Vector2d& a, const Eigen::Vector2d& b) const;
};

Mat covariance_matrix(const std::vector<Eigen::Vector2d>& points, const CovarianceKernel& kernel);

/// Truncated KLE of a covariance matrix: descending eigenvalues, orthonormal
/// eigenvectors (largest-magnitude entry positive), coefficient map
/// B = [sqrt(z1) v1, ...], and the achieved energy ratio.
struct KleModel {
  Vec eigenvalues;   // size m0, descending
  Mat eigenvectors;  // m x m0
  Mat map;           // m x m0
  Vec mean;          // size m, zero by default
  double energy_ratio = 0.0;

  int truncation() const { return static_cast<int>(eigenvalues.size()); }
  Vec field(const Vec& eta) const { return mean + map * eta; }
};

/// Smallest truncation reaching the energy target. Eigenvalues slightly
/// negative from roundoff (>= -1e-10 * max) are clipped to zero; anything
/// more negative rejects the matrix as non-PSD.
KleModel kle_truncate(const Mat& covariance, double e_target);

/// 4-neighbor lattice precision: diagonal = neighbor count, -1 on adjacent
/// pairs. Rows sum to zero; annihilates constants.
struct MrfPrecision {
  SpMat W;
  int rows = 0, cols = 0;
};

MrfPrecision mrf_precision(int rows, int cols);

/// Reduced quadratic form B^T W B.
Mat reduce_quadratic(const SpMat& W, const Mat& map);

/// Lattice points of an n1 x n2 node grid over a rectangle, row-major from
/// the second coordinate (matches StructuredGrid node ordering).
std::vector<Eigen::Vector2d> lattice_points(int n1, int n2, const Rect& domain = {});

}  // namespace msinv
