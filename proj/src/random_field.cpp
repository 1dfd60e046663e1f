#include "msinv/random_field.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>

#include "msinv/errors.hpp"

namespace msinv {

double CovarianceKernel::operator()(const Eigen::Vector2d& a, const Eigen::Vector2d& b) const {
  const double d1 = std::abs(a.x() - b.x());
  const double d2 = std::abs(a.y() - b.y());
  switch (form) {
    case KernelForm::SquaredExponential:
      return variance * std::exp(-d1 * d1 / (2.0 * l1 * l1) - d2 * d2 / (2.0 * l2 * l2));
    case KernelForm::Exponential:
      return variance * std::exp(-d1 / l1 - d2 / l2);
  }
  return 0.0;
}

Mat covariance_matrix(const std::vector<Eigen::Vector2d>& points, const CovarianceKernel& kernel) {
  if (points.empty()) throw std::invalid_argument("covariance_matrix: no points");
  if (!(kernel.variance > 0.0) || !(kernel.l1 > 0.0) || !(kernel.l2 > 0.0))
    throw std::invalid_argument("covariance_matrix: kernel parameters must be positive");
  const int m = static_cast<int>(points.size());
  Mat C(m, m);
  for (int i = 0; i < m; ++i) {
    C(i, i) = kernel.variance;
    for (int j = 0; j < i; ++j) {
      const double v = kernel(points[i], points[j]);
      C(i, j) = v;
      C(j, i) = v;
    }
  }
  return C;
}

KleModel kle_truncate(const Mat& covariance, double e_target) {
  if (covariance.rows() != covariance.cols())
    throw std::invalid_argument("kle_truncate: covariance must be square");
  if (!(e_target > 0.0) || e_target > 1.0)
    throw std::invalid_argument("kle_truncate: energy target must lie in (0, 1]");
  const int m = static_cast<int>(covariance.rows());
  Eigen::SelfAdjointEigenSolver<Mat> es(covariance);
  if (es.info() != Eigen::Success) throw NumericalError("kle_truncate: eigensolver failed");

  Vec values = es.eigenvalues().reverse();
  Mat vectors = es.eigenvectors().rowwise().reverse();
  const double top = values.size() > 0 ? values[0] : 0.0;
  if (!(top > 0.0)) throw std::invalid_argument("kle_truncate: covariance has no positive energy");
  for (int i = 0; i < m; ++i) {
    if (values[i] < -1e-10 * top)
      throw std::invalid_argument("kle_truncate: covariance is not positive semidefinite");
    if (values[i] < 0.0) values[i] = 0.0;
  }

  const double total = values.sum();
  const double target = e_target * total;
  double cum = 0.0;
  int m0 = m;
  for (int i = 0; i < m; ++i) {
    cum += values[i];
    if (cum >= target * (1.0 - 1e-12)) {
      m0 = i + 1;
      break;
    }
  }

  KleModel model;
  model.eigenvalues = values.head(m0);
  model.eigenvectors = vectors.leftCols(m0);
  for (int c = 0; c < m0; ++c) {
    int at = 0;
    model.eigenvectors.col(c).cwiseAbs().maxCoeff(&at);
    if (model.eigenvectors(at, c) < 0.0) model.eigenvectors.col(c) = -model.eigenvectors.col(c);
  }
  model.map = model.eigenvectors * model.eigenvalues.cwiseSqrt().asDiagonal();
  model.mean = Vec::Zero(m);
  model.energy_ratio = values.head(m0).sum() / total;
  return model;
}

MrfPrecision mrf_precision(int rows, int cols) {
  if (rows < 1 || cols < 1) throw std::invalid_argument("mrf_precision: lattice must be nonempty");
  const int m = rows * cols;
  std::vector<Eigen::Triplet<double>> ts;
  ts.reserve(5 * m);
  auto idx = [cols](int r, int c) { return r * cols + c; };
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      int neighbors = 0;
      const int dr[4] = {1, -1, 0, 0};
      const int dc[4] = {0, 0, 1, -1};
      for (int q = 0; q < 4; ++q) {
        const int r2 = r + dr[q], c2 = c + dc[q];
        if (r2 < 0 || r2 >= rows || c2 < 0 || c2 >= cols) continue;
        ++neighbors;
        ts.emplace_back(idx(r, c), idx(r2, c2), -1.0);
      }
      ts.emplace_back(idx(r, c), idx(r, c), static_cast<double>(neighbors));
    }
  }
  MrfPrecision out;
  out.rows = rows;
  out.cols = cols;
  out.W.resize(m, m);
  out.W.setFromTriplets(ts.begin(), ts.end());
  return out;
}

Mat reduce_quadratic(const SpMat& W, const Mat& map) {
  if (W.cols() != map.rows())
    throw std::invalid_argument("reduce_quadratic: dimension mismatch between W and map");
  Mat WB = W * map;
  return map.transpose() * WB;
}

std::vector<Eigen::Vector2d> lattice_points(int n1, int n2, const Rect& domain) {
  if (n1 < 1 || n2 < 1) throw std::invalid_argument("lattice_points: counts must be >= 1");
  std::vector<Eigen::Vector2d> pts;
  pts.reserve(static_cast<std::size_t>(n1) * n2);
  for (int j = 0; j < n2; ++j) {
    const double y = n2 == 1 ? domain.y0 : domain.y0 + domain.height() * j / (n2 - 1);
    for (int i = 0; i < n1; ++i) {
      const double x = n1 == 1 ? domain.x0 : domain.x0 + domain.width() * i / (n1 - 1);
      pts.emplace_back(x, y);
    }
  }
  return pts;
}

}  // namespace msinv
