#pragma once

#include <Eigen/Cholesky>

#include <utility>
#include <vector>

#include "msinv/fem.hpp"

namespace msinv {

/// Rectangular patch of fine cells (half-open cell ranges) with its closed
/// node rectangle. Coarse neighborhoods and coarse elements are both of
/// this form on a nested structured mesh.
struct FinePatch {
  int cx0 = 0, cx1 = 0;  // fine-cell i range [cx0, cx1)
  int cy0 = 0, cy1 = 0;  // fine-cell j range [cy0, cy1)

  int cells_x() const { return cx1 - cx0; }
  int cells_y() const { return cy1 - cy0; }
  int n_cells() const { return cells_x() * cells_y(); }
  int nodes_x() const { return cells_x() + 1; }
  int nodes_y() const { return cells_y() + 1; }
  int n_nodes() const { return nodes_x() * nodes_y(); }

  // local index of fine node (gi, gj); caller guarantees membership
  int local_node(int gi, int gj) const { return (gj - cy0) * nodes_x() + (gi - cx0); }
  std::vector<int> fine_nodes(const StructuredGrid& fine) const;
  std::vector<int> fine_cells(const StructuredGrid& fine) const;
};

/// Coarse mesh nested in a fine grid. Neighborhood omega_i of coarse node i
/// is the union of coarse cells touching it (4 interior, 2 edge, 1 corner).
struct CoarseGrid {
  StructuredGrid fine;
  int Nx = 0, Ny = 0;  // coarse cells per axis
  int rx = 0, ry = 0;  // refinement factors

  int n_coarse_nodes() const { return (Nx + 1) * (Ny + 1); }
  int n_coarse_cells() const { return Nx * Ny; }
  int coarse_node_index(int I, int J) const { return J * (Nx + 1) + I; }

  FinePatch coarse_cell_patch(int I, int J) const;
  FinePatch neighborhood(int coarse_node) const;
};

CoarseGrid build_coarse_grid(const StructuredGrid& fine, int Nx, int Ny);

/// First eigenpairs of the local Neumann spectral problem on one
/// neighborhood: k-stiffness against k-weighted mass, eigenvalues ascending,
/// eigenvectors S-orthonormal with the largest-magnitude entry positive.
struct LocalSpectralResult {
  Vec eigenvalues;
  Mat eigenvectors;            // local nodes x m_basis
  std::vector<int> fine_nodes;  // global ids of the local rows
};

LocalSpectralResult local_spectral_basis(const CoarseGrid& cg, int coarse_node,
                                         const CellField& k, int m_basis);

/// k-harmonic partition of unity: per coarse element, the discrete
/// -div(k grad chi) = 0 solve with bilinear hat boundary data. Column i is
/// chi_i, supported on omega_i; columns sum to one at every fine node.
SpMat partition_of_unity(const CoarseGrid& cg, const CellField& k);

struct MultiscaleBasis {
  SpMat R;                          // n_fine_nodes x M_v
  std::vector<int> basis_per_node;  // M_i per coarse node
  std::vector<Vec> eigenvalues;     // retained eigenvalues per coarse node
  std::vector<int> column_node;     // owning coarse node of each column
  int total() const { return static_cast<int>(R.cols()); }
};

/// Columns are chi_i (.) psi_il, indexed node-major then eigenindex.
MultiscaleBasis build_basis(const CoarseGrid& cg, const CellField& k,
                            const std::vector<int>& basis_per_node);
MultiscaleBasis build_basis(const CoarseGrid& cg, const CellField& k, int basis_per_node);

/// Galerkin-reduced backward-Euler model. The reduced operators and the
/// factorization of (B~ + dt K~) are built once; solves only touch the
/// reduced dimensions plus one projection of the load per level.
class ReducedModel {
 public:
  ReducedModel(SpMat R, const SpMat& B, const SpMat& K, const TimeGrid& time);

  /// Coarse coefficient trajectory; initial coefficients from B-projection.
  Mat solve_coefficients(const Vec& u0_fine, const std::function<Vec(double)>& fine_load) const;
  Mat solve_coefficients(const Vec& u0_fine, const Vec& fine_load) const;

  Vec reconstruct(const Mat& coeffs, int level) const;
  Trajectory reconstruct_all(const Mat& coeffs) const;

  const SpMat& basis() const { return R_; }
  const TimeGrid& time() const { return time_; }
  int reduced_dim() const { return static_cast<int>(R_.cols()); }

 private:
  SpMat R_, Rt_;
  Mat reduced_mass_;
  Eigen::LLT<Mat> mass_chol_;
  Eigen::LLT<Mat> system_chol_;
  TimeGrid time_;
};

/// One-call variant: reduced trajectory plus its fine reconstruction.
std::pair<Mat, Trajectory> solve_forward_reduced(const MultiscaleBasis& basis, const SpMat& B,
                                                 const SpMat& K,
                                                 const std::function<Vec(double)>& load,
                                                 const Vec& u0, const TimeGrid& time);

}  // namespace msinv
