#include "msinv/gmsfem.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <stdexcept>

#include "msinv/errors.hpp"

namespace msinv {

std::vector<int> FinePatch::fine_nodes(const StructuredGrid& fine) const {
  std::vector<int> out;
  out.reserve(n_nodes());
  for (int j = cy0; j <= cy1; ++j)
    for (int i = cx0; i <= cx1; ++i) out.push_back(fine.node_index(i, j));
  return out;
}

std::vector<int> FinePatch::fine_cells(const StructuredGrid& fine) const {
  std::vector<int> out;
  out.reserve(n_cells());
  for (int j = cy0; j < cy1; ++j)
    for (int i = cx0; i < cx1; ++i) out.push_back(fine.cell_index(i, j));
  return out;
}

FinePatch CoarseGrid::coarse_cell_patch(int I, int J) const {
  return FinePatch{I * rx, (I + 1) * rx, J * ry, (J + 1) * ry};
}

FinePatch CoarseGrid::neighborhood(int coarse_node) const {
  const int I = coarse_node % (Nx + 1);
  const int J = coarse_node / (Nx + 1);
  FinePatch p;
  p.cx0 = std::max(I - 1, 0) * rx;
  p.cx1 = std::min(I + 1, Nx) * rx;
  p.cy0 = std::max(J - 1, 0) * ry;
  p.cy1 = std::min(J + 1, Ny) * ry;
  return p;
}

CoarseGrid build_coarse_grid(const StructuredGrid& fine, int Nx, int Ny) {
  if (Nx < 1 || Ny < 1)
    throw std::invalid_argument("build_coarse_grid: coarse cell counts must be >= 1");
  if (fine.nx % Nx != 0 || fine.ny % Ny != 0)
    throw std::invalid_argument("build_coarse_grid: fine grid is not a refinement of the coarse");
  CoarseGrid cg;
  cg.fine = fine;
  cg.Nx = Nx;
  cg.Ny = Ny;
  cg.rx = fine.nx / Nx;
  cg.ry = fine.ny / Ny;
  return cg;
}

namespace {

// Dense k-stiffness and k-weighted mass over the cells of a patch, with
// natural (zero-Neumann) boundary: no constraints, just local assembly.
void assemble_patch(const CoarseGrid& cg, const FinePatch& patch, const CellField& k, Mat* A,
                    Mat* S) {
  const StructuredGrid& fine = cg.fine;
  const int n = patch.n_nodes();
  if (A) A->setZero(n, n);
  if (S) S->setZero(n, n);

  // reference element matrices via the global assembler on a single cell
  static thread_local Mat mass_e, stiff_e;
  static thread_local double cached_hx = -1.0, cached_hy = -1.0;
  if (cached_hx != fine.hx() || cached_hy != fine.hy()) {
    StructuredGrid one = build_grid(1, 1, Rect{0, 0, fine.hx(), fine.hy()});
    auto [b1, k1] = assemble(one, CellField::constant(one, 1.0));
    mass_e = Mat(b1);
    stiff_e = Mat(k1);
    cached_hx = fine.hx();
    cached_hy = fine.hy();
  }

  for (int j = patch.cy0; j < patch.cy1; ++j) {
    for (int i = patch.cx0; i < patch.cx1; ++i) {
      const double kc = k.values[fine.cell_index(i, j)];
      const int l00 = patch.local_node(i, j);
      const int loc[4] = {l00, l00 + 1, l00 + patch.nodes_x() + 1, l00 + patch.nodes_x()};
      for (int a = 0; a < 4; ++a) {
        for (int b = 0; b < 4; ++b) {
          if (A) (*A)(loc[a], loc[b]) += kc * stiff_e(a, b);
          if (S) (*S)(loc[a], loc[b]) += kc * mass_e(a, b);
        }
      }
    }
  }
}

void fix_sign(Eigen::Ref<Vec> v) {
  int at = 0;
  v.cwiseAbs().maxCoeff(&at);
  if (v[at] < 0.0) v = -v;
}

}  // namespace

LocalSpectralResult local_spectral_basis(const CoarseGrid& cg, int coarse_node, const CellField& k,
                                         int m_basis) {
  validate_cell_field(cg.fine, k);
  const FinePatch patch = cg.neighborhood(coarse_node);
  const int n = patch.n_nodes();
  if (m_basis < 1 || m_basis > n)
    throw std::invalid_argument("local_spectral_basis: basis count exceeds local dof count");
  Mat A, S;
  assemble_patch(cg, patch, k, &A, &S);
  Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(A, S,
                                                   Eigen::ComputeEigenvectors | Eigen::Ax_lBx);
  if (es.info() != Eigen::Success)
    throw NumericalError("local_spectral_basis: eigensolver did not converge");
  LocalSpectralResult out;
  out.eigenvalues = es.eigenvalues().head(m_basis);
  // clamp the roundoff negatives of the zero mode
  for (int i = 0; i < m_basis; ++i)
    if (out.eigenvalues[i] < 0.0 && out.eigenvalues[i] > -1e-10) out.eigenvalues[i] = 0.0;
  out.eigenvectors = es.eigenvectors().leftCols(m_basis);
  for (int c = 0; c < m_basis; ++c) fix_sign(out.eigenvectors.col(c));
  out.fine_nodes = patch.fine_nodes(cg.fine);
  return out;
}

SpMat partition_of_unity(const CoarseGrid& cg, const CellField& k) {
  validate_cell_field(cg.fine, k);
  const StructuredGrid& fine = cg.fine;
  Mat chi = Mat::Zero(fine.n_nodes(), cg.n_coarse_nodes());

  for (int J = 0; J < cg.Ny; ++J) {
    for (int I = 0; I < cg.Nx; ++I) {
      const FinePatch patch = cg.coarse_cell_patch(I, J);
      const int n = patch.n_nodes();
      Mat A;
      assemble_patch(cg, patch, k, &A, nullptr);

      std::vector<int> interior, boundary;
      for (int j = patch.cy0; j <= patch.cy1; ++j) {
        for (int i = patch.cx0; i <= patch.cx1; ++i) {
          const bool on_bnd = i == patch.cx0 || i == patch.cx1 || j == patch.cy0 || j == patch.cy1;
          (on_bnd ? boundary : interior).push_back(patch.local_node(i, j));
        }
      }
      Mat Aii(interior.size(), interior.size());
      Mat Aib(interior.size(), boundary.size());
      for (std::size_t a = 0; a < interior.size(); ++a) {
        for (std::size_t b = 0; b < interior.size(); ++b) Aii(a, b) = A(interior[a], interior[b]);
        for (std::size_t b = 0; b < boundary.size(); ++b) Aib(a, b) = A(interior[a], boundary[b]);
      }
      Eigen::LLT<Mat> llt;
      if (!interior.empty()) {
        llt.compute(Aii);
        if (llt.info() != Eigen::Success)
          throw NumericalError("partition_of_unity: singular local Dirichlet solve");
      }

      // bilinear hat data of each corner coarse node on this element
      const int corners[4] = {cg.coarse_node_index(I, J), cg.coarse_node_index(I + 1, J),
                              cg.coarse_node_index(I + 1, J + 1), cg.coarse_node_index(I, J + 1)};
      for (int c = 0; c < 4; ++c) {
        Vec g(boundary.size());
        Vec full = Vec::Zero(n);
        for (std::size_t b = 0; b < boundary.size(); ++b) {
          const int loc = boundary[b];
          const int gi = patch.cx0 + loc % patch.nodes_x();
          const int gj = patch.cy0 + loc / patch.nodes_x();
          const double tx = static_cast<double>(gi - patch.cx0) / patch.cells_x();
          const double ty = static_cast<double>(gj - patch.cy0) / patch.cells_y();
          const double hat[4] = {(1 - tx) * (1 - ty), tx * (1 - ty), tx * ty, (1 - tx) * ty};
          g[b] = hat[c];
          full[loc] = hat[c];
        }
        if (!interior.empty()) {
          Vec ui = llt.solve(-Aib * g);
          for (std::size_t a = 0; a < interior.size(); ++a) full[interior[a]] = ui[a];
        }
        for (int j = patch.cy0; j <= patch.cy1; ++j)
          for (int i = patch.cx0; i <= patch.cx1; ++i)
            chi(fine.node_index(i, j), corners[c]) = full[patch.local_node(i, j)];
      }
    }
  }
  return chi.sparseView(1.0, 1e-300);
}

MultiscaleBasis build_basis(const CoarseGrid& cg, const CellField& k,
                            const std::vector<int>& basis_per_node) {
  if (static_cast<int>(basis_per_node.size()) != cg.n_coarse_nodes())
    throw std::invalid_argument("build_basis: one basis count per coarse node required");
  const SpMat pou = partition_of_unity(cg, k);

  MultiscaleBasis out;
  out.basis_per_node = basis_per_node;
  int total = 0;
  for (int m : basis_per_node) total += m;

  std::vector<Eigen::Triplet<double>> ts;
  int col = 0;
  for (int node = 0; node < cg.n_coarse_nodes(); ++node) {
    const LocalSpectralResult spec = local_spectral_basis(cg, node, k, basis_per_node[node]);
    out.eigenvalues.push_back(spec.eigenvalues);
    // chi_i restricted to the neighborhood rows
    Vec chi_local(spec.fine_nodes.size());
    for (std::size_t r = 0; r < spec.fine_nodes.size(); ++r)
      chi_local[r] = pou.coeff(spec.fine_nodes[r], node);
    for (int l = 0; l < basis_per_node[node]; ++l) {
      for (std::size_t r = 0; r < spec.fine_nodes.size(); ++r) {
        const double v = chi_local[r] * spec.eigenvectors(r, l);
        if (v != 0.0) ts.emplace_back(spec.fine_nodes[r], col, v);
      }
      out.column_node.push_back(node);
      ++col;
    }
  }
  out.R.resize(cg.fine.n_nodes(), total);
  out.R.setFromTriplets(ts.begin(), ts.end());
  return out;
}

MultiscaleBasis build_basis(const CoarseGrid& cg, const CellField& k, int basis_per_node) {
  return build_basis(cg, k, std::vector<int>(cg.n_coarse_nodes(), basis_per_node));
}

ReducedModel::ReducedModel(SpMat R, const SpMat& B, const SpMat& K, const TimeGrid& time)
    : R_(std::move(R)), time_(time) {
  if (R_.rows() != B.rows() || B.rows() != K.rows())
    throw std::invalid_argument("ReducedModel: basis and operators disagree in size");
  Rt_ = SpMat(R_.transpose());
  reduced_mass_ = Mat(Rt_ * (B * R_).eval());
  Mat reduced_stiffness = Mat(Rt_ * (K * R_).eval());
  mass_chol_.compute(reduced_mass_);
  if (mass_chol_.info() != Eigen::Success)
    throw NumericalError("ReducedModel: reduced mass matrix is rank deficient (redundant basis)");
  system_chol_.compute(reduced_mass_ + time_.dt * reduced_stiffness);
  if (system_chol_.info() != Eigen::Success)
    throw NumericalError("ReducedModel: reduced system matrix is not positive definite");
}

Mat ReducedModel::solve_coefficients(const Vec& u0_fine,
                                     const std::function<Vec(double)>& fine_load) const {
  if (u0_fine.size() != R_.rows())
    throw std::invalid_argument("ReducedModel: initial condition size mismatch");
  counters::bump_reduced();
  Mat coeffs(R_.cols(), time_.levels + 1);
  Vec a = mass_chol_.solve((Rt_ * u0_fine).eval());
  coeffs.col(0) = a;
  for (int n = 1; n <= time_.levels; ++n) {
    Vec rhs = reduced_mass_ * a + time_.dt * (Rt_ * fine_load(time_.time_at(n)));
    a = system_chol_.solve(rhs);
    coeffs.col(n) = a;
  }
  return coeffs;
}

Mat ReducedModel::solve_coefficients(const Vec& u0_fine, const Vec& fine_load) const {
  Vec projected = Rt_ * fine_load;
  counters::bump_reduced();
  Mat coeffs(R_.cols(), time_.levels + 1);
  Vec a = mass_chol_.solve((Rt_ * u0_fine).eval());
  coeffs.col(0) = a;
  for (int n = 1; n <= time_.levels; ++n) {
    Vec rhs = reduced_mass_ * a + time_.dt * projected;
    a = system_chol_.solve(rhs);
    coeffs.col(n) = a;
  }
  return coeffs;
}

Vec ReducedModel::reconstruct(const Mat& coeffs, int level) const {
  if (level < 0 || level >= coeffs.cols())
    throw std::invalid_argument("ReducedModel: level outside trajectory");
  return R_ * coeffs.col(level);
}

Trajectory ReducedModel::reconstruct_all(const Mat& coeffs) const {
  Trajectory t;
  t.values = R_ * coeffs;
  return t;
}

std::pair<Mat, Trajectory> solve_forward_reduced(const MultiscaleBasis& basis, const SpMat& B,
                                                 const SpMat& K,
                                                 const std::function<Vec(double)>& load,
                                                 const Vec& u0, const TimeGrid& time) {
  ReducedModel model(basis.R, B, K, time);
  Mat coeffs = model.solve_coefficients(u0, load);
  return {coeffs, model.reconstruct_all(coeffs)};
}

}  // namespace msinv
