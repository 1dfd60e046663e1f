#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <array>
#include <functional>
#include <utility>
#include <vector>

namespace msinv {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double>;

struct Rect {
  double x0 = 0.0, y0 = 0.0;
  double x1 = 1.0, y1 = 1.0;
  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
};

/// Uniform rectangular mesh of bilinear (Q1) cells.
/// Nodes are numbered lexicographically with x running fastest; cell c
/// lists its four nodes counterclockwise from the lower-left corner.
struct StructuredGrid {
  int nx = 0, ny = 0;
  Rect domain;

  int n_nodes() const { return (nx + 1) * (ny + 1); }
  int n_cells() const { return nx * ny; }
  double hx() const { return domain.width() / nx; }
  double hy() const { return domain.height() / ny; }

  int node_index(int i, int j) const { return j * (nx + 1) + i; }
  int cell_index(int i, int j) const { return j * nx + i; }
  double node_x(int n) const { return domain.x0 + (n % (nx + 1)) * hx(); }
  double node_y(int n) const { return domain.y0 + (n / (nx + 1)) * hy(); }

  std::array<int, 4> cell_nodes(int c) const {
    const int i = c % nx, j = c / nx;
    const int n00 = node_index(i, j);
    return {n00, n00 + 1, n00 + nx + 2, n00 + nx + 1};
  }

  bool contains(double x, double y) const;
};

StructuredGrid build_grid(int nx, int ny, const Rect& domain = {});

/// One positive conductivity value per fine cell.
struct CellField {
  Vec values;
  static CellField constant(const StructuredGrid& grid, double k);
};

/// Checks positivity and size against the grid; throws std::invalid_argument.
void validate_cell_field(const StructuredGrid& grid, const CellField& k);

enum class BcKind { NeumannZero, NeumannFlux, Dirichlet };

/// Prescribed normal flux, evaluated as flux(x, y, t) on the edge.
struct EdgeCondition {
  BcKind kind = BcKind::NeumannZero;
  std::function<double(double, double, double)> flux;
};

/// Per-edge boundary conditions; every boundary edge carries exactly one.
struct BoundarySpec {
  EdgeCondition left, right, bottom, top;

  static BoundarySpec all_neumann() { return {}; }
  bool has_dirichlet() const {
    return left.kind == BcKind::Dirichlet || right.kind == BcKind::Dirichlet ||
           bottom.kind == BcKind::Dirichlet || top.kind == BcKind::Dirichlet;
  }
};

/// Node indices constrained by homogeneous Dirichlet edges, sorted.
std::vector<int> dirichlet_nodes(const StructuredGrid& grid, const BoundarySpec& bc);

struct TimeGrid {
  double dt = 0.0;
  double t_final = 0.0;
  int levels = 0;
  double time_at(int level) const { return level * dt; }
};

TimeGrid make_time_grid(double dt, double t_final);

/// Level index of a given time; throws if t is not a grid time.
int level_of_time(const TimeGrid& time, double t);

/// Nodal coefficients per time level, columns 0..levels (level 0 = initial).
struct Trajectory {
  Mat values;  // n_nodes x (levels + 1)
  int levels() const { return static_cast<int>(values.cols()) - 1; }
};

/// Sensor locations plus the observation time levels. Observations are
/// ordered time-major: all sensors at the first level, then the next level.
struct SensorSet {
  std::vector<Eigen::Vector2d> points;
  std::vector<int> levels;
  int size() const { return static_cast<int>(points.size() * levels.size()); }
};

/// Uniform n x n sensor lattice strictly inside the domain.
SensorSet uniform_sensor_grid(const StructuredGrid& grid, int nx_sensors, int ny_sensors,
                              std::vector<int> levels, bool include_boundary = false);

/// Mass matrix B and stiffness matrix K (k constant per cell, 2x2 Gauss).
std::pair<SpMat, SpMat> assemble(const StructuredGrid& grid, const CellField& k);

/// Mass matrix weighted by k: entries \int k l_n l_m.
SpMat assemble_weighted_mass(const StructuredGrid& grid, const CellField& k);

/// Volume term for f plus Neumann line integrals at time t; rows of
/// Dirichlet-constrained nodes are zeroed.
Vec assemble_load(const StructuredGrid& grid, const std::function<double(double, double)>& f,
                  const BoundarySpec& bc, double t);

/// Row/column elimination for homogeneous Dirichlet constraints, keeping
/// both matrices symmetric: B gets a unit diagonal on fixed nodes, K a zero
/// diagonal, so B + dt*K stays SPD and fixed entries propagate unchanged.
void constrain_system(SpMat& B, SpMat& K, const std::vector<int>& fixed);

/// Backward-Euler trajectory; B + dt*K is factorized once and reused.
/// Dirichlet constraints, if any, must already be applied to B, K, load, u0.
Trajectory solve_forward_full(const SpMat& B, const SpMat& K,
                              const std::function<Vec(double)>& load, const Vec& u0,
                              const TimeGrid& time);
Trajectory solve_forward_full(const SpMat& B, const SpMat& K, const Vec& load, const Vec& u0,
                              const TimeGrid& time);

/// Sparse interpolation operator: row per point, bilinear weights per cell.
SpMat observation_matrix(const StructuredGrid& grid, const std::vector<Eigen::Vector2d>& points);

/// Bilinear interpolation of the trajectory at the sensors, time-major.
Vec observe(const Trajectory& traj, const StructuredGrid& grid, const SensorSet& sensors);

namespace counters {
/// Forward-solve call counters (offline/online accounting in experiments).
long full_solves();
long reduced_solves();
void bump_full();
void bump_reduced();
void reset();
}  // namespace counters

}  // namespace msinv
