#include "msinv/fem.hpp"

#include <Eigen/SparseCholesky>

#include <atomic>
#include <cmath>
#include <stdexcept>

#include "msinv/errors.hpp"

namespace msinv {

namespace {

constexpr double kGauss = 0.5773502691896257;  // 1/sqrt(3)

// Q1 shape functions on [-1,1]^2, counterclockwise from (-1,-1).
void shape_q1(double xi, double eta, double n[4], double dxi[4], double deta[4]) {
  n[0] = 0.25 * (1 - xi) * (1 - eta);
  n[1] = 0.25 * (1 + xi) * (1 - eta);
  n[2] = 0.25 * (1 + xi) * (1 + eta);
  n[3] = 0.25 * (1 - xi) * (1 + eta);
  dxi[0] = -0.25 * (1 - eta);
  dxi[1] = 0.25 * (1 - eta);
  dxi[2] = 0.25 * (1 + eta);
  dxi[3] = -0.25 * (1 + eta);
  deta[0] = -0.25 * (1 - xi);
  deta[1] = -0.25 * (1 + xi);
  deta[2] = 0.25 * (1 + xi);
  deta[3] = 0.25 * (1 - xi);
}

struct ElementMatrices {
  Eigen::Matrix4d mass;
  Eigen::Matrix4d stiffness;  // for k = 1
};

// 2x2 Gauss quadrature, exact for bilinear products on axis-aligned cells.
ElementMatrices reference_element(double hx, double hy) {
  ElementMatrices em;
  em.mass.setZero();
  em.stiffness.setZero();
  const double gp[2] = {-kGauss, kGauss};
  const double jac = hx * hy / 4.0;
  double n[4], dxi[4], deta[4];
  for (double xi : gp) {
    for (double eta : gp) {
      shape_q1(xi, eta, n, dxi, deta);
      for (int a = 0; a < 4; ++a) {
        for (int b = 0; b < 4; ++b) {
          em.mass(a, b) += n[a] * n[b] * jac;
          const double gax = dxi[a] * 2.0 / hx, gay = deta[a] * 2.0 / hy;
          const double gbx = dxi[b] * 2.0 / hx, gby = deta[b] * 2.0 / hy;
          em.stiffness(a, b) += (gax * gbx + gay * gby) * jac;
        }
      }
    }
  }
  return em;
}

std::atomic<long> g_full_solves{0};
std::atomic<long> g_reduced_solves{0};

}  // namespace

namespace counters {
long full_solves() { return g_full_solves.load(); }
long reduced_solves() { return g_reduced_solves.load(); }
void bump_full() { ++g_full_solves; }
void bump_reduced() { ++g_reduced_solves; }
void reset() {
  g_full_solves = 0;
  g_reduced_solves = 0;
}
}  // namespace counters

bool StructuredGrid::contains(double x, double y) const {
  const double tol = 1e-12 * (std::abs(domain.width()) + std::abs(domain.height()));
  return x >= domain.x0 - tol && x <= domain.x1 + tol && y >= domain.y0 - tol &&
         y <= domain.y1 + tol;
}

StructuredGrid build_grid(int nx, int ny, const Rect& domain) {
  if (nx < 1 || ny < 1) throw std::invalid_argument("build_grid: cell counts must be >= 1");
  if (!(domain.x1 > domain.x0) || !(domain.y1 > domain.y0))
    throw std::invalid_argument("build_grid: empty domain rectangle");
  StructuredGrid g;
  g.nx = nx;
  g.ny = ny;
  g.domain = domain;
  return g;
}

CellField CellField::constant(const StructuredGrid& grid, double k) {
  CellField f;
  f.values = Vec::Constant(grid.n_cells(), k);
  return f;
}

void validate_cell_field(const StructuredGrid& grid, const CellField& k) {
  if (k.values.size() != grid.n_cells())
    throw std::invalid_argument("cell field size does not match grid cell count");
  if ((k.values.array() <= 0.0).any())
    throw std::invalid_argument("cell field must be strictly positive");
}

std::vector<int> dirichlet_nodes(const StructuredGrid& grid, const BoundarySpec& bc) {
  std::vector<bool> fixed(grid.n_nodes(), false);
  if (bc.left.kind == BcKind::Dirichlet)
    for (int j = 0; j <= grid.ny; ++j) fixed[grid.node_index(0, j)] = true;
  if (bc.right.kind == BcKind::Dirichlet)
    for (int j = 0; j <= grid.ny; ++j) fixed[grid.node_index(grid.nx, j)] = true;
  if (bc.bottom.kind == BcKind::Dirichlet)
    for (int i = 0; i <= grid.nx; ++i) fixed[grid.node_index(i, 0)] = true;
  if (bc.top.kind == BcKind::Dirichlet)
    for (int i = 0; i <= grid.nx; ++i) fixed[grid.node_index(i, grid.ny)] = true;
  std::vector<int> out;
  for (int n = 0; n < grid.n_nodes(); ++n)
    if (fixed[n]) out.push_back(n);
  return out;
}

TimeGrid make_time_grid(double dt, double t_final) {
  if (!(dt > 0.0) || !(t_final > 0.0))
    throw std::invalid_argument("time grid requires dt > 0 and t_final > 0");
  const double ratio = t_final / dt;
  const int levels = static_cast<int>(std::lround(ratio));
  if (levels < 1 || std::abs(ratio - levels) > 1e-8 * ratio)
    throw std::invalid_argument("t_final must be an integer multiple of dt");
  return TimeGrid{dt, t_final, levels};
}

int level_of_time(const TimeGrid& time, double t) {
  const double ratio = t / time.dt;
  const int level = static_cast<int>(std::lround(ratio));
  if (level < 0 || level > time.levels || std::abs(ratio - level) > 1e-8 * (1.0 + std::abs(ratio)))
    throw std::invalid_argument("time is not on the time grid");
  return level;
}

SensorSet uniform_sensor_grid(const StructuredGrid& grid, int nx_sensors, int ny_sensors,
                              std::vector<int> levels, bool include_boundary) {
  if (nx_sensors < 1 || ny_sensors < 1)
    throw std::invalid_argument("sensor grid needs at least one sensor per axis");
  SensorSet s;
  s.levels = std::move(levels);
  for (int j = 0; j < ny_sensors; ++j) {
    for (int i = 0; i < nx_sensors; ++i) {
      double fx, fy;
      if (include_boundary) {
        fx = nx_sensors == 1 ? 0.5 : static_cast<double>(i) / (nx_sensors - 1);
        fy = ny_sensors == 1 ? 0.5 : static_cast<double>(j) / (ny_sensors - 1);
      } else {
        fx = static_cast<double>(i + 1) / (nx_sensors + 1);
        fy = static_cast<double>(j + 1) / (ny_sensors + 1);
      }
      s.points.emplace_back(grid.domain.x0 + fx * grid.domain.width(),
                            grid.domain.y0 + fy * grid.domain.height());
    }
  }
  return s;
}

std::pair<SpMat, SpMat> assemble(const StructuredGrid& grid, const CellField& k) {
  validate_cell_field(grid, k);
  const ElementMatrices em = reference_element(grid.hx(), grid.hy());
  std::vector<Eigen::Triplet<double>> tb, tk;
  tb.reserve(16 * grid.n_cells());
  tk.reserve(16 * grid.n_cells());
  for (int c = 0; c < grid.n_cells(); ++c) {
    const auto nodes = grid.cell_nodes(c);
    const double kc = k.values[c];
    for (int a = 0; a < 4; ++a) {
      for (int b = 0; b < 4; ++b) {
        tb.emplace_back(nodes[a], nodes[b], em.mass(a, b));
        tk.emplace_back(nodes[a], nodes[b], kc * em.stiffness(a, b));
      }
    }
  }
  SpMat B(grid.n_nodes(), grid.n_nodes()), K(grid.n_nodes(), grid.n_nodes());
  B.setFromTriplets(tb.begin(), tb.end());
  K.setFromTriplets(tk.begin(), tk.end());
  return {std::move(B), std::move(K)};
}

SpMat assemble_weighted_mass(const StructuredGrid& grid, const CellField& k) {
  validate_cell_field(grid, k);
  const ElementMatrices em = reference_element(grid.hx(), grid.hy());
  std::vector<Eigen::Triplet<double>> ts;
  ts.reserve(16 * grid.n_cells());
  for (int c = 0; c < grid.n_cells(); ++c) {
    const auto nodes = grid.cell_nodes(c);
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) ts.emplace_back(nodes[a], nodes[b], k.values[c] * em.mass(a, b));
  }
  SpMat S(grid.n_nodes(), grid.n_nodes());
  S.setFromTriplets(ts.begin(), ts.end());
  return S;
}

namespace {

// Line integral of flux * hat over one boundary edge segment (2-pt Gauss).
void add_edge_loads(const StructuredGrid& grid, const EdgeCondition& cond, int edge, double t,
                    Vec& F) {
  if (cond.kind != BcKind::NeumannFlux) return;
  if (!cond.flux) throw std::invalid_argument("NeumannFlux edge without a flux function");
  const double gp[2] = {-kGauss, kGauss};
  // edge ids: 0=left, 1=right, 2=bottom, 3=top
  const bool vertical = edge < 2;
  const int nseg = vertical ? grid.ny : grid.nx;
  const double h = vertical ? grid.hy() : grid.hx();
  for (int s = 0; s < nseg; ++s) {
    int n0, n1;
    if (edge == 0) {
      n0 = grid.node_index(0, s);
      n1 = grid.node_index(0, s + 1);
    } else if (edge == 1) {
      n0 = grid.node_index(grid.nx, s);
      n1 = grid.node_index(grid.nx, s + 1);
    } else if (edge == 2) {
      n0 = grid.node_index(s, 0);
      n1 = grid.node_index(s + 1, 0);
    } else {
      n0 = grid.node_index(s, grid.ny);
      n1 = grid.node_index(s + 1, grid.ny);
    }
    for (double q : gp) {
      const double w = h / 2.0;
      const double frac = 0.5 * (q + 1.0);
      double x, y;
      if (vertical) {
        x = edge == 0 ? grid.domain.x0 : grid.domain.x1;
        y = grid.domain.y0 + (s + frac) * grid.hy();
      } else {
        x = grid.domain.x0 + (s + frac) * grid.hx();
        y = edge == 2 ? grid.domain.y0 : grid.domain.y1;
      }
      const double p = cond.flux(x, y, t);
      F[n0] += p * (1.0 - frac) * w;
      F[n1] += p * frac * w;
    }
  }
}

}  // namespace

Vec assemble_load(const StructuredGrid& grid, const std::function<double(double, double)>& f,
                  const BoundarySpec& bc, double t) {
  Vec F = Vec::Zero(grid.n_nodes());
  if (f) {
    const double gp[2] = {-kGauss, kGauss};
    const double jac = grid.hx() * grid.hy() / 4.0;
    double n[4], dxi[4], deta[4];
    for (int c = 0; c < grid.n_cells(); ++c) {
      const auto nodes = grid.cell_nodes(c);
      const int ci = c % grid.nx, cj = c / grid.nx;
      for (double xi : gp) {
        for (double eta : gp) {
          shape_q1(xi, eta, n, dxi, deta);
          const double x = grid.domain.x0 + (ci + 0.5 * (xi + 1.0)) * grid.hx();
          const double y = grid.domain.y0 + (cj + 0.5 * (eta + 1.0)) * grid.hy();
          const double fv = f(x, y) * jac;
          for (int a = 0; a < 4; ++a) F[nodes[a]] += n[a] * fv;
        }
      }
    }
  }
  add_edge_loads(grid, bc.left, 0, t, F);
  add_edge_loads(grid, bc.right, 1, t, F);
  add_edge_loads(grid, bc.bottom, 2, t, F);
  add_edge_loads(grid, bc.top, 3, t, F);
  for (int n : dirichlet_nodes(grid, bc)) F[n] = 0.0;
  return F;
}

void constrain_system(SpMat& B, SpMat& K, const std::vector<int>& fixed) {
  if (fixed.empty()) return;
  const int n = static_cast<int>(B.rows());
  std::vector<char> is_fixed(n, 0);
  for (int i : fixed) is_fixed[i] = 1;
  auto strip = [&](const SpMat& M, double diag) {
    std::vector<Eigen::Triplet<double>> ts;
    ts.reserve(M.nonZeros());
    for (int col = 0; col < M.outerSize(); ++col) {
      for (SpMat::InnerIterator it(M, col); it; ++it) {
        if (is_fixed[it.row()] || is_fixed[it.col()]) continue;
        ts.emplace_back(it.row(), it.col(), it.value());
      }
    }
    if (diag != 0.0)
      for (int i : fixed) ts.emplace_back(i, i, diag);
    SpMat out(M.rows(), M.cols());
    out.setFromTriplets(ts.begin(), ts.end());
    return out;
  };
  B = strip(B, 1.0);
  K = strip(K, 0.0);
}

Trajectory solve_forward_full(const SpMat& B, const SpMat& K,
                              const std::function<Vec(double)>& load, const Vec& u0,
                              const TimeGrid& time) {
  if (B.rows() != K.rows() || B.cols() != K.cols() || u0.size() != B.rows())
    throw std::invalid_argument("solve_forward_full: inconsistent shapes");
  counters::bump_full();
  SpMat A = B + time.dt * K;
  Eigen::SimplicialLDLT<SpMat> solver(A);
  if (solver.info() != Eigen::Success)
    throw NumericalError("solve_forward_full: factorization of B + dt*K failed");
  Trajectory traj;
  traj.values.resize(B.rows(), time.levels + 1);
  traj.values.col(0) = u0;
  Vec u = u0;
  for (int n = 1; n <= time.levels; ++n) {
    Vec rhs = B * u + time.dt * load(time.time_at(n));
    u = solver.solve(rhs);
    if (solver.info() != Eigen::Success)
      throw NumericalError("solve_forward_full: backsolve failed");
    traj.values.col(n) = u;
  }
  return traj;
}

Trajectory solve_forward_full(const SpMat& B, const SpMat& K, const Vec& load, const Vec& u0,
                              const TimeGrid& time) {
  return solve_forward_full(
      B, K, [&load](double) -> Vec { return load; }, u0, time);
}

SpMat observation_matrix(const StructuredGrid& grid, const std::vector<Eigen::Vector2d>& points) {
  std::vector<Eigen::Triplet<double>> ts;
  ts.reserve(points.size() * 4);
  for (std::size_t p = 0; p < points.size(); ++p) {
    const double x = points[p].x(), y = points[p].y();
    if (!grid.contains(x, y))
      throw std::invalid_argument("observation_matrix: sensor outside domain");
    int ci = static_cast<int>(std::floor((x - grid.domain.x0) / grid.hx()));
    int cj = static_cast<int>(std::floor((y - grid.domain.y0) / grid.hy()));
    ci = std::min(std::max(ci, 0), grid.nx - 1);
    cj = std::min(std::max(cj, 0), grid.ny - 1);
    const double lx = (x - grid.domain.x0) / grid.hx() - ci;
    const double ly = (y - grid.domain.y0) / grid.hy() - cj;
    const auto nodes = grid.cell_nodes(grid.cell_index(ci, cj));
    const double w[4] = {(1 - lx) * (1 - ly), lx * (1 - ly), lx * ly, (1 - lx) * ly};
    for (int a = 0; a < 4; ++a)
      if (w[a] != 0.0) ts.emplace_back(static_cast<int>(p), nodes[a], w[a]);
  }
  SpMat P(static_cast<int>(points.size()), grid.n_nodes());
  P.setFromTriplets(ts.begin(), ts.end());
  return P;
}

Vec observe(const Trajectory& traj, const StructuredGrid& grid, const SensorSet& sensors) {
  if (traj.values.rows() != grid.n_nodes())
    throw std::invalid_argument("observe: trajectory does not match grid");
  for (int lv : sensors.levels)
    if (lv < 0 || lv > traj.levels())
      throw std::invalid_argument("observe: observation level outside trajectory");
  const SpMat P = observation_matrix(grid, sensors.points);
  Vec out(sensors.size());
  int at = 0;
  for (int lv : sensors.levels) {
    out.segment(at, P.rows()) = P * traj.values.col(lv);
    at += static_cast<int>(P.rows());
  }
  return out;
}

}  // namespace msinv
