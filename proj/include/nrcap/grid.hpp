#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <queue>
#include <string>
#include <vector>

#include "nrcap/common.hpp"
#include "nrcap/potential.hpp"
#include "nrcap/spectral.hpp"

namespace nrcap {

struct Grid2D {
  int nx = 0, ny = 0;
  double x0 = 0, x1 = 0, y0 = 0, y1 = 0;
  double h = 0;

  Grid2D() = default;
  Grid2D(int nx_, int ny_, const std::array<double, 4>& box)
      : nx(nx_), ny(ny_), x0(box[0]), x1(box[1]), y0(box[2]), y1(box[3]) {
    require(nx >= 16 && ny >= 16, errc::invalid_argument, "grid needs nx, ny >= 16");
    h = (x1 - x0) / (nx - 1);
    const double hy = (y1 - y0) / (ny - 1);
    require(std::abs(hy - h) <= 1e-12 * std::max(1.0, std::abs(h)), errc::invalid_argument,
            "grid spacing must be uniform: hx != hy");
  }

  double x(int i) const { return x0 + i * h; }
  double y(int j) const { return y0 + j * h; }
  std::size_t idx(int i, int j) const { return static_cast<std::size_t>(j) * nx + i; }
  std::size_t n_nodes() const { return static_cast<std::size_t>(nx) * ny; }
  std::size_t n_xedges() const { return static_cast<std::size_t>(ny) * (nx - 1); }
  std::size_t n_yedges() const { return static_cast<std::size_t>(ny - 1) * nx; }
  // x-edge (i,j) joins nodes (i,j)-(i+1,j); y-edge (i,j) joins (i,j)-(i,j+1)
  std::size_t xedge(int i, int j) const { return static_cast<std::size_t>(j) * (nx - 1) + i; }
  std::size_t yedge(int i, int j) const { return static_cast<std::size_t>(j) * nx + i; }
};

enum class Region : std::uint8_t { Omega = 0, A = 1, B = 2 };

struct RegionMask {
  int nx = 0, ny = 0;
  std::vector<std::uint8_t> label;

  Region at(std::size_t n) const { return static_cast<Region>(label[n]); }
  bool is(std::size_t n, Region r) const { return label[n] == static_cast<std::uint8_t>(r); }
};

namespace detail {

inline std::vector<std::uint8_t> flood(const Grid2D& g, const std::vector<char>& open,
                                       std::size_t start) {
  std::vector<std::uint8_t> seen(g.n_nodes(), 0);
  if (!open[start]) return seen;
  std::queue<std::size_t> q;
  q.push(start);
  seen[start] = 1;
  while (!q.empty()) {
    const std::size_t u = q.front();
    q.pop();
    const int i = static_cast<int>(u % g.nx), j = static_cast<int>(u / g.nx);
    const int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
    for (int k = 0; k < 4; ++k) {
      const int ii = i + di[k], jj = j + dj[k];
      if (ii < 0 || ii >= g.nx || jj < 0 || jj >= g.ny) continue;
      const std::size_t w = g.idx(ii, jj);
      if (open[w] && !seen[w]) {
        seen[w] = 1;
        q.push(w);
      }
    }
  }
  return seen;
}

inline void check_region(const Grid2D& g, const RegionMask& m, Region r, const char* name) {
  std::vector<char> open(g.n_nodes(), 0);
  std::size_t count = 0, start = 0;
  for (std::size_t n = 0; n < g.n_nodes(); ++n)
    if (m.is(n, r)) {
      open[n] = 1;
      start = n;
      ++count;
    }
  require(count > 0, errc::invalid_argument, std::string(name) + " region is empty");
  for (std::size_t n = 0; n < g.n_nodes(); ++n)
    if (open[n]) {
      const int i = static_cast<int>(n % g.nx), j = static_cast<int>(n / g.nx);
      require(i > 0 && i < g.nx - 1 && j > 0 && j < g.ny - 1, errc::invalid_argument,
              std::string(name) + " region touches the grid boundary");
    }
  const auto seen = flood(g, open, start);
  std::size_t reach = 0;
  for (auto s : seen) reach += s;
  require(reach == count, errc::invalid_argument,
          std::string(name) + " region is not connected");
}

}  // namespace detail

inline void validate_mask(const Grid2D& g, const RegionMask& m) {
  require(m.nx == g.nx && m.ny == g.ny, errc::invalid_argument, "mask grid mismatch");
  detail::check_region(g, m, Region::A, "A");
  detail::check_region(g, m, Region::B, "B");
  std::vector<char> open(g.n_nodes(), 0);
  std::size_t count = 0, start = 0;
  for (std::size_t n = 0; n < g.n_nodes(); ++n)
    if (m.is(n, Region::Omega)) {
      open[n] = 1;
      start = n;
      ++count;
    }
  require(count > 0, errc::invalid_argument, "Omega is empty");
  const auto seen = detail::flood(g, open, start);
  std::size_t reach = 0;
  for (auto s : seen) reach += s;
  require(reach == count, errc::invalid_argument, "Omega is not connected");
}

inline RegionMask make_ball_masks(const Grid2D& g, const std::array<double, 2>& cA, double rA,
                                  const std::array<double, 2>& cB, double rB) {
  RegionMask m;
  m.nx = g.nx;
  m.ny = g.ny;
  m.label.assign(g.n_nodes(), 0);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const double dxA = g.x(i) - cA[0], dyA = g.y(j) - cA[1];
      const double dxB = g.x(i) - cB[0], dyB = g.y(j) - cB[1];
      const bool inA = dxA * dxA + dyA * dyA <= rA * rA;
      const bool inB = dxB * dxB + dyB * dyB <= rB * rB;
      require(!(inA && inB), errc::invalid_argument, "A and B balls overlap");
      if (inA) m.label[g.idx(i, j)] = static_cast<std::uint8_t>(Region::A);
      if (inB) m.label[g.idx(i, j)] = static_cast<std::uint8_t>(Region::B);
    }
  validate_mask(g, m);
  return m;
}

inline RegionMask make_rect_masks(const Grid2D& g, const std::array<double, 4>& rectA,
                                  const std::array<double, 4>& rectB) {
  RegionMask m;
  m.nx = g.nx;
  m.ny = g.ny;
  m.label.assign(g.n_nodes(), 0);
  auto inside = [](double x, double y, const std::array<double, 4>& r) {
    return x >= r[0] - 1e-12 && x <= r[1] + 1e-12 && y >= r[2] - 1e-12 && y <= r[3] + 1e-12;
  };
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const bool inA = inside(g.x(i), g.y(j), rectA);
      const bool inB = inside(g.x(i), g.y(j), rectB);
      require(!(inA && inB), errc::invalid_argument, "A and B rectangles overlap");
      if (inA) m.label[g.idx(i, j)] = static_cast<std::uint8_t>(Region::A);
      if (inB) m.label[g.idx(i, j)] = static_cast<std::uint8_t>(Region::B);
    }
  validate_mask(g, m);
  return m;
}

struct GridField {
  int nx = 0, ny = 0;
  std::vector<double> v;

  GridField() = default;
  GridField(const Grid2D& g, double fill = 0.0)
      : nx(g.nx), ny(g.ny), v(g.n_nodes(), fill) {}
  double& operator[](std::size_t n) { return v[n]; }
  double operator[](std::size_t n) const { return v[n]; }
};

// Edge-midpoint flow, fx on x-edges, fy on y-edges, oriented along +x / +y.
struct GridFlow {
  int nx = 0, ny = 0;
  std::vector<double> fx, fy;

  GridFlow() = default;
  explicit GridFlow(const Grid2D& g)
      : nx(g.nx), ny(g.ny), fx(g.n_xedges(), 0.0), fy(g.n_yedges(), 0.0) {}
};

// Finite-volume divergence-form operators for L_eps = eps e^{U/eps} div(e^{-U/eps} M grad).
// Node measure m_u = e^{-U_u/eps} h^2. The symmetric part uses edge-midpoint
// weights; the antisymmetric part is a superposition of plaquette circulations
// theta_P = -(a/2) e^{-U(cell center)/eps}, which satisfies the node Kirchhoff
// identity exactly, so the adjoint under m is the same scheme with a -> -a.
class GridOperators {
 public:
  Grid2D grid;
  double eps = 0.0;
  double S00 = 0.0, S11 = 0.0;  // diagonal of the symmetric part
  double a = 0.0;               // antisymmetric scalar, M = S + a J
  std::vector<double> Un;       // node potential
  std::vector<double> m;        // node measure e^{-U/eps} h^2
  std::vector<double> Uxe, Uye; // edge-midpoint potentials
  std::vector<double> wx, wy;   // e^{-U(edge)/eps}
  std::vector<double> abx, aby; // antisymmetric edge coefficients
  std::vector<double> theta;    // plaquette circulations, (nx-1) by (ny-1) row-major

  // Coefficient of (f_v - f_u) in m_u (L f)_u / eps across an edge; sign
  // selects L (+1) or the adjoint L* (-1).
  double cx(int i, int j, bool u_is_left, double sign) const {
    const double s = wx[grid.xedge(i, j)] * S00;
    const double ab = sign * abx[grid.xedge(i, j)];
    return u_is_left ? s + ab : s - ab;
  }
  double cy(int i, int j, bool u_is_down, double sign) const {
    const double s = wy[grid.yedge(i, j)] * S11;
    const double ab = sign * aby[grid.yedge(i, j)];
    return u_is_down ? s + ab : s - ab;
  }

  // m_u (L f)_u for every node; divide by m to get (L f)_u.
  GridField apply_mL(const GridField& f, double sign) const {
    GridField out(grid);
    for (int j = 0; j < grid.ny; ++j)
      for (int i = 0; i < grid.nx - 1; ++i) {
        const std::size_t u = grid.idx(i, j), w = grid.idx(i + 1, j);
        const double d = f[w] - f[u];
        out[u] += eps * cx(i, j, true, sign) * d;
        out[w] -= eps * cx(i, j, false, sign) * d;
      }
    for (int j = 0; j < grid.ny - 1; ++j)
      for (int i = 0; i < grid.nx; ++i) {
        const std::size_t u = grid.idx(i, j), w = grid.idx(i, j + 1);
        const double d = f[w] - f[u];
        out[u] += eps * cy(i, j, true, sign) * d;
        out[w] -= eps * cy(i, j, false, sign) * d;
      }
    return out;
  }

  GridField apply_L(const GridField& f, double sign) const {
    GridField out = apply_mL(f, sign);
    for (std::size_t n = 0; n < grid.n_nodes(); ++n) out[n] /= m[n];
    return out;
  }

  // mu_h-weighted inner product sum f g m.
  double inner(const GridField& f, const GridField& g) const {
    double s = 0.0;
    for (std::size_t n = 0; n < grid.n_nodes(); ++n) s += f[n] * g[n] * m[n];
    return s;
  }
};

inline GridOperators discretize_generator(const Grid2D& grid, const PotentialSpec& p,
                                          const DriftMatrix& drift, double eps) {
  require(eps > 0.0, errc::invalid_argument, "epsilon must be positive");
  require(grid.h <= std::sqrt(eps) / 4.0 + 1e-15, errc::resolution_too_coarse,
          "grid does not resolve the saddle: need h <= sqrt(eps)/4");
  require(drift.M.rows() == 2, errc::dimension_unsupported, "grid operators are 2D");
  const double s_scale = drift.S.cwiseAbs().maxCoeff();
  require(std::abs(drift.S(0, 1)) <= 1e-14 * s_scale, errc::unsupported_drift,
          "grid discretization requires a diagonal symmetric part");

  GridOperators ops;
  ops.grid = grid;
  ops.eps = eps;
  ops.S00 = drift.S(0, 0);
  ops.S11 = drift.S(1, 1);
  ops.a = 0.5 * (drift.M(0, 1) - drift.M(1, 0));

  const int nx = grid.nx, ny = grid.ny;
  ops.Un.resize(grid.n_nodes());
  ops.m.resize(grid.n_nodes());
  Vec xv(2);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      xv(0) = grid.x(i);
      xv(1) = grid.y(j);
      const double u = p.value(xv);
      ops.Un[grid.idx(i, j)] = u;
      ops.m[grid.idx(i, j)] = std::exp(-u / eps) * grid.h * grid.h;
    }
  ops.Uxe.resize(grid.n_xedges());
  ops.wx.resize(grid.n_xedges());
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx - 1; ++i) {
      xv(0) = grid.x(i) + 0.5 * grid.h;
      xv(1) = grid.y(j);
      const double u = p.value(xv);
      ops.Uxe[grid.xedge(i, j)] = u;
      ops.wx[grid.xedge(i, j)] = std::exp(-u / eps);
    }
  ops.Uye.resize(grid.n_yedges());
  ops.wy.resize(grid.n_yedges());
  for (int j = 0; j < ny - 1; ++j)
    for (int i = 0; i < nx; ++i) {
      xv(0) = grid.x(i);
      xv(1) = grid.y(j) + 0.5 * grid.h;
      const double u = p.value(xv);
      ops.Uye[grid.yedge(i, j)] = u;
      ops.wy[grid.yedge(i, j)] = std::exp(-u / eps);
    }

  // plaquette circulations, superposed onto the two edge orientations
  ops.theta.assign(static_cast<std::size_t>(ny - 1) * (nx - 1), 0.0);
  for (int j = 0; j < ny - 1; ++j)
    for (int i = 0; i < nx - 1; ++i) {
      xv(0) = grid.x(i) + 0.5 * grid.h;
      xv(1) = grid.y(j) + 0.5 * grid.h;
      ops.theta[static_cast<std::size_t>(j) * (nx - 1) + i] =
          -(ops.a / 2.0) * std::exp(-p.value(xv) / eps);
    }
  auto th = [&](int ci, int cj) -> double {
    if (ci < 0 || ci >= nx - 1 || cj < 0 || cj >= ny - 1) return 0.0;
    return ops.theta[static_cast<std::size_t>(cj) * (nx - 1) + ci];
  };
  ops.abx.assign(grid.n_xedges(), 0.0);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx - 1; ++i)
      ops.abx[grid.xedge(i, j)] = th(i, j) - th(i, j - 1);  // above minus below
  ops.aby.assign(grid.n_yedges(), 0.0);
  for (int j = 0; j < ny - 1; ++j)
    for (int i = 0; i < nx; ++i)
      ops.aby[grid.yedge(i, j)] = th(i - 1, j) - th(i, j);  // left minus right

  for (double v : ops.m)
    require(std::isfinite(v) && v > 0.0, errc::non_finite_weight,
            "node measure underflowed or is non-finite");
  for (double v : ops.wx)
    require(std::isfinite(v), errc::non_finite_weight, "edge weight is non-finite");
  for (double v : ops.wy)
    require(std::isfinite(v), errc::non_finite_weight, "edge weight is non-finite");
  return ops;
}

// Solve (L f)_u = rhs_u on free nodes with f fixed to boundary_values where
// dirichlet is set. Sparse LU with one step of iterative refinement; the
// relative residual must reach 1e-10.
inline GridField solve_dirichlet(const GridOperators& ops, double sign,
                                 const std::vector<char>& dirichlet,
                                 const GridField& boundary_values, const GridField& rhs,
                                 double* residual_out = nullptr) {
  const Grid2D& g = ops.grid;
  const std::size_t N = g.n_nodes();
  require(dirichlet.size() == N, errc::invalid_argument, "dirichlet mask size mismatch");

  std::vector<int> compact(N, -1);
  int nfree = 0;
  for (std::size_t n = 0; n < N; ++n)
    if (!dirichlet[n]) compact[n] = nfree++;
  require(nfree > 0, errc::invalid_argument, "no free nodes to solve for");

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(nfree) * 5);
  std::vector<double> diag(nfree, 0.0);
  Eigen::VectorXd b(nfree);
  for (std::size_t n = 0; n < N; ++n)
    if (compact[n] >= 0) b(compact[n]) = rhs[n] * ops.m[n] / ops.eps;
  // rows are scaled by m_u/eps so entries are plain edge coefficients

  auto couple = [&](std::size_t u, std::size_t w, double c_uw) {
    if (compact[u] < 0) return;
    diag[compact[u]] -= c_uw;
    if (compact[w] >= 0)
      trips.emplace_back(compact[u], compact[w], c_uw);
    else
      b(compact[u]) -= c_uw * boundary_values[w];
  };
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx - 1; ++i) {
      const std::size_t u = g.idx(i, j), w = g.idx(i + 1, j);
      couple(u, w, ops.cx(i, j, true, sign));
      couple(w, u, ops.cx(i, j, false, sign));
    }
  for (int j = 0; j < g.ny - 1; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const std::size_t u = g.idx(i, j), w = g.idx(i, j + 1);
      couple(u, w, ops.cy(i, j, true, sign));
      couple(w, u, ops.cy(i, j, false, sign));
    }
  for (int k = 0; k < nfree; ++k) trips.emplace_back(k, k, diag[k]);

  Eigen::SparseMatrix<double> A(nfree, nfree);
  A.setFromTriplets(trips.begin(), trips.end());
  A.makeCompressed();
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  lu.analyzePattern(A);
  lu.factorize(A);
  require(lu.info() == Eigen::Success, errc::solver_divergence, "sparse LU factorization failed");
  Eigen::VectorXd x = lu.solve(b);
  x += lu.solve(b - A * x);  // one refinement step
  const double bn = std::max(b.norm(), 1e-300);
  const double res = (b - A * x).norm() / bn;
  if (residual_out) *residual_out = res;
  require(std::isfinite(res) && res <= 1e-10, errc::solver_divergence,
          "linear solve residual " + std::to_string(res) + " exceeds 1e-10");

  GridField f(g);
  for (std::size_t n = 0; n < N; ++n)
    f[n] = compact[n] >= 0 ? x(compact[n]) : boundary_values[n];
  return f;
}

struct EquilibriumSolution {
  GridField h, h_star;
  double residual = 0.0, residual_star = 0.0;
};

inline GridField solve_one_potential(const GridOperators& ops, const RegionMask& mask,
                                     double sign, Region one_region, double* residual) {
  const Grid2D& g = ops.grid;
  std::vector<char> dirichlet(g.n_nodes(), 0);
  GridField bv(g), rhs(g);
  for (std::size_t n = 0; n < g.n_nodes(); ++n) {
    if (!mask.is(n, Region::Omega)) {
      dirichlet[n] = 1;
      bv[n] = mask.is(n, one_region) ? 1.0 : 0.0;
    }
  }
  GridField f = solve_dirichlet(ops, sign, dirichlet, bv, rhs, residual);
  double lo = 0.0, hi = 1.0;
  for (std::size_t n = 0; n < g.n_nodes(); ++n) {
    lo = std::min(lo, f[n]);
    hi = std::max(hi, f[n]);
  }
  require(lo >= -1e-8 && hi <= 1.0 + 1e-8, errc::maximum_principle_violation,
          "equilibrium potential leaves [0,1] by more than 1e-8");
  return f;
}

inline EquilibriumSolution solve_equilibrium_potential(const GridOperators& ops,
                                                       const RegionMask& mask) {
  EquilibriumSolution s;
  s.h = solve_one_potential(ops, mask, +1.0, Region::A, &s.residual);
  s.h_star = solve_one_potential(ops, mask, -1.0, Region::A, &s.residual_star);
  return s;
}

struct CapacityReport {
  double cap_dirichlet_form = 0.0;
  double cap_flux = 0.0;
  double cap_adjoint = 0.0;
  double cap_adjoint_flux = 0.0;
  double swap_defect = 0.0;     // |cap_flux(A,B) - cap_flux(B,A)|
  double adjoint_defect = 0.0;  // |cap - cap*|
  double epsilon = 0.0;
  double Z = 1.0;
};

inline double dirichlet_form(const GridOperators& ops, const GridField& f, double Z) {
  const Grid2D& g = ops.grid;
  double s = 0.0;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx - 1; ++i) {
      const double d = f[g.idx(i + 1, j)] - f[g.idx(i, j)];
      s += ops.wx[g.xedge(i, j)] * ops.S00 * d * d;
    }
  for (int j = 0; j < g.ny - 1; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const double d = f[g.idx(i, j + 1)] - f[g.idx(i, j)];
      s += ops.wy[g.yedge(i, j)] * ops.S11 * d * d;
    }
  return ops.eps * s / Z;
}

// Capacity three ways. The flux form sums -m (L h) over A (inflow of the
// M-flow of h); the swap defect uses the exact relation h_{B,A} = 1 - h.
inline CapacityReport capacity_from_fields(const GridField& h, const GridField& h_star,
                                           const GridOperators& ops, const RegionMask& mask,
                                           double Z) {
  CapacityReport r;
  r.epsilon = ops.eps;
  r.Z = Z;
  r.cap_dirichlet_form = dirichlet_form(ops, h, Z);
  r.cap_adjoint = dirichlet_form(ops, h_star, Z);

  const GridField mLh = ops.apply_mL(h, +1.0);
  const GridField mLhs = ops.apply_mL(h_star, -1.0);
  double fluxA = 0.0, fluxB = 0.0, fluxA_star = 0.0;
  for (std::size_t n = 0; n < ops.grid.n_nodes(); ++n) {
    if (mask.is(n, Region::A)) {
      fluxA += mLh[n];
      fluxA_star += mLhs[n];
    } else if (mask.is(n, Region::B)) {
      fluxB += mLh[n];
    }
  }
  r.cap_flux = -fluxA / Z;
  r.cap_adjoint_flux = -fluxA_star / Z;
  r.swap_defect = std::abs((-fluxA / Z) - (fluxB / Z));
  r.adjoint_defect = std::abs(r.cap_dirichlet_form - r.cap_adjoint);
  return r;
}

// Equilibrium measure on A: nu_u = -m_u (L* h*)_u / (Z cap), supported on the
// nodes of A adjacent to Omega. Weights below -1e-6 are an error; small
// negative weights are clipped to zero with a warning.
inline GridField equilibrium_measure(const GridField& h_star, const GridOperators& ops,
                                     const RegionMask& mask, double cap, double Z,
                                     std::vector<std::string>* warnings = nullptr) {
  require(cap > 0.0, errc::invalid_argument, "capacity must be positive");
  const GridField mLhs = ops.apply_mL(h_star, -1.0);
  GridField nu(ops.grid);
  double total = 0.0;
  for (std::size_t n = 0; n < ops.grid.n_nodes(); ++n) {
    if (!mask.is(n, Region::A)) continue;
    double w = -mLhs[n] / (Z * cap);
    require(w >= -1e-6, errc::negative_mass,
            "equilibrium-measure weight below -1e-6: discretization too coarse");
    if (w < 0.0) {
      if (warnings && w < -1e-10)
        warnings->push_back("equilibrium-measure weight clipped to zero");
      w = 0.0;
    }
    nu[n] = w;
    total += w;
  }
  (void)total;
  return nu;
}

struct Prop3Result {
  double lhs = 0.0, rhs = 0.0, defect = 0.0;
};

// lhs = sum_A u nu with L u = -f off B, u = 0 on B; rhs = (1/(Z cap)) sum h* f m.
inline Prop3Result check_prop3(const GridField& f, const RegionMask& mask,
                               const GridOperators& ops, const GridField& h_star,
                               const GridField& nu, double cap, double Z) {
  const Grid2D& g = ops.grid;
  std::vector<char> dirichlet(g.n_nodes(), 0);
  GridField bv(g), rhs_field(g);
  for (std::size_t n = 0; n < g.n_nodes(); ++n) {
    if (mask.is(n, Region::B))
      dirichlet[n] = 1;
    else
      rhs_field[n] = -f[n];
  }
  const GridField u = solve_dirichlet(ops, +1.0, dirichlet, bv, rhs_field);

  Prop3Result r;
  for (std::size_t n = 0; n < g.n_nodes(); ++n)
    if (mask.is(n, Region::A)) r.lhs += u[n] * nu[n];
  double s = 0.0;
  for (std::size_t n = 0; n < g.n_nodes(); ++n) s += h_star[n] * f[n] * ops.m[n];
  r.rhs = s / (Z * cap);
  r.defect = r.rhs != 0.0 ? std::abs(r.lhs - r.rhs) / std::abs(r.rhs) : std::abs(r.lhs);
  return r;
}

// Pointwise committor bound diagnostic: smallest C with
// h(y) <= C eps^{-d} e^{-(H - U(y))/eps} over well-2 nodes with U < H.
inline double l11_required_constant(const GridOperators& ops, const RegionMask& mask,
                                    const GridField& h, double H,
                                    const std::array<double, 2>& m2_loc) {
  const Grid2D& g = ops.grid;
  std::vector<char> open(g.n_nodes(), 0);
  for (std::size_t n = 0; n < g.n_nodes(); ++n) open[n] = ops.Un[n] < H ? 1 : 0;
  const int i2 = static_cast<int>(std::lround((m2_loc[0] - g.x0) / g.h));
  const int j2 = static_cast<int>(std::lround((m2_loc[1] - g.y0) / g.h));
  const auto well2 = detail::flood(g, open, g.idx(i2, j2));
  double c = 0.0;
  for (std::size_t n = 0; n < g.n_nodes(); ++n) {
    if (!well2[n] || mask.is(n, Region::B)) continue;
    const double bound_unit = std::exp(-(H - ops.Un[n]) / ops.eps) / (ops.eps * ops.eps);
    c = std::max(c, h[n] / bound_unit);
  }
  return c;
}

inline void write_field_csv(const std::string& path, const Grid2D& g, const GridField& f) {
  std::ofstream out(path);
  require(out.good(), errc::invalid_argument, "cannot open " + path);
  out << "x,y,value\n";
  char buf[96];
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", g.x(i), g.y(j),
                    f[g.idx(i, j)]);
      out << buf;
    }
}

// Compact binary field format, little-endian:
//   bytes 0-3   magic "GRDF"
//   bytes 4-5   u16 nx
//   bytes 6-7   u16 ny
//   bytes 8-15  f64 x0
//   bytes 16-23 f64 y0
//   bytes 24-31 f64 h
// followed by nx*ny f64 node values, row-major (j outer, i inner).
inline void write_grdf(const std::string& path, const Grid2D& g, const GridField& f) {
  require(g.nx <= 65535 && g.ny <= 65535, errc::invalid_argument, "grid too large for GRDF");
  std::ofstream out(path, std::ios::binary);
  require(out.good(), errc::invalid_argument, "cannot open " + path);
  char header[32] = {'G', 'R', 'D', 'F'};
  const std::uint16_t nx = static_cast<std::uint16_t>(g.nx);
  const std::uint16_t ny = static_cast<std::uint16_t>(g.ny);
  std::memcpy(header + 4, &nx, 2);
  std::memcpy(header + 6, &ny, 2);
  std::memcpy(header + 8, &g.x0, 8);
  std::memcpy(header + 16, &g.y0, 8);
  std::memcpy(header + 24, &g.h, 8);
  out.write(header, 32);
  out.write(reinterpret_cast<const char*>(f.v.data()),
            static_cast<std::streamsize>(f.v.size() * sizeof(double)));
}

inline std::pair<Grid2D, GridField> read_grdf(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), errc::invalid_argument, "cannot open " + path);
  char header[32];
  in.read(header, 32);
  require(in.gcount() == 32 && std::memcmp(header, "GRDF", 4) == 0, errc::invalid_argument,
          "not a GRDF file");
  std::uint16_t nx, ny;
  double x0, y0, h;
  std::memcpy(&nx, header + 4, 2);
  std::memcpy(&ny, header + 6, 2);
  std::memcpy(&x0, header + 8, 8);
  std::memcpy(&y0, header + 16, 8);
  std::memcpy(&h, header + 24, 8);
  Grid2D g;
  g.nx = nx;
  g.ny = ny;
  g.x0 = x0;
  g.y0 = y0;
  g.h = h;
  g.x1 = x0 + h * (nx - 1);
  g.y1 = y0 + h * (ny - 1);
  GridField f;
  f.nx = nx;
  f.ny = ny;
  f.v.resize(g.n_nodes());
  in.read(reinterpret_cast<char*>(f.v.data()),
          static_cast<std::streamsize>(f.v.size() * sizeof(double)));
  require(static_cast<std::size_t>(in.gcount()) == f.v.size() * sizeof(double),
          errc::invalid_argument, "GRDF payload truncated");
  return {g, f};
}

}  // namespace nrcap
