#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "nrcap/common.hpp"
#include "nrcap/grid.hpp"
#include "nrcap/kramers.hpp"
#include "nrcap/potential.hpp"
#include "nrcap/spectral.hpp"

namespace nrcap {

// Discrete flows live on oriented edges (+x, +y). Ψ_f is the symmetric-part
// flow (eps/Z) e^{-U/eps} S grad f; the antisymmetric part, built from the
// same plaquette superposition as the generator, makes div(Φ*_f) equal
// m (L_h f) / (Z h^2) node by node, and div(Φ_f) the adjoint counterpart.
inline GridFlow make_psi(const GridField& f, const GridOperators& ops, double Z) {
  const Grid2D& g = ops.grid;
  GridFlow w(g);
  const double c = ops.eps / (Z * g.h);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx - 1; ++i)
      w.fx[g.xedge(i, j)] =
          c * ops.wx[g.xedge(i, j)] * ops.S00 * (f[g.idx(i + 1, j)] - f[g.idx(i, j)]);
  for (int j = 0; j < g.ny - 1; ++j)
    for (int i = 0; i < g.nx; ++i)
      w.fy[g.yedge(i, j)] =
          c * ops.wy[g.yedge(i, j)] * ops.S11 * (f[g.idx(i, j + 1)] - f[g.idx(i, j)]);
  return w;
}

namespace detail {

// Antisymmetric flow component, assembled per plaquette so that it vanishes
// on constants and div(make_phi_star(f)) m-matches apply_mL(f, +1) exactly:
// each cell spreads theta times the transverse node-sum difference onto both
// parallel edge pairs.
inline void add_antisym(GridFlow& w, const GridField& f, const GridOperators& ops, double Z,
                        double sign) {
  const Grid2D& g = ops.grid;
  const double c = sign * ops.eps / (2.0 * Z * g.h);
  for (int cj = 0; cj < g.ny - 1; ++cj)
    for (int ci = 0; ci < g.nx - 1; ++ci) {
      const double coef = c * ops.theta[static_cast<std::size_t>(cj) * (g.nx - 1) + ci];
      const double f1 = f[g.idx(ci, cj)], f2 = f[g.idx(ci + 1, cj)];
      const double f3 = f[g.idx(ci + 1, cj + 1)], f4 = f[g.idx(ci, cj + 1)];
      const double vx = coef * ((f1 + f2) - (f3 + f4));
      const double vy = coef * ((f2 + f3) - (f1 + f4));
      w.fx[g.xedge(ci, cj)] += vx;
      w.fx[g.xedge(ci, cj + 1)] += vx;
      w.fy[g.yedge(ci, cj)] += vy;
      w.fy[g.yedge(ci + 1, cj)] += vy;
    }
}

}  // namespace detail

inline GridFlow make_phi(const GridField& f, const GridOperators& ops, double Z) {
  GridFlow w = make_psi(f, ops, Z);
  detail::add_antisym(w, f, ops, Z, -1.0);  // M-transpose flow, div ~ L* f
  return w;
}

inline GridFlow make_phi_star(const GridField& f, const GridOperators& ops, double Z) {
  GridFlow w = make_psi(f, ops, Z);
  detail::add_antisym(w, f, ops, Z, +1.0);  // M flow, div ~ L f
  return w;
}

inline GridFlow flow_axpy(double alpha, const GridFlow& x, const GridFlow& y) {
  GridFlow w = y;
  for (std::size_t e = 0; e < w.fx.size(); ++e) w.fx[e] += alpha * x.fx[e];
  for (std::size_t e = 0; e < w.fy.size(); ++e) w.fy[e] += alpha * x.fy[e];
  return w;
}

inline GridField divergence(const GridFlow& w, const Grid2D& g) {
  GridField d(g);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx - 1; ++i) {
      const double v = w.fx[g.xedge(i, j)];
      d[g.idx(i, j)] += v / g.h;      // tail
      d[g.idx(i + 1, j)] -= v / g.h;  // head
    }
  for (int j = 0; j < g.ny - 1; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const double v = w.fy[g.yedge(i, j)];
      d[g.idx(i, j)] += v / g.h;
      d[g.idx(i, j + 1)] -= v / g.h;
    }
  return d;
}

// Net outflow of the flow from A, as the signed sum over cut edges.
inline double flux_A(const GridFlow& w, const Grid2D& g, const RegionMask& mask) {
  double s = 0.0;
  auto inA = [&](std::size_t n) { return mask.is(n, Region::A); };
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx - 1; ++i) {
      const bool t = inA(g.idx(i, j)), h = inA(g.idx(i + 1, j));
      if (t && !h) s += w.fx[g.xedge(i, j)];
      if (!t && h) s -= w.fx[g.xedge(i, j)];
    }
  for (int j = 0; j < g.ny - 1; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const bool t = inA(g.idx(i, j)), h = inA(g.idx(i, j + 1));
      if (t && !h) s += w.fy[g.yedge(i, j)];
      if (!t && h) s -= w.fy[g.yedge(i, j)];
    }
  return s * g.h;
}

// (Z/eps) h^2 sum_e phi_e^2 e^{+U_e/eps} / S_dd, the dual Dirichlet energy.
// energy(Ψ_f) reproduces the Dirichlet form of f edge by edge.
inline double energy_norm(const GridFlow& w, const GridOperators& ops, double Z) {
  const Grid2D& g = ops.grid;
  double s = 0.0;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx - 1; ++i) {
      const double v = w.fx[g.xedge(i, j)];
      if (v == 0.0) continue;
      s += std::exp(2.0 * std::log(std::abs(v)) + ops.Uxe[g.xedge(i, j)] / ops.eps) / ops.S00;
    }
  for (int j = 0; j < g.ny - 1; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const double v = w.fy[g.yedge(i, j)];
      if (v == 0.0) continue;
      s += std::exp(2.0 * std::log(std::abs(v)) + ops.Uye[g.yedge(i, j)] / ops.eps) / ops.S11;
    }
  return s * Z * g.h * g.h / ops.eps;
}

struct Feasibility {
  double div_defect = 0.0;       // h * max_Omega |div|
  double flux_defect = 0.0;      // |flux_A - class target|
  double boundary_defect = 0.0;  // deviation of f from its boundary data
  double scale = 0.0;            // max |phi_e| over phi and Phi_f
};

struct BoundCertificate {
  std::string kind;  // "dirichlet" or "thomson"
  double value = 0.0;
  Feasibility feasibility;
  std::vector<std::string> warnings;
  std::string inputs_digest;
};

namespace detail {

inline std::string digest_inputs(const GridField& f, const GridFlow& w,
                                 const GridOperators& ops, double Z) {
  std::uint64_t h = fnv1a64(f.v.data(), f.v.size() * sizeof(double));
  h = fnv1a64(w.fx.data(), w.fx.size() * sizeof(double), h);
  h = fnv1a64(w.fy.data(), w.fy.size() * sizeof(double), h);
  const double params[5] = {ops.eps, Z, ops.S00, ops.S11, ops.a};
  h = fnv1a64(params, sizeof params, h);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline double flow_abs_max(const GridFlow& w) {
  double m = 0.0;
  for (double v : w.fx) m = std::max(m, std::abs(v));
  for (double v : w.fy) m = std::max(m, std::abs(v));
  return m;
}

inline BoundCertificate make_certificate(const char* kind, const GridField& f,
                                         const GridFlow& phi, const GridOperators& ops,
                                         const RegionMask& mask, double Z, double flux_target,
                                         bool strict) {
  const Grid2D& g = ops.grid;
  BoundCertificate cert;
  cert.kind = kind;
  cert.inputs_digest = digest_inputs(f, phi, ops, Z);

  const GridFlow phi_f = make_phi(f, ops, Z);
  cert.feasibility.scale = std::max(flow_abs_max(phi), flow_abs_max(phi_f));

  const GridField div = divergence(phi, g);
  double dmax = 0.0;
  for (std::size_t n = 0; n < g.n_nodes(); ++n)
    if (mask.is(n, Region::Omega)) dmax = std::max(dmax, std::abs(div[n]));
  cert.feasibility.div_defect = g.h * dmax;
  cert.feasibility.flux_defect = std::abs(flux_A(phi, g, mask) - flux_target);

  double bdef = 0.0;
  if (std::string(kind) == "dirichlet") {
    for (std::size_t n = 0; n < g.n_nodes(); ++n) {
      if (mask.is(n, Region::A)) bdef = std::max(bdef, std::abs(f[n] - 1.0));
      if (mask.is(n, Region::B)) bdef = std::max(bdef, std::abs(f[n]));
    }
  } else {
    double sA = 0.0, sB = 0.0;
    std::size_t nA = 0, nB = 0;
    for (std::size_t n = 0; n < g.n_nodes(); ++n) {
      if (mask.is(n, Region::A)) {
        sA += f[n];
        ++nA;
      } else if (mask.is(n, Region::B)) {
        sB += f[n];
        ++nB;
      }
    }
    const double cA = sA / nA, cB = sB / nB;
    for (std::size_t n = 0; n < g.n_nodes(); ++n) {
      if (mask.is(n, Region::A)) bdef = std::max(bdef, std::abs(f[n] - cA));
      if (mask.is(n, Region::B)) bdef = std::max(bdef, std::abs(f[n] - cB));
    }
  }
  cert.feasibility.boundary_defect = bdef;

  const double scale = std::max(cert.feasibility.scale, 1e-300);
  const double flux_scale = std::max(scale, std::abs(flux_target));
  auto judge = [&](double defect, double thr_scale, const char* what) {
    if (defect > 1e-6 * thr_scale) {
      const std::string msg = std::string(what) + " defect " + std::to_string(defect) +
                              " exceeds feasible tolerance";
      if (strict) fail(errc::infeasible_flow, msg);
      cert.warnings.push_back(msg);
    } else if (defect > 1e-8 * thr_scale) {
      cert.warnings.push_back(std::string(what) + " defect " + std::to_string(defect) +
                              " is marginal");
    }
  };
  judge(cert.feasibility.div_defect, scale, "divergence");
  judge(cert.feasibility.flux_defect, flux_scale, "flux");
  if (bdef > 1e-12) {
    const std::string msg =
        "boundary defect " + std::to_string(bdef) + " exceeds 1e-12";
    if (strict) fail(errc::infeasible_flow, msg);
    cert.warnings.push_back(msg);
  }

  const GridFlow diff = flow_axpy(-1.0, phi, phi_f);
  const double energy = energy_norm(diff, ops, Z);
  if (std::string(kind) == "dirichlet") {
    cert.value = energy;
  } else {
    require(energy > 0.0, errc::zero_energy, "dual energy vanished: no lower bound");
    cert.value = 1.0 / energy;
  }
  return cert;
}

}  // namespace detail

// Upper bound: cap <= energy(Φ_f - phi) for f with equilibrium boundary data
// and phi divergence-free off A and B with zero net flux.
inline BoundCertificate dirichlet_bound(const GridField& f, const GridFlow& phi,
                                        const GridOperators& ops, const RegionMask& mask,
                                        double Z, bool strict = true) {
  return detail::make_certificate("dirichlet", f, phi, ops, mask, Z, 0.0, strict);
}

// Lower bound: cap >= 1 / energy(Φ_f - phi) for phi with unit flux through A.
inline BoundCertificate thomson_bound(const GridField& f, const GridFlow& phi,
                                      const GridOperators& ops, const RegionMask& mask,
                                      double Z, bool strict = true) {
  return detail::make_certificate("thomson", f, phi, ops, mask, Z, 1.0, strict);
}

struct VariationalPair {
  GridField f;
  GridFlow phi;
};

// f = (h + h*)/2 and phi = Φ_f - Ψ_h make the upper bound sharp: the
// certificate energy collapses to energy(Ψ_h), the capacity itself.
inline VariationalPair optimal_dirichlet_inputs(const GridField& h, const GridField& h_star,
                                                const GridOperators& ops, double Z) {
  VariationalPair p;
  p.f = GridField(ops.grid);
  for (std::size_t n = 0; n < ops.grid.n_nodes(); ++n)
    p.f[n] = 0.5 * (h[n] + h_star[n]);
  const GridFlow phi_f = make_phi(p.f, ops, Z);
  const GridFlow psi_h = make_psi(h, ops, Z);
  p.phi = flow_axpy(-1.0, psi_h, phi_f);
  return p;
}

// f = (h - h*)/(2 cap) and phi = Φ_f - Ψ_h/cap make the lower bound sharp.
inline VariationalPair optimal_thomson_inputs(const GridField& h, const GridField& h_star,
                                              const GridOperators& ops, double cap, double Z) {
  require(cap > 0.0, errc::invalid_argument, "capacity must be positive");
  VariationalPair p;
  p.f = GridField(ops.grid);
  for (std::size_t n = 0; n < ops.grid.n_nodes(); ++n)
    p.f[n] = (h[n] - h_star[n]) / (2.0 * cap);
  const GridFlow phi_f = make_phi(p.f, ops, Z);
  GridFlow psi_h = make_psi(h, ops, Z);
  for (double& v : psi_h.fx) v /= cap;
  for (double& v : psi_h.fy) v /= cap;
  p.phi = flow_axpy(-1.0, psi_h, phi_f);
  return p;
}

// Gauss-Legendre nodes and weights on [-1, 1].
namespace detail {

inline void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.resize(n);
  w.resize(n);
  for (int k = 0; k < (n + 1) / 2; ++k) {
    double t = std::cos(M_PI * (k + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = t;
      for (int j = 2; j <= n; ++j) {
        const double p2 = ((2.0 * j - 1.0) * t * p1 - (j - 1.0) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (t * p1 - p0) / (t * t - 1.0);
      const double dt = p1 / dp;
      t -= dt;
      if (std::abs(dt) < 1e-15) break;
    }
    x[k] = -t;
    x[n - 1 - k] = t;
    w[k] = w[n - 1 - k] = 2.0 / ((1.0 - t * t) * dp * dp);
  }
}

}  // namespace detail

struct SaddleBoxQuadrature {
  double integral = 0.0;  // int_{B_eps} grad p . M grad p e^{-(U-H)/eps} dx
  double omega = 0.0;     // predicted limit (2 pi eps)^{d/2-1} omega, d = 2
  double ratio = 0.0;
  double delta = 0.0;
};

// Quadrature check of the Gaussian committor profile through the saddle box:
// p = Phi(sign * (x - sigma).v sqrt(alpha/eps)). The inner integration bounds
// follow the sublevel cut {U < H + |lambda1| delta^2 / 4} by bisection, so the
// integrand stays smooth on every stripe.
inline SaddleBoxQuadrature saddle_box_quadrature(const PotentialSpec& p,
                                                 const SaddleAnalysis& sa,
                                                 const DriftMatrix& drift, double eps,
                                                 double K = 2.0, int n_nodes = 96) {
  require(p.dimension == 2, errc::dimension_unsupported, "saddle quadrature is 2D");
  require(eps > 0.0 && eps < 1.0, errc::invalid_argument, "need 0 < eps < 1");
  require(K >= 1.0, errc::invalid_config, "saddle box needs K >= 1");

  SaddleBoxQuadrature out;
  out.delta = K * std::sqrt(eps * std::log(1.0 / eps));
  out.omega = sa.omega;

  Eigen::SelfAdjointEigenSolver<Mat> es(sa.L);
  const Mat E = es.eigenvectors();
  const double l1 = sa.lambda(0), l2 = sa.lambda(1);
  const double H = p.value(sa.sigma);
  const double thresh = H + 0.25 * std::abs(l1) * out.delta * out.delta;
  const double z2max = std::sqrt(2.0 * std::abs(l1) / l2) * out.delta;

  const double vMv = sa.v.dot(drift.M * sa.v);
  const double C2 = 2.0 * M_PI * eps / sa.alpha;

  auto U_at = [&](double z1, double z2) {
    const Vec x = sa.sigma + E.col(0) * z1 + E.col(1) * z2;
    return p.value(x);
  };
  auto integrand = [&](double z1, double z2) {
    const Vec x = sa.sigma + E.col(0) * z1 + E.col(1) * z2;
    const double t = (x - sa.sigma).dot(sa.v);
    return (vMv / C2) * std::exp(-sa.alpha * t * t / eps) *
           std::exp(-(p.value(x) - H) / eps);
  };

  std::vector<double> gx, gw;
  detail::gauss_legendre(n_nodes, gx, gw);

  double total = 0.0;
  for (int k = 0; k < n_nodes; ++k) {
    const double z1 = out.delta * gx[k];
    if (U_at(z1, 0.0) >= thresh) continue;
    // bracket the cut on each side of the stripe
    auto cut = [&](double dir) {
      double lo = 0.0, hi = z2max;
      if (U_at(z1, dir * hi) < thresh) return hi;
      for (int it = 0; it < 80; ++it) {
        const double mid = 0.5 * (lo + hi);
        (U_at(z1, dir * mid) < thresh ? lo : hi) = mid;
      }
      return 0.5 * (lo + hi);
    };
    const double zneg = cut(-1.0), zpos = cut(+1.0);
    // map [-1,1] -> [-zneg, zpos]
    const double half = 0.5 * (zpos + zneg), center = 0.5 * (zpos - zneg);
    double inner = 0.0;
    for (int kk = 0; kk < n_nodes; ++kk)
      inner += gw[kk] * integrand(z1, center + half * gx[kk]);
    total += gw[k] * out.delta * inner * half;
  }
  out.integral = total;
  require(out.omega > 0.0, errc::invalid_argument, "omega must be positive");
  out.ratio = out.integral / out.omega;  // (2 pi eps)^{d/2 - 1} = 1 for d = 2
  return out;
}

enum class PackClass : std::uint8_t { SaddleBox = 0, Well1 = 1, Well2 = 2, Other = 3, Exterior = 4 };

struct SaddleTestPack {
  GridField p_eps;       // Gaussian committor profile for L
  GridField p_star_eps;  // adjoint profile for L*
  GridField f;           // smoothed (p + p*)/2
  GridFlow phi;          // (Theta_{q*} - Theta*_q)/2 from the analytic gradients
  std::vector<std::uint8_t> cls;
  double delta = 0.0;
  double threshold = 0.0;  // H + |lambda1| delta^2 / 4
  double K = 0.0;
  int eta_cells = 0;
};

// Test pair concentrated at the gate: Gaussian committor profiles through the
// saddle box (continued outside the sublevel set), hard 1/0 on the well
// components, a few rounds of seam-shell averaging standing in for the
// mollifier, and the correction flow from the box-supported q-flows.
inline SaddleTestPack build_saddle_pack(const PotentialSpec& p, const Landscape& ls,
                                        const SaddleAnalysis& sa, const DriftMatrix& drift,
                                        const GridOperators& ops, double Z, double K = 1.5,
                                        int eta_cells = 2) {
  const Grid2D& g = ops.grid;
  const double eps = ops.eps;
  require(eps > 0.0 && eps < 1.0, errc::invalid_argument, "need 0 < eps < 1");
  require(K >= 1.0, errc::invalid_config, "saddle box needs K >= 1");

  SaddleTestPack pack;
  pack.K = K;
  pack.eta_cells = eta_cells;
  pack.delta = K * std::sqrt(eps * std::log(1.0 / eps));
  require(g.h <= pack.delta / 8.0, errc::resolution_too_coarse,
          "grid does not resolve the saddle box: need h <= delta/8");

  Eigen::SelfAdjointEigenSolver<Mat> es(sa.L);
  const Mat E = es.eigenvectors();
  const double l1 = sa.lambda(0), l2 = sa.lambda(1);
  const double H = p.value(sa.sigma);
  pack.threshold = H + 0.25 * std::abs(l1) * pack.delta * pack.delta;
  const double z2max = std::sqrt(2.0 * std::abs(l1) / l2) * pack.delta;

  auto side_sign = [&](const Vec& dir) {
    const double side = (ls.m1.location - sa.sigma).dot(dir);
    require(std::abs(side) > 1e-10, errc::sign_normalization,
            "well separation is orthogonal to the saddle direction");
    return side > 0.0 ? 1.0 : -1.0;
  };
  const double s = side_sign(sa.v);
  const double s_star = side_sign(sa.v_star);

  // classify nodes
  pack.cls.assign(g.n_nodes(), static_cast<std::uint8_t>(PackClass::Exterior));
  std::vector<char> open(g.n_nodes(), 0);  // Omega_eps minus B_eps
  Vec xv(2);
  std::vector<double> Uval(g.n_nodes());
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const std::size_t n = g.idx(i, j);
      xv(0) = g.x(i);
      xv(1) = g.y(j);
      Uval[n] = ops.Un[n];
      const bool in_omega = Uval[n] < pack.threshold;
      if (!in_omega) continue;
      const Vec d = xv - sa.sigma;
      const double z1 = E.col(0).dot(d), z2 = E.col(1).dot(d);
      const bool in_box = std::abs(z1) <= pack.delta && std::abs(z2) <= z2max;
      if (in_box)
        pack.cls[n] = static_cast<std::uint8_t>(PackClass::SaddleBox);
      else
        open[n] = 1;
    }
  auto node_of = [&](const Vec& loc) {
    const int i = static_cast<int>(std::lround((loc(0) - g.x0) / g.h));
    const int j = static_cast<int>(std::lround((loc(1) - g.y0) / g.h));
    require(i >= 0 && i < g.nx && j >= 0 && j < g.ny, errc::invalid_argument,
            "well minimum is outside the grid");
    return g.idx(i, j);
  };
  const std::size_t n1 = node_of(ls.m1.location), n2 = node_of(ls.m2.location);
  require(open[n1] && open[n2], errc::disconnected_wells,
          "a well minimum is not in the open sublevel set: shrink K or eps");
  const auto w1 = detail::flood(g, open, n1);
  require(!w1[n2], errc::disconnected_wells,
          "saddle box does not separate the wells: increase K");
  const auto w2 = detail::flood(g, open, n2);
  for (std::size_t n = 0; n < g.n_nodes(); ++n) {
    if (w1[n])
      pack.cls[n] = static_cast<std::uint8_t>(PackClass::Well1);
    else if (w2[n])
      pack.cls[n] = static_cast<std::uint8_t>(PackClass::Well2);
    else if (open[n])
      pack.cls[n] = static_cast<std::uint8_t>(PackClass::Other);
  }

  // Gaussian profile on the box and the exterior, 1/0 overrides on the wells
  auto profile = [&](const Vec& dir, double alpha, double sgn) {
    GridField field(g);
    Vec x(2);
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        const std::size_t n = g.idx(i, j);
        switch (static_cast<PackClass>(pack.cls[n])) {
          case PackClass::Well1:
            field[n] = 1.0;
            break;
          case PackClass::Well2:
          case PackClass::Other:
            field[n] = 0.0;
            break;
          default: {
            x(0) = g.x(i);
            x(1) = g.y(j);
            const double t = sgn * (x - sa.sigma).dot(dir) * std::sqrt(alpha / eps);
            field[n] = normal_cdf(t);
          }
        }
      }
    return field;
  };
  pack.p_eps = profile(sa.v, sa.alpha, s);
  pack.p_star_eps = profile(sa.v_star, sa.alpha_star, s_star);

  // smooth across classification seams within eta_cells graph distance
  std::vector<int> dist(g.n_nodes(), -1);
  std::queue<std::size_t> q;
  auto differs = [&](std::size_t u, std::size_t v) { return pack.cls[u] != pack.cls[v]; };
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const std::size_t n = g.idx(i, j);
      const bool seam = (i + 1 < g.nx && differs(n, g.idx(i + 1, j))) ||
                        (i > 0 && differs(n, g.idx(i - 1, j))) ||
                        (j + 1 < g.ny && differs(n, g.idx(i, j + 1))) ||
                        (j > 0 && differs(n, g.idx(i, j - 1)));
      if (seam) {
        dist[n] = 0;
        q.push(n);
      }
    }
  while (!q.empty()) {
    const std::size_t u = q.front();
    q.pop();
    if (dist[u] >= eta_cells) continue;
    const int i = static_cast<int>(u % g.nx), j = static_cast<int>(u / g.nx);
    const int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
    for (int k = 0; k < 4; ++k) {
      const int ii = i + di[k], jj = j + dj[k];
      if (ii < 0 || ii >= g.nx || jj < 0 || jj >= g.ny) continue;
      const std::size_t w = g.idx(ii, jj);
      if (dist[w] < 0) {
        dist[w] = dist[u] + 1;
        q.push(w);
      }
    }
  }
  auto smooth = [&](GridField& field) {
    for (int round = 0; round < eta_cells; ++round) {
      GridField next = field;
      for (int j = 0; j < g.ny; ++j)
        for (int i = 0; i < g.nx; ++i) {
          const std::size_t n = g.idx(i, j);
          if (dist[n] < 0) continue;
          double sum = field[n];
          int cnt = 1;
          if (i + 1 < g.nx) {
            sum += field[g.idx(i + 1, j)];
            ++cnt;
          }
          if (i > 0) {
            sum += field[g.idx(i - 1, j)];
            ++cnt;
          }
          if (j + 1 < g.ny) {
            sum += field[g.idx(i, j + 1)];
            ++cnt;
          }
          if (j > 0) {
            sum += field[g.idx(i, j - 1)];
            ++cnt;
          }
          next[n] = sum / cnt;
        }
      field = next;
    }
  };
  smooth(pack.p_eps);
  smooth(pack.p_star_eps);
  pack.f = GridField(g);
  for (std::size_t n = 0; n < g.n_nodes(); ++n)
    pack.f[n] = 0.5 * (pack.p_eps[n] + pack.p_star_eps[n]);

  // correction flow phi = (Theta_{q*} - Theta*_q)/2 with the q-flows equal to
  // the analytic profile gradients on the saddle box and zero elsewhere
  pack.phi = GridFlow(g);
  auto grad_profile = [&](const Vec& x, const Vec& dir, double alpha, double sgn) -> Vec {
    const double t = sgn * (x - sa.sigma).dot(dir) * std::sqrt(alpha / eps);
    const double pdf = std::exp(-0.5 * t * t) / std::sqrt(2.0 * M_PI);
    return (sgn * std::sqrt(alpha / eps) * pdf) * dir;
  };
  auto in_box = [&](const Vec& x) {
    if (p.value(x) >= pack.threshold) return false;
    const Vec d = x - sa.sigma;
    const double z1 = E.col(0).dot(d), z2 = E.col(1).dot(d);
    return std::abs(z1) <= pack.delta && std::abs(z2) <= z2max;
  };
  auto phi_at = [&](const Vec& x, int component) {
    if (!in_box(x)) return 0.0;
    const Vec q = grad_profile(x, sa.v, sa.alpha, s);
    const Vec q_star = grad_profile(x, sa.v_star, sa.alpha_star, s_star);
    const Vec v = 0.5 * (drift.M.transpose() * q_star - drift.M * q);
    return (eps / Z) * std::exp(-p.value(x) / eps) * v(component);
  };
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx - 1; ++i) {
      xv(0) = g.x(i) + 0.5 * g.h;
      xv(1) = g.y(j);
      pack.phi.fx[g.xedge(i, j)] = phi_at(xv, 0);
    }
  for (int j = 0; j < g.ny - 1; ++j)
    for (int i = 0; i < g.nx; ++i) {
      xv(0) = g.x(i);
      xv(1) = g.y(j) + 0.5 * g.h;
      pack.phi.fy[g.yedge(i, j)] = phi_at(xv, 1);
    }
  return pack;
}

}  // namespace nrcap
