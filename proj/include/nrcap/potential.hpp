#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <queue>
#include <string>
#include <vector>

#include "nrcap/common.hpp"

namespace nrcap {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// A polynomial term c * prod_k x_k^p_k; the config-supplied potential form.
struct PolyTerm {
  double coeff = 0.0;
  std::vector<int> powers;
};

struct PotentialSpec {
  std::string name;
  int dimension = 2;
  std::map<std::string, double> params;

  std::function<double(const Vec&)> U;
  std::function<Vec(const Vec&)> grad;   // empty: central differences
  std::function<Mat(const Vec&)> hess;   // empty: differences of gradient

  // Domain box (x0, x1, y0, y1, ...) and Newton seeds; carried from config.
  std::vector<double> box;
  std::vector<Vec> seeds;

  double value(const Vec& x) const { return U(x); }

  static double fd_step(const Vec& x) { return 1e-5 * (1.0 + x.norm()); }

  Vec gradient(const Vec& x) const {
    if (grad) return grad(x);
    const double h = fd_step(x);
    Vec g(x.size());
    Vec xp = x, xm = x;
    for (int k = 0; k < x.size(); ++k) {
      xp(k) += h;
      xm(k) -= h;
      g(k) = (U(xp) - U(xm)) / (2.0 * h);
      xp(k) = x(k);
      xm(k) = x(k);
    }
    return g;
  }

  Mat hessian(const Vec& x) const {
    Mat H;
    if (hess) {
      H = hess(x);
    } else {
      const double h = fd_step(x);
      const int d = static_cast<int>(x.size());
      H.resize(d, d);
      Vec xp = x, xm = x;
      for (int k = 0; k < d; ++k) {
        xp(k) += h;
        xm(k) -= h;
        H.col(k) = (gradient(xp) - gradient(xm)) / (2.0 * h);
        xp(k) = x(k);
        xm(k) = x(k);
      }
    }
    return 0.5 * (H + H.transpose());
  }
};

inline PotentialSpec make_quartic2d() {
  PotentialSpec p;
  p.name = "quartic2d";
  p.dimension = 2;
  p.U = [](const Vec& x) {
    const double q = x(0) * x(0) - 1.0;
    return 0.25 * q * q + 0.5 * x(1) * x(1);
  };
  p.grad = [](const Vec& x) {
    Vec g(2);
    g(0) = x(0) * (x(0) * x(0) - 1.0);
    g(1) = x(1);
    return g;
  };
  p.hess = [](const Vec& x) {
    Mat H = Mat::Zero(2, 2);
    H(0, 0) = 3.0 * x(0) * x(0) - 1.0;
    H(1, 1) = 1.0;
    return H;
  };
  p.box = {-2.0, 2.0, -1.5, 1.5};
  p.seeds = {Vec{{-1.0, 0.0}}, Vec{{1.0, 0.0}}, Vec{{0.0, 0.0}}};
  return p;
}

inline PotentialSpec make_tilted(double t = 0.1) {
  PotentialSpec p = make_quartic2d();
  p.name = "tilted";
  p.params["tilt"] = t;
  p.U = [t](const Vec& x) {
    const double q = x(0) * x(0) - 1.0;
    return 0.25 * q * q + 0.5 * x(1) * x(1) + t * x(0);
  };
  p.grad = [t](const Vec& x) {
    Vec g(2);
    g(0) = x(0) * (x(0) * x(0) - 1.0) + t;
    g(1) = x(1);
    return g;
  };
  return p;
}

inline PotentialSpec make_polynomial(int dimension, const std::vector<PolyTerm>& terms,
                                     std::string name = "poly") {
  for (const auto& t : terms)
    require(static_cast<int>(t.powers.size()) == dimension, errc::invalid_config,
            "polynomial term arity does not match dimension");
  PotentialSpec p;
  p.name = std::move(name);
  p.dimension = dimension;
  auto powi = [](double x, int n) {
    double r = 1.0;
    for (int i = 0; i < n; ++i) r *= x;
    return r;
  };
  p.U = [terms, powi](const Vec& x) {
    double s = 0.0;
    for (const auto& t : terms) {
      double m = t.coeff;
      for (std::size_t k = 0; k < t.powers.size(); ++k) m *= powi(x(k), t.powers[k]);
      s += m;
    }
    return s;
  };
  p.grad = [terms, powi](const Vec& x) {
    Vec g = Vec::Zero(x.size());
    for (const auto& t : terms)
      for (int j = 0; j < x.size(); ++j) {
        if (t.powers[j] == 0) continue;
        double m = t.coeff * t.powers[j];
        for (int k = 0; k < x.size(); ++k)
          m *= powi(x(k), k == j ? t.powers[k] - 1 : t.powers[k]);
        g(j) += m;
      }
    return g;
  };
  p.hess = [terms, powi](const Vec& x) {
    const int d = static_cast<int>(x.size());
    Mat H = Mat::Zero(d, d);
    for (const auto& t : terms)
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
          if (i == j ? t.powers[i] < 2 : (t.powers[i] < 1 || t.powers[j] < 1)) continue;
          double m = t.coeff;
          m *= (i == j) ? t.powers[i] * (t.powers[i] - 1) : t.powers[i] * t.powers[j];
          for (int k = 0; k < d; ++k) {
            int pw = t.powers[k];
            if (k == i) pw -= 1;
            if (k == j) pw -= 1;
            m *= powi(x(k), pw);
          }
          H(i, j) += m;
        }
    return H;
  };
  return p;
}

enum class CritKind { minimum, saddle, other };

inline const char* crit_kind_name(CritKind k) {
  switch (k) {
    case CritKind::minimum: return "minimum";
    case CritKind::saddle: return "saddle";
    case CritKind::other: return "other";
  }
  return "other";
}

struct CriticalPoint {
  Vec location;
  CritKind kind = CritKind::other;
  Vec hessian_eigenvalues;  // ascending
  double value = 0.0;
};

// Newton refinement of grad U = 0 from each seed. Seeds that fail to converge
// within max_iter are dropped with a warning; converged duplicates within the
// merge radius coalesce. A converged point with a near-zero Hessian eigenvalue
// (relative to the largest magnitude) is a hard error.
inline std::vector<CriticalPoint> find_critical_points(
    const PotentialSpec& p, const std::vector<Vec>& seeds, double newton_tol = 1e-10,
    std::vector<std::string>* warnings = nullptr, double degeneracy_tol = 1e-8,
    double merge_radius = 1e-6, int max_iter = 100) {
  std::vector<CriticalPoint> out;
  for (const auto& seed : seeds) {
    Vec x = seed;
    bool converged = p.gradient(x).norm() <= newton_tol;
    for (int it = 0; it < max_iter && !converged; ++it) {
      Eigen::FullPivLU<Mat> lu(p.hessian(x));
      if (!lu.isInvertible()) break;
      x -= lu.solve(p.gradient(x));
      if (!x.allFinite()) break;
      converged = p.gradient(x).norm() <= newton_tol;
    }
    if (!converged) {
      if (warnings)
        warnings->push_back("Newton did not converge from seed, dropping it");
      continue;
    }
    bool duplicate = false;
    for (const auto& cp : out)
      if ((cp.location - x).norm() < merge_radius) {
        duplicate = true;
        break;
      }
    if (duplicate) continue;

    CriticalPoint cp;
    cp.location = x;
    cp.value = p.value(x);
    Eigen::SelfAdjointEigenSolver<Mat> es(p.hessian(x));
    cp.hessian_eigenvalues = es.eigenvalues();
    const double scale = cp.hessian_eigenvalues.cwiseAbs().maxCoeff();
    const double tol = degeneracy_tol * std::max(scale, 1e-300);
    int neg = 0, pos = 0;
    for (int k = 0; k < cp.hessian_eigenvalues.size(); ++k) {
      const double ev = cp.hessian_eigenvalues(k);
      if (std::abs(ev) < tol)
        fail(errc::degenerate_hessian, "near-zero Hessian eigenvalue at a critical point");
      (ev < 0 ? neg : pos)++;
    }
    if (neg == 0)
      cp.kind = CritKind::minimum;
    else if (neg == 1)
      cp.kind = CritKind::saddle;
    else
      cp.kind = CritKind::other;
    out.push_back(std::move(cp));
  }
  return out;
}

struct Landscape {
  PotentialSpec potential;
  CriticalPoint m1, m2;  // U(m1) = h1 >= h2 = U(m2)
  std::vector<CriticalPoint> gates;
  double h1 = 0.0, h2 = 0.0, H = 0.0;
};

namespace detail {

// Connectivity of {U < level} between a and b, 4-neighbour flood fill on an
// nx-by-ny node grid over box.
inline bool sublevel_connected(const PotentialSpec& p, const std::array<double, 4>& box,
                               double level, const Vec& a, const Vec& b, int nx, int ny) {
  const double hx = (box[1] - box[0]) / (nx - 1);
  const double hy = (box[3] - box[2]) / (ny - 1);
  std::vector<char> open(static_cast<std::size_t>(nx) * ny, 0);
  Vec x(2);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      x(0) = box[0] + i * hx;
      x(1) = box[2] + j * hy;
      open[static_cast<std::size_t>(j) * nx + i] = p.value(x) < level ? 1 : 0;
    }
  auto node_of = [&](const Vec& q) {
    int i = static_cast<int>(std::lround((q(0) - box[0]) / hx));
    int j = static_cast<int>(std::lround((q(1) - box[2]) / hy));
    i = std::clamp(i, 0, nx - 1);
    j = std::clamp(j, 0, ny - 1);
    return std::pair<int, int>(i, j);
  };
  auto [ai, aj] = node_of(a);
  auto [bi, bj] = node_of(b);
  const std::size_t start = static_cast<std::size_t>(aj) * nx + ai;
  const std::size_t goal = static_cast<std::size_t>(bj) * nx + bi;
  if (!open[start] || !open[goal]) return false;
  std::vector<char> seen(open.size(), 0);
  std::queue<std::size_t> q;
  q.push(start);
  seen[start] = 1;
  while (!q.empty()) {
    const std::size_t u = q.front();
    q.pop();
    if (u == goal) return true;
    const int i = static_cast<int>(u % nx), j = static_cast<int>(u / nx);
    const int di[4] = {1, -1, 0, 0}, dj[4] = {0, 0, 1, -1};
    for (int k = 0; k < 4; ++k) {
      const int ii = i + di[k], jj = j + dj[k];
      if (ii < 0 || ii >= nx || jj < 0 || jj >= ny) continue;
      const std::size_t w = static_cast<std::size_t>(jj) * nx + ii;
      if (open[w] && !seen[w]) {
        seen[w] = 1;
        q.push(w);
      }
    }
  }
  return false;
}

inline bool lex_less(const Vec& a, const Vec& b) {
  for (int k = 0; k < a.size(); ++k) {
    if (a(k) < b(k) - 1e-12) return true;
    if (a(k) > b(k) + 1e-12) return false;
  }
  return false;
}

}  // namespace detail

// Gate selection: a saddle sigma gates iff {U < U(sigma) - tau} disconnects
// the minima while {U < U(sigma) + tau} connects them; gates are all such
// saddles at the minimal passing height H (equal within 1e-10).
inline Landscape build_landscape(const PotentialSpec& p, const std::vector<CriticalPoint>& crits,
                                 double tau_gate = 1e-3, int flood_resolution = 512) {
  std::vector<CriticalPoint> minima, saddles;
  for (const auto& c : crits) {
    if (c.kind == CritKind::minimum) minima.push_back(c);
    if (c.kind == CritKind::saddle) saddles.push_back(c);
  }
  require(minima.size() == 2, errc::not_double_well,
          "landscape requires exactly two minima, found " + std::to_string(minima.size()));
  require(!saddles.empty(), errc::no_gate, "no saddle among the critical points");
  require(p.dimension == 2, errc::dimension_unsupported,
          "gate connectivity test is implemented for d = 2 only");
  require(p.box.size() == 4, errc::invalid_argument, "potential box required for gate search");

  Landscape ls;
  ls.potential = p;
  // m1 is the shallower minimum; ties break lexicographically by location.
  const bool first_is_deeper =
      minima[0].value < minima[1].value - 1e-14 ||
      (std::abs(minima[0].value - minima[1].value) <= 1e-14 &&
       !detail::lex_less(minima[0].location, minima[1].location));
  ls.m1 = first_is_deeper ? minima[1] : minima[0];
  ls.m2 = first_is_deeper ? minima[0] : minima[1];
  ls.h1 = ls.m1.value;
  ls.h2 = ls.m2.value;

  std::sort(saddles.begin(), saddles.end(),
            [](const CriticalPoint& a, const CriticalPoint& b) { return a.value < b.value; });
  const std::array<double, 4> box = {p.box[0], p.box[1], p.box[2], p.box[3]};
  const double aspect = (box[3] - box[2]) / (box[1] - box[0]);
  const int nx = flood_resolution + 1;
  const int ny = std::max(17, static_cast<int>(std::lround(flood_resolution * aspect)) + 1);
  double gate_height = 0.0;
  bool found = false;
  for (const auto& s : saddles) {
    if (found && s.value > gate_height + 1e-10) break;
    const bool below_disconnects = !detail::sublevel_connected(
        p, box, s.value - tau_gate, ls.m1.location, ls.m2.location, nx, ny);
    const bool above_connects = detail::sublevel_connected(
        p, box, s.value + tau_gate, ls.m1.location, ls.m2.location, nx, ny);
    if (below_disconnects && above_connects) {
      if (!found) gate_height = s.value;
      found = true;
      ls.gates.push_back(s);
    }
  }
  require(found, errc::no_gate, "no saddle passes the sublevel connectivity test");
  ls.H = gate_height;
  require(ls.H > ls.h1, errc::no_gate, "gate height does not exceed the shallower minimum");
  return ls;
}

// Landscape with caller-declared gates, for d > 2 where the flood fill is
// unavailable.
inline Landscape build_landscape_with_gates(const PotentialSpec& p,
                                            const std::vector<CriticalPoint>& crits,
                                            const std::vector<std::size_t>& gate_indices) {
  std::vector<CriticalPoint> minima;
  for (const auto& c : crits)
    if (c.kind == CritKind::minimum) minima.push_back(c);
  require(minima.size() == 2, errc::not_double_well,
          "landscape requires exactly two minima, found " + std::to_string(minima.size()));
  require(!gate_indices.empty(), errc::no_gate, "declared gate list is empty");
  Landscape ls;
  ls.potential = p;
  const bool first_is_deeper =
      minima[0].value < minima[1].value - 1e-14 ||
      (std::abs(minima[0].value - minima[1].value) <= 1e-14 &&
       !detail::lex_less(minima[0].location, minima[1].location));
  ls.m1 = first_is_deeper ? minima[1] : minima[0];
  ls.m2 = first_is_deeper ? minima[0] : minima[1];
  ls.h1 = ls.m1.value;
  ls.h2 = ls.m2.value;
  for (std::size_t gi : gate_indices) {
    require(gi < crits.size() && crits[gi].kind == CritKind::saddle, errc::invalid_argument,
            "declared gate index is not a saddle");
    ls.gates.push_back(crits[gi]);
  }
  ls.H = ls.gates.front().value;
  for (const auto& g : ls.gates)
    require(std::abs(g.value - ls.H) <= 1e-10, errc::no_gate,
            "declared gates are not at a common height");
  return ls;
}

struct AssumptionReport {
  double min_radial_gradient = 0.0;   // min over boundary of (x/|x|) . grad U
  double min_gradient_vs_laplacian = 0.0;  // min over boundary of |grad U| - 2 lap U
  bool z_finite = false;
  bool p2_isolated_critical_points = false;
  bool p1_smooth = true;
  bool p4_growth = false;
};

// Advisory numeric evidence for (P1), (P2), (P4); not a proof.
inline AssumptionReport check_assumptions(const PotentialSpec& p,
                                          const std::array<double, 4>& box,
                                          int n_samples = 400) {
  require(p.dimension == 2, errc::dimension_unsupported,
          "assumption sampling is implemented for d = 2 only");
  std::vector<CriticalPoint> crits;
  bool degenerate = false;
  try {
    crits = find_critical_points(p, p.seeds);
  } catch (const toolkit_error& e) {
    if (e.code() != errc::degenerate_hessian) throw;
    degenerate = true;
  }
  for (const auto& c : crits) {
    const bool inside = c.location(0) >= box[0] && c.location(0) <= box[1] &&
                        c.location(1) >= box[2] && c.location(1) <= box[3];
    require(inside, errc::invalid_argument, "box must contain all critical points");
  }

  AssumptionReport r;
  r.min_radial_gradient = std::numeric_limits<double>::infinity();
  r.min_gradient_vs_laplacian = std::numeric_limits<double>::infinity();
  const int per_side = std::max(4, n_samples / 4);
  Vec x(2);
  auto probe = [&](double px, double py) {
    x(0) = px;
    x(1) = py;
    const Vec g = p.gradient(x);
    const Mat H = p.hessian(x);
    const double nrm = x.norm();
    if (nrm > 0)
      r.min_radial_gradient = std::min(r.min_radial_gradient, x.dot(g) / nrm);
    r.min_gradient_vs_laplacian =
        std::min(r.min_gradient_vs_laplacian, g.norm() - 2.0 * H.trace());
  };
  for (int k = 0; k <= per_side; ++k) {
    const double tx = box[0] + (box[1] - box[0]) * k / per_side;
    const double ty = box[2] + (box[3] - box[2]) * k / per_side;
    probe(tx, box[2]);
    probe(tx, box[3]);
    probe(box[0], ty);
    probe(box[1], ty);
  }
  r.p4_growth = r.min_radial_gradient > 0.0;
  r.z_finite = std::isfinite(r.min_radial_gradient) && r.min_radial_gradient > 0.0;
  r.p2_isolated_critical_points = !degenerate && !crits.empty();
  if (p.grad) {
    // smoothness evidence: analytic and finite-difference gradients agree
    for (int k = 0; k < 20 && r.p1_smooth; ++k) {
      x(0) = box[0] + (box[1] - box[0]) * (k + 0.5) / 20.0;
      x(1) = box[2] + (box[3] - box[2]) * ((k * 7) % 20 + 0.5) / 20.0;
      PotentialSpec fd = p;
      fd.grad = nullptr;
      const double err = (p.gradient(x) - fd.gradient(x)).cwiseAbs().maxCoeff();
      if (err > 1e-6 * (1.0 + p.gradient(x).norm())) r.p1_smooth = false;
    }
  }
  return r;
}

}  // namespace nrcap
