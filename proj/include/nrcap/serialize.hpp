#pragma once

#include <cstdio>
#include <string>

#include "json.hpp"
#include "nrcap/common.hpp"
#include "nrcap/grid.hpp"
#include "nrcap/kramers.hpp"
#include "nrcap/potential.hpp"
#include "nrcap/sde.hpp"
#include "nrcap/spectral.hpp"
#include "nrcap/variational.hpp"

namespace nrcap {

using json = nlohmann::ordered_json;

inline json to_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(v(k));
  return a;
}

inline json to_json(const Mat& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(r);
  }
  return rows;
}

inline json to_json(const CriticalPoint& c) {
  return json{{"location", to_json(c.location)},
              {"kind", crit_kind_name(c.kind)},
              {"value", c.value},
              {"hessian_eigenvalues", to_json(c.hessian_eigenvalues)}};
}

inline json to_json(const Landscape& ls) {
  json gates = json::array();
  for (const auto& g : ls.gates) gates.push_back(to_json(g));
  return json{{"m1", to_json(ls.m1)}, {"m2", to_json(ls.m2)},   {"gates", gates},
              {"h1", ls.h1},          {"h2", ls.h2},            {"barrier", ls.H}};
}

inline json to_json(const AssumptionReport& r) {
  return json{{"min_radial_gradient", r.min_radial_gradient},
              {"min_gradient_vs_laplacian", r.min_gradient_vs_laplacian},
              {"z_finite", r.z_finite},
              {"p1_smooth", r.p1_smooth},
              {"p2_isolated_critical_points", r.p2_isolated_critical_points},
              {"p4_growth", r.p4_growth}};
}

inline json to_json(const DriftMatrix& d) {
  return json{{"M", to_json(d.M)},
              {"S", to_json(d.S)},
              {"K", to_json(d.K)},
              {"positivity_margin", d.positivity_margin}};
}

inline json to_json(const SaddleAnalysis& sa) {
  return json{{"sigma", to_json(sa.sigma)},
              {"L", to_json(sa.L)},
              {"lambda", to_json(sa.lambda)},
              {"mu", sa.mu},
              {"v", to_json(sa.v)},
              {"v_star", to_json(sa.v_star)},
              {"alpha", sa.alpha},
              {"alpha_star", sa.alpha_star},
              {"omega", sa.omega},
              {"sign_rule_fallback", sa.sign_rule_fallback}};
}

inline json to_json(const AlgebraResiduals& r) {
  return json{{"eig", r.eig},
              {"mu_match", r.mu_match},
              {"bl1", r.bl1},
              {"bl1_star", r.bl1_star},
              {"bl2", r.bl2},
              {"bl2_min_eig", r.bl2_min_eig},
              {"bl3_min_abs_eig", r.bl3_min_abs_eig},
              {"bl3_second_eig", r.bl3_second_eig},
              {"bl3_kernel_align", r.bl3_kernel_align},
              {"max_identity_residual", r.max_identity_residual()}};
}

inline json to_json(const PartitionResult& z) {
  json j{{"Z", z.Z}, {"method", z.method}};
  if (std::isfinite(z.error_estimate)) j["error_estimate"] = z.error_estimate;
  return j;
}

inline json to_json(const KramersPrediction& k) {
  return json{{"epsilon", k.epsilon},
              {"Z", k.Z},
              {"z_method", k.z_method},
              {"T_eps", k.T_eps},
              {"omega_sum", k.omega_sum},
              {"cap_asym", k.cap_asym},
              {"mean_hit", k.mean_hit},
              {"reversible_reference", k.reversible_reference}};
}

inline json to_json(const CapacityReport& r) {
  return json{{"cap_dirichlet_form", r.cap_dirichlet_form},
              {"cap_flux", r.cap_flux},
              {"cap_adjoint", r.cap_adjoint},
              {"cap_adjoint_flux", r.cap_adjoint_flux},
              {"symmetry_defects",
               json{{"swap", r.swap_defect}, {"adjoint", r.adjoint_defect}}},
              {"normalization", json{{"epsilon", r.epsilon}, {"Z", r.Z}}}};
}

inline json to_json(const Feasibility& f) {
  return json{{"div_defect", f.div_defect},
              {"flux_defect", f.flux_defect},
              {"boundary_defect", f.boundary_defect},
              {"scale", f.scale}};
}

inline json to_json(const BoundCertificate& c) {
  return json{{"kind", c.kind},
              {"value", c.value},
              {"feasibility", to_json(c.feasibility)},
              {"warnings", c.warnings},
              {"inputs_digest", c.inputs_digest}};
}

inline json to_json(const Prop3Result& r) {
  return json{{"lhs", r.lhs}, {"rhs", r.rhs}, {"defect", r.defect}};
}

inline json to_json(const TransitionStats& s) {
  return json{{"n", s.n},
              {"mean", s.mean},
              {"std_error", s.std_error},
              {"median", s.median},
              {"log_mean", s.log_mean},
              {"censored", s.censored},
              {"mean_is_lower_bound", s.mean_is_lower_bound}};
}

inline json to_json(const CommittorEstimate& e) {
  return json{{"probability", e.probability},
              {"std_error", e.std_error},
              {"n_hit_a", e.n_hit_a},
              {"n_hit_b", e.n_hit_b},
              {"censored", e.censored}};
}

inline json to_json(const ArrheniusFit& f) {
  return json{{"slope", f.slope}, {"intercept", f.intercept}, {"r2", f.r2}};
}

inline json to_json(const SaddleBoxQuadrature& q) {
  return json{{"integral", q.integral}, {"omega", q.omega}, {"ratio", q.ratio},
              {"delta", q.delta}};
}

// Content hash over the serialized report without its volatile fields, so a
// report is reproducible from the embedded config alone.
inline std::string content_hash(json report) {
  report.erase("timestamp");
  report.erase("content_hash");
  const std::string body = report.dump();
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(body.data(), body.size())));
  return buf;
}

}  // namespace nrcap
