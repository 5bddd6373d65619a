#pragma once

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "nrcap/common.hpp"
#include "nrcap/potential.hpp"
#include "nrcap/spectral.hpp"

namespace nrcap {

struct PartitionResult {
  double Z = 0.0;
  std::string method;           // "laplace" or "quadrature"
  double error_estimate = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

inline double log_det_spd(const Mat& H) {
  Eigen::SelfAdjointEigenSolver<Mat> es(H);
  require(es.eigenvalues().minCoeff() > 0.0, errc::invalid_argument,
          "well Hessian must be positive definite");
  return es.eigenvalues().array().log().sum();
}

inline double laplace_Z(const Landscape& ls, double eps) {
  const int d = ls.potential.dimension;
  // log of each well contribution; exponentiate after combining
  const double l1 =
      0.5 * d * std::log(2.0 * M_PI * eps) - ls.h1 / eps -
      0.5 * log_det_spd(ls.potential.hessian(ls.m1.location));
  const double l2 =
      0.5 * d * std::log(2.0 * M_PI * eps) - ls.h2 / eps -
      0.5 * log_det_spd(ls.potential.hessian(ls.m2.location));
  const double m = std::max(l1, l2);
  return std::exp(m) * (std::exp(l1 - m) + std::exp(l2 - m));
}

}  // namespace detail

// Laplace method sums the two well contributions; quadrature is a midpoint
// Riemann sum over the box (d = 2). When quadrature is requested the laplace
// value is also computed and |laplace - quadrature| reported as the error
// estimate.
inline PartitionResult partition_function(const PotentialSpec& p, const Landscape& ls,
                                          double eps, const std::string& method,
                                          std::array<double, 4> box = {0, 0, 0, 0},
                                          int n_per_dim = 600) {
  require(eps > 0.0, errc::invalid_argument, "epsilon must be positive");
  PartitionResult r;
  if (method == "laplace") {
    r.Z = detail::laplace_Z(ls, eps);
    r.method = "laplace";
    return r;
  }
  require(method == "quadrature", errc::invalid_config,
          "partition method must be laplace or quadrature");
  require(p.dimension == 2, errc::dimension_unsupported,
          "quadrature partition function is implemented for d = 2 only");
  if (box[1] <= box[0]) {
    require(p.box.size() == 4, errc::invalid_argument, "quadrature requires a box");
    box = {p.box[0], p.box[1], p.box[2], p.box[3]};
  }
  const double hx = (box[1] - box[0]) / n_per_dim;
  const double hy = (box[3] - box[2]) / n_per_dim;
  double sum = 0.0, max_sample = 0.0;
  Vec x(2);
  for (int j = 0; j < n_per_dim; ++j) {
    x(1) = box[2] + (j + 0.5) * hy;
    for (int i = 0; i < n_per_dim; ++i) {
      x(0) = box[0] + (i + 0.5) * hx;
      const double s = std::exp(-p.value(x) / eps);
      max_sample = std::max(max_sample, s);
      sum += s;
    }
  }
  require(max_sample >= 1e-300, errc::quadrature_underflow,
          "all partition-function samples underflow");
  r.Z = sum * hx * hy;
  r.method = "quadrature";
  r.error_estimate = std::abs(detail::laplace_Z(ls, eps) - r.Z);
  return r;
}

struct KramersPrediction {
  double epsilon = 0.0;
  double Z = 0.0;
  std::string z_method;
  double T_eps = 0.0;
  double omega_sum = 0.0;
  double cap_asym = 0.0;
  double mean_hit = 0.0;
  double reversible_reference = 0.0;
};

// Closed-form asymptotics. mean_hit carries no Z; cap_asym = T_eps * omega_sum
// by construction. The reversible reference is the same prediction evaluated
// with the symmetrized drift S in place of M.
inline KramersPrediction predict(const Landscape& ls,
                                 const std::vector<SaddleAnalysis>& saddles,
                                 const Mat& well_hessian_m1, double eps, double Z,
                                 const DriftMatrix& drift,
                                 const std::string& z_method = "laplace") {
  require(!saddles.empty(), errc::empty_gate_list, "prediction requires at least one gate");
  require(eps > 0.0 && Z > 0.0, errc::invalid_argument, "epsilon and Z must be positive");
  const int d = ls.potential.dimension;

  KramersPrediction k;
  k.epsilon = eps;
  k.Z = Z;
  k.z_method = z_method;

  double omega_sum = 0.0, omega_rev_sum = 0.0;
  for (const auto& sa : saddles) {
    omega_sum += sa.omega;
    const double mu_rev = detail::unique_negative_eigen(sa.L * drift.S).mu;
    omega_rev_sum += mu_rev / std::sqrt(-sa.L.determinant());
  }
  k.omega_sum = omega_sum;

  const double log_T = -ls.H / eps + 0.5 * d * std::log(2.0 * M_PI * eps) -
                       std::log(2.0 * M_PI) - std::log(Z);
  k.T_eps = std::exp(log_T);
  k.cap_asym = k.T_eps * omega_sum;

  const double log_well = 0.5 * detail::log_det_spd(well_hessian_m1);
  k.mean_hit = std::exp((ls.H - ls.h1) / eps + std::log(2.0 * M_PI) - log_well -
                        std::log(omega_sum));
  k.reversible_reference = std::exp((ls.H - ls.h1) / eps + std::log(2.0 * M_PI) - log_well -
                                    std::log(omega_rev_sum));
  return k;
}

}  // namespace nrcap
