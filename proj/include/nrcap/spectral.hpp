#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <string>

#include "nrcap/common.hpp"

namespace nrcap {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct DriftMatrix {
  Mat M;
  Mat M_t;
  Mat S;  // (M + M_t)/2
  Mat K;  // symmetric SPD root, K K = S
  double positivity_margin = 0.0;  // smallest eigenvalue of S
};

inline DriftMatrix decompose_drift(const Mat& M) {
  require(M.rows() == M.cols(), errc::invalid_argument, "drift matrix must be square");
  require(M.allFinite(), errc::invalid_argument, "drift matrix has non-finite entries");
  DriftMatrix d;
  d.M = M;
  d.M_t = M.transpose();
  d.S = 0.5 * (M + M.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(d.S);
  d.positivity_margin = es.eigenvalues().minCoeff();
  require(d.positivity_margin > 0.0, errc::not_positive,
          "drift matrix is not positive definite: min eig(S) = " +
              std::to_string(d.positivity_margin));
  d.K = es.eigenvectors() * es.eigenvalues().cwiseSqrt().asDiagonal() *
        es.eigenvectors().transpose();
  return d;
}

struct SaddleAnalysis {
  Vec sigma;   // saddle location, informational
  Mat L;       // Hess U at the saddle
  Vec lambda;  // eigenvalues of L, ascending (lambda(0) < 0)
  double mu = 0.0;
  Vec v, v_star;  // unit eigenvectors of LM, LM_t for eigenvalue -mu
  double alpha = 0.0, alpha_star = 0.0;
  double omega = 0.0;
  // set when the first component of v or v_star vanishes and the sign rule
  // fell through to a later coordinate (see SignNormalization)
  bool sign_rule_fallback = false;
};

namespace detail {

struct NegEig {
  double mu;
  Vec v;
  bool fallback;
};

// Unique real negative eigenvalue of a real matrix P plus its sign-normalized
// unit eigenvector. Rejects complex or multiple negative eigenvalues.
inline NegEig unique_negative_eigen(const Mat& P) {
  Eigen::EigenSolver<Mat> es(P);
  require(es.info() == Eigen::Success, errc::spectrum_shape, "eigensolver failed");
  int hit = -1;
  int negatives = 0;
  for (int k = 0; k < P.rows(); ++k) {
    const std::complex<double> ev = es.eigenvalues()(k);
    if (ev.real() < 0.0) {
      ++negatives;
      if (std::abs(ev.imag()) <= 1e-10 * (1.0 + std::abs(ev.real()))) hit = k;
    }
  }
  require(negatives == 1, errc::spectrum_shape,
          "expected exactly one eigenvalue with negative real part, found " +
              std::to_string(negatives));
  require(hit >= 0, errc::spectrum_shape, "negative eigenvalue is not real");
  NegEig out;
  out.mu = -es.eigenvalues()(hit).real();
  Eigen::VectorXcd vc = es.eigenvectors().col(hit);
  // rotate the complex phase away before taking the real part
  int big = 0;
  for (int k = 1; k < vc.size(); ++k)
    if (std::abs(vc(k)) > std::abs(vc(big))) big = k;
  vc *= std::conj(vc(big)) / std::abs(vc(big));
  out.v = vc.real();
  out.v.normalize();
  // sign rule: first component exceeding 1e-12 in magnitude is made positive
  int lead = -1;
  for (int k = 0; k < out.v.size(); ++k)
    if (std::abs(out.v(k)) > 1e-12) {
      lead = k;
      break;
    }
  require(lead >= 0, errc::sign_normalization, "eigenvector is numerically zero");
  if (out.v(lead) < 0) out.v = -out.v;
  out.fallback = lead != 0;
  return out;
}

}  // namespace detail

inline SaddleAnalysis analyze_saddle(const Mat& L, const DriftMatrix& drift,
                                     const Vec& sigma = Vec()) {
  require(L.rows() == L.cols() && L.rows() == drift.M.rows(), errc::invalid_argument,
          "saddle Hessian and drift dimensions differ");
  require((L - L.transpose()).cwiseAbs().maxCoeff() <=
              1e-12 * (1.0 + L.cwiseAbs().maxCoeff()),
          errc::invalid_argument, "saddle Hessian must be symmetric");

  SaddleAnalysis sa;
  sa.sigma = sigma.size() ? sigma : Vec::Zero(L.rows());
  sa.L = 0.5 * (L + L.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> les(sa.L);
  sa.lambda = les.eigenvalues();
  int neg = 0;
  for (int k = 0; k < sa.lambda.size(); ++k) neg += sa.lambda(k) < 0.0;
  require(neg == 1, errc::spectrum_shape,
          "saddle Hessian must have exactly one negative eigenvalue, found " +
              std::to_string(neg));

  const auto e = detail::unique_negative_eigen(sa.L * drift.M);
  const auto e_star = detail::unique_negative_eigen(sa.L * drift.M_t);
  require(std::abs(e.mu - e_star.mu) <= 1e-10 * (1.0 + std::abs(e.mu)), errc::spectrum_shape,
          "negative eigenvalues of LM and LM_t do not coincide");
  sa.mu = e.mu;
  sa.v = e.v;
  sa.v_star = e_star.v;
  sa.sign_rule_fallback = e.fallback || e_star.fallback;
  sa.alpha = sa.mu / sa.v.dot(drift.M * sa.v);
  sa.alpha_star = sa.mu / sa.v_star.dot(drift.M * sa.v_star);

  double neg_det = -sa.L.determinant();
  require(neg_det > 0.0, errc::spectrum_shape, "-det L must be positive at a saddle");
  sa.omega = sa.mu / std::sqrt(neg_det);
  return sa;
}

struct AlgebraResiduals {
  double eig = 0.0;          // max |LM v + mu v|, |LM_t v* + mu v*|
  double mu_match = 0.0;     // |mu(LM) - mu(LM_t)| recomputed
  double bl1 = 0.0;          // |v . L^-1 v + 1/alpha|
  double bl1_star = 0.0;
  double bl2 = 0.0;          // |det(L + 2a vv^T) + det L| / |det L|
  double bl2_min_eig = 0.0;  // smallest eigenvalue of L + 2a vv^T
  double bl3_min_abs_eig = 0.0;   // |smallest eigenvalue| of L + a vv^T
  double bl3_second_eig = 0.0;    // next eigenvalue, must be positive
  double bl3_kernel_align = 0.0;  // |cos angle(kernel vector, L^-1 v)|

  double max_identity_residual() const {
    double r = std::max({eig, mu_match, bl1, bl1_star, bl2, bl3_min_abs_eig});
    r = std::max(r, 1.0 - bl3_kernel_align);
    return r;
  }
};

inline AlgebraResiduals verify_algebra(const SaddleAnalysis& sa, const DriftMatrix& drift) {
  AlgebraResiduals r;
  r.eig = std::max(((sa.L * drift.M) * sa.v + sa.mu * sa.v).cwiseAbs().maxCoeff(),
                   ((sa.L * drift.M_t) * sa.v_star + sa.mu * sa.v_star).cwiseAbs().maxCoeff());
  r.mu_match = std::abs(detail::unique_negative_eigen(sa.L * drift.M).mu -
                        detail::unique_negative_eigen(sa.L * drift.M_t).mu);

  Eigen::FullPivLU<Mat> lu(sa.L);
  const Vec Linv_v = lu.solve(sa.v);
  const Vec Linv_vs = lu.solve(sa.v_star);
  r.bl1 = std::abs(sa.v.dot(Linv_v) + 1.0 / sa.alpha);
  r.bl1_star = std::abs(sa.v_star.dot(Linv_vs) + 1.0 / sa.alpha_star);

  const double detL = sa.L.determinant();
  const Mat B2 = sa.L + 2.0 * sa.alpha * sa.v * sa.v.transpose();
  r.bl2 = std::abs(B2.determinant() + detL) / std::abs(detL);
  Eigen::SelfAdjointEigenSolver<Mat> es2(0.5 * (B2 + B2.transpose()));
  r.bl2_min_eig = es2.eigenvalues().minCoeff();

  const Mat B3 = sa.L + sa.alpha * sa.v * sa.v.transpose();
  Eigen::SelfAdjointEigenSolver<Mat> es3(0.5 * (B3 + B3.transpose()));
  Vec evals = es3.eigenvalues();
  int kmin = 0;
  for (int k = 1; k < evals.size(); ++k)
    if (std::abs(evals(k)) < std::abs(evals(kmin))) kmin = k;
  r.bl3_min_abs_eig = std::abs(evals(kmin));
  double second = std::numeric_limits<double>::infinity();
  for (int k = 0; k < evals.size(); ++k)
    if (k != kmin) second = std::min(second, evals(k));
  r.bl3_second_eig = second;
  const Vec kernel = es3.eigenvectors().col(kmin);
  r.bl3_kernel_align = std::abs(kernel.dot(Linv_v)) / Linv_v.norm();
  return r;
}

}  // namespace nrcap
