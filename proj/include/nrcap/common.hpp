#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace nrcap {

enum class errc {
  non_convergence,
  degenerate_hessian,
  not_double_well,
  no_gate,
  dimension_unsupported,
  not_positive,
  spectrum_shape,
  sign_normalization,
  quadrature_underflow,
  empty_gate_list,
  resolution_too_coarse,
  non_finite_weight,
  unsupported_drift,
  solver_divergence,
  maximum_principle_violation,
  negative_mass,
  infeasible_flow,
  zero_energy,
  disconnected_wells,
  blow_up,
  all_censored,
  insufficient_data,
  invalid_config,
  invalid_argument,
};

inline const char* errc_name(errc c) {
  switch (c) {
    case errc::non_convergence: return "NonConvergence";
    case errc::degenerate_hessian: return "DegenerateHessian";
    case errc::not_double_well: return "NotDoubleWell";
    case errc::no_gate: return "NoGate";
    case errc::dimension_unsupported: return "DimensionUnsupported";
    case errc::not_positive: return "NotPositive";
    case errc::spectrum_shape: return "SpectrumShape";
    case errc::sign_normalization: return "SignNormalization";
    case errc::quadrature_underflow: return "QuadratureUnderflow";
    case errc::empty_gate_list: return "EmptyGateList";
    case errc::resolution_too_coarse: return "ResolutionTooCoarse";
    case errc::non_finite_weight: return "NonFiniteWeight";
    case errc::unsupported_drift: return "UnsupportedDrift";
    case errc::solver_divergence: return "SolverDivergence";
    case errc::maximum_principle_violation: return "MaximumPrincipleViolation";
    case errc::negative_mass: return "NegativeMass";
    case errc::infeasible_flow: return "InfeasibleFlow";
    case errc::zero_energy: return "ZeroEnergy";
    case errc::disconnected_wells: return "DisconnectedWells";
    case errc::blow_up: return "BlowUp";
    case errc::all_censored: return "AllCensored";
    case errc::insufficient_data: return "InsufficientData";
    case errc::invalid_config: return "InvalidConfig";
    case errc::invalid_argument: return "InvalidArgument";
  }
  return "Unknown";
}

class toolkit_error : public std::runtime_error {
 public:
  toolkit_error(errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}
  errc code() const noexcept { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& msg) {
  throw toolkit_error(code, msg);
}

inline void require(bool ok, errc code, const std::string& msg) {
  if (!ok) fail(code, msg);
}

// Standard normal CDF through erfc; accurate in both tails.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// FNV-1a, used for content hashes and certificate input digests.
inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t seed = 1469598103934665603ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t seed = 1469598103934665603ull) {
  return fnv1a64(s.data(), s.size(), seed);
}

// splitmix64; decorrelates per-path RNG seeds derived from (seed, index).
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace nrcap
