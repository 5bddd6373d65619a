#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <random>
#include <thread>
#include <vector>

#include "nrcap/common.hpp"
#include "nrcap/potential.hpp"
#include "nrcap/spectral.hpp"

namespace nrcap {

struct SdeConfig {
  double epsilon = 0.1;
  double dt = 1e-3;
  double max_time = 1e4;
  std::uint64_t seed = 1;
  int n_paths = 1000;
  double target_radius = 0.3;
  int threads = 0;  // 0: hardware concurrency
};

struct TransitionStats {
  std::size_t n = 0;
  double mean = 0.0;
  double std_error = 0.0;  // sample std / sqrt(n)
  double median = 0.0;
  double log_mean = 0.0;
  std::size_t censored = 0;
  bool mean_is_lower_bound = false;  // censored paths enter at max_time
};

struct Ball {
  Vec center;
  double radius = 0.0;

  bool contains(const Vec& x) const { return (x - center).norm() <= radius; }
};

namespace detail {

inline std::uint64_t path_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(seed + (index + 1) * 0x9E3779B97F4A7C15ull);
}

// Box-Muller pairs from the raw 64-bit stream; the spare is carried so the
// draw sequence depends only on (seed, path index).
class GaussianStream {
 public:
  explicit GaussianStream(std::uint64_t seed) : rng_(seed) {}

  double operator()() {
    if (have_) {
      have_ = false;
      return spare_;
    }
    const double u1 = ((rng_() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    const double u2 = (rng_() >> 11) * 0x1.0p-53;        // [0, 1)
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * M_PI * u2;
    spare_ = r * std::sin(t);
    have_ = true;
    return r * std::cos(t);
  }

 private:
  std::mt19937_64 rng_;
  double spare_ = 0.0;
  bool have_ = false;
};

inline double box_diagonal(const PotentialSpec& p) {
  require(p.box.size() == 2 * static_cast<std::size_t>(p.dimension), errc::invalid_config,
          "potential box does not match its dimension");
  double s = 0.0;
  for (int k = 0; k < p.dimension; ++k) {
    const double side = p.box[2 * k + 1] - p.box[2 * k];
    s += side * side;
  }
  return std::sqrt(s);
}

inline void validate_sde_config(const SdeConfig& cfg) {
  require(cfg.epsilon > 0.0, errc::invalid_config, "epsilon must be positive");
  require(cfg.dt > 0.0 && cfg.dt <= cfg.epsilon / 10.0 + 1e-15 && cfg.dt <= 0.01 + 1e-15,
          errc::invalid_config, "need dt <= eps/10 and dt <= 0.01");
  require(cfg.max_time > 0.0 && cfg.n_paths >= 1, errc::invalid_config,
          "max_time and n_paths must be positive");
}

// One path until hitting any of the targets; returns (time, target index) or
// (max_time, -1) when censored.
template <class Hit>
inline std::pair<double, int> run_path(const PotentialSpec& p, const DriftMatrix& drift,
                                       const SdeConfig& cfg, const Vec& start, Hit&& hit,
                                       std::uint64_t index, double blow_limit) {
  GaussianStream gs(path_seed(cfg.seed, index));
  Vec x = start;
  Vec xi(p.dimension);
  const double root = std::sqrt(2.0 * cfg.epsilon * cfg.dt);
  const long n_steps = static_cast<long>(std::ceil(cfg.max_time / cfg.dt));
  for (long step = 1; step <= n_steps; ++step) {
    const Vec g = p.gradient(x);
    for (int k = 0; k < p.dimension; ++k) xi(k) = gs();
    // the divergence-form generator built on M drives x with -M^T grad U, so
    // hitting probabilities agree with the grid-module potentials
    x += -cfg.dt * (drift.M.transpose() * g) + root * (drift.K * xi);
    require(x.norm() <= blow_limit, errc::blow_up,
            "trajectory escaped 10x the landscape box: reduce dt");
    const int t = hit(x);
    if (t >= 0) return {step * cfg.dt, t};
  }
  return {cfg.max_time, -1};
}

struct PathOutcome {
  double time = 0.0;
  int target = -1;
};

// Chunked execution over a preallocated outcome array; results are keyed by
// path index so any thread count reproduces the same statistics.
template <class Hit>
inline std::vector<PathOutcome> run_paths(const PotentialSpec& p, const DriftMatrix& drift,
                                          const SdeConfig& cfg, const Vec& start, Hit&& hit) {
  std::vector<PathOutcome> out(static_cast<std::size_t>(cfg.n_paths));
  const double blow_limit = 10.0 * box_diagonal(p);
  unsigned n_threads = cfg.threads > 0 ? static_cast<unsigned>(cfg.threads)
                                       : std::max(1u, std::thread::hardware_concurrency());
  n_threads = std::min<unsigned>(n_threads, static_cast<unsigned>(cfg.n_paths));
  std::vector<std::exception_ptr> errors(n_threads);
  std::vector<std::thread> pool;
  const std::size_t chunk = (out.size() + n_threads - 1) / n_threads;
  for (unsigned t = 0; t < n_threads; ++t) {
    const std::size_t lo = t * chunk, hi = std::min(out.size(), lo + chunk);
    pool.emplace_back([&, t, lo, hi] {
      try {
        for (std::size_t k = lo; k < hi; ++k) {
          const auto r = run_path(p, drift, cfg, start, hit, k, blow_limit);
          out[k] = {r.first, r.second};
        }
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

inline TransitionStats stats_from_times(const std::vector<double>& times,
                                        std::size_t censored) {
  TransitionStats s;
  s.n = times.size();
  s.censored = censored;
  s.mean_is_lower_bound = censored > 0;
  double sum = 0.0, logsum = 0.0;
  for (double t : times) {
    sum += t;
    logsum += std::log(t);
  }
  s.mean = sum / s.n;
  s.log_mean = logsum / s.n;
  double ss = 0.0;
  for (double t : times) ss += (t - s.mean) * (t - s.mean);
  s.std_error = s.n > 1 ? std::sqrt(ss / (s.n - 1)) / std::sqrt(double(s.n)) : 0.0;
  std::vector<double> sorted = times;
  std::sort(sorted.begin(), sorted.end());
  s.median = s.n % 2 ? sorted[s.n / 2] : 0.5 * (sorted[s.n / 2 - 1] + sorted[s.n / 2]);
  return s;
}

}  // namespace detail

// Hitting time of the ball around m2, started from m1. Censored paths enter
// the statistics at max_time, flagging the mean as a lower bound.
inline TransitionStats simulate_hitting(
    const PotentialSpec& p, const Landscape& ls, const DriftMatrix& drift,
    const SdeConfig& cfg,
    const std::function<void(std::size_t, double, bool)>& per_path_sink = nullptr) {
  detail::validate_sde_config(cfg);
  const Ball target{ls.m2.location, cfg.target_radius};
  // the target must sit strictly below the gate
  const double kappa = 0.05;
  Vec probe = target.center;
  for (int k = 0; k < 16; ++k) {
    const double ang = 2.0 * M_PI * k / 16.0;
    probe(0) = target.center(0) + target.radius * std::cos(ang);
    probe(1) = target.center(1) + target.radius * std::sin(ang);
    require(p.value(probe) < ls.H - kappa, errc::invalid_config,
            "target ball must lie inside {U < H - 0.05}");
  }

  auto hit = [&](const Vec& x) { return target.contains(x) ? 0 : -1; };
  const auto outcomes = detail::run_paths(p, drift, cfg, ls.m1.location, hit);

  std::vector<double> times(outcomes.size());
  std::size_t censored = 0;
  for (std::size_t k = 0; k < outcomes.size(); ++k) {
    times[k] = outcomes[k].time;
    if (outcomes[k].target < 0) ++censored;
  }
  require(censored < outcomes.size(), errc::all_censored,
          "no path reached the target before max_time");
  if (per_path_sink)
    for (std::size_t k = 0; k < outcomes.size(); ++k)
      per_path_sink(k, outcomes[k].time, outcomes[k].target < 0);
  return detail::stats_from_times(times, censored);
}

struct CommittorEstimate {
  double probability = 0.0;
  double std_error = 0.0;
  std::size_t n_hit_a = 0, n_hit_b = 0, censored = 0;
};

// Fraction of paths from x entering A before B, with binomial stderr over the
// uncensored paths.
inline CommittorEstimate estimate_committor(const Vec& x, const Ball& A, const Ball& B,
                                            const PotentialSpec& p, const DriftMatrix& drift,
                                            const SdeConfig& cfg) {
  detail::validate_sde_config(cfg);
  require(!A.contains(x) && !B.contains(x), errc::invalid_argument,
          "start point must lie outside A and B");
  auto hit = [&](const Vec& y) { return A.contains(y) ? 0 : (B.contains(y) ? 1 : -1); };
  const auto outcomes = detail::run_paths(p, drift, cfg, x, hit);

  CommittorEstimate est;
  for (const auto& o : outcomes) {
    if (o.target == 0)
      ++est.n_hit_a;
    else if (o.target == 1)
      ++est.n_hit_b;
    else
      ++est.censored;
  }
  const std::size_t used = est.n_hit_a + est.n_hit_b;
  require(used > 0, errc::all_censored, "no path reached A or B before max_time");
  est.probability = static_cast<double>(est.n_hit_a) / used;
  est.std_error = std::sqrt(est.probability * (1.0 - est.probability) / used);
  return est;
}

struct ArrheniusFit {
  double slope = 0.0;      // estimates the barrier H - h1
  double intercept = 0.0;  // log prefactor
  double r2 = 0.0;
};

// Least squares of log(mean hitting time) against 1/epsilon.
inline ArrheniusFit arrhenius_fit(const std::vector<std::pair<double, TransitionStats>>& results) {
  require(results.size() >= 3, errc::insufficient_data, "need at least three epsilon values");
  std::vector<double> xs, ys;
  for (const auto& [eps, st] : results) {
    require(eps > 0.0, errc::invalid_argument, "epsilon must be positive");
    require(st.censored == 0, errc::insufficient_data,
            "censored samples bias the Arrhenius slope");
    xs.push_back(1.0 / eps);
    ys.push_back(std::log(st.mean));
  }
  const std::size_t n = xs.size();
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    mx += xs[k];
    my += ys[k];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    sxx += (xs[k] - mx) * (xs[k] - mx);
    sxy += (xs[k] - mx) * (ys[k] - my);
    syy += (ys[k] - my) * (ys[k] - my);
  }
  require(sxx > 0.0, errc::insufficient_data, "epsilon values must be distinct");
  ArrheniusFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double r = ys[k] - (fit.intercept + fit.slope * xs[k]);
    ss_res += r * r;
  }
  fit.r2 = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  return fit;
}

}  // namespace nrcap
