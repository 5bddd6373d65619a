#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nrcap/config.hpp"
#include "nrcap/grid.hpp"
#include "nrcap/kramers.hpp"
#include "nrcap/potential.hpp"
#include "nrcap/sde.hpp"
#include "nrcap/serialize.hpp"
#include "nrcap/spectral.hpp"
#include "nrcap/variational.hpp"

namespace {

using nrcap::json;

std::string iso_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json envelope(const nrcap::RunConfig& cfg, const char* command) {
  return json{{"tool", "nrcap"},
              {"command", command},
              {"timestamp", iso_timestamp()},
              {"config", cfg.resolved}};
}

void write_report(const std::string& path, json report) {
  report["content_hash"] = nrcap::content_hash(report);
  std::ofstream out(path);
  nrcap::require(out.good(), nrcap::errc::invalid_argument, "cannot open " + path);
  out << report.dump(2) << "\n";
}

struct Analysis {
  nrcap::Landscape landscape;
  std::vector<nrcap::CriticalPoint> crits;
  nrcap::DriftMatrix drift;
  std::vector<nrcap::SaddleAnalysis> saddles;
  std::vector<nrcap::AlgebraResiduals> residuals;
  std::vector<std::string> warnings;
};

Analysis analyze_instance(const nrcap::RunConfig& cfg) {
  Analysis a;
  a.crits = nrcap::find_critical_points(cfg.potential, cfg.potential.seeds, 1e-10, &a.warnings);
  a.landscape = nrcap::build_landscape(cfg.potential, a.crits);
  a.drift = nrcap::decompose_drift(cfg.M);
  for (const auto& gate : a.landscape.gates) {
    const nrcap::Mat L = cfg.potential.hessian(gate.location);
    a.saddles.push_back(nrcap::analyze_saddle(L, a.drift, gate.location));
    a.residuals.push_back(nrcap::verify_algebra(a.saddles.back(), a.drift));
  }
  return a;
}

int cmd_analyze(const nrcap::RunConfig& cfg) {
  const Analysis a = analyze_instance(cfg);
  const auto& pb = cfg.potential.box;
  const auto assumptions =
      nrcap::check_assumptions(cfg.potential, {pb[0], pb[1], pb[2], pb[3]});

  json lj = envelope(cfg, "analyze");
  lj["landscape"] = nrcap::to_json(a.landscape);
  json crits = json::array();
  for (const auto& c : a.crits) crits.push_back(nrcap::to_json(c));
  lj["critical_points"] = crits;
  lj["assumptions"] = nrcap::to_json(assumptions);
  lj["warnings"] = a.warnings;
  write_report(cfg.out_dir + "/landscape.json", lj);

  json sj = envelope(cfg, "analyze");
  json saddles = json::array();
  double max_res = 0.0;
  for (std::size_t k = 0; k < a.saddles.size(); ++k) {
    saddles.push_back(json{{"analysis", nrcap::to_json(a.saddles[k])},
                           {"residuals", nrcap::to_json(a.residuals[k])}});
    max_res = std::max(max_res, a.residuals[k].max_identity_residual());
  }
  sj["drift"] = nrcap::to_json(a.drift);
  sj["saddles"] = saddles;
  write_report(cfg.out_dir + "/saddle.json", sj);

  std::printf("analyze: %zu critical points, %zu gate(s), max identity residual %.3e\n",
              a.crits.size(), a.landscape.gates.size(), max_res);
  return max_res < 1e-8 ? 0 : 1;
}

int cmd_predict(const nrcap::RunConfig& cfg) {
  nrcap::require(!cfg.epsilon.empty(), nrcap::errc::invalid_config, "epsilon list is empty");
  const Analysis a = analyze_instance(cfg);
  const nrcap::Mat hess_m1 = cfg.potential.hessian(a.landscape.m1.location);

  json rj = envelope(cfg, "predict");
  json records = json::array();
  for (double eps : cfg.epsilon) {
    const auto z = nrcap::partition_function(cfg.potential, a.landscape, eps, "laplace");
    const auto pred =
        nrcap::predict(a.landscape, a.saddles, hess_m1, eps, z.Z, a.drift, z.method);
    records.push_back(json{{"epsilon", eps},
                           {"partition", nrcap::to_json(z)},
                           {"prediction", nrcap::to_json(pred)}});
    std::printf("predict: eps=%g  T_eps=%.6e  cap_asym=%.6e  mean_hit=%.6f\n", eps,
                pred.T_eps, pred.cap_asym, pred.mean_hit);
  }
  rj["records"] = records;
  write_report(cfg.out_dir + "/kramers.json", rj);
  return 0;
}

int cmd_capacity(const nrcap::RunConfig& cfg) {
  nrcap::require(!cfg.epsilon.empty(), nrcap::errc::invalid_config, "epsilon list is empty");
  const Analysis a = analyze_instance(cfg);
  const nrcap::Mat hess_m1 = cfg.potential.hessian(a.landscape.m1.location);
  const auto& p = cfg.potential;
  const std::array<double, 4> box{p.box[0], p.box[1], p.box[2], p.box[3]};
  const nrcap::Grid2D grid(cfg.grid.nx, cfg.grid.ny, box);
  const std::array<double, 2> cA{a.landscape.m1.location(0), a.landscape.m1.location(1)};
  const std::array<double, 2> cB{a.landscape.m2.location(0), a.landscape.m2.location(1)};
  const auto mask =
      nrcap::make_ball_masks(grid, cA, cfg.grid.radius_a, cB, cfg.grid.radius_b);

  json rj = envelope(cfg, "capacity");
  json records = json::array();
  for (std::size_t k = 0; k < cfg.epsilon.size(); ++k) {
    const double eps = cfg.epsilon[k];
    const auto ops = nrcap::discretize_generator(grid, p, a.drift, eps);
    const auto eq = nrcap::solve_equilibrium_potential(ops, mask);
    const auto z = nrcap::partition_function(p, a.landscape, eps, "laplace");
    const auto rep = nrcap::capacity_from_fields(eq.h, eq.h_star, ops, mask, z.Z);
    const double cap = rep.cap_dirichlet_form;

    std::vector<std::string> warnings;
    const auto nu = nrcap::equilibrium_measure(eq.h_star, ops, mask, cap, z.Z, &warnings);
    double mass = 0.0;
    for (double w : nu.v) mass += w;

    const auto dpair = nrcap::optimal_dirichlet_inputs(eq.h, eq.h_star, ops, z.Z);
    const auto dcert = nrcap::dirichlet_bound(dpair.f, dpair.phi, ops, mask, z.Z);
    const auto tpair = nrcap::optimal_thomson_inputs(eq.h, eq.h_star, ops, cap, z.Z);
    const auto tcert = nrcap::thomson_bound(tpair.f, tpair.phi, ops, mask, z.Z);

    nrcap::GridField ones(grid, 1.0);
    const auto prop3 = nrcap::check_prop3(ones, mask, ops, eq.h_star, nu, cap, z.Z);

    const auto pred =
        nrcap::predict(a.landscape, a.saddles, hess_m1, eps, z.Z, a.drift, z.method);

    json rec{{"epsilon", eps},
             {"capacity", nrcap::to_json(rep)},
             {"bounds",
              json{{"dirichlet", nrcap::to_json(dcert)}, {"thomson", nrcap::to_json(tcert)}}},
             {"equilibrium_measure", json{{"mass", mass}, {"warnings", warnings}}},
             {"prop3_const", nrcap::to_json(prop3)},
             {"cap_asym", pred.cap_asym},
             {"residuals", json{{"h", eq.residual}, {"h_star", eq.residual_star}}}};

    try {
      const auto pack =
          nrcap::build_saddle_pack(p, a.landscape, a.saddles.at(0), a.drift, ops, z.Z);
      const auto pcert = nrcap::dirichlet_bound(pack.f, pack.phi, ops, mask, z.Z, false);
      rec["bounds"]["saddle_pack"] = nrcap::to_json(pcert);
      nrcap::write_grdf(cfg.out_dir + "/pack_" + std::to_string(k) + ".grdf", grid, pack.f);
    } catch (const nrcap::toolkit_error& e) {
      rec["bounds"]["saddle_pack_error"] = e.what();
    }

    nrcap::write_grdf(cfg.out_dir + "/h_" + std::to_string(k) + ".grdf", grid, eq.h);
    nrcap::write_grdf(cfg.out_dir + "/h_star_" + std::to_string(k) + ".grdf", grid,
                      eq.h_star);
    if (cfg.formats.csv_out)
      nrcap::write_field_csv(cfg.out_dir + "/nu_" + std::to_string(k) + ".csv", grid, nu);
    records.push_back(rec);
    std::printf("capacity: eps=%g cap=%.8e cap*=%.8e dirichlet=%.8e thomson=%.8e asym=%.8e\n",
                eps, cap, rep.cap_adjoint, dcert.value, tcert.value, pred.cap_asym);
  }
  rj["records"] = records;
  write_report(cfg.out_dir + "/capacity.json", rj);
  return 0;
}

int cmd_simulate(const nrcap::RunConfig& cfg) {
  nrcap::require(!cfg.epsilon.empty(), nrcap::errc::invalid_config, "epsilon list is empty");
  const Analysis a = analyze_instance(cfg);

  json rj = envelope(cfg, "simulate");
  json records = json::array();
  for (std::size_t k = 0; k < cfg.epsilon.size(); ++k) {
    nrcap::SdeConfig sc = cfg.sde;
    sc.epsilon = cfg.epsilon[k];
    std::ofstream paths;
    std::function<void(std::size_t, double, bool)> sink;
    if (cfg.stream_paths && cfg.formats.csv_out) {
      paths.open(cfg.out_dir + "/paths_" + std::to_string(k) + ".csv");
      paths << "path_index,hit_time,censored\n";
      sink = [&paths](std::size_t idx, double t, bool censored) {
        paths << idx << "," << std::scientific << t << "," << (censored ? 1 : 0) << "\n";
      };
    }
    const auto stats = nrcap::simulate_hitting(cfg.potential, a.landscape, a.drift, sc, sink);
    records.push_back(json{{"epsilon", sc.epsilon}, {"stats", nrcap::to_json(stats)}});
    std::printf("simulate: eps=%g n=%zu mean=%.4f stderr=%.4f censored=%zu\n", sc.epsilon,
                stats.n, stats.mean, stats.std_error, stats.censored);
  }
  rj["records"] = records;
  write_report(cfg.out_dir + "/simulate.json", rj);
  return 0;
}

struct CheckResult {
  std::string block, name, detail;
  bool pass = false, skipped = false;
};

void run_spectral_checks(const nrcap::RunConfig& cfg, std::vector<CheckResult>& out) {
  using namespace nrcap;
  {
    std::mt19937_64 rng(42);
    auto u = [&](double lo, double hi) { return lo + (hi - lo) * ((rng() >> 11) * 0x1.0p-53); };
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const double t = u(0, M_PI);
      Mat Q(2, 2);
      Q << std::cos(t), -std::sin(t), std::sin(t), std::cos(t);
      Mat L = Q * Eigen::Vector2d(-u(0.3, 3.0), u(0.3, 3.0)).asDiagonal() * Q.transpose();
      L = 0.5 * (L + L.transpose());
      const double r = u(0, M_PI);
      Mat R(2, 2);
      R << std::cos(r), -std::sin(r), std::sin(r), std::cos(r);
      Mat S = R * Eigen::Vector2d(u(0.2, 2.0), u(0.2, 2.0)).asDiagonal() * R.transpose();
      S = 0.5 * (S + S.transpose());
      Mat M = S;
      const double aa = u(-2.0, 2.0);
      M(0, 1) += aa;
      M(1, 0) -= aa;
      const auto drift = decompose_drift(M);
      const auto sa = analyze_saddle(L, drift);
      worst = std::max(worst, verify_algebra(sa, drift).max_identity_residual());
    }
    out.push_back({"spectral", "random_saddle_algebra",
                   "max residual " + std::to_string(worst) + " over 100 draws",
                   worst < 1e-8});
  }
  {
    double worst = 0.0;
    for (double g : {0.5, 1.0, 2.0}) {
      Mat L(2, 2), M(2, 2);
      L << -1, 0, 0, 1;
      M << 1, g, -g, 1;
      const auto sa = analyze_saddle(L, decompose_drift(M));
      worst = std::max(worst, std::abs(sa.mu - std::sqrt(1.0 + g * g)));
    }
    out.push_back({"spectral", "closed_form_mu",
                   "max |mu - sqrt(1+g^2)| = " + std::to_string(worst), worst < 1e-10});
  }
  {
    const auto drift = nrcap::decompose_drift(cfg.M);
    Mat L(2, 2);
    L << -1, 0, 0, 1;
    const auto sa = analyze_saddle(L, drift);
    const double c = 2.5;
    const auto sc = analyze_saddle(L, decompose_drift(Mat(c * cfg.M)));
    const double d1 = std::abs(sc.mu - c * sa.mu);
    const double d2 = std::abs(sc.alpha - sa.alpha);
    const double d3 = std::abs(sc.omega - c * sa.omega);
    const double worst = std::max({d1, d2, d3});
    out.push_back({"spectral", "scale_covariance",
                   "max deviation " + std::to_string(worst) + " at c=2.5", worst < 1e-10});
  }
}

void run_pde_checks(const nrcap::RunConfig& cfg, const Analysis& a,
                    std::vector<CheckResult>& out) {
  using namespace nrcap;
  const auto& p = cfg.potential;
  const std::array<double, 4> box{p.box[0], p.box[1], p.box[2], p.box[3]};
  const Grid2D grid(81, 61, box);
  const double eps = 0.1;
  const auto ops = discretize_generator(grid, p, a.drift, eps);
  const std::array<double, 2> cA{a.landscape.m1.location(0), a.landscape.m1.location(1)};
  const std::array<double, 2> cB{a.landscape.m2.location(0), a.landscape.m2.location(1)};
  const auto mask = make_ball_masks(grid, cA, cfg.grid.radius_a, cB, cfg.grid.radius_b);

  {
    std::mt19937_64 rng(7);
    GridField f(grid), g(grid);
    for (std::size_t n = 0; n < grid.n_nodes(); ++n) {
      f[n] = (rng() >> 11) * 0x1.0p-53 - 0.5;
      g[n] = (rng() >> 11) * 0x1.0p-53 - 0.5;
    }
    const double lhs = ops.inner(f, ops.apply_L(g, +1.0));
    const double rhs = ops.inner(ops.apply_L(f, -1.0), g);
    const double rel = std::abs(lhs - rhs) / std::max(std::abs(lhs), 1e-300);
    out.push_back({"pde", "adjointness",
                   "relative defect " + std::to_string(rel) + " on random fields",
                   rel < 1e-12});
  }
  {
    GridField ones(grid, 1.0);
    const auto r = ops.apply_mL(ones, +1.0);
    double worst = 0.0;
    for (double v : r.v) worst = std::max(worst, std::abs(v));
    out.push_back({"pde", "constant_annihilation", "max |m L 1| = " + std::to_string(worst),
                   worst == 0.0});
  }
  const auto eq = solve_equilibrium_potential(ops, mask);
  const auto z = partition_function(p, a.landscape, eps, "laplace");
  const auto rep = capacity_from_fields(eq.h, eq.h_star, ops, mask, z.Z);
  const double cap = rep.cap_dirichlet_form;
  {
    const double d1 = std::abs(rep.cap_dirichlet_form - rep.cap_flux) / cap;
    const double d2 = rep.adjoint_defect / cap;
    const double d3 = rep.swap_defect / cap;
    out.push_back({"pde", "capacity_identities",
                   "flux " + std::to_string(d1) + ", adjoint " + std::to_string(d2) +
                       ", swap " + std::to_string(d3),
                   d1 < 1e-10 && d2 < 1e-8 && d3 < 1e-10});
  }
  {
    std::vector<std::string> warnings;
    const auto nu = equilibrium_measure(eq.h_star, ops, mask, cap, z.Z, &warnings);
    double mass = 0.0, wmin = 0.0;
    for (double w : nu.v) {
      mass += w;
      wmin = std::min(wmin, w);
    }
    GridField ones(grid, 1.0);
    const auto pr = check_prop3(ones, mask, ops, eq.h_star, nu, cap, z.Z);
    out.push_back({"pde", "equilibrium_measure",
                   "mass defect " + std::to_string(std::abs(mass - 1.0)),
                   std::abs(mass - 1.0) < 1e-8});
    out.push_back({"pde", "prop3_const_f", "defect " + std::to_string(pr.defect),
                   pr.defect < 5e-2});
  }
  {
    const auto dpair = optimal_dirichlet_inputs(eq.h, eq.h_star, ops, z.Z);
    const auto dcert = dirichlet_bound(dpair.f, dpair.phi, ops, mask, z.Z);
    const auto tpair = optimal_thomson_inputs(eq.h, eq.h_star, ops, cap, z.Z);
    const auto tcert = thomson_bound(tpair.f, tpair.phi, ops, mask, z.Z);
    const double du = std::abs(dcert.value - cap) / cap;
    const double dl = std::abs(tcert.value - cap) / cap;
    const bool sandwich =
        tcert.value <= cap * (1.0 + 1e-12) && cap <= dcert.value * (1.0 + 1e-12);
    out.push_back({"variational", "optimizer_exactness",
                   "dirichlet " + std::to_string(du) + ", thomson " + std::to_string(dl),
                   du < 1e-8 && dl < 1e-8});
    out.push_back({"variational", "duality_sandwich",
                   "thomson <= cap <= dirichlet within 1e-12 relative", sandwich});
  }
}

void run_quadrature_checks(const nrcap::RunConfig& cfg, const Analysis& a,
                           std::vector<CheckResult>& out) {
  const auto q =
      nrcap::saddle_box_quadrature(cfg.potential, a.saddles.at(0), a.drift, 0.05, 2.0);
  out.push_back({"quadrature", "saddle_box_ratio",
                 "ratio " + std::to_string(q.ratio) + " at eps=0.05",
                 q.ratio > 0.9 && q.ratio < 1.1});
}

void run_sde_checks(const nrcap::RunConfig& cfg, const Analysis& a,
                    std::vector<CheckResult>& out) {
  using namespace nrcap;
  const auto& p = cfg.potential;
  SdeConfig sc = cfg.sde;
  sc.epsilon = 0.1;
  sc.dt = 0.005;
  sc.n_paths = 300;
  const Ball ballA{a.landscape.m1.location, cfg.grid.radius_a};
  const Ball ballB{a.landscape.m2.location, cfg.grid.radius_b};

  {
    const std::array<double, 4> box{p.box[0], p.box[1], p.box[2], p.box[3]};
    const Grid2D grid(81, 61, box);
    const auto ops = discretize_generator(grid, p, a.drift, sc.epsilon);
    const std::array<double, 2> cA{ballA.center(0), ballA.center(1)};
    const std::array<double, 2> cB{ballB.center(0), ballB.center(1)};
    const auto mask = make_ball_masks(grid, cA, ballA.radius, cB, ballB.radius);
    const auto eq = solve_equilibrium_potential(ops, mask);
    const Vec probe = a.saddles.at(0).sigma;
    const int i = static_cast<int>(std::lround((probe(0) - grid.x0) / grid.h));
    const int jj = static_cast<int>(std::lround((probe(1) - grid.y0) / grid.h));
    const double h_pde = eq.h[grid.idx(i, jj)];
    const auto est = estimate_committor(probe, ballA, ballB, p, a.drift, sc);
    const double tol = 3.0 * est.std_error + 0.01;
    out.push_back({"sde", "committor_vs_pde",
                   "MC " + std::to_string(est.probability) + " vs PDE " +
                       std::to_string(h_pde) + " (tol " + std::to_string(tol) + ")",
                   std::abs(est.probability - h_pde) <= tol});
  }
  if (cfg.potential_name == "quartic2d") {
    Vec x1(2), x2(2);
    x1 << 0.5, 0.0;
    x2 << -0.5, 0.0;
    const auto e1 = estimate_committor(x1, ballA, ballB, p, a.drift, sc);
    const auto e2 = estimate_committor(x2, ballA, ballB, p, a.drift, sc);
    const double sum = e1.probability + e2.probability;
    const double tol =
        3.0 * std::sqrt(e1.std_error * e1.std_error + e2.std_error * e2.std_error) + 0.01;
    out.push_back({"sde", "mirror_symmetry",
                   "committor sum " + std::to_string(sum) + " (tol " + std::to_string(tol) + ")",
                   std::abs(sum - 1.0) <= tol});
  } else {
    out.push_back({"sde", "mirror_symmetry", "only defined for the symmetric instance", false,
                   true});
  }
}

int cmd_validate(const nrcap::RunConfig& cfg, const std::string& checks) {
  const Analysis a = analyze_instance(cfg);
  auto enabled = [&](const char* block) {
    return checks.empty() || checks.find(block) != std::string::npos;
  };
  std::vector<CheckResult> results;
  if (enabled("spectral")) run_spectral_checks(cfg, results);
  if (enabled("pde") || enabled("variational")) run_pde_checks(cfg, a, results);
  if (enabled("quadrature")) run_quadrature_checks(cfg, a, results);
  if (enabled("sde")) run_sde_checks(cfg, a, results);

  json rj = envelope(cfg, "validate");
  json arr = json::array();
  bool all_pass = true;
  for (const auto& r : results) {
    if (!checks.empty() && !enabled(r.block.c_str())) continue;
    arr.push_back(json{{"block", r.block},
                       {"check", r.name},
                       {"status", r.skipped ? "skipped" : (r.pass ? "pass" : "fail")},
                       {"detail", r.detail}});
    if (!r.skipped && !r.pass) all_pass = false;
    std::printf("validate: [%s] %s: %s\n", r.block.c_str(), r.name.c_str(),
                r.skipped ? "SKIP" : (r.pass ? "PASS" : "FAIL"));
  }
  rj["checks"] = arr;
  rj["all_pass"] = all_pass;
  write_report(cfg.out_dir + "/validation.json", rj);
  return all_pass ? 0 : 1;
}

int cmd_report(const nrcap::RunConfig& cfg) {
  struct Row {
    double cap_pde = NAN, cap_asym = NAN, dirichlet = NAN, thomson = NAN, mc_mean = NAN,
           ek_mean = NAN;
  };
  std::map<double, Row> rows;
  auto load = [&](const std::string& name, json& j) {
    std::ifstream in(cfg.out_dir + "/" + name);
    if (!in.good()) return false;
    in >> j;
    return true;
  };
  json kramers, capacity, simulate;
  bool any = false;
  if (load("kramers.json", kramers)) {
    any = true;
    for (const auto& r : kramers.at("records")) {
      Row& row = rows[r.at("epsilon").get<double>()];
      row.ek_mean = r.at("prediction").at("mean_hit").get<double>();
      row.cap_asym = r.at("prediction").at("cap_asym").get<double>();
    }
  }
  if (load("capacity.json", capacity)) {
    any = true;
    for (const auto& r : capacity.at("records")) {
      Row& row = rows[r.at("epsilon").get<double>()];
      row.cap_pde = r.at("capacity").at("cap_dirichlet_form").get<double>();
      row.cap_asym = r.at("cap_asym").get<double>();
      row.dirichlet = r.at("bounds").at("dirichlet").at("value").get<double>();
      row.thomson = r.at("bounds").at("thomson").at("value").get<double>();
    }
  }
  if (load("simulate.json", simulate)) {
    any = true;
    for (const auto& r : simulate.at("records")) {
      Row& row = rows[r.at("epsilon").get<double>()];
      row.mc_mean = r.at("stats").at("mean").get<double>();
    }
  }
  nrcap::require(any, nrcap::errc::invalid_config,
                 "no kramers.json, capacity.json, or simulate.json in " + cfg.out_dir);

  std::ofstream out(cfg.out_dir + "/report.csv");
  nrcap::require(out.good(), nrcap::errc::invalid_argument, "cannot open report.csv");
  out << "epsilon,cap_pde,cap_asym,dirichlet,thomson,mc_mean,ek_mean\n";
  char buf[64];
  auto cell = [&](double v) -> std::string {
    if (std::isnan(v)) return "";
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
  };
  for (const auto& [eps, r] : rows)
    out << cell(eps) << "," << cell(r.cap_pde) << "," << cell(r.cap_asym) << ","
        << cell(r.dirichlet) << "," << cell(r.thomson) << "," << cell(r.mc_mean) << ","
        << cell(r.ek_mean) << "\n";
  std::printf("report: %zu epsilon rows -> %s/report.csv\n", rows.size(), cfg.out_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"numerical toolkit for non-reversible metastable diffusions"};
  app.require_subcommand(1);
  app.fallthrough();  // global options may follow the subcommand
  std::string config_path, out_override, checks;
  std::int64_t seed_override = -1;
  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option("--seed", seed_override, "override sde.seed");
  app.add_option("--out", out_override, "override output directory");

  auto* analyze = app.add_subcommand("analyze", "landscape and saddle analysis");
  auto* predict = app.add_subcommand("predict", "Eyring-Kramers predictions per epsilon");
  auto* capacity = app.add_subcommand("capacity", "grid capacities and variational bounds");
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo hitting times");
  auto* validate = app.add_subcommand("validate", "run the identity suites");
  validate->add_option("--checks", checks, "comma-separated blocks to run");
  auto* report = app.add_subcommand("report", "merge prior outputs into report.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    nrcap::RunConfig cfg =
        config_path.empty() ? nrcap::parse_config(nrcap::json::object())
                            : nrcap::load_config(config_path);
    if (seed_override >= 0) {
      cfg.sde.seed = static_cast<std::uint64_t>(seed_override);
      cfg.resolved["sde"]["seed"] = cfg.sde.seed;
    }
    if (!out_override.empty()) {
      cfg.out_dir = out_override;
      cfg.resolved["out_dir"] = cfg.out_dir;
    }
    std::filesystem::create_directories(cfg.out_dir);

    if (analyze->parsed()) return cmd_analyze(cfg);
    if (predict->parsed()) return cmd_predict(cfg);
    if (capacity->parsed()) return cmd_capacity(cfg);
    if (simulate->parsed()) return cmd_simulate(cfg);
    if (validate->parsed()) return cmd_validate(cfg, checks);
    if (report->parsed()) return cmd_report(cfg);
    return 2;
  } catch (const nrcap::toolkit_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.code() == nrcap::errc::invalid_config ? 2 : 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
