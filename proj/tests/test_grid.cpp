#include "catch_amalgamated.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "nrcap/grid.hpp"

using namespace nrcap;

namespace {

Mat m22(double a, double b, double c, double d) {
  Mat m(2, 2);
  m << a, b, c, d;
  return m;
}

const std::array<double, 4> kBox = {-2.0, 2.0, -1.5, 1.5};

struct Instance {
  PotentialSpec p;
  Grid2D g;
  DriftMatrix drift;
  GridOperators ops;
  RegionMask mask;
};

Instance make_instance(int nx, int ny, const Mat& M, double eps) {
  Instance inst;
  inst.p = make_quartic2d();
  inst.g = Grid2D(nx, ny, kBox);
  inst.drift = decompose_drift(M);
  inst.ops = discretize_generator(inst.g, inst.p, inst.drift, eps);
  inst.mask = make_ball_masks(inst.g, {-1.0, 0.0}, 0.3, {1.0, 0.0}, 0.3);
  return inst;
}

GridField random_field(const Grid2D& g, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  GridField f(g);
  for (auto& v : f.v) v = gauss(rng);
  return f;
}

double node_value(const Grid2D& g, const GridField& f, double x, double y) {
  const int i = static_cast<int>(std::lround((x - g.x0) / g.h));
  const int j = static_cast<int>(std::lround((y - g.y0) / g.h));
  return f[g.idx(i, j)];
}

}  // namespace

TEST_CASE("grid constructor enforces size and uniform spacing", "[grid]") {
  CHECK_NOTHROW(Grid2D(17, 16, {0.0, 1.0, 0.0, 15.0 / 16.0}));
  try {
    Grid2D(15, 40, kBox);
    FAIL("expected invalid_argument");
  } catch (const toolkit_error& e) {
    CHECK(e.code() == errc::invalid_argument);
  }
  try {
    Grid2D(41, 41, kBox);  // 4/40 != 3/40
    FAIL("expected invalid_argument");
  } catch (const toolkit_error& e) {
    CHECK(e.code() == errc::invalid_argument);
  }
}

TEST_CASE("mask validation", "[grid]") {
  const Grid2D g(81, 61, kBox);

  SECTION("balls touching the box boundary are rejected") {
    try {
      make_ball_masks(g, {-1.8, 0.0}, 0.3, {1.0, 0.0}, 0.3);
      FAIL("expected invalid_argument");
    } catch (const toolkit_error& e) {
      CHECK(e.code() == errc::invalid_argument);
    }
  }
  SECTION("overlapping balls are rejected") {
    try {
      make_ball_masks(g, {-0.2, 0.0}, 0.3, {0.2, 0.0}, 0.3);
      FAIL("expected invalid_argument");
    } catch (const toolkit_error& e) {
      CHECK(e.code() == errc::invalid_argument);
    }
  }
  SECTION("empty region is rejected") {
    RegionMask m;
    m.nx = g.nx;
    m.ny = g.ny;
    m.label.assign(g.n_nodes(), 0);
    m.label[g.idx(20, 30)] = static_cast<std::uint8_t>(Region::A);
    try {
      validate_mask(g, m);  // B empty
      FAIL("expected invalid_argument");
    } catch (const toolkit_error& e) {
      CHECK(e.code() == errc::invalid_argument);
    }
  }
  SECTION("disconnected region is rejected") {
    RegionMask m;
    m.nx = g.nx;
    m.ny = g.ny;
    m.label.assign(g.n_nodes(), 0);
    m.label[g.idx(20, 30)] = static_cast<std::uint8_t>(Region::A);
    m.label[g.idx(22, 30)] = static_cast<std::uint8_t>(Region::A);  // gap at 21
    m.label[g.idx(60, 30)] = static_cast<std::uint8_t>(Region::B);
    try {
      validate_mask(g, m);
      FAIL("expected invalid_argument");
    } catch (const toolkit_error& e) {
      CHECK(e.code() == errc::invalid_argument);
    }
  }
  SECTION("default balls validate") {
    CHECK_NOTHROW(make_ball_masks(g, {-1.0, 0.0}, 0.3, {1.0, 0.0}, 0.3));
  }
}

TEST_CASE("discretization preconditions", "[grid]") {
  const PotentialSpec p = make_quartic2d();
  const DriftMatrix drift = decompose_drift(Mat::Identity(2, 2));

  // 21 nodes on [-2,2]: h = 0.2 > sqrt(0.1)/4
  try {
    discretize_generator(Grid2D(21, 16, {-2.0, 2.0, -1.5, 1.5}), p, drift, 0.1);
    FAIL("expected ResolutionTooCoarse");
  } catch (const toolkit_error& e) {
    CHECK(e.code() == errc::resolution_too_coarse);
  }

  // drift whose symmetric part has off-diagonal entries is unsupported
  try {
    discretize_generator(Grid2D(81, 61, kBox), p, decompose_drift(m22(2.0, 1.0, 0.0, 1.0)),
                         0.1);
    FAIL("expected UnsupportedDrift");
  } catch (const toolkit_error& e) {
    CHECK(e.code() == errc::unsupported_drift);
  }
}

TEST_CASE("flat potential reduces to the scaled 5-point Laplacian", "[grid]") {
  PotentialSpec p = make_quartic2d();
  p.U = [](const Vec&) { return 0.0; };
  p.grad = nullptr;
  p.hess = nullptr;
  const Grid2D g(32, 16, {0.0, 31.0, 0.0, 15.0});  // h = 1
  const DriftMatrix drift = decompose_drift(Mat::Identity(2, 2));
  const GridOperators ops = discretize_generator(g, p, drift, 20.0);

  GridField f(g);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) f[g.idx(i, j)] = std::sin(0.3 * i) + 0.1 * j * j;
  const GridField Lf = ops.apply_L(f, +1.0);
  for (int j = 1; j < g.ny - 1; ++j)
    for (int i = 1; i < g.nx - 1; ++i) {
      const double lap = f[g.idx(i - 1, j)] + f[g.idx(i + 1, j)] + f[g.idx(i, j - 1)] +
                         f[g.idx(i, j + 1)] - 4.0 * f[g.idx(i, j)];
      CHECK(Lf[g.idx(i, j)] == Catch::Approx(ops.eps * lap).margin(1e-10));
    }
}

TEST_CASE("rows annihilate constants exactly", "[grid]") {
  const Instance inst = make_instance(81, 61, m22(1.0, 1.0, -1.0, 1.0), 0.1);
  const GridField ones(inst.g, 1.0);
  for (double sign : {+1.0, -1.0}) {
    const GridField r = inst.ops.apply_mL(ones, sign);
    for (double v : r.v) CHECK(v == 0.0);
  }
}

TEST_CASE("adjointness under the discrete measure", "[grid]") {
  const Instance inst = make_instance(81, 61, m22(1.0, 1.0, -1.0, 1.0), 0.1);
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 5; ++trial) {
    const GridField f = random_field(inst.g, rng);
    const GridField g2 = random_field(inst.g, rng);
    const double lhs = inst.ops.inner(f, inst.ops.apply_L(g2, +1.0));
    const double rhs = inst.ops.inner(inst.ops.apply_L(f, -1.0), g2);
    const double scale = std::max(std::abs(lhs), 1e-30);
    CHECK(std::abs(lhs - rhs) / scale < 1e-12);
  }
}

TEST_CASE("apply_L converges to the analytic generator at order two", "[grid]") {
  // L f = eps div(M grad f) - grad U . M grad f with f = x^2 + y^2, M = I:
  // L f = 4 eps - 2 x grad_x U - 2 y grad_y U
  const PotentialSpec p = make_quartic2d();
  const DriftMatrix drift = decompose_drift(Mat::Identity(2, 2));
  const double eps = 0.1;
  const Vec probe = (Vec(2) << 0.5, 0.25).finished();

  auto error_at = [&](int nx, int ny) {
    const Grid2D g(nx, ny, kBox);
    const GridOperators ops = discretize_generator(g, p, drift, eps);
    GridField f(g);
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i)
        f[g.idx(i, j)] = g.x(i) * g.x(i) + g.y(j) * g.y(j);
    const GridField Lf = ops.apply_L(f, +1.0);
    const Vec grad = p.gradient(probe);
    const double exact = 4.0 * eps - 2.0 * probe(0) * grad(0) - 2.0 * probe(1) * grad(1);
    return std::abs(node_value(g, Lf, probe(0), probe(1)) - exact);
  };

  const double e1 = error_at(161, 121);
  const double e2 = error_at(321, 241);
  const double order = std::log2(e1 / e2);
  CHECK(order >= 1.9);
}

TEST_CASE("equilibrium potentials on the reference grid, M = I", "[grid]") {
  const Instance inst = make_instance(161, 121, Mat::Identity(2, 2), 0.1);
  const EquilibriumSolution sol = solve_equilibrium_potential(inst.ops, inst.mask);
  CHECK(sol.residual < 1e-10);
  CHECK(sol.residual_star < 1e-10);

  // oracle: oracles/grid_capacity.py
  CHECK(node_value(inst.g, sol.h, -0.5, 0.0) ==
        Catch::Approx(0.932798701053038).epsilon(1e-10));
  CHECK(node_value(inst.g, sol.h, 0.0, 0.0) ==
        Catch::Approx(0.4997097250631837).epsilon(1e-10));
  CHECK(node_value(inst.g, sol.h, 0.5, 0.0) ==
        Catch::Approx(0.0663607418858371).epsilon(1e-10));
  CHECK(node_value(inst.g, sol.h, 0.3, 0.4) ==
        Catch::Approx(0.1884048060916641).epsilon(1e-10));
  CHECK(node_value(inst.g, sol.h, -0.2, -0.3) ==
        Catch::Approx(0.7241984175583758).epsilon(1e-10));

  // x -> -x symmetry swaps A and B
  for (int j = 0; j < inst.g.ny; ++j)
    CHECK(std::abs(sol.h[inst.g.idx(80, j)] - 0.5) < 1e-3);

  double lo = 1.0, hi = 0.0;
  for (double v : sol.h.v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(lo >= -1e-8);
  CHECK(hi <= 1.0 + 1e-8);

  const CapacityReport r = capacity_from_fields(sol.h, sol.h_star, inst.ops, inst.mask, 1.0);
  CHECK(r.cap_dirichlet_form == Catch::Approx(0.00778704431866555).epsilon(1e-10));
  CHECK(std::abs(r.cap_flux - r.cap_dirichlet_form) / r.cap_dirichlet_form < 1e-10);
  CHECK(r.adjoint_defect / r.cap_dirichlet_form < 1e-8);
  CHECK(r.swap_defect / r.cap_dirichlet_form < 1e-10);
}

TEST_CASE("equilibrium potentials on the reference grid, non-reversible", "[grid]") {
  const Instance inst = make_instance(161, 121, m22(1.0, 1.0, -1.0, 1.0), 0.1);
  const EquilibriumSolution sol = solve_equilibrium_potential(inst.ops, inst.mask);

  // oracle: oracles/grid_capacity.py
  CHECK(node_value(inst.g, sol.h, -0.5, 0.0) ==
        Catch::Approx(0.9454381217275845).epsilon(1e-10));
  CHECK(node_value(inst.g, sol.h, 0.0, 0.0) ==
        Catch::Approx(0.4998432638522976).epsilon(1e-10));
  CHECK(node_value(inst.g, sol.h, 0.5, 0.0) ==
        Catch::Approx(0.05398779125646244).epsilon(1e-10));
  CHECK(node_value(inst.g, sol.h, 0.3, 0.4) ==
        Catch::Approx(0.06142598140346393).epsilon(1e-10));
  CHECK(node_value(inst.g, sol.h, -0.2, -0.3) ==
        Catch::Approx(0.861005506977944).epsilon(1e-10));

  const CapacityReport r = capacity_from_fields(sol.h, sol.h_star, inst.ops, inst.mask, 1.0);
  CHECK(r.cap_dirichlet_form == Catch::Approx(0.01119768838649461).epsilon(1e-10));
  CHECK(std::abs(r.cap_flux - r.cap_dirichlet_form) / r.cap_dirichlet_form < 1e-10);
  CHECK(r.adjoint_defect / r.cap_dirichlet_form < 1e-8);
  CHECK(r.swap_defect / r.cap_dirichlet_form < 1e-10);
  // the rotation part raises the capacity above the reversible value
  CHECK(r.cap_dirichlet_form > 0.00778704431866555);
}

TEST_CASE("swapping A and B leaves the capacity unchanged", "[grid]") {
  // honest re-solve with the regions exchanged, not the 1 - h identity
  const PotentialSpec p = make_quartic2d();
  const Grid2D g(81, 61, kBox);
  const DriftMatrix drift = decompose_drift(m22(1.0, 1.0, -1.0, 1.0));
  const GridOperators ops = discretize_generator(g, p, drift, 0.1);

  const RegionMask ab = make_ball_masks(g, {-1.0, 0.0}, 0.3, {1.0, 0.0}, 0.3);
  const RegionMask ba = make_ball_masks(g, {1.0, 0.0}, 0.3, {-1.0, 0.0}, 0.3);
  const EquilibriumSolution s1 = solve_equilibrium_potential(ops, ab);
  const EquilibriumSolution s2 = solve_equilibrium_potential(ops, ba);
  const CapacityReport r1 = capacity_from_fields(s1.h, s1.h_star, ops, ab, 1.0);
  const CapacityReport r2 = capacity_from_fields(s2.h, s2.h_star, ops, ba, 1.0);
  CHECK(std::abs(r1.cap_dirichlet_form - r2.cap_dirichlet_form) / r1.cap_dirichlet_form <
        1e-10);
}

TEST_CASE("equilibrium measure is a probability measure on the gate side", "[grid]") {
  // radius 0.31 keeps every lattice node strictly off the circle; at 0.3 the
  // poles (-1, +-0.3) sit exactly on it and rounding of y_j = -1.5 + 25j/1000
  // classifies the two poles differently, so the discrete problem loses the
  // y -> -y symmetry this test relies on
  const Instance inst = make_instance(161, 121, Mat::Identity(2, 2), 0.1);
  const RegionMask mask = make_ball_masks(inst.g, {-1.0, 0.0}, 0.31, {1.0, 0.0}, 0.31);
  const EquilibriumSolution sol = solve_equilibrium_potential(inst.ops, mask);
  const CapacityReport r = capacity_from_fields(sol.h, sol.h_star, inst.ops, mask, 1.0);

  std::vector<std::string> warnings;
  const GridField nu =
      equilibrium_measure(sol.h_star, inst.ops, mask, r.cap_dirichlet_form, 1.0, &warnings);
  double mass = 0.0, min_w = 0.0, gate_side = 0.0;
  for (int j = 0; j < inst.g.ny; ++j)
    for (int i = 0; i < inst.g.nx; ++i) {
      const std::size_t n = inst.g.idx(i, j);
      mass += nu[n];
      min_w = std::min(min_w, nu[n]);
      if (inst.g.x(i) >= -1.0) gate_side += nu[n];
    }
  CHECK(std::abs(mass - 1.0) < 1e-8);
  CHECK(min_w >= 0.0);

  // y -> -y symmetry of the construction
  for (int j = 0; j < inst.g.ny; ++j)
    for (int i = 0; i < inst.g.nx; ++i)
      CHECK(std::abs(nu[inst.g.idx(i, j)] - nu[inst.g.idx(i, inst.g.ny - 1 - j)]) < 1e-8);

  CHECK(gate_side > 0.5);
}

TEST_CASE("equilibrium measure concentrates toward the gate at small eps", "[grid]") {
  const Instance inst = make_instance(193, 145, Mat::Identity(2, 2), 0.05);
  const EquilibriumSolution sol = solve_equilibrium_potential(inst.ops, inst.mask);
  const CapacityReport r = capacity_from_fields(sol.h, sol.h_star, inst.ops, inst.mask, 1.0);
  const GridField nu =
      equilibrium_measure(sol.h_star, inst.ops, inst.mask, r.cap_dirichlet_form, 1.0);
  double mass = 0.0, gate_side = 0.0;
  for (int j = 0; j < inst.g.ny; ++j)
    for (int i = 0; i < inst.g.nx; ++i) {
      mass += nu[inst.g.idx(i, j)];
      if (inst.g.x(i) >= -1.0) gate_side += nu[inst.g.idx(i, j)];
    }
  CHECK(std::abs(mass - 1.0) < 1e-8);
  CHECK(gate_side / mass >= 0.9);
}

TEST_CASE("prop3 holds to machine precision for f = 1", "[grid]") {
  // oracle: oracles/grid_capacity.py
  struct Case {
    Mat M;
    double lhs;
  };
  const Case cases[] = {{Mat::Identity(2, 2), 63.36968425396054},
                        {m22(1.0, 1.0, -1.0, 1.0), 44.07352756931315}};
  for (const auto& c : cases) {
    const Instance inst = make_instance(161, 121, c.M, 0.1);
    const EquilibriumSolution sol = solve_equilibrium_potential(inst.ops, inst.mask);
    const CapacityReport r =
        capacity_from_fields(sol.h, sol.h_star, inst.ops, inst.mask, 1.0);
    const GridField nu =
        equilibrium_measure(sol.h_star, inst.ops, inst.mask, r.cap_dirichlet_form, 1.0);
    const GridField ones(inst.g, 1.0);
    const Prop3Result pr =
        check_prop3(ones, inst.mask, inst.ops, sol.h_star, nu, r.cap_dirichlet_form, 1.0);
    CHECK(pr.defect < 1e-10);
    CHECK(pr.lhs == Catch::Approx(c.lhs).epsilon(1e-8));
  }
}

TEST_CASE("prop3 with a localized source", "[grid]") {
  const Instance inst = make_instance(81, 61, m22(1.0, 1.0, -1.0, 1.0), 0.1);
  const EquilibriumSolution sol = solve_equilibrium_potential(inst.ops, inst.mask);
  const CapacityReport r = capacity_from_fields(sol.h, sol.h_star, inst.ops, inst.mask, 1.0);
  const GridField nu =
      equilibrium_measure(sol.h_star, inst.ops, inst.mask, r.cap_dirichlet_form, 1.0);

  GridField f(inst.g);
  for (int j = 0; j < inst.g.ny; ++j)
    for (int i = 0; i < inst.g.nx; ++i)
      if (std::abs(inst.g.x(i) + 1.0) < 0.4 && std::abs(inst.g.y(j)) < 0.4)
        f[inst.g.idx(i, j)] = 1.0;
  const Prop3Result pr =
      check_prop3(f, inst.mask, inst.ops, sol.h_star, nu, r.cap_dirichlet_form, 1.0);
  CHECK(pr.defect < 1e-10);
  CHECK(pr.lhs > 0.0);
}

TEST_CASE("zero source gives zero on both sides", "[grid]") {
  const Instance inst = make_instance(81, 61, Mat::Identity(2, 2), 0.1);
  const EquilibriumSolution sol = solve_equilibrium_potential(inst.ops, inst.mask);
  const CapacityReport r = capacity_from_fields(sol.h, sol.h_star, inst.ops, inst.mask, 1.0);
  const GridField nu =
      equilibrium_measure(sol.h_star, inst.ops, inst.mask, r.cap_dirichlet_form, 1.0);
  const GridField zero(inst.g);
  const Prop3Result pr =
      check_prop3(zero, inst.mask, inst.ops, sol.h_star, nu, r.cap_dirichlet_form, 1.0);
  CHECK(pr.lhs == 0.0);
  CHECK(pr.rhs == 0.0);
}

TEST_CASE("capacity refinement is Cauchy at first order", "[grid]") {
  // grid-aligned rectangles keep the region boundary fixed across refinement
  // oracle: oracles/acceptance_windows.py
  const PotentialSpec p = make_quartic2d();
  const DriftMatrix drift = decompose_drift(Mat::Identity(2, 2));
  const std::array<double, 4> rectA = {-1.3, -0.7, -0.3, 0.3};
  const std::array<double, 4> rectB = {0.7, 1.3, -0.3, 0.3};

  auto cap_at = [&](int nx, int ny) {
    const Grid2D g(nx, ny, kBox);
    const GridOperators ops = discretize_generator(g, p, drift, 0.1);
    const RegionMask mask = make_rect_masks(g, rectA, rectB);
    const EquilibriumSolution sol = solve_equilibrium_potential(ops, mask);
    return capacity_from_fields(sol.h, sol.h_star, ops, mask, 1.0).cap_dirichlet_form;
  };

  const double c1 = cap_at(81, 61);
  const double c2 = cap_at(161, 121);
  const double c3 = cap_at(321, 241);
  CHECK(c1 == Catch::Approx(0.007948090374529473).epsilon(1e-10));
  CHECK(c2 == Catch::Approx(0.007945583674485073).epsilon(1e-10));
  CHECK(c3 == Catch::Approx(0.00794444453841754).epsilon(1e-10));
  CHECK(std::abs(c2 - c3) < std::abs(c1 - c2));
  CHECK(std::log2(std::abs(c1 - c2) / std::abs(c2 - c3)) > 1.0);
}

TEST_CASE("l11 pointwise bound with a single grid-calibrated constant", "[grid]") {
  // calibrate C at eps = 0.1, require it to cover 0.07 and 0.05
  auto constant_at = [&](double eps, int nx, int ny) {
    const Instance inst = make_instance(nx, ny, Mat::Identity(2, 2), eps);
    const EquilibriumSolution sol = solve_equilibrium_potential(inst.ops, inst.mask);
    return l11_required_constant(inst.ops, inst.mask, sol.h, 0.25, {1.0, 0.0});
  };
  const double c10 = constant_at(0.1, 161, 121);
  const double c07 = constant_at(0.07, 161, 121);
  const double c05 = constant_at(0.05, 193, 145);
  const double budget = 2.0 * c10;
  CHECK(c07 <= budget);
  CHECK(c05 <= budget);
}

TEST_CASE("equilibrium solve stays inside [0,1]", "[grid]") {
  const Instance inst = make_instance(81, 61, Mat::Identity(2, 2), 0.1);
  const EquilibriumSolution sol = solve_equilibrium_potential(inst.ops, inst.mask);
  for (double v : sol.h.v) {
    CHECK(v >= -1e-8);
    CHECK(v <= 1.0 + 1e-8);
  }
}

TEST_CASE("field CSV and GRDF round-trip", "[grid]") {
  const Grid2D g(17, 16, {0.0, 1.0, 0.0, 15.0 / 16.0});
  GridField f(g);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (auto& v : f.v) v = gauss(rng);

  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "nrcap_grid_test";
  fs::create_directories(dir);

  const std::string bin = (dir / "field.grdf").string();
  write_grdf(bin, g, f);
  const auto [g2, f2] = read_grdf(bin);
  CHECK(g2.nx == g.nx);
  CHECK(g2.ny == g.ny);
  CHECK(g2.x0 == g.x0);
  CHECK(g2.h == g.h);
  REQUIRE(f2.v.size() == f.v.size());
  for (std::size_t n = 0; n < f.v.size(); ++n) CHECK(f2.v[n] == f.v[n]);

  const std::string csv = (dir / "field.csv").string();
  write_field_csv(csv, g, f);
  std::ifstream in(csv);
  std::string header;
  std::getline(in, header);
  CHECK(header == "x,y,value");
  std::size_t rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  CHECK(rows == g.n_nodes());
  fs::remove_all(dir);
}

TEST_CASE("truncated GRDF is rejected", "[grid]") {
  const Grid2D g(17, 16, {0.0, 1.0, 0.0, 15.0 / 16.0});
  const GridField f(g, 1.0);
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "nrcap_grid_trunc";
  fs::create_directories(dir);
  const std::string bin = (dir / "field.grdf").string();
  write_grdf(bin, g, f);
  fs::resize_file(bin, fs::file_size(bin) - 8);
  CHECK_THROWS_AS(read_grdf(bin), toolkit_error);
  fs::remove_all(dir);
}
