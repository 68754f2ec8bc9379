#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "liouville/optimality.hpp"
#include "liouville/scenarios.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

using namespace liouville;

namespace {

const TargetSet kDisk = TargetSet::ball(make_vec({0.0, 0.0}), 1.0);

Problem mollified_p_prime() {
  Config c;
  c.set("", "scenario", "p_prime");
  PerturbOptions po;
  po.theta_only = true;
  return perturb(build_scenario(c).problem, 0.05, po).problem;
}

double max_node_gap(const BoundaryMesh& a, const BoundaryMesh& b) {
  REQUIRE(a.size() == b.size());
  double gap = 0.0;
  for (std::size_t j = 0; j < a.size(); ++j) gap = std::max(gap, (a.nodes[j] - b.nodes[j]).norm());
  return gap;
}

}  // namespace

TEST_CASE("target tube") {
  const std::vector<double> taus{0.0, 0.25, 0.5, 1.0};
  SUBCASE("zero field keeps the target") {
    const auto tube = backward_tube(kDisk, close_constant(zero_field(2, 2), make_vec({0.0, 0.0}), 1.0, 0.1), taus, 0.05);
    for (double tau : taus) CHECK(max_node_gap(tube.at(tau), tube.reference) == 0.0);
  }
  SUBCASE("translation shifts the target back") {
    const auto field = close_constant(translation_field(2, 1.0), make_vec({1.0, 0.0}), 1.0, 0.05);
    const auto tube = backward_tube(kDisk, field, taus, 0.05);
    for (double tau : taus) {
      const auto& m = tube.at(tau);
      double gap = 0.0;
      for (std::size_t j = 0; j < m.size(); ++j)
        gap = std::max(gap, (m.nodes[j] - tube.reference.nodes[j] + Vec2(1.0 - tau, 0.0)).norm());
      CHECK(gap <= 1e-12);
    }
  }
  SUBCASE("rotation preserves the perimeter and forward transport returns the reference") {
    const auto field = close_constant(rotation_field(1.0, 1.0), make_vec({0.2, 0.0}), 1.0, 1e-3);
    const auto tube = backward_tube(kDisk, field, taus, 0.02);
    for (double tau : taus) {
      const auto& m = tube.at(tau);
      CHECK(std::abs(m.total_sigma() - tube.reference.total_sigma()) <= 1e-3);
      double gap = 0.0;
      for (std::size_t j = 0; j < m.size(); ++j)
        gap = std::max(gap, (to_vec2(flow(field, tau, 1.0, to_vec(m.nodes[j]))) - tube.reference.nodes[j]).norm());
      CHECK(gap <= 1e-8);
    }
  }
  SUBCASE("unknown grid times are rejected") {
    const auto tube = backward_tube(kDisk, close_constant(zero_field(2, 2), make_vec({0.0, 0.0}), 1.0, 0.1), taus, 0.05);
    CHECK_THROWS_AS((void)tube.at(0.3), ValidationError);
  }
}

TEST_CASE("self intersection") {
  auto square = mesh_from_polylines({{{0, 0}, {1, 0}, {1, 1}, {0, 1}}}, {true});
  CHECK_FALSE(self_intersects(square));
  auto bowtie = mesh_from_polylines({{{0, 0}, {1, 1}, {1, 0}, {0, 1}}}, {true});
  CHECK(self_intersects(bowtie));
}

TEST_CASE("outflow") {
  const auto mesh = boundary_mesh(kDisk, 0.01);
  const auto field = translation_field(2, 1.0);
  SUBCASE("constant density has no net flux") {
    const std::vector<double> ones(mesh.size(), 1.0);
    CHECK(std::abs(outflow(mesh, ones, field, 0.0, make_vec({0.6, -0.8}))) <= 1e-10);
  }
  SUBCASE("linear density recovers the disk area") {
    std::vector<double> rho;
    for (const auto& x : mesh.nodes) rho.push_back(x.x() + 2.0);
    CHECK(std::abs(outflow(mesh, rho, field, 0.0, make_vec({1.0, 0.0})) - std::numbers::pi) <= 1e-4);
  }
  SUBCASE("zero velocity") {
    const std::vector<double> rho(mesh.size(), 3.0);
    CHECK(outflow(mesh, rho, field, 0.0, make_vec({0.0, 0.0})) == 0.0);
  }
}

TEST_CASE("hypothesis gate") {
  const auto rho = bump_density(make_vec({0.0, 0.0}), 0.5);
  const auto smooth_field = translation_field(2, 1.0);
  auto expect = [](auto&& call, const std::string& name) {
    try {
      call();
      FAIL("expected " << name);
    } catch (const HypothesisError& e) {
      CHECK(e.hypothesis() == name);
    }
  };
  CHECK_NOTHROW(check_hypotheses(rho, smooth_field, kDisk));
  expect([&] { check_hypotheses(ParticleMeasure::dirac(make_vec({0.0, 0.0})), smooth_field, kDisk); },
         "density smoothness");
  expect([&] { check_hypotheses(rho, smooth_field, TargetSet::polygon({{0, 0}, {1, 0}, {1, 1}, {0, 1}})); },
         "interior ball");
  auto rough = smooth_field;
  rough.smooth = false;
  expect([&] { check_hypotheses(rho, rough, kDisk); }, "field smoothness");
}

TEST_CASE("optimality residual") {
  SUBCASE("the reference control of the mollified problem passes") {
    const auto p = mollified_p_prime();
    const auto ubar = PiecewiseControl::constant(make_vec({1.0, 0.0}), 1.0, 4);
    const auto report = optimality_residual(ubar, p.field, p.target, p.theta, p.control_grid(), p.optimality_options());
    CHECK(report.rows.size() == 4);
    CHECK(report.passes(1e-2));
    for (const auto& row : report.rows) {
      CHECK(row.outflow_min <= row.outflow_ubar);
      CHECK(row.residual >= 0.0);
    }
    std::ostringstream out;
    write_residual_csv(out, report);
    CHECK(out.str().rfind("tau,res,outflow_ubar,outflow_min,argmin_omega1,argmin_omega2\n", 0) == 0);
  }
  SUBCASE("a control that misses the target sees no outflow") {
    const auto p = mollified_p_prime();
    const auto u = PiecewiseControl::constant(make_vec({-1.0, 0.0}), 1.0, 2);
    const auto report = optimality_residual(u, p.field, p.target, p.theta, p.control_grid(), p.optimality_options());
    // The blob ends at (-3, 0), far from the target, so every outflow vanishes.
    CHECK(report.max_residual == 0.0);
  }
  SUBCASE("a control-independent field has zero residual") {
    auto field = zero_field(2, 2);
    field.smooth = true;
    const auto u = PiecewiseControl::constant(make_vec({0.0, 0.0}), 1.0, 3);
    const auto rho = bump_density(make_vec({0.8, 0.0}), 0.5);
    const auto grid = ControlSet::ball(make_vec({0.0, 0.0}), 1.0).grid(8);
    const auto report = optimality_residual(u, field, kDisk, rho, grid, {0.02, 1e-2});
    CHECK(report.max_residual == 0.0);
  }
}

TEST_CASE("directional derivative") {
  const auto rho0 = bump_density(make_vec({0.8, 0.0}), 0.5);
  const auto field = close_constant(rotation_field(1.0, 1.0), make_vec({0.0, 0.0}), 1.0, 1e-2);
  SUBCASE("tangential directions do not move a disk") {
    const auto w = [](const Vec& x) { return make_vec({-x[1], x[0]}); };
    CHECK(std::abs(directional_derivative(rho0, field, kDisk, 0.5, w, 0.005)) <= 1e-6);
  }
  SUBCASE("constant density") {
    const auto mesh = boundary_mesh(kDisk, 0.01);
    const std::vector<double> ones(mesh.size(), 1.0);
    CHECK(std::abs(directional_derivative(mesh, ones, [](const Vec&) { return make_vec({1.0, 2.0}); })) <= 1e-10);
  }
  SUBCASE("agrees with a finite difference of the shifted mass") {
    const Vec w = make_vec({1.0, 0.5});
    const double tau = 0.5;
    const double d = directional_derivative(rho0, field, kDisk, tau, [&](const Vec&) { return w; }, 0.002);
    // ρ(τ, y) = ρ0(R_{-τ} y) and the rotation maps the unit disk onto itself.
    auto shifted_mass = [&](double eps) {
      AnalyticDensity r;
      r.dim = 2;
      r.support = {make_vec({-2.0, -2.0}), make_vec({2.0, 2.0})};
      r.eval = [&, eps](const Vec& y) {
        const Vec z = y - eps * w;
        const double c = std::cos(tau), s = std::sin(tau);
        return rho0(make_vec({c * z[0] + s * z[1], -s * z[0] + c * z[1]}));
      };
      return mass_in(r, kDisk, {1e-9, 9, 20000}).value;
    };
    const double h = 1e-3;
    const double fd = (shifted_mass(h) - shifted_mass(-h)) / (2 * h);
    CHECK(std::abs(d) > 0.1);
    CHECK(std::abs(d - fd) <= 5e-2 * std::abs(fd));
  }
}

TEST_CASE("needle derivative matches the outflow gap") {
  const auto p = mollified_p_prime();
  const auto ubar = PiecewiseControl::constant(make_vec({1.0, 0.0}), 1.0);
  const Vec omega = make_vec({0.0, 1.0});
  const auto mesh = boundary_mesh(p.target, p.mesh_h);
  const auto rho = density_on_mesh(mesh, std::get<AnalyticDensity>(p.theta), close(p.field, ubar, p.step), 1.0);
  const double predicted = outflow(mesh, rho, p.field, 1.0, ubar.at(1.0)) - outflow(mesh, rho, p.field, 1.0, omega);
  QuadratureOptions tight{1e-9, 9, 20000};
  const double base = objective(p.theta, p.field, ubar, p.step, p.target, tight).value;
  const double eps = 1e-3;
  const auto u = needle_variation(ubar, 1.0, eps, omega, p.control_set);
  const double fd = (objective(p.theta, p.field, u, p.step, p.target, tight).value - base) / eps;
  CHECK(predicted < 0.0);
  CHECK(std::abs(fd - predicted) <= 5e-2 * std::abs(predicted));
}

TEST_CASE("main bound") {
  const auto theta = bump_density(make_vec({0.3, -0.2}), 1.5);
  const AffineMap id{Mat::Identity(2, 2), make_vec({0.0, 0.0})};
  SUBCASE("equal maps") {
    const auto r = mainbound_check(theta, kDisk, id, id);
    CHECK(r.lhs <= 1e-12);
    CHECK(r.sup_distance == 0.0);
    CHECK(r.pass);
  }
  SUBCASE("translations") {
    for (double delta : {0.01, 0.05, 0.1}) {
      const AffineMap shifted{Mat::Identity(2, 2), make_vec({delta, 0.0})};
      const auto r = mainbound_check(theta, kDisk, id, shifted);
      CHECK(std::abs(r.sup_distance - delta) <= 1e-12);
      CHECK(r.b == doctest::Approx(1.0));
      CHECK(r.lhs > 0.0);
      CHECK(r.pass);
    }
  }
  SUBCASE("random affine maps") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> angle(0.0, 2 * std::numbers::pi), scale(-0.5, 0.5), shift(-0.2, 0.2);
    auto draw = [&] {
      const double a = angle(rng), b = angle(rng);
      Mat r1(2, 2), r2(2, 2), s = Mat::Zero(2, 2);
      r1 << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
      r2 << std::cos(b), -std::sin(b), std::sin(b), std::cos(b);
      s(0, 0) = std::exp(scale(rng));
      s(1, 1) = std::exp(scale(rng));
      return AffineMap{r1 * s * r2, make_vec({shift(rng), shift(rng)})};
    };
    for (int i = 0; i < 10; ++i) {
      const auto r = mainbound_check(theta, kDisk, draw(), draw());
      CHECK(r.pass);
      CHECK(r.lhs <= r.rhs);
    }
  }
}
