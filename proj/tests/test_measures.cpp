#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "liouville/measures.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

using namespace liouville;

namespace {

// Independent value of the 2-D bump constant: composite Simpson on the radial profile.
double bump_constant_2d() {
  const int n = 200000;
  const double h = 1.0 / n;
  double acc = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double r = i * h;
    const double f = r >= 1.0 ? 0.0 : r * std::exp(1.0 / (r * r - 1.0));
    acc += f * (i == 0 || i == n ? 1.0 : (i % 2 ? 4.0 : 2.0));
  }
  return 1.0 / (2.0 * std::numbers::pi * acc * h / 3.0);
}

ParticleMeasure random_cloud(std::size_t n, std::uint64_t seed, double lo, double hi) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<Vec> pts;
  for (std::size_t i = 0; i < n; ++i) pts.push_back(make_vec({u(rng), u(rng)}));
  return ParticleMeasure::uniform(std::move(pts));
}

TargetSet box_polygon(double x0, double y0, double x1, double y1) {
  return TargetSet::polygon({Vec2(x0, y0), Vec2(x1, y0), Vec2(x1, y1), Vec2(x0, y1)});
}

}  // namespace

TEST_CASE("particle measures validate their weights") {
  ParticleMeasure m;
  m.dim = 2;
  m.points = {make_vec({0, 0}), make_vec({1, 1})};
  m.weights = {0.5, 0.5 + 1e-9};
  CHECK_THROWS_AS(m.validate(), ValidationError);
  m.weights = {0.5, 0.5};
  CHECK_NOTHROW(m.validate());
  m.points[1] = make_vec({1, 1, 1});
  CHECK_THROWS_AS(m.validate(), ValidationError);
}

TEST_CASE("mass of a uniform cloud in a half box") {
  const auto cloud = random_cloud(1000000, 11, 0.0, 1.0);
  const auto half = box_polygon(-1.0, -1.0, 0.5, 2.0);
  CHECK(std::abs(mass_in(cloud, half) - 0.5) <= 3e-3);
}

TEST_CASE("mass on disjoint supports vanishes") {
  const auto cloud = random_cloud(1000, 3, 0.0, 1.0);
  CHECK(mass_in(cloud, TargetSet::ball(make_vec({5.0, 5.0}), 1.0)) == 0.0);
  const auto bump = mollify(ParticleMeasure::dirac(make_vec({0.0, 0.0})), 0.1);
  CHECK(mass_in(bump, TargetSet::ball(make_vec({5.0, 5.0}), 1.0)).value == 0.0);
}

TEST_CASE("mollifier mass inside its own support ball") {
  const double eps = 0.1;
  const auto bump = mollify(ParticleMeasure::dirac(make_vec({0.0, 0.0})), eps);
  const auto q = mass_in(bump, TargetSet::ball(make_vec({0.0, 0.0}), eps));
  CHECK(std::abs(q.value - 1.0) <= 1e-4);
}

TEST_CASE("closed membership counts boundary points") {
  const auto disk = TargetSet::ball(make_vec({0.0, 0.0}), 1.0);
  CHECK(mass_in(ParticleMeasure::dirac(make_vec({-1.0, 0.0})), disk) == 1.0);
  CHECK(mass_in(ParticleMeasure::dirac(make_vec({-1.0 - 1e-9, 0.0})), disk) == 0.0);
}

TEST_CASE("dimension mismatch is rejected") {
  const auto disk = TargetSet::ball(make_vec({0.0, 0.0}), 1.0);
  CHECK_THROWS_AS(mass_in(ParticleMeasure::dirac(make_vec({0.0, 0.0, 0.0})), disk), DimensionError);
}

TEST_CASE("quadrature failure reports the last two iterates") {
  AnalyticDensity rough;
  rough.dim = 2;
  rough.support = Box{make_vec({0.0, 0.0}), make_vec({1.0, 1.0})};
  rough.eval = [](const Vec& x) { return std::sin(400.0 * x[0]) * std::sin(400.0 * x[1]) + 1.0; };
  QuadratureOptions opts;
  opts.abs_tol = 1e-14;
  opts.max_refinements = 1;
  try {
    (void)mass_in(rough, box_polygon(0.1, 0.1, 0.9, 0.9), opts);
    FAIL("expected a quadrature error");
  } catch (const QuadratureError& e) {
    CHECK(std::isfinite(e.last()));
    CHECK(std::isfinite(e.previous()));
    CHECK(e.last() != e.previous());
  }
}

TEST_CASE("pushforward") {
  const auto cloud = random_cloud(500, 5, -1.0, 1.0);
  SUBCASE("identity leaves the measure unchanged") {
    const auto same = pushforward(cloud, [](const Vec& x) { return x; });
    CHECK(same.points == cloud.points);
    CHECK(same.weights == cloud.weights);
  }
  SUBCASE("translation of a Dirac") {
    const auto moved = pushforward(ParticleMeasure::dirac(make_vec({-2.0, 0.0})),
                                   [](const Vec& x) { return Vec(x + make_vec({1.0, 0.0})); });
    CHECK(moved.points.front() == make_vec({-1.0, 0.0}));
  }
  SUBCASE("total weight is preserved exactly") {
    const auto moved = pushforward(cloud, [](const Vec& x) { return Vec(3.0 * x); });
    CHECK(moved.total_weight() == cloud.total_weight());
  }
  SUBCASE("image mass equals preimage mass on a grid of boxes") {
    const auto f = [](const Vec& x) { return Vec(2.0 * x); };
    const auto image = pushforward(cloud, f);
    for (double a = -1.5; a < 1.5; a += 0.5) {
      for (double b = a + 0.25; b <= 2.0; b += 0.75) {
        const auto A = box_polygon(a, a, b, b);
        const auto pre = box_polygon(a / 2, a / 2, b / 2, b / 2);
        CHECK(mass_in(image, A) == mass_in(cloud, pre));
      }
    }
  }
  SUBCASE("non-finite output names the particle") {
    try {
      (void)pushforward(cloud, [&](const Vec& x) {
        return x == cloud.points[7] ? Vec(make_vec({NAN, 0.0})) : x;
      });
      FAIL("expected a numerical error");
    } catch (const NumericalError& e) {
      CHECK(std::string(e.what()).find("7") != std::string::npos);
    }
  }
}

TEST_CASE("mollification") {
  const double eps = 0.1;
  SUBCASE("Dirac at the origin gives the scaled bump with unit mass") {
    const auto rho = mollify(ParticleMeasure::dirac(make_vec({0.0, 0.0})), eps);
    for (double x : {0.0, 0.03, 0.07}) CHECK(rho.eval(make_vec({x, 0.0})) == mollifier(make_vec({x, 0.0}), eps));
    QuadratureOptions tight;
    tight.abs_tol = 1e-9;
    CHECK(std::abs(total_mass(rho, tight).value - 1.0) <= 1e-6);
  }
  SUBCASE("the cached constant matches an independent Simpson value") {
    CHECK(mollifier_constant(2) == doctest::Approx(bump_constant_2d()).epsilon(1e-9));
  }
  SUBCASE("two equal Diracs at +-(1,0)") {
    ParticleMeasure two;
    two.dim = 2;
    two.points = {make_vec({1.0, 0.0}), make_vec({-1.0, 0.0})};
    two.weights = {0.5, 0.5};
    const auto rho = mollify(two, eps);
    const double peak = bump_constant_2d() * std::exp(-1.0) / (eps * eps);
    CHECK(rho.eval(make_vec({1.0, 0.0})) == doctest::Approx(0.5 * peak).epsilon(1e-9));
  }
  SUBCASE("many particles take the bucketed path and agree with the direct sum") {
    const auto cloud = random_cloud(200, 9, -0.3, 0.3);
    const auto rho = mollify(cloud, eps);
    for (const Vec& x : {make_vec({0.0, 0.0}), make_vec({0.2, -0.1}), make_vec({0.35, 0.3})}) {
      double direct = 0.0;
      for (std::size_t i = 0; i < cloud.size(); ++i) direct += cloud.weights[i] * mollifier(x - cloud.points[i], eps);
      CHECK(rho.eval(x) == doctest::Approx(direct).epsilon(1e-12));
    }
  }
  SUBCASE("nonpositive radius is rejected") {
    CHECK_THROWS_AS(mollify(ParticleMeasure::dirac(make_vec({0.0, 0.0})), 0.0), ValidationError);
  }
  SUBCASE("sampled mollification stays within eps of the original in Prohorov distance") {
    const auto theta = ParticleMeasure::dirac(make_vec({0.0, 0.0}));
    const auto rho = mollify(theta, eps);
    const auto samples = sample(rho, 3000, 4);
    CHECK(prohorov_upper(samples, theta).value <= eps * 1.05 + 1e-6);
  }
}

TEST_CASE("Prohorov upper estimate") {
  const auto x = make_vec({0.0, 0.0});
  SUBCASE("identical measures") {
    const auto cloud = random_cloud(200, 2, 0.0, 1.0);
    CHECK(prohorov_upper(cloud, cloud).value == 0.0);
  }
  SUBCASE("two Diracs at distance 0.3") {
    const double v = prohorov_upper(ParticleMeasure::dirac(x), ParticleMeasure::dirac(make_vec({0.3, 0.0}))).value;
    CHECK(v >= 0.3);
    CHECK(v <= 0.3 * 1.05);
  }
  SUBCASE("far Diracs saturate at one") {
    const double v = prohorov_upper(ParticleMeasure::dirac(x), ParticleMeasure::dirac(make_vec({7.0, 0.0}))).value;
    CHECK(v >= 1.0 / 1.05);
    CHECK(v <= 1.0);
  }
  SUBCASE("symmetric") {
    const auto a = random_cloud(150, 21, 0.0, 1.0);
    const auto b = random_cloud(120, 22, 0.2, 1.2);
    CHECK(prohorov_upper(a, b).value == prohorov_upper(b, a).value);
  }
  SUBCASE("empty measures are rejected") {
    ParticleMeasure empty;
    empty.dim = 2;
    CHECK_THROWS_AS(prohorov_upper(empty, ParticleMeasure::dirac(x)), ValidationError);
  }
  SUBCASE("grid is geometric with factor 1.05 from 1e-6") {
    const auto& g = prohorov_grid();
    CHECK(g[0] == 0.0);
    CHECK(g[1] == 1e-6);
    CHECK(g[2] == doctest::Approx(1.05e-6));
    CHECK(g.back() == 1.0);
  }
}

TEST_CASE("neighbourhoods") {
  SUBCASE("ball offset") {
    const auto n = neighborhood(TargetSet::ball(make_vec({0.0, 0.0}), 1.0), 0.5);
    const auto& balls = std::get<TargetSet::BallUnion>(n.variant()).balls;
    CHECK(balls.front().radius == 1.5);
    CHECK(n.inner_ball_radius() == 1.5);
  }
  SUBCASE("r = 0 is the identity") {
    const auto sq = box_polygon(0, 0, 1, 1);
    const auto same = neighborhood(sq, 0.0);
    for (const Vec& p : {make_vec({0.5, 0.5}), make_vec({2.0, 0.3}), make_vec({-0.1, 1.2})})
      CHECK(same.signed_distance(p) == sq.signed_distance(p));
  }
  SUBCASE("unit square inflated by 0.5") {
    const auto n = neighborhood(box_polygon(0, 0, 1, 1), 0.5);
    CHECK(n.contains(make_vec({1.4, 0.5})));
    CHECK_FALSE(n.contains(make_vec({1.6, 0.5})));
  }
  SUBCASE("mass is monotone under inflation") {
    const auto cloud = random_cloud(5000, 17, -2.0, 2.0);
    const std::vector<TargetSet> sets{TargetSet::ball(make_vec({0.0, 0.0}), 0.7), box_polygon(-0.5, -0.2, 0.4, 0.9),
                                      TargetSet::ball_union({{make_vec({-0.5, 0.0}), 0.4}, {make_vec({0.3, 0.1}), 0.4}})};
    for (const auto& A : sets) {
      double prev = mass_in(cloud, A);
      for (double r : {0.05, 0.1, 0.3, 0.6}) {
        const double m = mass_in(cloud, neighborhood(A, r));
        CHECK(m >= prev);
        prev = m;
      }
    }
  }
}

TEST_CASE("boundary meshes") {
  SUBCASE("unit disk length and the surface bound equality case") {
    const auto mesh = boundary_mesh(TargetSet::ball(make_vec({0.0, 0.0}), 1.0), 0.01);
    CHECK(std::abs(mesh.total_sigma() - 2 * std::numbers::pi) <= 1e-3);
    CHECK(boundary_bound(2, 2.0, 1.0) == doctest::Approx(2 * std::numbers::pi).epsilon(1e-15));
  }
  SUBCASE("unit square perimeter with axis-aligned normals") {
    const auto mesh = boundary_mesh(box_polygon(0, 0, 1, 1), 0.1);
    CHECK(std::abs(mesh.total_sigma() - 4.0) <= 1e-12);
    for (const auto& n : mesh.normals) CHECK(std::abs(n.x() * n.y()) <= 1e-15);
  }
  SUBCASE("normals are unit, outward, and weights sum to the polyline length") {
    const std::vector<TargetSet> sets{TargetSet::ball(make_vec({0.3, -0.2}), 0.8),
                                      TargetSet::ball_union({{make_vec({-0.5, 0.0}), 0.6}, {make_vec({0.4, 0.0}), 0.6}})};
    for (const auto& A : sets) {
      const auto mesh = boundary_mesh(A, 0.01);
      double length = 0.0;
      for (const auto& piece : mesh.pieces) {
        for (std::size_t i = piece.begin; i + 1 < piece.end; ++i) length += (mesh.nodes[i + 1] - mesh.nodes[i]).norm();
        if (piece.closed) length += (mesh.nodes[piece.begin] - mesh.nodes[piece.end - 1]).norm();
      }
      CHECK(std::abs(mesh.total_sigma() - length) <= 1e-10);
      std::vector<bool> kink(mesh.size(), false);
      for (const auto& piece : mesh.pieces) {
        if (piece.closed) continue;
        kink[piece.begin] = true;
        kink[piece.end - 1] = true;
      }
      for (std::size_t i = 0; i < mesh.size(); ++i) {
        CHECK(std::abs(mesh.normals[i].norm() - 1.0) <= 1e-10);
        // Arc junctions of a ball union are concave corners without a normal.
        if (kink[i]) continue;
        CHECK_FALSE(A.contains(to_vec(mesh.nodes[i] + 1e-4 * mesh.normals[i])));
        CHECK(A.contains(to_vec(mesh.nodes[i] - 1e-4 * mesh.normals[i])));
      }
    }
  }
  SUBCASE("ball unions satisfy the surface bound") {
    const auto A = TargetSet::ball_union({{make_vec({-0.5, 0.0}), 0.5}, {make_vec({0.3, 0.2}), 0.5},
                                          {make_vec({0.0, 0.8}), 0.5}});
    const auto mesh = boundary_mesh(A, 0.005);
    CHECK(mesh.total_sigma() <= boundary_bound(2, A.diameter(), A.inner_ball_radius()) + 1e-3);
  }
  SUBCASE("implicit rounded rectangle is traced onto its zero level") {
    const Vec c = make_vec({0.1, -0.2});
    const double a = 0.5, b = 0.3, rc = 0.1;
    auto sdf = [=](const Vec& x) {
      const Vec q = ((x - c).cwiseAbs() - make_vec({a - rc, b - rc}));
      return q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0) - rc;
    };
    const auto A = TargetSet::implicit(2, sdf, Box{c - make_vec({a, b}), c + make_vec({a, b})}, rc);
    const auto mesh = boundary_mesh(A, 0.01);
    for (const auto& x : mesh.nodes) CHECK(std::abs(sdf(to_vec(x))) <= 1e-10);
    const double perimeter = 4 * (a - rc) + 4 * (b - rc) + 2 * std::numbers::pi * rc;
    CHECK(mesh.total_sigma() == doctest::Approx(perimeter).epsilon(1e-3));
  }
  SUBCASE("polygons must be counterclockwise and simple") {
    CHECK_THROWS_AS(TargetSet::polygon({Vec2(0, 0), Vec2(0, 1), Vec2(1, 1), Vec2(1, 0)}), ValidationError);
    CHECK_THROWS_AS(TargetSet::polygon({Vec2(0, 0), Vec2(1, 1), Vec2(1, 0), Vec2(0, 1)}), ValidationError);
  }
}

TEST_CASE("particle CSV round trip") {
  const auto cloud = random_cloud(50, 8, -3.0, 3.0);
  std::stringstream ss;
  write_particles_csv(ss, cloud);
  CHECK(ss.str().rfind("x1,x2,w\n", 0) == 0);
  const auto back = read_particles_csv(ss);
  CHECK(back.points == cloud.points);
  CHECK(back.weights == cloud.weights);
}

TEST_CASE("parallel and serial mass sums are bit-identical") {
  const auto cloud = random_cloud(100000, 31, -1.0, 1.0);
  const auto disk = TargetSet::ball(make_vec({0.1, 0.0}), 0.6);
  set_num_threads(1);
  const double serial = mass_in(cloud, disk);
  set_num_threads(4);
  const double parallel = mass_in(cloud, disk);
  set_num_threads(0);
  CHECK(serial == parallel);
}
