#include "liouville/measures.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <unordered_map>

namespace liouville {

// ---------------------------------------------------------------------------
// ParticleMeasure

ParticleMeasure ParticleMeasure::dirac(const Vec& x) {
  ParticleMeasure m;
  m.dim = static_cast<int>(x.size());
  m.points = {x};
  m.weights = {1.0};
  return m;
}

ParticleMeasure ParticleMeasure::uniform(std::vector<Vec> points) {
  if (points.empty()) throw ValidationError("particle measure needs at least one point");
  ParticleMeasure m;
  m.dim = static_cast<int>(points.front().size());
  const double w = 1.0 / static_cast<double>(points.size());
  m.weights.assign(points.size(), w);
  m.points = std::move(points);
  return m;
}

double ParticleMeasure::total_weight() const { return pairwise_sum(weights); }

void ParticleMeasure::validate() const {
  if (dim <= 0 || dim > kMaxDim) throw ValidationError("particle dimension out of range: " + std::to_string(dim));
  if (points.empty()) throw ValidationError("particle measure is empty");
  if (points.size() != weights.size()) throw ValidationError("points and weights differ in length");
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].size() != dim) {
      throw DimensionError("particle " + std::to_string(i) + " has " + std::to_string(points[i].size()) +
                           " coordinates, expected " + std::to_string(dim));
    }
    if (!(weights[i] >= 0.0)) throw ValidationError("negative weight at particle " + std::to_string(i));
  }
  const double total = total_weight();
  if (std::abs(total - 1.0) > 1e-12) {
    std::ostringstream os;
    os << std::setprecision(17) << "weights sum to " << total << ", expected 1";
    throw ValidationError(os.str());
  }
}

int dimension_of(const InitialMeasure& m) {
  return std::visit([](const auto& x) { return x.dim; }, m);
}

// ---------------------------------------------------------------------------
// TargetSet

namespace {

double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

double segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  const double s = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (p - (a + s * ab)).norm();
}

bool segments_intersect(const Vec2& p1, const Vec2& p2, const Vec2& q1, const Vec2& q2) {
  const double d1 = cross(p2 - p1, q1 - p1);
  const double d2 = cross(p2 - p1, q2 - p1);
  const double d3 = cross(q2 - q1, p1 - q1);
  const double d4 = cross(q2 - q1, p2 - q1);
  return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0)) && d1 != 0 && d2 != 0 && d3 != 0 && d4 != 0;
}

double signed_area(const std::vector<Vec2>& v) {
  double a = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) a += cross(v[i], v[(i + 1) % v.size()]);
  return 0.5 * a;
}

double polygon_sdf(const std::vector<Vec2>& v, const Vec2& p) {
  double dist = std::numeric_limits<double>::infinity();
  bool inside = false;
  for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
    dist = std::min(dist, segment_distance(p, v[j], v[i]));
    if ((v[i].y() > p.y()) != (v[j].y() > p.y())) {
      const double x = v[j].x() + (p.y() - v[j].y()) * (v[i].x() - v[j].x()) / (v[i].y() - v[j].y());
      if (p.x() < x) inside = !inside;
    }
  }
  return inside ? -dist : dist;
}

}  // namespace

TargetSet TargetSet::ball(const Vec& center, double radius) { return ball_union({Ball{center, radius}}); }

TargetSet TargetSet::ball_union(std::vector<Ball> balls) {
  if (balls.empty()) throw ValidationError("ball union needs at least one ball");
  const auto dim = balls.front().center.size();
  for (const auto& b : balls) {
    if (!(b.radius > 0.0)) throw ValidationError("ball radius must be positive");
    if (b.center.size() != dim) throw DimensionError("ball centers differ in dimension");
  }
  return TargetSet(BallUnion{std::move(balls)});
}

TargetSet TargetSet::polygon(std::vector<Vec2> vertices) {
  if (vertices.size() < 3) throw ValidationError("polygon needs at least three vertices");
  if (!(signed_area(vertices) > 0.0)) throw ValidationError("polygon vertices must be counterclockwise");
  const std::size_t n = vertices.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (j == i + 1 || (i == 0 && j == n - 1)) continue;
      if (segments_intersect(vertices[i], vertices[(i + 1) % n], vertices[j], vertices[(j + 1) % n])) {
        throw ValidationError("polygon is not simple: edges " + std::to_string(i) + " and " + std::to_string(j) +
                              " cross");
      }
    }
  }
  return TargetSet(Polygon2D{std::move(vertices)});
}

TargetSet TargetSet::implicit(int dim, SignedDistanceFn sdf, Box bbox, double inner_ball_radius,
                              std::string description) {
  if (bbox.dim() != dim) throw DimensionError("implicit set bounding box has wrong dimension");
  if (inner_ball_radius < 0.0) throw ValidationError("inner ball radius must be nonnegative");
  return TargetSet(Implicit{dim, std::move(sdf), std::move(bbox), inner_ball_radius, std::move(description)});
}

int TargetSet::dim() const {
  return std::visit(
      [](const auto& s) -> int {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, BallUnion>) return static_cast<int>(s.balls.front().center.size());
        else if constexpr (std::is_same_v<T, Polygon2D>) return 2;
        else return s.dim;
      },
      variant_);
}

double TargetSet::signed_distance(const Vec& x) const {
  if (x.size() != dim()) throw DimensionError("point dimension does not match target set");
  return std::visit(
      [&](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, BallUnion>) {
          double d = std::numeric_limits<double>::infinity();
          for (const auto& b : s.balls) d = std::min(d, (x - b.center).norm() - b.radius);
          return d;
        } else if constexpr (std::is_same_v<T, Polygon2D>) {
          return polygon_sdf(s.vertices, to_vec2(x));
        } else {
          return s.sdf(x);
        }
      },
      variant_);
}

double TargetSet::inner_ball_radius() const {
  return std::visit(
      [](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, BallUnion>) {
          double r = std::numeric_limits<double>::infinity();
          for (const auto& b : s.balls) r = std::min(r, b.radius);
          return r;
        } else if constexpr (std::is_same_v<T, Polygon2D>) {
          return 0.0;
        } else {
          return s.inner_ball_radius;
        }
      },
      variant_);
}

Box TargetSet::bounding_box() const {
  return std::visit(
      [](const auto& s) -> Box {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, BallUnion>) {
          Box box{s.balls.front().center.array() - s.balls.front().radius,
                  s.balls.front().center.array() + s.balls.front().radius};
          for (const auto& b : s.balls) {
            box.lo = box.lo.cwiseMin((b.center.array() - b.radius).matrix());
            box.hi = box.hi.cwiseMax((b.center.array() + b.radius).matrix());
          }
          return box;
        } else if constexpr (std::is_same_v<T, Polygon2D>) {
          Vec2 lo = s.vertices.front();
          Vec2 hi = lo;
          for (const auto& v : s.vertices) {
            lo = lo.cwiseMin(v);
            hi = hi.cwiseMax(v);
          }
          return {to_vec(lo), to_vec(hi)};
        } else {
          return s.bbox;
        }
      },
      variant_);
}

double TargetSet::diameter() const {
  return std::visit(
      [this](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, BallUnion>) {
          double d = 0.0;
          for (const auto& a : s.balls)
            for (const auto& b : s.balls) d = std::max(d, (a.center - b.center).norm() + a.radius + b.radius);
          return d;
        } else if constexpr (std::is_same_v<T, Polygon2D>) {
          double d = 0.0;
          for (const auto& a : s.vertices)
            for (const auto& b : s.vertices) d = std::max(d, (a - b).norm());
          return d;
        } else {
          const Box box = bounding_box();
          return (box.hi - box.lo).norm();  // upper bound
        }
      },
      variant_);
}

bool TargetSet::is_single_ball() const {
  const auto* u = std::get_if<BallUnion>(&variant_);
  return u != nullptr && u->balls.size() == 1;
}

// ---------------------------------------------------------------------------
// Boundary meshes

double BoundaryMesh::total_sigma() const { return pairwise_sum(sigma); }

BoundaryMesh mesh_from_polylines(const std::vector<std::vector<Vec2>>& polylines, const std::vector<bool>& closed) {
  BoundaryMesh mesh;
  for (std::size_t p = 0; p < polylines.size(); ++p) {
    const auto& line = polylines[p];
    const bool is_closed = closed.at(p);
    const std::size_t n = line.size();
    if (n < 2) throw ValidationError("boundary polyline needs at least two nodes");
    BoundaryMesh::Piece piece{mesh.nodes.size(), mesh.nodes.size() + n, is_closed};
    for (std::size_t j = 0; j < n; ++j) {
      const bool first = j == 0;
      const bool last = j + 1 == n;
      const Vec2& prev = first ? (is_closed ? line[n - 1] : line[j]) : line[j - 1];
      const Vec2& next = last ? (is_closed ? line[0] : line[j]) : line[j + 1];
      const Vec2 tangent = next - prev;
      const double len = tangent.norm();
      if (len == 0.0) throw NumericalError("degenerate boundary polyline (repeated nodes)");
      const Vec2 normal = Vec2{tangent.y(), -tangent.x()} / len;
      const double w = 0.5 * ((line[j] - prev).norm() + (next - line[j]).norm());
      mesh.nodes.push_back(line[j]);
      mesh.normals.push_back(normal);
      mesh.sigma.push_back(w);
    }
    mesh.pieces.push_back(piece);
  }
  return mesh;
}

namespace {

std::vector<Vec2> circle_arc(const Vec2& c, double r, double a0, double a1, double h, bool closed) {
  const double length = r * (a1 - a0);
  const int segments = std::max(closed ? 8 : 1, static_cast<int>(std::ceil(length / h)));
  std::vector<Vec2> nodes;
  const int count = closed ? segments : segments + 1;
  nodes.reserve(count);
  for (int k = 0; k < count; ++k) {
    const double a = a0 + (a1 - a0) * k / segments;
    nodes.push_back(c + r * Vec2{std::cos(a), std::sin(a)});
  }
  return nodes;
}

BoundaryMesh ball_union_mesh(const TargetSet::BallUnion& u, double h) {
  std::vector<std::vector<Vec2>> lines;
  std::vector<bool> closed;
  const double two_pi = 2 * std::numbers::pi;
  for (std::size_t i = 0; i < u.balls.size(); ++i) {
    const Vec2 ci = to_vec2(u.balls[i].center);
    const double ri = u.balls[i].radius;
    bool swallowed = false;
    std::vector<double> cuts;
    for (std::size_t j = 0; j < u.balls.size(); ++j) {
      if (j == i) continue;
      const Vec2 cj = to_vec2(u.balls[j].center);
      const double rj = u.balls[j].radius;
      const double d = (cj - ci).norm();
      if (d + ri <= rj && (d > 0.0 || j < i || ri < rj)) {
        swallowed = true;  // ties between identical balls keep the lowest index
        break;
      }
      if (d >= ri + rj || d <= std::abs(ri - rj)) continue;
      const double a = (ri * ri - rj * rj + d * d) / (2 * d);
      const double base = std::atan2(cj.y() - ci.y(), cj.x() - ci.x());
      const double half = std::acos(std::clamp(a / ri, -1.0, 1.0));
      for (double ang : {base - half, base + half}) {
        double w = std::fmod(ang, two_pi);
        if (w < 0) w += two_pi;
        cuts.push_back(w);
      }
    }
    if (swallowed) continue;
    const auto covered = [&](double ang) {
      const Vec2 p = ci + ri * Vec2{std::cos(ang), std::sin(ang)};
      for (std::size_t j = 0; j < u.balls.size(); ++j) {
        if (j == i) continue;
        if ((p - to_vec2(u.balls[j].center)).norm() < u.balls[j].radius - 1e-12) return true;
      }
      return false;
    };
    if (cuts.empty()) {
      if (!covered(0.0)) {
        lines.push_back(circle_arc(ci, ri, 0.0, two_pi, h, true));
        closed.push_back(true);
      }
      continue;
    }
    std::sort(cuts.begin(), cuts.end());
    // Angular intervals [cuts[k], cuts[k+1]] with wrap-around; merge consecutive uncovered ones.
    const std::size_t m = cuts.size();
    std::vector<std::pair<double, double>> arcs;
    std::vector<bool> free(m);
    for (std::size_t k = 0; k < m; ++k) {
      const double a0 = cuts[k];
      const double a1 = (k + 1 < m) ? cuts[k + 1] : cuts[0] + two_pi;
      free[k] = (a1 - a0) > 1e-14 && !covered(0.5 * (a0 + a1));
    }
    std::size_t start = 0;
    while (start < m && free[start]) ++start;
    if (start == m) {
      lines.push_back(circle_arc(ci, ri, 0.0, two_pi, h, true));
      closed.push_back(true);
      continue;
    }
    // Unwrapped angle at which interval (start + t) begins.
    const auto begin_angle = [&](std::size_t t) {
      const std::size_t k = start + t;
      return cuts[k % m] + two_pi * static_cast<double>(k / m);
    };
    std::size_t t = 1;
    while (t < m + 1) {
      if (!free[(start + t) % m]) {
        ++t;
        continue;
      }
      const double a0 = begin_angle(t);
      std::size_t e = t;
      while (e + 1 < m + 1 && free[(start + e + 1) % m]) ++e;
      arcs.emplace_back(a0, begin_angle(e + 1));
      t = e + 1;
    }
    for (const auto& [a0, a1] : arcs) {
      lines.push_back(circle_arc(ci, ri, a0, a1, h, false));
      closed.push_back(false);
    }
  }
  if (lines.empty()) throw NumericalError("ball union has empty boundary");
  return mesh_from_polylines(lines, closed);
}

BoundaryMesh polygon_mesh(const TargetSet::Polygon2D& poly, double h) {
  // Nodes at sub-segment midpoints so every normal is the exact edge normal.
  BoundaryMesh mesh;
  const auto& v = poly.vertices;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Vec2 a = v[i];
    const Vec2 b = v[(i + 1) % v.size()];
    const double len = (b - a).norm();
    const int segments = std::max(1, static_cast<int>(std::ceil(len / h)));
    const Vec2 normal = Vec2{(b - a).y(), -(b - a).x()} / len;
    for (int k = 0; k < segments; ++k) {
      mesh.nodes.push_back(a + (b - a) * ((k + 0.5) / segments));
      mesh.normals.push_back(normal);
      mesh.sigma.push_back(len / segments);
    }
  }
  mesh.pieces.push_back({0, mesh.nodes.size(), true});
  return mesh;
}

Vec2 sdf_gradient(const SignedDistanceFn& sdf, const Vec2& x) {
  const double step = 1e-6 * (1.0 + x.norm());
  const Vec2 ex{step, 0.0};
  const Vec2 ey{0.0, step};
  return {(sdf(to_vec(x + ex)) - sdf(to_vec(x - ex))) / (2 * step),
          (sdf(to_vec(x + ey)) - sdf(to_vec(x - ey))) / (2 * step)};
}

Vec2 project_to_level(const SignedDistanceFn& sdf, Vec2 x) {
  for (int it = 0; it < 60; ++it) {
    const double s = sdf(to_vec(x));
    if (std::abs(s) <= 1e-12) break;
    const Vec2 g = sdf_gradient(sdf, x);
    const double g2 = g.squaredNorm();
    if (g2 < 1e-16) throw NumericalError("boundary tracing hit a critical point of the signed distance");
    x -= s * g / g2;
  }
  if (std::abs(sdf(to_vec(x))) > 1e-10) throw NumericalError("boundary projection did not converge");
  return x;
}

BoundaryMesh implicit_mesh(const TargetSet::Implicit& s, double h) {
  const Vec2 lo = to_vec2(s.bbox.lo);
  const Vec2 hi = to_vec2(s.bbox.hi);
  constexpr int kScan = 256;
  std::optional<Vec2> seed;
  for (int row = 0; row <= kScan && !seed; ++row) {
    const double y = lo.y() + (hi.y() - lo.y()) * row / kScan;
    double prev_x = lo.x();
    double prev = s.sdf(to_vec(Vec2{prev_x, y}));
    for (int col = 1; col <= kScan; ++col) {
      const double x = lo.x() + (hi.x() - lo.x()) * col / kScan;
      const double cur = s.sdf(to_vec(Vec2{x, y}));
      if ((prev <= 0.0) != (cur <= 0.0)) {
        double a = prev_x, b = x, fa = prev;
        for (int it = 0; it < 80; ++it) {
          const double m = 0.5 * (a + b);
          const double fm = s.sdf(to_vec(Vec2{m, y}));
          if ((fm <= 0.0) == (fa <= 0.0)) {
            a = m;
            fa = fm;
          } else {
            b = m;
          }
        }
        seed = Vec2{0.5 * (a + b), y};
        break;
      }
      prev_x = x;
      prev = cur;
    }
  }
  if (!seed) throw NumericalError("implicit set boundary not found inside its bounding box");
  const SignedDistanceFn& sdf = s.sdf;
  const Vec2 start = project_to_level(sdf, *seed);
  std::vector<Vec2> nodes{start};
  constexpr std::size_t kBudget = 1000000;
  double travelled = 0.0;
  Vec2 x = start;
  while (true) {
    const Vec2 g = sdf_gradient(sdf, x);
    const Vec2 n = g.normalized();
    const Vec2 tangent{-n.y(), n.x()};
    Vec2 next = project_to_level(sdf, x + h * tangent);
    // Shrink the step if projection moved the point too far along the curve.
    double step = (next - x).norm();
    if (step > 1.5 * h) next = project_to_level(sdf, x + 0.5 * h * tangent), step = (next - x).norm();
    travelled += step;
    if (travelled > 2.5 * h && (next - start).norm() < 0.75 * h) break;
    nodes.push_back(next);
    x = next;
    if (nodes.size() > kBudget) {
      throw NumericalError("implicit boundary tracing did not close within the node budget");
    }
  }
  if (nodes.size() < 4) throw NumericalError("implicit boundary trace too short; decrease h");
  return mesh_from_polylines({nodes}, {true});
}

}  // namespace

BoundaryMesh boundary_mesh(const TargetSet& set, double h) {
  if (set.dim() != 2) throw DimensionError("boundary meshes are implemented for n = 2 only");
  if (!(h > 0.0)) throw ValidationError("mesh spacing must be positive");
  return std::visit(
      [h](const auto& s) -> BoundaryMesh {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, TargetSet::BallUnion>) return ball_union_mesh(s, h);
        else if constexpr (std::is_same_v<T, TargetSet::Polygon2D>) return polygon_mesh(s, h);
        else return implicit_mesh(s, h);
      },
      set.variant());
}

double unit_ball_volume(int dim) {
  return std::pow(std::numbers::pi, 0.5 * dim) / std::tgamma(0.5 * dim + 1.0);
}

double boundary_bound(int dim, double diameter, double inner_radius) {
  return dim * unit_ball_volume(dim) * std::pow(diameter, dim) / (std::pow(2.0, dim) * inner_radius);
}

// ---------------------------------------------------------------------------
// Mass queries

double mass_in(const ParticleMeasure& measure, const TargetSet& set) {
  if (measure.dim != set.dim()) throw DimensionError("measure and target set dimensions differ");
  std::vector<double> inside(measure.size(), 0.0);
  parallel_for(measure.size(), [&](std::size_t i) {
    if (set.contains(measure.points[i])) inside[i] = measure.weights[i];
  });
  return pairwise_sum(inside);
}

QuadratureResult mass_in(const AnalyticDensity& density, const TargetSet& set, const QuadratureOptions& opts) {
  if (density.dim != set.dim()) throw DimensionError("density and target set dimensions differ");
  const Box region = density.support.intersect(set.bounding_box());
  if (region.empty()) return {};
  const ScalarFnN f = [&](const Vec& x) { return density.eval(x); };
  if (set.dim() == 2 && set.is_single_ball()) {
    const auto& b = std::get<TargetSet::BallUnion>(set.variant()).balls.front();
    return integrate_disk(f, to_vec2(b.center), b.radius, region, opts);
  }
  const SignedDistanceFn sdf = [&](const Vec& x) { return set.signed_distance(x); };
  if (set.dim() == 2) return integrate_set_2d(f, sdf, region, opts);
  return integrate_set_nd(f, sdf, region, opts);
}

QuadratureResult total_mass(const AnalyticDensity& density, const QuadratureOptions& opts) {
  const ScalarFnN f = [&](const Vec& x) { return density.eval(x); };
  return integrate_box(f, density.support, opts);
}

ParticleMeasure pushforward(const ParticleMeasure& measure, const std::function<Vec(const Vec&)>& map) {
  ParticleMeasure out;
  out.dim = measure.dim;
  out.weights = measure.weights;
  out.points.resize(measure.size());
  for (std::size_t i = 0; i < measure.size(); ++i) {
    out.points[i] = map(measure.points[i]);
    if (!out.points[i].allFinite()) {
      throw NumericalError("pushforward produced a non-finite coordinate for particle " + std::to_string(i));
    }
    if (i == 0) out.dim = static_cast<int>(out.points[i].size());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Mollification

double mollifier_constant(int dim) {
  if (dim < 1 || dim > kMaxDim) throw DimensionError("mollifier dimension out of range");
  static const std::array<double, kMaxDim + 1> table = [] {
    std::array<double, kMaxDim + 1> t{};
    for (int n = 1; n <= kMaxDim; ++n) {
      const auto radial = [n](double r) {
        return r >= 1.0 ? 0.0 : std::pow(r, n - 1) * std::exp(1.0 / (r * r - 1.0));
      };
      const double integral = gauss_kronrod(radial, 0.0, 1.0, 1e-14, 8).value;
      const double sphere = n * unit_ball_volume(n);
      t[n] = 1.0 / (sphere * integral);
    }
    return t;
  }();
  return table[dim];
}

double mollifier(const Vec& x, double eps) {
  const int n = static_cast<int>(x.size());
  const double r2 = x.squaredNorm() / (eps * eps);
  if (r2 >= 1.0) return 0.0;
  return mollifier_constant(n) * std::exp(1.0 / (r2 - 1.0)) / std::pow(eps, n);
}

namespace {

std::uint64_t hash_cell(const std::int64_t* c, int n) {
  std::uint64_t h = 1469598103934665603ULL;
  for (int d = 0; d < n; ++d) h ^= static_cast<std::uint64_t>(c[d]) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  return h;
}

std::uint64_t cell_key(const Vec& x, double cell) {
  std::int64_t c[kMaxDim];
  for (Eigen::Index d = 0; d < x.size(); ++d) c[d] = static_cast<std::int64_t>(std::floor(x[d] / cell));
  return hash_cell(c, static_cast<int>(x.size()));
}

// Unit-ball sample from the bump profile by rejection against the uniform ball.
Vec sample_bump(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> accept(0.0, 1.0);
  Vec z(n);
  while (true) {
    for (int d = 0; d < n; ++d) z[d] = u(rng);
    const double r2 = z.squaredNorm();
    if (r2 >= 1.0) continue;
    if (accept(rng) <= std::exp(1.0 / (r2 - 1.0) + 1.0)) return z;
  }
}

}  // namespace

AnalyticDensity mollify(const ParticleMeasure& measure, double eps) {
  if (!(eps > 0.0)) throw ValidationError("mollification radius must be positive");
  measure.validate();
  const int n = measure.dim;
  auto particles = std::make_shared<const ParticleMeasure>(measure);

  AnalyticDensity rho;
  rho.dim = n;
  rho.name = "mollified";
  rho.smooth = true;
  Vec lo = measure.points.front();
  Vec hi = lo;
  for (const auto& p : measure.points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  rho.support = Box{lo, hi}.inflated(eps);
  rho.normalization_tol = 1e-6;

  constexpr std::size_t kDirectLimit = 32;
  if (measure.size() <= kDirectLimit) {
    rho.eval = [particles, eps](const Vec& x) {
      double acc = 0.0;
      for (std::size_t i = 0; i < particles->size(); ++i)
        acc += particles->weights[i] * mollifier(x - particles->points[i], eps);
      return acc;
    };
  } else {
    auto buckets = std::make_shared<std::unordered_map<std::uint64_t, std::vector<std::size_t>>>();
    for (std::size_t i = 0; i < measure.size(); ++i) (*buckets)[cell_key(measure.points[i], eps)].push_back(i);
    rho.eval = [particles, buckets, eps, n](const Vec& x) {
      std::vector<std::size_t> candidates;
      int neighbours = 1;
      for (int d = 0; d < n; ++d) neighbours *= 3;
      std::int64_t base[kMaxDim];
      std::int64_t probe[kMaxDim];
      for (int d = 0; d < n; ++d) base[d] = static_cast<std::int64_t>(std::floor(x[d] / eps));
      for (int k = 0; k < neighbours; ++k) {
        int rem = k;
        for (int d = 0; d < n; ++d) {
          probe[d] = base[d] + (rem % 3 - 1);
          rem /= 3;
        }
        const auto it = buckets->find(hash_cell(probe, n));
        if (it != buckets->end()) candidates.insert(candidates.end(), it->second.begin(), it->second.end());
      }
      std::sort(candidates.begin(), candidates.end());
      candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
      double acc = 0.0;
      for (std::size_t i : candidates) acc += particles->weights[i] * mollifier(x - particles->points[i], eps);
      return acc;
    };
  }

  rho.sampler = [particles, eps, n](std::size_t count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<double> cumulative(particles->size());
    double acc = 0.0;
    for (std::size_t i = 0; i < particles->size(); ++i) cumulative[i] = (acc += particles->weights[i]);
    std::uniform_real_distribution<double> pick(0.0, acc);
    std::vector<Vec> pts;
    pts.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
      const double t = pick(rng);
      auto it = std::lower_bound(cumulative.begin(), cumulative.end(), t);
      if (it == cumulative.end()) --it;
      const std::size_t i = static_cast<std::size_t>(it - cumulative.begin());
      pts.push_back(particles->points[i] + eps * sample_bump(n, rng));
    }
    return ParticleMeasure::uniform(std::move(pts));
  };
  return rho;
}

ParticleMeasure sample(const AnalyticDensity& density, std::size_t count, std::uint64_t seed) {
  if (count == 0) throw ValidationError("sample count must be positive");
  if (density.sampler) return density.sampler(count, seed);
  const int n = density.dim;
  const Box& box = density.support;
  // Envelope from a coarse grid maximum, padded.
  const int per_axis = n <= 2 ? 128 : (n == 3 ? 32 : 8);
  std::size_t total = 1;
  for (int d = 0; d < n; ++d) total *= static_cast<std::size_t>(per_axis + 1);
  double peak = 0.0;
  Vec x(n);
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::size_t rem = idx;
    for (int d = 0; d < n; ++d) {
      x[d] = box.lo[d] + (box.hi[d] - box.lo[d]) * static_cast<double>(rem % (per_axis + 1)) / per_axis;
      rem /= per_axis + 1;
    }
    peak = std::max(peak, density.eval(x));
  }
  if (!(peak > 0.0)) throw NumericalError("density vanishes on the sampling grid");
  const double envelope = 1.5 * peak;
  std::mt19937_64 rng(seed);
  std::vector<std::uniform_real_distribution<double>> coord;
  for (int d = 0; d < n; ++d) coord.emplace_back(box.lo[d], box.hi[d]);
  std::uniform_real_distribution<double> accept(0.0, envelope);
  std::vector<Vec> pts;
  pts.reserve(count);
  while (pts.size() < count) {
    for (int d = 0; d < n; ++d) x[d] = coord[d](rng);
    if (accept(rng) <= density.eval(x)) pts.push_back(x);
  }
  return ParticleMeasure::uniform(std::move(pts));
}

// ---------------------------------------------------------------------------
// Prohorov estimate

const std::vector<double>& prohorov_grid() {
  static const std::vector<double> grid = [] {
    std::vector<double> g{0.0};
    double e = 1e-6;
    while (e < 1.0) {
      g.push_back(e);
      e *= 1.05;
    }
    g.push_back(1.0);
    return g;
  }();
  return grid;
}

namespace {

struct RadialProfile {
  std::vector<double> dist_from;  // sorted distances of the measure being tested
  std::vector<double> w_from;
  std::vector<double> dist_to;  // sorted distances of the comparison measure
  std::vector<double> w_to;
};

void sorted_distances(const ParticleMeasure& m, const Vec& c, std::vector<double>& d, std::vector<double>& w) {
  std::vector<std::pair<double, double>> tmp(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) tmp[i] = {(m.points[i] - c).norm(), m.weights[i]};
  std::sort(tmp.begin(), tmp.end());
  d.resize(tmp.size());
  w.resize(tmp.size());
  for (std::size_t i = 0; i < tmp.size(); ++i) {
    d[i] = tmp[i].first;
    w[i] = tmp[i].second;
  }
}

// Checks from(B(c, r)) <= to(B°(c, r + eps)) + eps for every radius r at which the
// closed-ball mass of `from` jumps. eps = 0 compares closed balls.
bool profile_passes(const RadialProfile& p, double eps) {
  constexpr double kSlack = 1e-12;
  double from_mass = 0.0;
  double to_mass = 0.0;
  std::size_t j = 0;
  std::size_t i = 0;
  const std::size_t n = p.dist_from.size();
  while (i < n) {
    const double r = p.dist_from[i];
    while (i < n && p.dist_from[i] == r) from_mass += p.w_from[i++];
    const double reach = r + eps;
    if (eps == 0.0) {
      while (j < p.dist_to.size() && p.dist_to[j] <= reach) to_mass += p.w_to[j++];
    } else {
      while (j < p.dist_to.size() && p.dist_to[j] < reach) to_mass += p.w_to[j++];
    }
    if (from_mass > to_mass + eps + kSlack) return false;
  }
  return true;
}

}  // namespace

ProhorovEstimate prohorov_upper(const ParticleMeasure& a, const ParticleMeasure& b) {
  if (a.size() == 0 || b.size() == 0) throw ValidationError("prohorov_upper needs nonempty measures");
  if (a.dim != b.dim) throw DimensionError("prohorov_upper: dimensions differ");
  const auto& grid = prohorov_grid();
  const int last = static_cast<int>(grid.size()) - 1;
  std::vector<Vec> centers = a.points;
  centers.insert(centers.end(), b.points.begin(), b.points.end());
  std::vector<int> needed(centers.size(), 0);
  parallel_for(centers.size(), [&](std::size_t k) {
    RadialProfile ab;
    RadialProfile ba;
    sorted_distances(a, centers[k], ab.dist_from, ab.w_from);
    sorted_distances(b, centers[k], ab.dist_to, ab.w_to);
    ba.dist_from = ab.dist_to;
    ba.w_from = ab.w_to;
    ba.dist_to = ab.dist_from;
    ba.w_to = ab.w_from;
    const auto passes = [&](int idx) { return profile_passes(ab, grid[idx]) && profile_passes(ba, grid[idx]); };
    if (passes(0)) return;
    int lo = 0;  // fails
    int hi = last;  // passes: eps = 1 always does
    while (hi - lo > 1) {
      const int mid = (lo + hi) / 2;
      if (passes(mid)) hi = mid;
      else lo = mid;
    }
    needed[k] = hi;
  });
  const int idx = *std::max_element(needed.begin(), needed.end());
  return {grid[idx], idx};
}

// ---------------------------------------------------------------------------
// Neighbourhoods

TargetSet neighborhood(const TargetSet& set, double r) {
  if (r < 0.0) throw ValidationError("neighbourhood radius must be nonnegative");
  if (r == 0.0) return set;
  return std::visit(
      [&](const auto& s) -> TargetSet {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, TargetSet::BallUnion>) {
          std::vector<Ball> balls = s.balls;
          for (auto& b : balls) b.radius += r;
          return TargetSet::ball_union(std::move(balls));
        } else {
          auto base = std::make_shared<TargetSet>(set);
          SignedDistanceFn sdf = [base, r](const Vec& x) { return base->signed_distance(x) - r; };
          // An r-neighbourhood is a union of closed balls of radius (inner radius + r).
          return TargetSet::implicit(set.dim(), std::move(sdf), set.bounding_box().inflated(r),
                                     set.inner_ball_radius() + r, "neighbourhood");
        }
      },
      set.variant());
}

// ---------------------------------------------------------------------------
// CSV

void write_particles_csv(std::ostream& out, const ParticleMeasure& measure) {
  for (int d = 0; d < measure.dim; ++d) out << 'x' << (d + 1) << ',';
  out << "w\n";
  for (std::size_t i = 0; i < measure.size(); ++i) {
    for (int d = 0; d < measure.dim; ++d) out << format_number(measure.points[i][d]) << ',';
    out << format_number(measure.weights[i]) << '\n';
  }
}

ParticleMeasure read_particles_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("particle CSV: missing header");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  if (header.size() < 2 || header.back() != "w") throw ValidationError("particle CSV: header must end with 'w'");
  const int dim = static_cast<int>(header.size()) - 1;
  for (int d = 0; d < dim; ++d) {
    if (header[d] != "x" + std::to_string(d + 1)) {
      throw ValidationError("particle CSV: column " + std::to_string(d + 1) + " must be named x" + std::to_string(d + 1));
    }
  }
  ParticleMeasure m;
  m.dim = dim;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    Vec p(dim);
    std::vector<double> values;
    while (std::getline(ss, cell, ',')) {
      try {
        values.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw ValidationError("particle CSV line " + std::to_string(line_no) + ": bad number '" + cell + "'");
      }
    }
    if (static_cast<int>(values.size()) != dim + 1) {
      throw ValidationError("particle CSV line " + std::to_string(line_no) + ": expected " + std::to_string(dim + 1) +
                            " fields");
    }
    for (int d = 0; d < dim; ++d) p[d] = values[d];
    m.points.push_back(p);
    m.weights.push_back(values.back());
  }
  m.validate();
  return m;
}

void write_particles_csv(const std::string& path, const ParticleMeasure& measure) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot open " + path + " for writing");
  write_particles_csv(out, measure);
}

ParticleMeasure read_particles_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open particle file " + path);
  return read_particles_csv(in);
}

}  // namespace liouville
