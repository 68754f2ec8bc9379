#pragma once

#include "liouville/common.hpp"
#include "liouville/quadrature.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

namespace liouville {

/// Weighted point cloud. Weights sum to one.
struct ParticleMeasure {
  int dim = 0;
  std::vector<Vec> points;
  std::vector<double> weights;

  static ParticleMeasure dirac(const Vec& x);
  /// Equal weights 1/N.
  static ParticleMeasure uniform(std::vector<Vec> points);

  std::size_t size() const { return points.size(); }
  double total_weight() const;
  /// Throws ValidationError when an invariant fails.
  void validate() const;
};

/// Absolutely continuous probability measure given by its density.
struct AnalyticDensity {
  int dim = 0;
  std::function<double(const Vec&)> eval;
  /// eval vanishes outside this box.
  Box support;
  double normalization_tol = 1e-6;
  /// The density is C^1 (required by the optimality checker).
  bool smooth = true;
  std::string name;
  /// Optional exact sampler (count, seed). When empty, sample() falls back to rejection.
  std::function<ParticleMeasure(std::size_t, std::uint64_t)> sampler;

  double operator()(const Vec& x) const { return eval(x); }
};

using InitialMeasure = std::variant<ParticleMeasure, AnalyticDensity>;

int dimension_of(const InitialMeasure& m);

struct Ball {
  Vec center;
  double radius = 0.0;
};

/// Closed target set A ⊂ R^n.
class TargetSet {
 public:
  struct BallUnion {
    std::vector<Ball> balls;
  };
  struct Polygon2D {
    std::vector<Vec2> vertices;  // counterclockwise
  };
  struct Implicit {
    int dim = 2;
    SignedDistanceFn sdf;
    Box bbox;
    double inner_ball_radius = 0.0;
    std::string description;
  };
  using Variant = std::variant<BallUnion, Polygon2D, Implicit>;

  static TargetSet ball(const Vec& center, double radius);
  static TargetSet ball_union(std::vector<Ball> balls);
  static TargetSet polygon(std::vector<Vec2> vertices);
  static TargetSet implicit(int dim, SignedDistanceFn sdf, Box bbox, double inner_ball_radius,
                            std::string description = "implicit");

  int dim() const;
  /// Negative inside, positive outside; exact outside for every variant.
  double signed_distance(const Vec& x) const;
  /// Closed-set membership with boundary tolerance 1e-12.
  bool contains(const Vec& x) const { return signed_distance(x) <= kBoundaryTolerance; }
  /// Radius r of the interior ball property; 0 when not asserted.
  double inner_ball_radius() const;
  Box bounding_box() const;
  double diameter() const;
  bool is_single_ball() const;
  const Variant& variant() const { return variant_; }

  static constexpr double kBoundaryTolerance = 1e-12;

 private:
  explicit TargetSet(Variant v) : variant_(std::move(v)) {}
  Variant variant_;
};

/// Discretised boundary ∂A in the plane: nodes with outward unit normals and arc-length weights.
struct BoundaryMesh {
  struct Piece {
    std::size_t begin = 0;
    std::size_t end = 0;  // one past the last node
    bool closed = true;
  };
  std::vector<Vec2> nodes;
  std::vector<Vec2> normals;
  std::vector<double> sigma;
  std::vector<Piece> pieces;

  std::size_t size() const { return nodes.size(); }
  double total_sigma() const;
};

/// Builds normals (tangent rotated by -90 degrees, counterclockwise orientation) and
/// trapezoidal arc-length weights from ordered polylines.
BoundaryMesh mesh_from_polylines(const std::vector<std::vector<Vec2>>& polylines, const std::vector<bool>& closed);

double mass_in(const ParticleMeasure& measure, const TargetSet& set);
QuadratureResult mass_in(const AnalyticDensity& density, const TargetSet& set, const QuadratureOptions& opts = {});

ParticleMeasure pushforward(const ParticleMeasure& measure, const std::function<Vec(const Vec&)>& map);

/// Standard mollifier c_n exp(1/(|x|^2-1)) scaled to radius eps.
double mollifier(const Vec& x, double eps);
/// c_n such that the unit bump integrates to one (cached per dimension).
double mollifier_constant(int dim);
AnalyticDensity mollify(const ParticleMeasure& measure, double eps);

/// Draws N equally weighted particles. Deterministic in the seed.
ParticleMeasure sample(const AnalyticDensity& density, std::size_t count, std::uint64_t seed);

/// Integral of the density over its support box.
QuadratureResult total_mass(const AnalyticDensity& density, const QuadratureOptions& opts = {});

struct ProhorovEstimate {
  double value = 0.0;
  /// Index into the geometric grid; 0 is the exact-equality level.
  int grid_index = 0;
};

/// Upper estimate of the Prohorov distance over balls centred at particle points. The
/// returned value is the first entry of the grid {0, 1e-6 * 1.05^k, ..., 1} for which both
/// one-sided inequalities hold on the whole test family.
ProhorovEstimate prohorov_upper(const ParticleMeasure& a, const ParticleMeasure& b);
const std::vector<double>& prohorov_grid();

TargetSet neighborhood(const TargetSet& set, double r);

BoundaryMesh boundary_mesh(const TargetSet& set, double h);

/// Closed-form right side of the surface bound n α_n (diam A)^n / (2^n r).
double boundary_bound(int dim, double diameter, double inner_radius);
/// Volume of the unit ball in R^n.
double unit_ball_volume(int dim);

void write_particles_csv(std::ostream& out, const ParticleMeasure& measure);
ParticleMeasure read_particles_csv(std::istream& in);
void write_particles_csv(const std::string& path, const ParticleMeasure& measure);
ParticleMeasure read_particles_csv(const std::string& path);

}  // namespace liouville
