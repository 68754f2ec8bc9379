#include "liouville/scenarios.hpp"

#include <cmath>
#include <filesystem>
#include <map>

namespace liouville {

ControlledField translation_field(int n, double control_bound) {
  ControlledField f;
  f.name = "translation";
  f.state_dim = n;
  f.control_dim = n;
  f.eval = [](double, const Vec&, const Vec& u) { return u; };
  f.jacobian_x = [n](double, const Vec&, const Vec&) { return Mat(Mat::Zero(n, n)); };
  f.declared_L = 0.0;
  f.declared_C = control_bound;
  f.smooth = true;
  return f;
}

ControlledField rotation_field(double gain, double control_bound) {
  ControlledField f;
  f.name = "rotation";
  f.state_dim = 2;
  f.control_dim = 2;
  f.eval = [gain](double, const Vec& x, const Vec& u) { return Vec(make_vec({-x[1], x[0]}) + gain * u); };
  f.jacobian_x = [](double, const Vec&, const Vec&) {
    Mat j(2, 2);
    j << 0.0, -1.0, 1.0, 0.0;
    return j;
  };
  f.declared_L = 1.0;
  f.declared_C = 1.0 + std::abs(gain) * control_bound;
  f.smooth = true;
  return f;
}

ControlledField zero_field(int n, int m) {
  ControlledField f;
  f.name = "zero";
  f.state_dim = n;
  f.control_dim = m;
  f.eval = [n](double, const Vec&, const Vec&) { return Vec(Vec::Zero(n)); };
  f.jacobian_x = [n](double, const Vec&, const Vec&) { return Mat(Mat::Zero(n, n)); };
  f.declared_L = 0.0;
  f.declared_C = 0.0;
  f.smooth = true;
  return f;
}

ControlledField affine_field(int n, double a, double control_bound) {
  ControlledField f;
  f.name = "affine";
  f.state_dim = n;
  f.control_dim = n;
  f.eval = [a](double, const Vec& x, const Vec& u) { return Vec(a * x + u); };
  f.jacobian_x = [n, a](double, const Vec&, const Vec&) { return Mat(a * Mat::Identity(n, n)); };
  f.declared_L = std::abs(a);
  f.declared_C = std::max(std::abs(a), control_bound);
  f.smooth = true;
  return f;
}

ControlAffineField uncertain_field(double coupling) {
  ControlAffineField f;
  f.name = "uncertain_ode";
  f.state_dim = 2;
  f.control_dim = 2;
  f.drift = [coupling](double, const Vec& x) { return make_vec({-x[0], -x[1] + coupling * std::sin(x[0])}); };
  f.drift_jacobian = [coupling](double, const Vec& x) {
    Mat j(2, 2);
    j << -1.0, 0.0, coupling * std::cos(x[0]), -1.0;
    return j;
  };
  for (int i = 0; i < 2; ++i) {
    f.directions.push_back([i](double, const Vec&) {
      Vec e = Vec::Zero(2);
      e[i] = 1.0;
      return e;
    });
    f.direction_jacobians.push_back([](double, const Vec&) { return Mat(Mat::Zero(2, 2)); });
    f.coefficients.push_back([i](double, const Vec& u) { return u[i]; });
  }
  // |D_x v| <= 1 + |c| and |v| <= (1 + |c|)|x| + sqrt(2) on U = [-1,1]^2.
  f.declared_L = 1.0 + std::abs(coupling);
  f.declared_C = std::max(1.0 + std::abs(coupling), std::sqrt(2.0));
  f.smooth = true;
  return f;
}

ControlledField flock_field() {
  ControlledField f;
  f.name = "flock";
  f.state_dim = 2;
  f.control_dim = 2;
  f.eval = [](double, const Vec& x, const Vec& u) {
    const Vec d = x - u;
    return Vec(std::exp(-d.norm()) * d);
  };
  f.jacobian_x = [](double, const Vec& x, const Vec& u) {
    const Vec d = x - u;
    const double s = d.norm();
    Mat j = Mat::Identity(2, 2);
    if (s > 0.0) j -= d * d.transpose() / s;
    return Mat(std::exp(-s) * j);
  };
  // Eigenvalues e^{-s} and e^{-s}(1 - s) lie in [-e^{-2}, 1]; |v| = s e^{-s} <= 1/e.
  f.declared_L = 1.0;
  f.declared_C = 0.37;
  f.smooth = true;
  return f;
}

ControlAffineField beam_field() {
  ControlAffineField f;
  f.name = "beam2d";
  f.state_dim = 2;
  f.control_dim = 1;
  f.drift = [](double, const Vec& x) { return make_vec({x[1], 0.0}); };
  f.drift_jacobian = [](double, const Vec&) {
    Mat j(2, 2);
    j << 0.0, 1.0, 0.0, 0.0;
    return j;
  };
  f.directions.push_back([](double, const Vec&) { return make_vec({0.0, 1.0}); });
  f.direction_jacobians.push_back([](double, const Vec&) { return Mat(Mat::Zero(2, 2)); });
  f.coefficients.push_back([](double, const Vec& u) { return u[0]; });
  f.declared_L = 1.0;
  f.declared_C = 1.0;
  f.smooth = true;
  return f;
}

TargetSet rounded_box(const Vec& center, const Vec& half_widths, double corner) {
  if (center.size() != 2 || half_widths.size() != 2) throw DimensionError("rounded_box is planar");
  if (!(corner > 0.0) || corner > half_widths.minCoeff())
    throw ValidationError("rounded_box corner radius must lie in (0, min half width]");
  const Vec inner = (half_widths.array() - corner).matrix();
  auto sdf = [center, inner, corner](const Vec& x) {
    const Vec q = ((x - center).cwiseAbs() - inner);
    const double outside = q.cwiseMax(0.0).norm();
    const double inside = std::min(q.maxCoeff(), 0.0);
    return outside + inside - corner;
  };
  const Box bbox{center - half_widths, center + half_widths};
  return TargetSet::implicit(2, sdf, bbox, corner, "rounded_box");
}

AnalyticDensity bump_density(const Vec& center, double radius) {
  AnalyticDensity d = mollify(ParticleMeasure::dirac(center), radius);
  d.name = "bump";
  return d;
}

std::vector<std::string> scenario_names() { return {"uncertain_ode", "flock", "beam2d", "p_prime", "custom"}; }

namespace {

const std::map<std::string, std::string>& defaults() {
  static const std::map<std::string, std::string> table{
      {"p_prime", R"(scenario = p_prime
T = 1
K = 1
step = 0.05
seed = 1
mesh_h = 0.01
directions = 16
[field]
kind = translation
[control]
set = ball
center = 0,0
radius = 1
[theta]
kind = dirac
point = -2,0
[target]
kind = ball
center = 0,0
radius = 1
[quadrature]
abs_tol = 1e-4
)"},
      {"uncertain_ode", R"(scenario = uncertain_ode
T = 1
K = 2
step = 0.01
seed = 1
mesh_h = 0.02
directions = 16
[field]
kind = uncertain
coupling = 0.5
[control]
set = box
lo = -1,-1
hi = 1,1
[theta]
kind = bump
center = 0,0
radius = 0.5
[target]
kind = ball
center = 0.8,0.6
radius = 0.25
[quadrature]
abs_tol = 1e-4
)"},
      {"flock", R"(scenario = flock
T = 3
K = 2
step = 0.03
seed = 1
mesh_h = 0.02
directions = 16
[field]
kind = flock
phi = exp(-s)
[control]
set = box
lo = -1,-1
hi = 1,1
[theta]
kind = bump
center = 0,0
radius = 0.5
[target]
kind = ball
center = 0.9,0
radius = 0.6
[quadrature]
abs_tol = 1e-4
)"},
      {"beam2d", R"(scenario = beam2d
T = 2
K = 2
step = 0.02
seed = 1
mesh_h = 0.01
directions = 16
[field]
kind = beam
[control]
set = box
lo = -1
hi = 1
[theta]
kind = bump
center = -0.8,0.4
radius = 0.3
[target]
kind = rounded_box
center = 0,0
half_widths = 0.3,0.3
corner_radius = 0.1
[quadrature]
abs_tol = 1e-4
)"},
      {"custom", R"(scenario = custom
T = 1
K = 1
step = 0.1
seed = 1
mesh_h = 0.01
directions = 16
[field]
kind = zero
[control]
set = ball
center = 0,0
radius = 1
[theta]
kind = bump
center = 0,0
radius = 0.5
[target]
kind = ball
center = 0,0
radius = 1
[quadrature]
abs_tol = 1e-4
)"},
  };
  return table;
}

ControlSet build_control_set(const Config& c) {
  const std::string kind = c.text("control", "set");
  if (kind == "ball") {
    const double r = c.number("control", "radius");
    if (!(r >= 0.0)) throw ValidationError("config field [control] radius must be nonnegative");
    return ControlSet::ball(c.vector("control", "center"), r);
  }
  if (kind == "box") return ControlSet::box(c.vector("control", "lo"), c.vector("control", "hi"));
  if (kind == "finite") return ControlSet::finite(c.points("control", "points"));
  throw ValidationError("config field [control] set: expected ball, box or finite, got '" + kind + "'");
}

double control_bound(const ControlSet& u) {
  const Box b = u.bounding_box();
  return b.lo.cwiseAbs().cwiseMax(b.hi.cwiseAbs()).norm();
}

ControlledField build_field(const Config& c, const ControlSet& u) {
  const std::string kind = c.text("field", "kind");
  const int m = u.dim();
  if (kind == "translation") return translation_field(m, control_bound(u));
  if (kind == "rotation") return rotation_field(c.number("field", "gain", 0.0), control_bound(u));
  if (kind == "zero") return zero_field(c.integer("field", "state_dim", 2), m);
  if (kind == "affine") return affine_field(m, c.number("field", "a"), control_bound(u));
  if (kind == "uncertain") return uncertain_field(c.number("field", "coupling", 0.5)).wrap();
  if (kind == "flock") {
    const std::string phi = c.text("field", "phi", "exp(-s)");
    if (phi != "exp(-s)") throw ValidationError("config field [field] phi: only exp(-s) is available");
    return flock_field();
  }
  if (kind == "beam") return beam_field().wrap();
  throw ValidationError("config field [field] kind: unknown field '" + kind + "'");
}

InitialMeasure build_theta(const Config& c) {
  const std::string kind = c.text("theta", "kind");
  if (kind == "dirac") return ParticleMeasure::dirac(c.vector("theta", "point"));
  if (kind == "bump") {
    const double r = c.number("theta", "radius");
    if (!(r > 0.0)) throw ValidationError("config field [theta] radius must be positive");
    return bump_density(c.vector("theta", "center"), r);
  }
  if (kind == "particles") {
    const std::string file = c.text("theta", "file");
    if (!std::filesystem::exists(file)) throw ValidationError("config field [theta] file: '" + file + "' does not exist");
    return read_particles_csv(file);
  }
  throw ValidationError("config field [theta] kind: expected dirac, bump or particles, got '" + kind + "'");
}

TargetSet build_target(const Config& c) {
  const std::string kind = c.text("target", "kind");
  if (kind == "ball") {
    const double r = c.number("target", "radius");
    if (!(r > 0.0)) throw ValidationError("config field [target] radius must be positive");
    return TargetSet::ball(c.vector("target", "center"), r);
  }
  if (kind == "balls") {
    const auto centers = c.points("target", "centers");
    const double r = c.number("target", "radius");
    std::vector<Ball> balls;
    for (const auto& p : centers) balls.push_back({p, r});
    return TargetSet::ball_union(std::move(balls));
  }
  if (kind == "polygon") {
    std::vector<Vec2> v;
    for (const auto& p : c.points("target", "vertices")) v.push_back(to_vec2(p));
    return TargetSet::polygon(std::move(v));
  }
  if (kind == "rounded_box")
    return rounded_box(c.vector("target", "center"), c.vector("target", "half_widths"),
                       c.number("target", "corner_radius"));
  throw ValidationError("config field [target] kind: expected ball, balls, polygon or rounded_box, got '" + kind + "'");
}

void require_range(double x, double lo, double hi, const std::string& name) {
  if (!(x > lo && x <= hi))
    throw ValidationError("config field " + name + " = " + std::to_string(x) + " outside (" + std::to_string(lo) +
                          ", " + std::to_string(hi) + "]");
}

}  // namespace

Config default_config(const std::string& scenario) {
  const auto it = defaults().find(scenario);
  if (it == defaults().end()) throw ValidationError("unknown scenario '" + scenario + "'");
  return Config::parse_string(it->second, scenario + " defaults");
}

Config resolve_config(const Config& cfg) {
  Config out = default_config(cfg.text("", "scenario"));
  for (const auto& [section, keys] : cfg.entries())
    for (const auto& [key, value] : keys) out.set(section, key, value);
  return out;
}

Scenario build_scenario(const Config& cfg) {
  Scenario s;
  s.config = resolve_config(cfg);
  const Config& c = s.config;
  Problem& p = s.problem;
  p.name = c.text("", "scenario");
  p.horizon = c.number("", "T");
  require_range(p.horizon, 0.0, 1e3, "T");
  p.cells = c.integer("", "K", 1);
  require_range(p.cells, 0, 64, "K");
  p.step = c.number("", "step", 1e-3 * p.horizon);
  require_range(p.step, 0.0, p.horizon, "step");
  p.mesh_h = c.number("", "mesh_h", 0.01);
  require_range(p.mesh_h, 0.0, 1.0, "mesh_h");
  p.directions = c.integer("", "directions", 64);
  require_range(p.directions, 0, 4096, "directions");
  p.quadrature.abs_tol = c.number("quadrature", "abs_tol", 1e-4);
  require_range(p.quadrature.abs_tol, 0.0, 1.0, "[quadrature] abs_tol");
  const double seed = c.number("", "seed", 1.0);
  if (!(seed >= 0.0) || seed != std::floor(seed)) throw ValidationError("config field seed must be a nonnegative integer");
  s.seed = static_cast<std::uint64_t>(seed);
  p.control_set = build_control_set(c);
  p.field = build_field(c, p.control_set);
  p.theta = build_theta(c);
  p.target = build_target(c);
  p.validate();
  return s;
}

}  // namespace liouville
