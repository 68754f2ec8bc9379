#include "liouville/fields.hpp"

#include <algorithm>
#include <cmath>

namespace liouville {
namespace {

// Interior breakpoints strictly between t and s, ordered along the direction of travel.
std::vector<double> segment_times(const ClosedField& field, double t, double s) {
  std::vector<double> times{t};
  const double lo = std::min(t, s);
  const double hi = std::max(t, s);
  std::vector<double> inner;
  for (double b : field.breakpoints)
    if (b > lo && b < hi) inner.push_back(b);
  std::sort(inner.begin(), inner.end());
  if (s < t) std::reverse(inner.begin(), inner.end());
  times.insert(times.end(), inner.begin(), inner.end());
  times.push_back(s);
  return times;
}

int step_count(double length, double h) {
  return std::max(1, static_cast<int>(std::ceil(std::abs(length) / h - 1e-9)));
}

Mat closed_jacobian(const ClosedField& field, double t, const Vec& x, double seg) {
  if (field.jacobian) return field.jacobian(t, x, seg);
  return finite_difference_jacobian([&](const Vec& y) { return field.velocity(t, y, seg); }, x);
}

void guard(const Vec& x, double t) {
  if (!x.allFinite() || x.norm() > kOverflowGuard) throw FlowError("state norm exceeded the overflow guard", t);
}

}  // namespace

ClosedField close_constant(const ControlledField& field, const Vec& omega, double horizon, double step) {
  if (omega.size() != field.control_dim) throw DimensionError("control value has wrong dimension");
  ClosedField c;
  c.dim = field.state_dim;
  c.horizon = horizon;
  c.step = step;
  c.smooth = field.smooth;
  c.lipschitz = field.declared_L;
  auto eval = field.eval;
  c.velocity = [eval, omega](double t, const Vec& x, double) { return eval(t, x, omega); };
  if (field.jacobian_x) {
    auto jac = field.jacobian_x;
    c.jacobian = [jac, omega](double t, const Vec& x, double) { return jac(t, x, omega); };
  }
  return c;
}

ClosedField autonomous_field(int dim, std::function<Vec(const Vec&)> w, double horizon, double step,
                             std::function<Mat(const Vec&)> jacobian) {
  ClosedField c;
  c.dim = dim;
  c.horizon = horizon;
  c.step = step;
  c.smooth = true;
  c.velocity = [w = std::move(w)](double, const Vec& x, double) { return w(x); };
  if (jacobian) c.jacobian = [jacobian = std::move(jacobian)](double, const Vec& x, double) { return jacobian(x); };
  return c;
}

Vec flow(const ClosedField& field, double t, double s, const Vec& x) {
  if (x.size() != field.dim) throw DimensionError("flow: point dimension does not match the field");
  if (!x.allFinite()) throw ValidationError("flow: initial point is not finite");
  if (!(field.step > 0.0)) throw ValidationError("flow: integrator step must be positive");
  Vec y = x;
  if (t == s) return y;
  const auto times = segment_times(field, t, s);
  for (std::size_t k = 0; k + 1 < times.size(); ++k) {
    const double a = times[k];
    const double b = times[k + 1];
    const double seg = 0.5 * (a + b);
    const int n = step_count(b - a, field.step);
    const double dt = (b - a) / n;
    for (int i = 0; i < n; ++i) {
      const double ti = a + i * dt;
      const Vec k1 = field.velocity(ti, y, seg);
      const Vec k2 = field.velocity(ti + 0.5 * dt, y + 0.5 * dt * k1, seg);
      const Vec k3 = field.velocity(ti + 0.5 * dt, y + 0.5 * dt * k2, seg);
      const Vec k4 = field.velocity(ti + dt, y + dt * k3, seg);
      y += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      guard(y, ti + dt);
    }
  }
  return y;
}

FlowJacobian flow_jacobian(const ClosedField& field, double t, double s, const Vec& x) {
  if (x.size() != field.dim) throw DimensionError("flow_jacobian: point dimension does not match the field");
  if (!(field.step > 0.0)) throw ValidationError("flow_jacobian: integrator step must be positive");
  FlowJacobian out{x, Mat::Identity(field.dim, field.dim)};
  if (t == s) return out;
  Vec& y = out.point;
  Mat& m = out.jacobian;
  const auto times = segment_times(field, t, s);
  for (std::size_t k = 0; k + 1 < times.size(); ++k) {
    const double a = times[k];
    const double b = times[k + 1];
    const double seg = 0.5 * (a + b);
    const int n = step_count(b - a, field.step);
    const double dt = (b - a) / n;
    for (int i = 0; i < n; ++i) {
      const double ti = a + i * dt;
      const double tm = ti + 0.5 * dt;
      const Vec k1 = field.velocity(ti, y, seg);
      const Mat j1 = closed_jacobian(field, ti, y, seg) * m;
      const Vec y2 = y + 0.5 * dt * k1;
      const Mat m2 = m + 0.5 * dt * j1;
      const Vec k2 = field.velocity(tm, y2, seg);
      const Mat j2 = closed_jacobian(field, tm, y2, seg) * m2;
      const Vec y3 = y + 0.5 * dt * k2;
      const Mat m3 = m + 0.5 * dt * j2;
      const Vec k3 = field.velocity(tm, y3, seg);
      const Mat j3 = closed_jacobian(field, tm, y3, seg) * m3;
      const Vec y4 = y + dt * k3;
      const Mat m4 = m + dt * j3;
      const Vec k4 = field.velocity(ti + dt, y4, seg);
      const Mat j4 = closed_jacobian(field, ti + dt, y4, seg) * m4;
      y += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      m += dt / 6.0 * (j1 + 2.0 * j2 + 2.0 * j3 + j4);
      guard(y, ti + dt);
    }
  }
  return out;
}

Mat finite_difference_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& x) {
  const auto n = x.size();
  const double h = 1e-5 * (1.0 + x.norm());
  Mat jac(n, n);
  Vec xp = x;
  Vec xm = x;
  for (Eigen::Index j = 0; j < n; ++j) {
    xp[j] = x[j] + h;
    xm[j] = x[j] - h;
    jac.col(j) = (f(xp) - f(xm)) / (2 * h);
    xp[j] = x[j];
    xm[j] = x[j];
  }
  return jac;
}

namespace {

// Deterministic sample of states: a tensor grid over the box (5 per axis, capped).
std::vector<Vec> grid_points(const Box& box) {
  const int n = box.dim();
  const int per_axis = n <= 3 ? 5 : 3;
  std::size_t total = 1;
  for (int d = 0; d < n; ++d) total *= static_cast<std::size_t>(per_axis);
  std::vector<Vec> pts;
  pts.reserve(total);
  for (std::size_t idx = 0; idx < total; ++idx) {
    Vec x(n);
    std::size_t rem = idx;
    for (int d = 0; d < n; ++d) {
      x[d] = box.lo[d] + (box.hi[d] - box.lo[d]) * static_cast<double>(rem % per_axis) / (per_axis - 1);
      rem /= per_axis;
    }
    pts.push_back(x);
  }
  return pts;
}

// Unit directions used for local difference quotients.
std::vector<Vec> probe_directions(int n) {
  std::vector<Vec> dirs;
  if (n == 2) {
    for (int k = 0; k < 16; ++k) {
      const double a = 2.0 * 3.14159265358979323846 * k / 16.0;
      dirs.push_back(make_vec({std::cos(a), std::sin(a)}));
    }
    return dirs;
  }
  for (int i = 0; i < n; ++i) {
    Vec e = Vec::Zero(n);
    e[i] = 1.0;
    dirs.push_back(e);
    for (int j = i + 1; j < n; ++j) {
      Vec d = Vec::Zero(n);
      d[i] = d[j] = 1.0 / std::sqrt(2.0);
      dirs.push_back(d);
      d[j] = -d[j];
      dirs.push_back(d);
    }
  }
  return dirs;
}

}  // namespace

ConstantEstimate estimate_constants(const ControlledField& field, const Box& domain, std::span<const double> t_samples,
                                    std::span<const Vec> u_samples) {
  if (t_samples.empty() || u_samples.empty()) throw ValidationError("estimate_constants: empty sample grids");
  if (domain.dim() != field.state_dim) throw DimensionError("estimate_constants: domain dimension mismatch");
  ConstantEstimate est;
  const auto pts = grid_points(domain);
  const auto dirs = probe_directions(field.state_dim);
  const double delta = 1e-3 * std::max((domain.hi - domain.lo).norm(), 1e-12);
  for (double t : t_samples) {
    for (const Vec& u : u_samples) {
      std::vector<Vec> values;
      values.reserve(pts.size());
      for (const Vec& x : pts) {
        const Vec v = field.eval(t, x, u);
        values.push_back(v);
        est.growth = std::max(est.growth, v.norm() / (1.0 + x.norm()));
        ++est.points;
        for (const Vec& d : dirs) {
          const Vec y = x + delta * d;
          est.lipschitz = std::max(est.lipschitz, (field.eval(t, y, u) - v).norm() / delta);
          ++est.pairs;
        }
      }
      for (std::size_t i = 0; i < pts.size(); ++i) {
        for (std::size_t j = i + 1; j < pts.size(); ++j) {
          est.lipschitz = std::max(est.lipschitz, (values[i] - values[j]).norm() / (pts[i] - pts[j]).norm());
          ++est.pairs;
        }
      }
    }
  }
  return est;
}

FieldCheck check_field(const ControlledField& field, const Box& domain, std::span<const double> t_samples,
                       std::span<const Vec> u_samples) {
  FieldCheck check;
  const ConstantEstimate est = estimate_constants(field, domain, t_samples, u_samples);
  if (field.has_declared_L()) {
    check.max_lipschitz_ratio = field.declared_L > 0.0 ? est.lipschitz / field.declared_L
                                                       : (est.lipschitz > 1e-12 ? INFINITY : 0.0);
    if (check.max_lipschitz_ratio > 1.0 + 1e-6) check.ok = false;
  }
  if (field.has_declared_C()) {
    check.max_growth_ratio = field.declared_C > 0.0 ? est.growth / field.declared_C : (est.growth > 0 ? INFINITY : 0.0);
    if (check.max_growth_ratio > 1.0 + 1e-6) check.ok = false;
  }
  if (field.jacobian_x) {
    for (double t : t_samples) {
      for (const Vec& u : u_samples) {
        for (const Vec& x : grid_points(domain)) {
          const Mat analytic = field.jacobian_x(t, x, u);
          const Mat numeric = finite_difference_jacobian([&](const Vec& y) { return field.eval(t, y, u); }, x);
          const double scale = std::max(1.0, analytic.norm());
          check.max_jacobian_error = std::max(check.max_jacobian_error, (analytic - numeric).norm() / scale);
        }
      }
    }
    if (check.max_jacobian_error > 1e-5) check.ok = false;
  }
  return check;
}

}  // namespace liouville
