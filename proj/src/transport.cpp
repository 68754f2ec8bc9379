#include "liouville/transport.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

namespace liouville {

Trajectory::Trajectory(InitialMeasure initial, ClosedField field, std::vector<double> times)
    : initial_(std::move(initial)), field_(std::move(field)), times_(std::move(times)) {
  if (dimension_of(initial_) != field_.dim) throw DimensionError("initial measure and field dimensions differ");
  for (double t : times_)
    if (!(t >= 0.0 && t <= field_.horizon + 1e-12)) throw ValidationError("trajectory time outside [0, T]");
  if (const auto* p = std::get_if<ParticleMeasure>(&initial_)) {
    for (double t : times_) {
      snapshots_.push_back(t == 0.0 ? *p : pushforward(*p, [&](const Vec& x) { return flow(field_, 0.0, t, x); }));
    }
  }
}

const ParticleMeasure& Trajectory::particles(std::size_t i) const {
  if (snapshots_.empty()) throw ValidationError("trajectory has no particle snapshots");
  return snapshots_.at(i);
}

AnalyticDensity Trajectory::density(std::size_t i) const {
  const auto* rho0 = std::get_if<AnalyticDensity>(&initial_);
  if (!rho0) throw ValidationError("trajectory has no analytic initial density");
  return transported_density(*rho0, field_, times_.at(i));
}

Trajectory solve_particles(const ParticleMeasure& theta, const ClosedField& field, std::vector<double> times) {
  theta.validate();
  return Trajectory(theta, field, std::move(times));
}

double density_at(const AnalyticDensity& rho0, const ClosedField& field, double t, const Vec& x) {
  if (!field.smooth) throw HypothesisError("field smoothness", "density transport needs a C^2 field");
  if (x.size() != rho0.dim) throw DimensionError("density_at: point dimension mismatch");
  if (t == 0.0) return rho0.eval(x);
  // Cheap pass first: most quadrature nodes map outside the initial support.
  const Vec y = flow(field, t, 0.0, x);
  if (!rho0.support.contains(y)) return 0.0;
  const double r = rho0.eval(y);
  if (r == 0.0) return 0.0;
  // det of the backward Jacobian is 1 / det DV_0^t(y).
  const FlowJacobian back = flow_jacobian(field, t, 0.0, x);
  const double inv_det = back.jacobian.determinant();
  if (!(inv_det > 0.0) || inv_det >= 1e14) throw NumericalError("density_at: singular flow Jacobian");
  return r * inv_det;
}

Box forward_image_box(const ClosedField& field, double t, const Box& box) {
  const int n = box.dim();
  const int per_edge = n == 2 ? 64 : 8;
  std::vector<Vec> samples;
  // Boundary points of the box: for each face, a tensor grid on the remaining axes.
  for (int face = 0; face < n; ++face) {
    for (double side : {0.0, 1.0}) {
      std::size_t total = 1;
      for (int d = 0; d < n - 1; ++d) total *= static_cast<std::size_t>(per_edge + 1);
      for (std::size_t idx = 0; idx < total; ++idx) {
        Vec x(n);
        std::size_t rem = idx;
        for (int d = 0; d < n; ++d) {
          double s = side;
          if (d != face) {
            s = static_cast<double>(rem % (per_edge + 1)) / per_edge;
            rem /= static_cast<std::size_t>(per_edge + 1);
          }
          x[d] = box.lo[d] + s * (box.hi[d] - box.lo[d]);
        }
        samples.push_back(x);
      }
    }
  }
  std::vector<Vec> images(samples.size());
  parallel_for(samples.size(), [&](std::size_t i) { images[i] = flow(field, 0.0, t, samples[i]); });
  Box out{images.front(), images.front()};
  for (const auto& p : images) {
    out.lo = out.lo.cwiseMin(p);
    out.hi = out.hi.cwiseMax(p);
  }
  // Pad by the largest sampled image spacing so curved images are not clipped.
  const double spacing = (box.hi - box.lo).maxCoeff() / per_edge;
  const double lip = field.lipschitz == field.lipschitz ? std::exp(field.lipschitz * t) : 4.0;
  return out.inflated(2.0 * lip * spacing + 1e-9);
}

AnalyticDensity transported_density(const AnalyticDensity& rho0, const ClosedField& field, double t) {
  AnalyticDensity out;
  out.dim = rho0.dim;
  out.smooth = rho0.smooth;
  out.name = rho0.name + "@t";
  out.normalization_tol = rho0.normalization_tol;
  out.support = t == 0.0 ? rho0.support : forward_image_box(field, t, rho0.support);
  auto base = std::make_shared<const AnalyticDensity>(rho0);
  auto closed = std::make_shared<const ClosedField>(field);
  out.eval = [base, closed, t](const Vec& x) { return density_at(*base, *closed, t, x); };
  return out;
}

ObjectiveValue objective(const InitialMeasure& theta, const ClosedField& field, const TargetSet& target,
                         const QuadratureOptions& opts) {
  if (dimension_of(theta) != target.dim()) throw DimensionError("objective: target dimension mismatch");
  const double horizon = field.horizon;
  if (const auto* p = std::get_if<ParticleMeasure>(&theta)) {
    const auto end = pushforward(*p, [&](const Vec& x) { return flow(field, 0.0, horizon, x); });
    return {mass_in(end, target), 0.0};
  }
  const auto& rho0 = std::get<AnalyticDensity>(theta);
  const auto q = mass_in(transported_density(rho0, field, horizon), target, opts);
  return {std::clamp(q.value, 0.0, 1.0), q.error};
}

ObjectiveValue objective(const InitialMeasure& theta, const ControlledField& field, const PiecewiseControl& control,
                         double step, const TargetSet& target, const QuadratureOptions& opts) {
  return objective(theta, close(field, control, step), target, opts);
}

ObjectiveValue objective(const InitialMeasure& theta, const ControlledField& field, const GeneralizedControl& nu,
                         double step, const TargetSet& target, const QuadratureOptions& opts) {
  return objective(theta, averaged_field(field, nu, step), target, opts);
}

std::vector<std::string> write_snapshots(const Trajectory& trajectory, const std::string& prefix) {
  std::vector<std::string> paths;
  for (std::size_t i = 0; i < trajectory.times().size(); ++i) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "_t%.6g.csv", trajectory.times()[i]);
    paths.push_back(prefix + buf);
    write_particles_csv(paths.back(), trajectory.particles(i));
  }
  return paths;
}

}  // namespace liouville
