#pragma once

#include "liouville/controls.hpp"
#include "liouville/fields.hpp"
#include "liouville/measures.hpp"

#include <string>
#include <vector>

namespace liouville {

/// Solution t -> μ(t) of the continuity equation, represented along characteristics.
class Trajectory {
 public:
  Trajectory(InitialMeasure initial, ClosedField field, std::vector<double> times);

  const std::vector<double>& times() const { return times_; }
  const InitialMeasure& initial() const { return initial_; }
  const ClosedField& field() const { return field_; }

  /// Particle snapshot at times()[i]. Requires a particle initial measure.
  const ParticleMeasure& particles(std::size_t i) const;
  /// Density snapshot at times()[i]. Requires an analytic initial measure.
  AnalyticDensity density(std::size_t i) const;

 private:
  InitialMeasure initial_;
  ClosedField field_;
  std::vector<double> times_;
  std::vector<ParticleMeasure> snapshots_;
};

/// Advances every particle by flow(field, 0, t_i, ·).
Trajectory solve_particles(const ParticleMeasure& theta, const ClosedField& field, std::vector<double> times);

/// ρ(t, x) = ρ0(y) / det DV_0^t(y) with y = V_t^0(x).
double density_at(const AnalyticDensity& rho0, const ClosedField& field, double t, const Vec& x);

/// Bounding box of the forward image V_0^t(box), from flowed boundary samples.
Box forward_image_box(const ClosedField& field, double t, const Box& box);

/// Transported density at time t as an AnalyticDensity (support = forward image box).
AnalyticDensity transported_density(const AnalyticDensity& rho0, const ClosedField& field, double t);

struct ObjectiveValue {
  double value = 0.0;
  double error = 0.0;
};

/// μ(T)(A) for a closed field.
ObjectiveValue objective(const InitialMeasure& theta, const ClosedField& field, const TargetSet& target,
                         const QuadratureOptions& opts = {});
ObjectiveValue objective(const InitialMeasure& theta, const ControlledField& field, const PiecewiseControl& control,
                         double step, const TargetSet& target, const QuadratureOptions& opts = {});
ObjectiveValue objective(const InitialMeasure& theta, const ControlledField& field, const GeneralizedControl& nu,
                         double step, const TargetSet& target, const QuadratureOptions& opts = {});

/// Writes one CSV per particle snapshot as `<prefix>_t<time>.csv`; returns the paths.
std::vector<std::string> write_snapshots(const Trajectory& trajectory, const std::string& prefix);

}  // namespace liouville
