#pragma once

#include "liouville/common.hpp"

#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace liouville {

/// Controlled vector field v(t, x, u) with Lipschitz constant L in x and growth constant C.
struct ControlledField {
  std::string name;
  int state_dim = 0;
  int control_dim = 0;
  std::function<Vec(double t, const Vec& x, const Vec& u)> eval;
  /// Optional D_x v. When absent, central finite differences are used.
  std::function<Mat(double t, const Vec& x, const Vec& u)> jacobian_x;
  double declared_L = std::numeric_limits<double>::quiet_NaN();
  double declared_C = std::numeric_limits<double>::quiet_NaN();
  /// v is twice continuously differentiable in x.
  bool smooth = false;

  bool has_declared_L() const { return declared_L == declared_L; }
  bool has_declared_C() const { return declared_C == declared_C; }
};

/// A time-dependent field (t, x) -> v(t, x, u(t)) ready for integration.
///
/// `velocity` receives, besides (t, x), a time strictly inside the integration segment
/// that contains t. Piecewise-constant control sources look their value up at that time,
/// so stages evaluated exactly on a breakpoint use the value of the segment being
/// integrated rather than the neighbouring one.
struct ClosedField {
  int dim = 0;
  double horizon = 1.0;
  double step = 1e-3;
  std::function<Vec(double t, const Vec& x, double segment_time)> velocity;
  std::function<Mat(double t, const Vec& x, double segment_time)> jacobian;
  /// Times where the field may jump; the integrator never steps across one.
  std::vector<double> breakpoints;
  bool smooth = false;
  double lipschitz = std::numeric_limits<double>::quiet_NaN();
};

/// Closes a field with a fixed control value ω.
ClosedField close_constant(const ControlledField& field, const Vec& omega, double horizon, double step);

/// Autonomous field x -> w(x), e.g. the direction of a variation.
ClosedField autonomous_field(int dim, std::function<Vec(const Vec&)> w, double horizon, double step,
                             std::function<Mat(const Vec&)> jacobian = {});

/// State-norm bound beyond which integration aborts.
inline constexpr double kOverflowGuard = 1e12;

/// V_t^s(x) by classic RK4 with fixed step, split at breakpoints.
Vec flow(const ClosedField& field, double t, double s, const Vec& x);

struct FlowJacobian {
  Vec point;
  Mat jacobian;
};

/// (V_t^s(x), D V_t^s(x)) from the variational equation integrated alongside the state.
FlowJacobian flow_jacobian(const ClosedField& field, double t, double s, const Vec& x);

/// Central finite-difference Jacobian, step 1e-5 (1 + |x|).
Mat finite_difference_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& x);

struct ConstantEstimate {
  double lipschitz = 0.0;
  double growth = 0.0;
  std::size_t pairs = 0;
  std::size_t points = 0;
};

/// Sampled Lipschitz and growth constants over a box of states and the given (t, u) samples.
ConstantEstimate estimate_constants(const ControlledField& field, const Box& domain, std::span<const double> t_samples,
                                    std::span<const Vec> u_samples);

struct FieldCheck {
  double max_lipschitz_ratio = 0.0;  // sampled quotient / declared L
  double max_growth_ratio = 0.0;     // sampled |v| / (C (1 + |x|))
  double max_jacobian_error = 0.0;   // relative deviation from finite differences
  bool ok = true;
};

/// Sampled checks of the declared constants and the analytic Jacobian.
FieldCheck check_field(const ControlledField& field, const Box& domain, std::span<const double> t_samples,
                       std::span<const Vec> u_samples);

}  // namespace liouville
