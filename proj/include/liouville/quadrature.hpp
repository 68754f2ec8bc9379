#pragma once

#include "liouville/common.hpp"

#include <functional>

namespace liouville {

struct QuadratureOptions {
  /// Absolute error target.
  double abs_tol = 1e-4;
  /// Grid doublings allowed for the cut-cell and n-D rules.
  int max_refinements = 7;
  /// Interval budget for each adaptive 1-D integration.
  int max_intervals = 4000;
};

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;
  std::size_t evaluations = 0;
};

using ScalarFn1 = std::function<double(double)>;
using ScalarFnN = std::function<double(const Vec&)>;
/// Signed distance: negative inside, positive outside, 1-Lipschitz.
using SignedDistanceFn = std::function<double(const Vec&)>;

/// Adaptive Gauss-Kronrod (7/15) on [a, b], bisecting the worst interval first.
/// `initial_panels` seeds the interval list so narrow features are not missed.
QuadratureResult gauss_kronrod(const ScalarFn1& f, double a, double b, double abs_tol, int initial_panels = 1,
                               int max_intervals = 4000);

/// Integral of f over disk(center, radius) restricted to `region`, in polar coordinates.
QuadratureResult integrate_disk(const ScalarFnN& f, const Vec2& center, double radius, const Box& region,
                                const QuadratureOptions& opts);

/// Integral of f over {sdf <= 0} ∩ region in 2-D. Cells cut by the boundary are clipped
/// against the linearised boundary; the base grid doubles until two iterates agree.
QuadratureResult integrate_set_2d(const ScalarFnN& f, const SignedDistanceFn& sdf, const Box& region,
                                  const QuadratureOptions& opts);

/// Midpoint-rule version of integrate_set_2d for arbitrary dimension.
QuadratureResult integrate_set_nd(const ScalarFnN& f, const SignedDistanceFn& sdf, const Box& region,
                                  const QuadratureOptions& opts);

/// Integral of f over a box by tensor Gauss-Legendre cells, doubling until stable.
QuadratureResult integrate_box(const ScalarFnN& f, const Box& region, const QuadratureOptions& opts);

}  // namespace liouville
