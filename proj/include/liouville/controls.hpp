#pragma once

#include "liouville/common.hpp"
#include "liouville/fields.hpp"

#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

namespace liouville {

/// Compact control set U ⊂ R^m.
class ControlSet {
 public:
  struct BoxSet {
    Vec lo;
    Vec hi;
  };
  struct BallSet {
    Vec center;
    double radius = 0.0;
  };
  struct FiniteSet {
    std::vector<Vec> points;
  };
  using Variant = std::variant<BoxSet, BallSet, FiniteSet>;

  static ControlSet box(const Vec& lo, const Vec& hi);
  static ControlSet ball(const Vec& center, double radius);
  static ControlSet finite(std::vector<Vec> points);

  int dim() const;
  bool contains(const Vec& u, double tol = 1e-10) const;
  /// Nearest point of U (Euclidean for box and ball, nearest element for finite sets).
  Vec project(const Vec& u) const;
  double diameter() const;
  Box bounding_box() const;
  /// Candidate set used by the outflow minimisation and the oracles. Ball: `directions`
  /// boundary points (2-D angles 2πk/directions starting at angle 0) then the centre.
  /// Box: vertices then edge midpoints. Finite: the points themselves.
  std::vector<Vec> grid(int directions = 64) const;
  const Variant& variant() const { return variant_; }

 private:
  explicit ControlSet(Variant v) : variant_(std::move(v)) {}
  Variant variant_;
};

/// Usual control: value i is active on [grid[i], grid[i+1]).
struct PiecewiseControl {
  std::vector<double> grid;
  std::vector<Vec> values;

  static PiecewiseControl constant(const Vec& u, double horizon, int cells = 1);
  static PiecewiseControl uniform(std::vector<Vec> values, double horizon);

  double horizon() const { return grid.back(); }
  std::size_t cells() const { return values.size(); }
  int dim() const { return static_cast<int>(values.front().size()); }
  std::size_t cell_index(double t) const;
  const Vec& at(double t) const { return values[cell_index(t)]; }
  double midpoint(std::size_t cell) const { return 0.5 * (grid[cell] + grid[cell + 1]); }
  void validate(const ControlSet* set = nullptr) const;
};

struct Atom {
  Vec omega;
  double p = 0.0;
};

/// Young measure with a disintegration that is constant on each grid cell and atomic.
struct GeneralizedControl {
  std::vector<double> grid;
  std::vector<std::vector<Atom>> cells;

  static GeneralizedControl dirac(const PiecewiseControl& u);

  double horizon() const { return grid.back(); }
  std::size_t cell_index(double t) const;
  int dim() const { return static_cast<int>(cells.front().front().omega.size()); }
  void validate(const ControlSet* set = nullptr) const;
};

/// v(t,x,u) = v0(t,x) + Σ φ_i(t,u) v_i(t,x).
struct ControlAffineField {
  using StateField = std::function<Vec(double, const Vec&)>;
  using StateJacobian = std::function<Mat(double, const Vec&)>;
  using Coefficient = std::function<double(double, const Vec&)>;

  std::string name;
  int state_dim = 0;
  int control_dim = 0;
  StateField drift;
  std::vector<StateField> directions;
  std::vector<Coefficient> coefficients;
  /// Optional Jacobians; either all present or all absent.
  StateJacobian drift_jacobian;
  std::vector<StateJacobian> direction_jacobians;
  double declared_L = std::numeric_limits<double>::quiet_NaN();
  double declared_C = std::numeric_limits<double>::quiet_NaN();
  bool smooth = true;

  /// Φ(t, u) = (φ_1(t,u), ..., φ_l(t,u)).
  Vec coefficient_vector(double t, const Vec& u) const;
  ControlledField wrap() const;
};

/// Closed field of a usual control; breakpoints at the control grid.
ClosedField close(const ControlledField& field, const PiecewiseControl& control, double step);

/// Closed field of the averaged velocity Σ_k p_k v(t, x, ω_k) of a generalized control.
ClosedField averaged_field(const ControlledField& field, const GeneralizedControl& nu, double step);

class ConvexityError : public NumericalError {
 public:
  ConvexityError(double t, Vec target, Vec best, double residual);
  double time() const { return t_; }
  const Vec& target() const { return target_; }
  const Vec& best() const { return best_; }
  double residual() const { return residual_; }

 private:
  double t_;
  Vec target_;
  Vec best_;
  double residual_;
};

struct FilippovResult {
  PiecewiseControl control;
  std::vector<double> residuals;  // per cell, |Φ(t,u) - ψ|
  double max_residual = 0.0;
};

/// Usual control realising the averaged coefficients of ν at every cell midpoint.
FilippovResult filippov_extract(const ControlAffineField& field, const ControlSet& set, const GeneralizedControl& nu,
                                int refine_steps = 60);

/// ū with the value ω on [τ - ε, τ].
PiecewiseControl needle_variation(const PiecewiseControl& ubar, double tau, double eps, const Vec& omega,
                                  const ControlSet& set);

/// Time-sliced usual control whose atoms cycle with the given period, slice lengths
/// proportional to the atom weights.
PiecewiseControl chattering(const GeneralizedControl& nu, double period);

void write_control_csv(std::ostream& out, const PiecewiseControl& u);
PiecewiseControl read_control_csv(std::istream& in);
void write_generalized_csv(std::ostream& out, const GeneralizedControl& nu);
GeneralizedControl read_generalized_csv(std::istream& in);

}  // namespace liouville
