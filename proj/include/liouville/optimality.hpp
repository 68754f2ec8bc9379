#pragma once

#include "liouville/controls.hpp"
#include "liouville/measures.hpp"
#include "liouville/transport.hpp"

#include <iosfwd>
#include <vector>

namespace liouville {

/// Backward images A^τ of the target under the reference flow, as transported boundary meshes.
struct TargetTube {
  double horizon = 0.0;
  std::vector<double> taus;
  std::vector<BoundaryMesh> meshes;
  BoundaryMesh reference;  // boundary_mesh(A) at τ = T

  /// Mesh at a grid time (exact match within 1e-12).
  const BoundaryMesh& at(double tau) const;
};

class MeshDegeneracyError : public NumericalError {
 public:
  explicit MeshDegeneracyError(double tau)
      : NumericalError("transported boundary self-intersects at tau=" + std::to_string(tau)), tau_(tau) {}
  double tau() const { return tau_; }

 private:
  double tau_;
};

/// Transports boundary_mesh(A, h) from T back to every τ under `field`.
TargetTube backward_tube(const TargetSet& target, const ClosedField& field, std::vector<double> taus, double mesh_h);

/// True when some pair of non-adjacent segments of the mesh polylines crosses.
bool self_intersects(const BoundaryMesh& mesh);

/// Σ_j ρ_j (v(τ, x_j, ω) · n_j) σ_j.
double outflow(const BoundaryMesh& mesh, std::span<const double> rho, const ControlledField& field, double tau,
               const Vec& omega);

/// ρ(τ, ·) at the mesh nodes.
std::vector<double> density_on_mesh(const BoundaryMesh& mesh, const AnalyticDensity& rho0, const ClosedField& field,
                                    double tau);

struct ResidualRow {
  double tau = 0.0;
  double residual = 0.0;
  double outflow_ubar = 0.0;
  double outflow_min = 0.0;
  Vec argmin;
};

struct ResidualReport {
  std::vector<ResidualRow> rows;
  double max_residual = 0.0;
  double integral = 0.0;
  bool passes(double tol) const { return max_residual <= tol; }
};

struct OptimalityOptions {
  double mesh_h = 0.01;
  double step = 1e-3;
};

/// Throws HypothesisError naming the first hypothesis of the necessary condition that fails.
void check_hypotheses(const InitialMeasure& theta, const ControlledField& field, const TargetSet& target);

/// Residual of the minimum-outflow condition at the cell midpoints of ū.
ResidualReport optimality_residual(const PiecewiseControl& ubar, const ControlledField& field, const TargetSet& target,
                                   const InitialMeasure& theta, const std::vector<Vec>& u_grid,
                                   const OptimalityOptions& opts);

void write_residual_csv(std::ostream& out, const ResidualReport& report);

/// -∫_{∂A^τ} (w · n) ρ(τ, ·) dσ on the tube mesh at τ.
double directional_derivative(const AnalyticDensity& rho0, const ClosedField& field, const TargetSet& target, double tau,
                              const std::function<Vec(const Vec&)>& w, double mesh_h);

/// Same quantity on a given mesh and density samples.
double directional_derivative(const BoundaryMesh& mesh, std::span<const double> rho,
                              const std::function<Vec(const Vec&)>& w);

/// Affine diffeomorphism x -> P x + q.
struct AffineMap {
  Mat P;
  Vec q;
  Vec operator()(const Vec& x) const { return P * x + q; }
  /// max(Lip φ, Lip φ^{-1}).
  double lipschitz_bound() const;
};

struct MainboundResult {
  double lhs = 0.0;
  double rhs = 0.0;
  double M = 0.0;
  double b = 0.0;
  double sup_distance = 0.0;
  bool pass = false;
};

/// Checks |θ(φ1(A)) - θ(φ2(A))| against the bound of the interior-ball estimate.
MainboundResult mainbound_check(const AnalyticDensity& theta, const TargetSet& target, const AffineMap& phi1,
                                const AffineMap& phi2, const QuadratureOptions& opts = {});

}  // namespace liouville
