#include "liouville/optimality.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

namespace liouville {

const BoundaryMesh& TargetTube::at(double tau) const {
  for (std::size_t i = 0; i < taus.size(); ++i)
    if (std::abs(taus[i] - tau) <= 1e-12 * std::max(1.0, horizon)) return meshes[i];
  throw ValidationError("tau " + std::to_string(tau) + " is not on the tube grid");
}

namespace {

double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

bool proper_crossing(const Vec2& p1, const Vec2& p2, const Vec2& q1, const Vec2& q2) {
  const double d1 = cross(p2 - p1, q1 - p1);
  const double d2 = cross(p2 - p1, q2 - p1);
  const double d3 = cross(q2 - q1, p1 - q1);
  const double d4 = cross(q2 - q1, p2 - q1);
  return d1 * d2 < 0.0 && d3 * d4 < 0.0;
}

struct Segment {
  Vec2 a;
  Vec2 b;
  std::size_t piece;
  std::size_t index;  // position within the piece
  std::size_t count;  // segments in the piece
  bool closed;
};

}  // namespace

bool self_intersects(const BoundaryMesh& mesh) {
  std::vector<Segment> segs;
  for (std::size_t p = 0; p < mesh.pieces.size(); ++p) {
    const auto& piece = mesh.pieces[p];
    const std::size_t len = piece.end - piece.begin;
    if (len < 2) continue;
    const std::size_t count = piece.closed ? len : len - 1;
    for (std::size_t k = 0; k < count; ++k) {
      const std::size_t i = piece.begin + k;
      const std::size_t j = piece.begin + (k + 1) % len;
      segs.push_back({mesh.nodes[i], mesh.nodes[j], p, k, count, piece.closed});
    }
  }
  for (std::size_t s = 0; s < segs.size(); ++s) {
    const auto& u = segs[s];
    const Vec2 ulo = u.a.cwiseMin(u.b);
    const Vec2 uhi = u.a.cwiseMax(u.b);
    for (std::size_t t = s + 1; t < segs.size(); ++t) {
      const auto& v = segs[t];
      if (u.piece == v.piece) {
        const std::size_t gap = v.index - u.index;
        if (gap == 1 || (u.closed && gap == u.count - 1)) continue;
      }
      if (v.a.cwiseMax(v.b).x() < ulo.x() || v.a.cwiseMin(v.b).x() > uhi.x()) continue;
      if (v.a.cwiseMax(v.b).y() < ulo.y() || v.a.cwiseMin(v.b).y() > uhi.y()) continue;
      if (proper_crossing(u.a, u.b, v.a, v.b)) return true;
    }
  }
  return false;
}

TargetTube backward_tube(const TargetSet& target, const ClosedField& field, std::vector<double> taus, double mesh_h) {
  if (target.dim() != 2 || field.dim != 2) throw DimensionError("target tubes are implemented in the plane only");
  if (!(target.inner_ball_radius() > 0.0))
    throw HypothesisError("interior ball", "target set has no asserted interior ball radius");
  TargetTube tube;
  tube.horizon = field.horizon;
  tube.taus = std::move(taus);
  tube.reference = boundary_mesh(target, mesh_h);
  std::vector<std::vector<Vec2>> polylines;
  std::vector<bool> closed;
  for (const auto& piece : tube.reference.pieces) {
    polylines.emplace_back(tube.reference.nodes.begin() + static_cast<std::ptrdiff_t>(piece.begin),
                           tube.reference.nodes.begin() + static_cast<std::ptrdiff_t>(piece.end));
    closed.push_back(piece.closed);
  }
  for (double tau : tube.taus) {
    if (!(tau >= 0.0 && tau <= field.horizon + 1e-12)) throw ValidationError("tube time outside [0, T]");
    if (std::abs(tau - field.horizon) <= 1e-12 * std::max(1.0, field.horizon)) {
      tube.meshes.push_back(tube.reference);
      continue;
    }
    std::vector<std::vector<Vec2>> moved = polylines;
    for (auto& line : moved) {
      parallel_for(line.size(), [&](std::size_t i) { line[i] = to_vec2(flow(field, field.horizon, tau, to_vec(line[i]))); });
    }
    BoundaryMesh mesh = mesh_from_polylines(moved, closed);
    if (self_intersects(mesh)) throw MeshDegeneracyError(tau);
    tube.meshes.push_back(std::move(mesh));
  }
  return tube;
}

double outflow(const BoundaryMesh& mesh, std::span<const double> rho, const ControlledField& field, double tau,
               const Vec& omega) {
  if (rho.size() != mesh.size()) throw DimensionError("outflow: density samples do not match the mesh");
  std::vector<double> terms(mesh.size(), 0.0);
  for (std::size_t j = 0; j < mesh.size(); ++j) {
    if (rho[j] == 0.0) continue;
    const Vec v = field.eval(tau, to_vec(mesh.nodes[j]), omega);
    terms[j] = rho[j] * to_vec2(v).dot(mesh.normals[j]) * mesh.sigma[j];
  }
  return pairwise_sum(terms);
}

std::vector<double> density_on_mesh(const BoundaryMesh& mesh, const AnalyticDensity& rho0, const ClosedField& field,
                                    double tau) {
  std::vector<double> rho(mesh.size());
  parallel_for(mesh.size(), [&](std::size_t j) { rho[j] = density_at(rho0, field, tau, to_vec(mesh.nodes[j])); });
  return rho;
}

void check_hypotheses(const InitialMeasure& theta, const ControlledField& field, const TargetSet& target) {
  const auto* rho = std::get_if<AnalyticDensity>(&theta);
  if (!rho) throw HypothesisError("density smoothness", "initial measure is not absolutely continuous");
  if (!rho->smooth) throw HypothesisError("density smoothness", "initial density is not C^1");
  if (!(target.inner_ball_radius() > 0.0))
    throw HypothesisError("interior ball", "target set lacks the interior ball property");
  if (!field.smooth) throw HypothesisError("field smoothness", "field is not declared C^2 in x");
}

ResidualReport optimality_residual(const PiecewiseControl& ubar, const ControlledField& field, const TargetSet& target,
                                   const InitialMeasure& theta, const std::vector<Vec>& u_grid,
                                   const OptimalityOptions& opts) {
  check_hypotheses(theta, field, target);
  if (u_grid.empty()) throw ValidationError("optimality_residual: empty control grid");
  const auto& rho0 = std::get<AnalyticDensity>(theta);
  const ClosedField closed = close(field, ubar, opts.step);
  std::vector<double> taus;
  for (std::size_t c = 0; c < ubar.cells(); ++c) taus.push_back(ubar.midpoint(c));
  const TargetTube tube = backward_tube(target, closed, taus, opts.mesh_h);
  ResidualReport report;
  std::vector<double> weighted;
  for (std::size_t c = 0; c < taus.size(); ++c) {
    const double tau = taus[c];
    const BoundaryMesh& mesh = tube.meshes[c];
    const auto rho = density_on_mesh(mesh, rho0, closed, tau);
    ResidualRow row;
    row.tau = tau;
    row.outflow_ubar = outflow(mesh, rho, field, tau, ubar.values[c]);
    std::vector<double> values(u_grid.size());
    parallel_for(u_grid.size(), [&](std::size_t k) { values[k] = outflow(mesh, rho, field, tau, u_grid[k]); });
    const auto best = static_cast<std::size_t>(std::min_element(values.begin(), values.end()) - values.begin());
    row.outflow_min = values[best];
    row.argmin = u_grid[best];
    row.residual = row.outflow_ubar - row.outflow_min;
    report.max_residual = c == 0 ? row.residual : std::max(report.max_residual, row.residual);
    weighted.push_back(row.residual * (ubar.grid[c + 1] - ubar.grid[c]));
    report.rows.push_back(std::move(row));
  }
  report.integral = pairwise_sum(weighted);
  return report;
}

void write_residual_csv(std::ostream& out, const ResidualReport& report) {
  const int m = report.rows.empty() ? 0 : static_cast<int>(report.rows.front().argmin.size());
  out << "tau,res,outflow_ubar,outflow_min";
  for (int d = 0; d < m; ++d) out << ",argmin_omega" << (d + 1);
  out << '\n';
  for (const auto& r : report.rows) {
    out << format_number(r.tau) << ',' << format_number(r.residual) << ',' << format_number(r.outflow_ubar) << ','
        << format_number(r.outflow_min);
    for (int d = 0; d < m; ++d) out << ',' << format_number(r.argmin[d]);
    out << '\n';
  }
}

double directional_derivative(const BoundaryMesh& mesh, std::span<const double> rho,
                              const std::function<Vec(const Vec&)>& w) {
  if (rho.size() != mesh.size()) throw DimensionError("directional_derivative: density samples do not match the mesh");
  std::vector<double> terms(mesh.size(), 0.0);
  for (std::size_t j = 0; j < mesh.size(); ++j) {
    if (rho[j] == 0.0) continue;
    terms[j] = -to_vec2(w(to_vec(mesh.nodes[j]))).dot(mesh.normals[j]) * rho[j] * mesh.sigma[j];
  }
  return pairwise_sum(terms);
}

double directional_derivative(const AnalyticDensity& rho0, const ClosedField& field, const TargetSet& target, double tau,
                              const std::function<Vec(const Vec&)>& w, double mesh_h) {
  const TargetTube tube = backward_tube(target, field, {tau}, mesh_h);
  const auto rho = density_on_mesh(tube.meshes.front(), rho0, field, tau);
  return directional_derivative(tube.meshes.front(), rho, w);
}

double AffineMap::lipschitz_bound() const {
  const Eigen::MatrixXd dense = P;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(dense);
  const auto s = svd.singularValues();
  return std::max(s(0), 1.0 / s(s.size() - 1));
}

namespace {

// θ(φ(A)) = ∫_A ρ(φ(y)) |det Dφ| dy.
QuadratureResult image_mass(const AnalyticDensity& theta, const TargetSet& target, const AffineMap& phi,
                            const QuadratureOptions& opts) {
  AnalyticDensity pulled;
  pulled.dim = theta.dim;
  pulled.support = target.bounding_box().inflated(1e-9);
  const double jac = std::abs(phi.P.determinant());
  pulled.eval = [&theta, &phi, jac](const Vec& y) { return theta.eval(phi(y)) * jac; };
  return mass_in(pulled, target, opts);
}

}  // namespace

MainboundResult mainbound_check(const AnalyticDensity& theta, const TargetSet& target, const AffineMap& phi1,
                                const AffineMap& phi2, const QuadratureOptions& opts) {
  if (!std::holds_alternative<TargetSet::BallUnion>(target.variant()))
    throw ValidationError("mainbound_check needs a ball-union target");
  const int n = target.dim();
  if (n != 2) throw DimensionError("mainbound_check is implemented in the plane");
  MainboundResult res;
  res.b = std::max(phi1.lipschitz_bound(), phi2.lipschitz_bound());
  res.lhs = std::abs(image_mass(theta, target, phi1, opts).value - image_mass(theta, target, phi2, opts).value);

  const double diam = target.diameter();
  const BoundaryMesh mesh = boundary_mesh(target, 1e-3 * diam);
  for (const auto& x : mesh.nodes) res.sup_distance = std::max(res.sup_distance, (phi1(to_vec(x)) - phi2(to_vec(x))).norm());

  // M: sampled maximum of ρ on the symmetric difference and on both image boundaries.
  const Mat inv1 = phi1.P.inverse();
  const Mat inv2 = phi2.P.inverse();
  const auto in_image = [&](const AffineMap& phi, const Mat& inv, const Vec& x) {
    return target.contains(inv * (x - phi.q));
  };
  Box box{phi1(to_vec(mesh.nodes.front())), phi1(to_vec(mesh.nodes.front()))};
  for (const auto& x : mesh.nodes) {
    for (const Vec& y : {phi1(to_vec(x)), phi2(to_vec(x))}) {
      box.lo = box.lo.cwiseMin(y);
      box.hi = box.hi.cwiseMax(y);
      if (res.sup_distance > 0.0) res.M = std::max(res.M, theta.eval(y));
    }
  }
  if (res.sup_distance > 0.0) {
    const int grid = 400;
    for (int i = 0; i <= grid; ++i) {
      for (int j = 0; j <= grid; ++j) {
        const Vec x = make_vec({box.lo[0] + (box.hi[0] - box.lo[0]) * i / grid,
                                box.lo[1] + (box.hi[1] - box.lo[1]) * j / grid});
        if (in_image(phi1, inv1, x) != in_image(phi2, inv2, x)) res.M = std::max(res.M, theta.eval(x));
      }
    }
  }
  const double r = target.inner_ball_radius();
  res.rhs = res.M * n * unit_ball_volume(n) * std::pow(diam, n) * std::pow(res.b, n + 1) * res.sup_distance /
            (std::pow(2.0, n - 1) * r);
  res.pass = res.lhs <= res.rhs * (1.0 + 1e-3) + 1e-12;
  return res;
}

}  // namespace liouville
