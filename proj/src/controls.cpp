#include "liouville/controls.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <memory>
#include <numbers>
#include <ostream>
#include <sstream>

namespace liouville {

// ---------------------------------------------------------------------------
// ControlSet

ControlSet ControlSet::box(const Vec& lo, const Vec& hi) {
  if (lo.size() != hi.size() || lo.size() == 0) throw DimensionError("control box bounds differ in dimension");
  if ((hi.array() < lo.array()).any()) throw ValidationError("control box needs lo <= hi");
  return ControlSet(BoxSet{lo, hi});
}

ControlSet ControlSet::ball(const Vec& center, double radius) {
  if (!(radius >= 0.0)) throw ValidationError("control ball radius must be nonnegative");
  return ControlSet(BallSet{center, radius});
}

ControlSet ControlSet::finite(std::vector<Vec> points) {
  if (points.empty()) throw ValidationError("finite control set is empty");
  for (const auto& p : points)
    if (p.size() != points.front().size()) throw DimensionError("finite control points differ in dimension");
  return ControlSet(FiniteSet{std::move(points)});
}

int ControlSet::dim() const {
  return std::visit(
      [](const auto& s) -> int {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, BoxSet>) return static_cast<int>(s.lo.size());
        else if constexpr (std::is_same_v<T, BallSet>) return static_cast<int>(s.center.size());
        else return static_cast<int>(s.points.front().size());
      },
      variant_);
}

Vec ControlSet::project(const Vec& u) const {
  return std::visit(
      [&](const auto& s) -> Vec {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, BoxSet>) {
          return u.cwiseMax(s.lo).cwiseMin(s.hi);
        } else if constexpr (std::is_same_v<T, BallSet>) {
          const Vec d = u - s.center;
          const double r = d.norm();
          return r <= s.radius ? u : Vec(s.center + d * (s.radius / r));
        } else {
          std::size_t best = 0;
          for (std::size_t i = 1; i < s.points.size(); ++i)
            if ((s.points[i] - u).norm() < (s.points[best] - u).norm()) best = i;
          return s.points[best];
        }
      },
      variant_);
}

bool ControlSet::contains(const Vec& u, double tol) const {
  if (u.size() != dim()) return false;
  return (project(u) - u).norm() <= tol;
}

double ControlSet::diameter() const {
  return std::visit(
      [](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, BoxSet>) return (s.hi - s.lo).norm();
        else if constexpr (std::is_same_v<T, BallSet>) return 2.0 * s.radius;
        else {
          double d = 0.0;
          for (const auto& a : s.points)
            for (const auto& b : s.points) d = std::max(d, (a - b).norm());
          return d;
        }
      },
      variant_);
}

Box ControlSet::bounding_box() const {
  return std::visit(
      [](const auto& s) -> Box {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, BoxSet>) return {s.lo, s.hi};
        else if constexpr (std::is_same_v<T, BallSet>) return {(s.center.array() - s.radius).matrix(), (s.center.array() + s.radius).matrix()};
        else {
          Box b{s.points.front(), s.points.front()};
          for (const auto& p : s.points) {
            b.lo = b.lo.cwiseMin(p);
            b.hi = b.hi.cwiseMax(p);
          }
          return b;
        }
      },
      variant_);
}

std::vector<Vec> ControlSet::grid(int directions) const {
  return std::visit(
      [directions](const auto& s) -> std::vector<Vec> {
        using T = std::decay_t<decltype(s)>;
        std::vector<Vec> pts;
        if constexpr (std::is_same_v<T, BallSet>) {
          const auto m = s.center.size();
          if (m == 1) {
            pts = {make_vec({s.center[0] + s.radius}), make_vec({s.center[0] - s.radius})};
          } else if (m == 2) {
            for (int k = 0; k < directions; ++k) {
              const double a = 2 * std::numbers::pi * k / directions;
              pts.push_back(s.center + s.radius * make_vec({std::cos(a), std::sin(a)}));
            }
          } else {
            for (Eigen::Index i = 0; i < m; ++i) {
              for (double sign : {1.0, -1.0}) {
                Vec e = Vec::Zero(m);
                e[i] = sign * s.radius;
                pts.push_back(s.center + e);
              }
            }
          }
          if (s.radius > 0.0) pts.push_back(s.center);
        } else if constexpr (std::is_same_v<T, BoxSet>) {
          const auto m = s.lo.size();
          const std::size_t corners = std::size_t{1} << m;
          for (std::size_t c = 0; c < corners; ++c) {
            Vec v(m);
            for (Eigen::Index d = 0; d < m; ++d) v[d] = ((c >> d) & 1U) ? s.hi[d] : s.lo[d];
            pts.push_back(v);
          }
          // Edge midpoints: vary one coordinate to its midpoint, others at bounds.
          for (Eigen::Index d = 0; d < m; ++d) {
            for (std::size_t c = 0; c < corners; ++c) {
              if ((c >> d) & 1U) continue;
              Vec v(m);
              for (Eigen::Index e = 0; e < m; ++e) v[e] = ((c >> e) & 1U) ? s.hi[e] : s.lo[e];
              v[d] = 0.5 * (s.lo[d] + s.hi[d]);
              pts.push_back(v);
            }
          }
          // Degenerate boxes repeat points; keep first occurrences.
          std::vector<Vec> unique;
          for (const auto& p : pts) {
            bool seen = false;
            for (const auto& q : unique) seen = seen || (p - q).norm() == 0.0;
            if (!seen) unique.push_back(p);
          }
          pts = std::move(unique);
        } else {
          pts = s.points;
        }
        return pts;
      },
      variant_);
}

// ---------------------------------------------------------------------------
// Controls

namespace {

std::size_t locate(const std::vector<double>& grid, double t) {
  const double tol = 1e-12 * std::max(1.0, std::abs(grid.back()));
  if (t < grid.front() - tol || t > grid.back() + tol) {
    throw ValidationError("time " + std::to_string(t) + " outside the control horizon");
  }
  const auto it = std::upper_bound(grid.begin(), grid.end(), t);
  std::size_t idx = it == grid.begin() ? 0 : static_cast<std::size_t>(it - grid.begin()) - 1;
  return std::min(idx, grid.size() - 2);
}

void validate_grid(const std::vector<double>& grid, std::size_t cells) {
  if (grid.size() != cells + 1 || cells == 0) throw ValidationError("control grid must have cells + 1 entries");
  if (grid.front() != 0.0) throw ValidationError("control grid must start at 0");
  for (std::size_t i = 0; i + 1 < grid.size(); ++i)
    if (!(grid[i + 1] > grid[i])) throw ValidationError("control grid must be strictly increasing");
}

std::vector<double> uniform_grid(double horizon, std::size_t cells) {
  std::vector<double> g(cells + 1);
  for (std::size_t i = 0; i <= cells; ++i) g[i] = horizon * static_cast<double>(i) / static_cast<double>(cells);
  g.back() = horizon;
  return g;
}

}  // namespace

PiecewiseControl PiecewiseControl::constant(const Vec& u, double horizon, int cells) {
  if (cells < 1) throw ValidationError("control needs at least one cell");
  return {uniform_grid(horizon, static_cast<std::size_t>(cells)), std::vector<Vec>(static_cast<std::size_t>(cells), u)};
}

PiecewiseControl PiecewiseControl::uniform(std::vector<Vec> values, double horizon) {
  if (values.empty()) throw ValidationError("control needs at least one cell");
  auto g = uniform_grid(horizon, values.size());
  return {std::move(g), std::move(values)};
}

std::size_t PiecewiseControl::cell_index(double t) const { return locate(grid, t); }

void PiecewiseControl::validate(const ControlSet* set) const {
  validate_grid(grid, values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i].size() != values.front().size()) throw DimensionError("control values differ in dimension");
    if (set && !set->contains(values[i], 1e-10)) {
      throw ValidationError("control value in cell " + std::to_string(i) + " lies outside U");
    }
  }
}

GeneralizedControl GeneralizedControl::dirac(const PiecewiseControl& u) {
  GeneralizedControl nu;
  nu.grid = u.grid;
  for (const auto& v : u.values) nu.cells.push_back({Atom{v, 1.0}});
  return nu;
}

std::size_t GeneralizedControl::cell_index(double t) const { return locate(grid, t); }

void GeneralizedControl::validate(const ControlSet* set) const {
  validate_grid(grid, cells.size());
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (cells[i].empty()) throw ValidationError("generalized control cell " + std::to_string(i) + " has no atoms");
    std::vector<double> p;
    for (const auto& a : cells[i]) {
      if (!(a.p >= 0.0)) throw ValidationError("negative atom weight in cell " + std::to_string(i));
      if (set && !set->contains(a.omega, 1e-10))
        throw ValidationError("atom outside U in cell " + std::to_string(i));
      p.push_back(a.p);
    }
    if (std::abs(pairwise_sum(p) - 1.0) > 1e-12)
      throw ValidationError("atom weights in cell " + std::to_string(i) + " do not sum to 1");
  }
}

Vec ControlAffineField::coefficient_vector(double t, const Vec& u) const {
  Vec phi(static_cast<Eigen::Index>(coefficients.size()));
  for (std::size_t i = 0; i < coefficients.size(); ++i) phi[static_cast<Eigen::Index>(i)] = coefficients[i](t, u);
  return phi;
}

ControlledField ControlAffineField::wrap() const {
  if (directions.size() != coefficients.size()) throw ValidationError("control-affine field: l mismatch");
  ControlledField f;
  f.name = name;
  f.state_dim = state_dim;
  f.control_dim = control_dim;
  f.declared_L = declared_L;
  f.declared_C = declared_C;
  f.smooth = smooth;
  auto self = std::make_shared<const ControlAffineField>(*this);
  f.eval = [self](double t, const Vec& x, const Vec& u) {
    Vec v = self->drift(t, x);
    for (std::size_t i = 0; i < self->directions.size(); ++i) v += self->coefficients[i](t, u) * self->directions[i](t, x);
    return v;
  };
  if (drift_jacobian && direction_jacobians.size() == directions.size()) {
    f.jacobian_x = [self](double t, const Vec& x, const Vec& u) {
      Mat j = self->drift_jacobian(t, x);
      for (std::size_t i = 0; i < self->directions.size(); ++i)
        j += self->coefficients[i](t, u) * self->direction_jacobians[i](t, x);
      return j;
    };
  }
  return f;
}

ClosedField close(const ControlledField& field, const PiecewiseControl& control, double step) {
  if (control.dim() != field.control_dim) throw DimensionError("control dimension does not match the field");
  control.validate();
  ClosedField c;
  c.dim = field.state_dim;
  c.horizon = control.horizon();
  c.step = step;
  c.smooth = field.smooth;
  c.lipschitz = field.declared_L;
  c.breakpoints.assign(control.grid.begin() + 1, control.grid.end() - 1);
  auto u = std::make_shared<const PiecewiseControl>(control);
  auto eval = field.eval;
  c.velocity = [u, eval](double t, const Vec& x, double seg) { return eval(t, x, u->at(seg)); };
  if (field.jacobian_x) {
    auto jac = field.jacobian_x;
    c.jacobian = [u, jac](double t, const Vec& x, double seg) { return jac(t, x, u->at(seg)); };
  }
  return c;
}

ClosedField averaged_field(const ControlledField& field, const GeneralizedControl& nu, double step) {
  if (nu.dim() != field.control_dim) throw DimensionError("generalized control dimension does not match the field");
  nu.validate();
  ClosedField c;
  c.dim = field.state_dim;
  c.horizon = nu.horizon();
  c.step = step;
  c.smooth = field.smooth;
  c.lipschitz = field.declared_L;
  c.breakpoints.assign(nu.grid.begin() + 1, nu.grid.end() - 1);
  auto g = std::make_shared<const GeneralizedControl>(nu);
  auto eval = field.eval;
  c.velocity = [g, eval](double t, const Vec& x, double seg) {
    const auto& atoms = g->cells[g->cell_index(seg)];
    if (atoms.size() == 1) return Vec(eval(t, x, atoms.front().omega));
    Vec v = Vec::Zero(x.size());
    for (const auto& a : atoms) v += a.p * eval(t, x, a.omega);
    return v;
  };
  if (field.jacobian_x) {
    auto jac = field.jacobian_x;
    c.jacobian = [g, jac](double t, const Vec& x, double seg) {
      const auto& atoms = g->cells[g->cell_index(seg)];
      if (atoms.size() == 1) return Mat(jac(t, x, atoms.front().omega));
      Mat j = Mat::Zero(x.size(), x.size());
      for (const auto& a : atoms) j += a.p * jac(t, x, a.omega);
      return j;
    };
  }
  return c;
}

// ---------------------------------------------------------------------------
// Filippov extraction

ConvexityError::ConvexityError(double t, Vec target, Vec best, double residual)
    : NumericalError("averaged coefficients not attained at t=" + std::to_string(t) + " (residual " +
                     std::to_string(residual) + "); Φ(t,U) is probably not convex"),
      t_(t),
      target_(std::move(target)),
      best_(std::move(best)),
      residual_(residual) {}

namespace {

std::vector<Vec> coarse_candidates(const ControlSet& set) {
  if (const auto* f = std::get_if<ControlSet::FiniteSet>(&set.variant())) return f->points;
  const Box box = set.bounding_box();
  const int m = set.dim();
  const double spacing = std::max(set.diameter() / 50.0, 1e-12);
  std::vector<int> counts(m);
  std::size_t total = 1;
  for (int d = 0; d < m; ++d) {
    counts[d] = static_cast<int>(std::ceil((box.hi[d] - box.lo[d]) / spacing - 1e-9)) + 1;
    total *= static_cast<std::size_t>(counts[d]);
  }
  std::vector<Vec> pts;
  for (std::size_t idx = 0; idx < total; ++idx) {
    Vec u(m);
    std::size_t rem = idx;
    for (int d = 0; d < m; ++d) {
      const int k = static_cast<int>(rem % counts[d]);
      rem /= counts[d];
      u[d] = counts[d] == 1 ? box.lo[d] : box.lo[d] + (box.hi[d] - box.lo[d]) * k / (counts[d] - 1);
    }
    if (set.contains(u, 1e-12)) pts.push_back(u);
  }
  if (const auto* b = std::get_if<ControlSet::BallSet>(&set.variant())) pts.push_back(b->center);
  return pts;
}

}  // namespace

FilippovResult filippov_extract(const ControlAffineField& field, const ControlSet& set, const GeneralizedControl& nu,
                                int refine_steps) {
  nu.validate(&set);
  if (set.dim() != field.control_dim) throw DimensionError("control set dimension does not match the field");
  const auto candidates = coarse_candidates(set);
  const bool finite = std::holds_alternative<ControlSet::FiniteSet>(set.variant());
  FilippovResult out;
  out.control.grid = nu.grid;
  const int m = set.dim();
  for (std::size_t cell = 0; cell < nu.cells.size(); ++cell) {
    const double t = 0.5 * (nu.grid[cell] + nu.grid[cell + 1]);
    Vec target = Vec::Zero(static_cast<Eigen::Index>(field.coefficients.size()));
    for (const auto& a : nu.cells[cell]) target += a.p * field.coefficient_vector(t, a.omega);
    const auto residual = [&](const Vec& u) { return (field.coefficient_vector(t, u) - target).norm(); };
    Vec best = candidates.front();
    double best_res = residual(best);
    for (const auto& u : candidates) {
      const double r = residual(u);
      if (r < best_res) {
        best_res = r;
        best = u;
      }
    }
    if (!finite) {
      double step = std::max(set.diameter() / 50.0, 1e-12);
      for (int it = 0; it < refine_steps && best_res > 0.0; ++it) {
        bool improved = false;
        for (int d = 0; d < m; ++d) {
          for (double sign : {1.0, -1.0}) {
            Vec trial = best;
            trial[d] += sign * step;
            trial = set.project(trial);
            const double r = residual(trial);
            if (r < best_res) {
              best_res = r;
              best = trial;
              improved = true;
            }
          }
        }
        if (!improved) step *= 0.5;
      }
    }
    if (best_res > 1e-6 * (1.0 + target.norm())) throw ConvexityError(t, target, best, best_res);
    out.control.values.push_back(best);
    out.residuals.push_back(best_res);
    out.max_residual = std::max(out.max_residual, best_res);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Needle variations and chattering

PiecewiseControl needle_variation(const PiecewiseControl& ubar, double tau, double eps, const Vec& omega,
                                  const ControlSet& set) {
  ubar.validate();
  const double horizon = ubar.horizon();
  if (!(tau > 0.0 && tau <= horizon)) throw ValidationError("needle time must lie in (0, T]");
  if (!(eps >= 0.0 && eps <= tau)) throw ValidationError("needle width must lie in [0, τ]");
  if (!set.contains(omega)) throw ValidationError("needle value lies outside U");
  if (eps == 0.0) return ubar;
  std::vector<double> grid = ubar.grid;
  grid.push_back(tau - eps);
  grid.push_back(tau);
  std::sort(grid.begin(), grid.end());
  const double tiny = 1e-14 * std::max(1.0, horizon);
  std::vector<double> cleaned{grid.front()};
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (grid[i] - cleaned.back() > tiny) cleaned.push_back(grid[i]);
  cleaned.back() = horizon;
  PiecewiseControl out;
  out.grid = cleaned;
  for (std::size_t i = 0; i + 1 < cleaned.size(); ++i) {
    const double mid = 0.5 * (cleaned[i] + cleaned[i + 1]);
    out.values.push_back(mid >= tau - eps && mid <= tau ? omega : ubar.at(mid));
  }
  return out;
}

PiecewiseControl chattering(const GeneralizedControl& nu, double period) {
  nu.validate();
  if (!(period > 0.0)) throw ValidationError("chattering period must be positive");
  PiecewiseControl out;
  out.grid.push_back(nu.grid.front());
  for (std::size_t cell = 0; cell < nu.cells.size(); ++cell) {
    const double a = nu.grid[cell];
    const double b = nu.grid[cell + 1];
    const int periods = std::max(1, static_cast<int>(std::lround((b - a) / period)));
    const double len = (b - a) / periods;
    for (int j = 0; j < periods; ++j) {
      const double start = a + len * j;
      const double stop = (j + 1 == periods) ? b : a + len * (j + 1);
      double cursor = start;
      std::vector<const Atom*> live;
      for (const auto& atom : nu.cells[cell])
        if (atom.p > 0.0) live.push_back(&atom);
      for (std::size_t k = 0; k < live.size(); ++k) {
        const double end = (k + 1 == live.size()) ? stop : cursor + live[k]->p * len;
        if (end > cursor) {
          out.grid.push_back(end);
          out.values.push_back(live[k]->omega);
        }
        cursor = end;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::vector<double> parse_row(const std::string& line, int line_no) {
  std::vector<double> values;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      values.push_back(std::stod(cell));
    } catch (const std::exception&) {
      throw ValidationError("control CSV line " + std::to_string(line_no) + ": bad number '" + cell + "'");
    }
  }
  return values;
}

int header_columns(const std::string& line) {
  return static_cast<int>(std::count(line.begin(), line.end(), ',')) + 1;
}

}  // namespace

void write_control_csv(std::ostream& out, const PiecewiseControl& u) {
  out << "t_start,t_end";
  for (int d = 0; d < u.dim(); ++d) out << ",u" << (d + 1);
  out << '\n';
  for (std::size_t i = 0; i < u.cells(); ++i) {
    out << format_number(u.grid[i]) << ',' << format_number(u.grid[i + 1]);
    for (int d = 0; d < u.dim(); ++d) out << ',' << format_number(u.values[i][d]);
    out << '\n';
  }
}

PiecewiseControl read_control_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("t_start,t_end", 0) != 0)
    throw ValidationError("control CSV: header must start with t_start,t_end");
  const int m = header_columns(line) - 2;
  if (m < 1) throw ValidationError("control CSV: no control columns");
  PiecewiseControl u;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto row = parse_row(line, line_no);
    if (static_cast<int>(row.size()) != m + 2)
      throw ValidationError("control CSV line " + std::to_string(line_no) + ": wrong field count");
    if (u.grid.empty()) u.grid.push_back(row[0]);
    else if (row[0] != u.grid.back())
      throw ValidationError("control CSV line " + std::to_string(line_no) + ": cells are not contiguous");
    u.grid.push_back(row[1]);
    Vec v(m);
    for (int d = 0; d < m; ++d) v[d] = row[2 + d];
    u.values.push_back(v);
  }
  if (u.values.empty()) throw ValidationError("control CSV: no cells");
  u.validate();
  return u;
}

void write_generalized_csv(std::ostream& out, const GeneralizedControl& nu) {
  out << "t_start,t_end,atom_index,p";
  for (int d = 0; d < nu.dim(); ++d) out << ",u" << (d + 1);
  out << '\n';
  for (std::size_t i = 0; i < nu.cells.size(); ++i) {
    for (std::size_t k = 0; k < nu.cells[i].size(); ++k) {
      const auto& a = nu.cells[i][k];
      out << format_number(nu.grid[i]) << ',' << format_number(nu.grid[i + 1]) << ',' << k << ',' << format_number(a.p);
      for (int d = 0; d < nu.dim(); ++d) out << ',' << format_number(a.omega[d]);
      out << '\n';
    }
  }
}

GeneralizedControl read_generalized_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("t_start,t_end,atom_index,p", 0) != 0)
    throw ValidationError("generalized control CSV: header must start with t_start,t_end,atom_index,p");
  const int m = header_columns(line) - 4;
  if (m < 1) throw ValidationError("generalized control CSV: no control columns");
  GeneralizedControl nu;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto row = parse_row(line, line_no);
    if (static_cast<int>(row.size()) != m + 4)
      throw ValidationError("generalized control CSV line " + std::to_string(line_no) + ": wrong field count");
    const bool new_cell = nu.grid.empty() || row[0] != nu.grid[nu.grid.size() - 2] || row[2] == 0.0;
    if (new_cell) {
      if (nu.grid.empty()) nu.grid.push_back(row[0]);
      else if (row[0] != nu.grid.back())
        throw ValidationError("generalized control CSV line " + std::to_string(line_no) + ": cells are not contiguous");
      nu.grid.push_back(row[1]);
      nu.cells.emplace_back();
    }
    Vec v(m);
    for (int d = 0; d < m; ++d) v[d] = row[4 + d];
    nu.cells.back().push_back(Atom{v, row[3]});
  }
  if (nu.cells.empty()) throw ValidationError("generalized control CSV: no cells");
  nu.validate();
  return nu;
}

}  // namespace liouville
