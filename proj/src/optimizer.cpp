#include "liouville/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace liouville {

void Problem::validate() const {
  if (!(horizon > 0.0)) throw ValidationError("problem horizon must be positive");
  if (cells < 1) throw ValidationError("problem needs at least one control cell");
  if (!(step > 0.0)) throw ValidationError("integrator step must be positive");
  if (field.state_dim != target.dim()) throw DimensionError("field and target dimensions differ");
  if (field.state_dim != dimension_of(theta)) throw DimensionError("field and initial measure dimensions differ");
  if (field.control_dim != control_set.dim()) throw DimensionError("field and control set dimensions differ");
}

ObjectiveValue evaluate(const Problem& problem, const PiecewiseControl& control) {
  return objective(problem.theta, problem.field, control, problem.step, problem.target, problem.quadrature);
}

namespace {

PiecewiseControl control_from_index(const std::vector<Vec>& grid, std::size_t index, int cells, double horizon) {
  std::vector<Vec> values(static_cast<std::size_t>(cells));
  for (int c = cells - 1; c >= 0; --c) {
    values[static_cast<std::size_t>(c)] = grid[index % grid.size()];
    index /= grid.size();
  }
  return PiecewiseControl::uniform(std::move(values), horizon);
}

}  // namespace

ExhaustiveResult exhaustive(const Problem& problem, const std::vector<Vec>& grid, int cells) {
  problem.validate();
  if (grid.empty()) throw ValidationError("exhaustive: empty control grid");
  if (cells < 1) throw ValidationError("exhaustive: need at least one cell");
  std::size_t total = 1;
  for (int c = 0; c < cells; ++c) {
    if (total > kExhaustiveBudget / grid.size()) throw ValidationError("exhaustive: |U_grid|^K exceeds the 1e6 budget");
    total *= grid.size();
  }
  ExhaustiveResult out;
  out.table.assign(total, 0.0);
  parallel_for(total, [&](std::size_t i) {
    out.table[i] = evaluate(problem, control_from_index(grid, i, cells, problem.horizon)).value;
  });
  out.best_index = static_cast<std::size_t>(std::max_element(out.table.begin(), out.table.end()) - out.table.begin());
  out.value = out.table[out.best_index];
  out.control = control_from_index(grid, out.best_index, cells, problem.horizon);
  return out;
}

namespace {

PiecewiseControl refine_to(const PiecewiseControl& coarse, int cells, double horizon) {
  std::vector<Vec> values;
  const int per = cells / static_cast<int>(coarse.cells());
  for (const auto& v : coarse.values)
    for (int k = 0; k < per; ++k) values.push_back(v);
  return PiecewiseControl::uniform(std::move(values), horizon);
}

bool same(const Vec& a, const Vec& b) { return a.size() == b.size() && (a - b).norm() == 0.0; }

}  // namespace

SweepResult sweep(const Problem& problem, const PiecewiseControl& init, const SweepOptions& opts) {
  problem.validate();
  check_hypotheses(problem.theta, problem.field, problem.target);
  init.validate(&problem.control_set);
  const std::vector<Vec> grid = opts.grid.empty() ? problem.control_grid() : opts.grid;
  SweepResult out;
  out.control = init;
  out.value = evaluate(problem, init).value;

  int seed_cells = std::clamp(opts.seed_cells, 0, 2);
  if (seed_cells > 0 && static_cast<int>(init.cells()) % seed_cells != 0) seed_cells = 1;
  if (seed_cells > 0) {
    std::vector<Vec> seed_grid = grid;
    if (seed_grid.size() > 17) seed_grid = problem.control_set.grid(16);
    const auto seed = exhaustive(problem, seed_grid, seed_cells);
    if (seed.value > out.value) {
      out.control = refine_to(seed.control, static_cast<int>(init.cells()), init.horizon());
      out.value = evaluate(problem, out.control).value;
      out.seeded = true;
    }
  }
  out.history.push_back(out.value);

  const auto opt = problem.optimality_options();
  out.report = optimality_residual(out.control, problem.field, problem.target, problem.theta, grid, opt);
  for (int it = 0; it < opts.max_iters; ++it) {
    ++out.iterations;
    std::vector<std::size_t> order(out.control.cells());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return out.report.rows[a].residual > out.report.rows[b].residual;
    });
    const double start = out.value;
    int accepted = 0;
    for (std::size_t c : order) {
      const auto& row = out.report.rows[c];
      if (!(row.residual > 0.0) || same(row.argmin, out.control.values[c])) continue;
      PiecewiseControl trial = out.control;
      trial.values[c] = row.argmin;
      const double value = evaluate(problem, trial).value;
      if (value >= out.value) {
        out.control = std::move(trial);
        out.value = value;
        ++accepted;
      }
    }
    // When the outflow proposals stall, fall back to a coordinate search over the grid.
    if (accepted == 0) {
      for (std::size_t c : order) {
        for (const Vec& omega : grid) {
          if (same(omega, out.control.values[c])) continue;
          PiecewiseControl trial = out.control;
          trial.values[c] = omega;
          const double value = evaluate(problem, trial).value;
          if (value > out.value) {
            out.control = std::move(trial);
            out.value = value;
            ++accepted;
          }
        }
      }
    }
    out.accepted += accepted;
    out.history.push_back(out.value);
    if (accepted == 0) break;
    out.report = optimality_residual(out.control, problem.field, problem.target, problem.theta, grid, opt);
    if (!(out.value > start)) break;
  }
  return out;
}

PerturbedProblem perturb(const Problem& problem, double eps, const PerturbOptions& opts) {
  problem.validate();
  if (!(eps > 0.0)) throw ValidationError("perturbation size must be positive");
  PerturbedProblem out;
  out.eps = eps;
  out.theta_only = opts.theta_only;
  if (problem.field.has_declared_L()) {
    out.lipschitz = problem.field.declared_L;
    out.lipschitz_source = "declared";
  } else {
    Box domain = problem.target.bounding_box();
    if (const auto* rho = std::get_if<AnalyticDensity>(&problem.theta)) {
      domain = {domain.lo.cwiseMin(rho->support.lo), domain.hi.cwiseMax(rho->support.hi)};
    } else {
      for (const auto& p : std::get<ParticleMeasure>(problem.theta).points) {
        domain.lo = domain.lo.cwiseMin(p);
        domain.hi = domain.hi.cwiseMax(p);
      }
    }
    const std::vector<double> ts{0.0, 0.5 * problem.horizon, problem.horizon};
    const auto us = problem.control_set.grid(16);
    out.lipschitz = estimate_constants(problem.field, domain.inflated(0.5), ts, us).lipschitz;
    out.lipschitz_source = "estimated";
  }
  out.r = std::max(1.0, std::exp(out.lipschitz * problem.horizon));

  ParticleMeasure particles;
  if (const auto* p = std::get_if<ParticleMeasure>(&problem.theta)) {
    particles = *p;
  } else {
    particles = sample(std::get<AnalyticDensity>(problem.theta), opts.samples, opts.seed);
  }
  AnalyticDensity theta_eps = mollify(particles, eps);
  theta_eps.name = "mollified";

  out.problem = problem;
  out.problem.name = problem.name + (opts.theta_only ? "_theta_eps" : "_eps");
  out.problem.theta = std::move(theta_eps);
  if (!opts.theta_only) out.problem.target = neighborhood(problem.target, out.r * eps);
  return out;
}

SolveResult solve(const Problem& problem, const std::string& method, const SweepOptions& opts) {
  SolveResult out;
  const std::vector<Vec> grid = opts.grid.empty() ? problem.control_grid() : opts.grid;
  if (method == "exhaustive" || method == "both") {
    const auto ex = exhaustive(problem, grid, problem.cells);
    out.control = ex.control;
    out.value = ex.value;
  }
  if (method == "sweep" || method == "both") {
    const PiecewiseControl init =
        method == "both" ? out.control : PiecewiseControl::constant(problem.control_set.project(grid.back()),
                                                                    problem.horizon, problem.cells);
    auto sw = sweep(problem, init, opts);
    out.control = sw.control;
    out.value = sw.value;
    out.history = sw.history;
    out.report = sw.report;
    out.residual_max = sw.report.max_residual;
    out.has_report = true;
  } else if (method != "exhaustive") {
    throw ValidationError("unknown method '" + method + "' (expected exhaustive, sweep or both)");
  }
  return out;
}

std::vector<StabilityRow> stability_experiment(const Problem& problem, const std::vector<double>& eps_list,
                                               const StabilityOptions& opts) {
  if (eps_list.empty()) throw ValidationError("stability experiment needs at least one eps");
  for (std::size_t i = 1; i < eps_list.size(); ++i)
    if (!(eps_list[i] < eps_list[i - 1])) throw ValidationError("eps list must be strictly decreasing");
  std::vector<StabilityRow> rows;
  for (double eps : eps_list) {
    const PerturbedProblem p = perturb(problem, eps, opts.perturb);
    const SolveResult s = solve(p.problem, opts.method, opts.sweep);
    StabilityRow row;
    row.eps = eps;
    row.r = p.r;
    row.value = s.value;
    row.control = s.control;
    row.residual_max = s.residual_max;
    if (!s.has_report) {
      const auto grid = opts.sweep.grid.empty() ? p.problem.control_grid() : opts.sweep.grid;
      row.residual_max = optimality_residual(s.control, p.problem.field, p.problem.target, p.problem.theta, grid,
                                             p.problem.optimality_options())
                             .max_residual;
    }
    row.rebased_value = evaluate(problem, s.control).value;
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace liouville
