#pragma once

#include "liouville/controls.hpp"
#include "liouville/optimality.hpp"
#include "liouville/transport.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace liouville {

/// Maximise μ(T)(A) over piecewise-constant controls with `cells` cells.
struct Problem {
  std::string name;
  ControlledField field;
  ControlSet control_set = ControlSet::ball(make_vec({0.0}), 0.0);
  InitialMeasure theta;
  TargetSet target = TargetSet::ball(make_vec({0.0, 0.0}), 1.0);
  double horizon = 1.0;
  int cells = 1;
  double step = 1e-3;
  QuadratureOptions quadrature;
  double mesh_h = 0.01;
  /// Boundary directions of a ball control set in the minimisation grid.
  int directions = 64;

  void validate() const;
  std::vector<Vec> control_grid() const { return control_set.grid(directions); }
  OptimalityOptions optimality_options() const { return {mesh_h, step}; }
};

ObjectiveValue evaluate(const Problem& problem, const PiecewiseControl& control);

struct ExhaustiveResult {
  PiecewiseControl control;
  double value = 0.0;
  std::size_t best_index = 0;
  /// Objective per control, indexed lexicographically with cell 0 most significant.
  std::vector<double> table;
};

inline constexpr std::size_t kExhaustiveBudget = 1000000;

/// Every K-cell control with values in `grid`; ties go to the smallest index.
ExhaustiveResult exhaustive(const Problem& problem, const std::vector<Vec>& grid, int cells);

struct SweepOptions {
  int max_iters = 20;
  /// Minimisation grid; empty selects problem.control_grid().
  std::vector<Vec> grid;
  /// Cells of the exhaustive seed (0 disables seeding, at most 2). Falls back to one
  /// cell when the control's cell count is not a multiple.
  int seed_cells = 2;
};

struct SweepResult {
  PiecewiseControl control;
  double value = 0.0;
  /// Objective after seeding and after every iteration; non-decreasing.
  std::vector<double> history;
  ResidualReport report;
  int iterations = 0;
  int accepted = 0;
  bool seeded = false;
};

/// Monotone ascent driven by the minimum-outflow condition. Each iteration proposes the
/// outflow minimiser per cell; if none is accepted, every grid value is tried per cell.
SweepResult sweep(const Problem& problem, const PiecewiseControl& init, const SweepOptions& opts = {});

struct PerturbOptions {
  bool theta_only = false;
  std::size_t samples = 100000;
  std::uint64_t seed = 1;
};

struct PerturbedProblem {
  Problem problem;  // the perturbed problem, ready to solve
  double eps = 0.0;
  double r = 1.0;
  double lipschitz = 0.0;
  std::string lipschitz_source;  // "declared" or "estimated"
  bool theta_only = false;
};

/// θ -> θ∗η_ε and A -> A_{rε}, r = max{1, e^{LT}}.
PerturbedProblem perturb(const Problem& problem, double eps, const PerturbOptions& opts = {});

struct StabilityOptions {
  std::string method = "sweep";  // "sweep" or "exhaustive"
  PerturbOptions perturb;
  SweepOptions sweep;
};

struct StabilityRow {
  double eps = 0.0;
  double value = 0.0;
  double rebased_value = 0.0;
  double residual_max = 0.0;
  double r = 1.0;
  PiecewiseControl control;
};

/// Solves the perturbed problem for each ε and re-evaluates its solution on the original data.
std::vector<StabilityRow> stability_experiment(const Problem& problem, const std::vector<double>& eps_list,
                                               const StabilityOptions& opts = {});

/// Solves `problem` by the named method ("exhaustive", "sweep" or "both").
struct SolveResult {
  PiecewiseControl control;
  double value = 0.0;
  double residual_max = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> history;
  ResidualReport report;
  bool has_report = false;
};
SolveResult solve(const Problem& problem, const std::string& method, const SweepOptions& opts = {});

}  // namespace liouville
