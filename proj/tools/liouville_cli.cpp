// Command-line front end: run, check, stability, oracle.
#include "liouville/optimality.hpp"
#include "liouville/optimizer.hpp"
#include "liouville/scenarios.hpp"
#include "liouville/transport.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace liouville;

namespace {

struct Common {
  std::string scenario;
  std::string config_file;
  std::vector<std::string> overrides;
  std::string out_dir;
  double perturb = 0.0;
  bool theta_only = false;
  long long seed = -1;
  bool timing = false;
  int threads = 0;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("scenario", c.scenario, "Scenario name (uncertain_ode, flock, beam2d, p_prime, custom)");
  cmd->add_option("--config", c.config_file, "Configuration file (key = value with [sections])");
  cmd->add_option("--set", c.overrides, "Override a config entry: section.key=value or key=value");
  cmd->add_option("--out", c.out_dir, "Output directory for JSON and CSV files");
  cmd->add_option("--perturb", c.perturb, "Solve the mollified problem with this eps");
  cmd->add_flag("--theta-only", c.theta_only, "Perturb only the initial measure, not the target");
  cmd->add_option("--seed", c.seed, "Random seed (overrides the config)");
  cmd->add_flag("--timing", c.timing, "Record wall-clock runtime in the JSON record");
  cmd->add_option("--threads", c.threads, "Worker threads (0 = hardware concurrency)");
}

Scenario load(const Common& c) {
  Config cfg;
  if (!c.config_file.empty()) cfg = Config::load(c.config_file);
  if (!c.scenario.empty()) {
    if (cfg.has("", "scenario") && cfg.text("", "scenario") != c.scenario)
      throw ValidationError("scenario argument '" + c.scenario + "' contradicts the config file");
    cfg.set("", "scenario", c.scenario);
  }
  if (!cfg.has("", "scenario")) throw ValidationError("no scenario given (positional argument or config file)");
  for (const auto& o : c.overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ValidationError("--set expects key=value, got '" + o + "'");
    const std::string lhs = o.substr(0, eq);
    const auto dot = lhs.find('.');
    const std::string section = dot == std::string::npos ? "" : lhs.substr(0, dot);
    const std::string key = dot == std::string::npos ? lhs : lhs.substr(dot + 1);
    cfg.set(section, key, o.substr(eq + 1));
  }
  if (c.seed >= 0) cfg.set("", "seed", std::to_string(c.seed));
  return build_scenario(cfg);
}

fs::path ensure_out(const std::string& dir) {
  if (dir.empty()) return {};
  fs::create_directories(dir);
  return fs::path(dir);
}

json nullable(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json control_json(const PiecewiseControl& u) {
  json cells = json::array();
  for (std::size_t i = 0; i < u.cells(); ++i) {
    json v = json::array();
    for (int d = 0; d < u.dim(); ++d) v.push_back(u.values[i][d]);
    cells.push_back(v);
  }
  return cells;
}

// Returns the file name relative to the output directory so records stay valid when moved.
std::string write_control(const fs::path& out, const PiecewiseControl& u, const std::string& name) {
  if (out.empty()) return {};
  std::ofstream f(out / name);
  write_control_csv(f, u);
  return name;
}

void emit(const fs::path& out, const std::string& name, const json& record) {
  const std::string text = record.dump(2) + "\n";
  std::cout << text;
  if (!out.empty()) std::ofstream(out / name) << text;
}

constexpr std::size_t kTrajectorySamples = 10000;

PerturbOptions perturb_options(const Common& c, const Scenario& s) {
  PerturbOptions o;
  o.theta_only = c.theta_only;
  o.seed = s.seed;
  return o;
}

int cmd_run(const Common& c, const std::string& method, bool trajectory) {
  const auto start = std::chrono::steady_clock::now();
  Scenario s = load(c);
  const fs::path out = ensure_out(c.out_dir);
  Problem problem = s.problem;
  double eps = std::numeric_limits<double>::quiet_NaN();
  double r = std::numeric_limits<double>::quiet_NaN();
  if (c.perturb > 0.0) {
    const auto p = perturb(s.problem, c.perturb, perturb_options(c, s));
    problem = p.problem;
    eps = c.perturb;
    r = p.r;
  } else if (c.theta_only) {
    throw ValidationError("--theta-only requires --perturb");
  }
  const SolveResult res = solve(problem, method);
  const double rebased = c.perturb > 0.0 ? evaluate(s.problem, res.control).value : res.value;
  const std::string control_file = write_control(out, res.control, "control.csv");
  if (!out.empty() && res.has_report) {
    std::ofstream f(out / "residuals.csv");
    write_residual_csv(f, res.report);
  }
  json traj = json::array();
  if (trajectory && !out.empty()) {
    // Densities are represented by a seeded sample for the snapshots.
    const auto* particles = std::get_if<ParticleMeasure>(&s.problem.theta);
    const ParticleMeasure theta = particles ? *particles
                                            : sample(std::get<AnalyticDensity>(s.problem.theta), kTrajectorySamples, s.seed);
    const auto closed = close(s.problem.field, res.control, s.problem.step);
    const auto tr = solve_particles(theta, closed, res.control.grid);
    for (const auto& path : write_snapshots(tr, (out / "trajectory").string()))
      traj.push_back(fs::path(path).filename().string());
  }
  json rec;
  rec["scenario"] = s.problem.name;
  rec["method"] = method;
  rec["eps"] = nullable(eps);
  rec["theta_only"] = c.theta_only;
  rec["r"] = nullable(r);
  rec["value"] = res.value;
  rec["rebased_value"] = rebased;
  rec["residual_max"] = nullable(res.residual_max);
  rec["control"] = control_json(res.control);
  rec["control_file"] = control_file.empty() ? json(nullptr) : json(control_file);
  if (!traj.empty()) rec["trajectory_files"] = traj;
  rec["runtime_ms"] = c.timing ? json(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count())
                               : json(nullptr);
  emit(out, "result.json", rec);
  return 0;
}

int cmd_oracle(const Common& c, int cells) {
  const auto start = std::chrono::steady_clock::now();
  Scenario s = load(c);
  const fs::path out = ensure_out(c.out_dir);
  Problem problem = c.perturb > 0.0 ? perturb(s.problem, c.perturb, perturb_options(c, s)).problem : s.problem;
  const auto grid = problem.control_grid();
  const auto ex = exhaustive(problem, grid, cells > 0 ? cells : problem.cells);
  if (!out.empty()) {
    std::ofstream f(out / "table.csv");
    f << "index,value\n";
    for (std::size_t i = 0; i < ex.table.size(); ++i) f << i << ',' << format_number(ex.table[i]) << '\n';
  }
  json rec;
  rec["scenario"] = s.problem.name;
  rec["method"] = "exhaustive";
  rec["eps"] = c.perturb > 0.0 ? json(c.perturb) : json(nullptr);
  rec["value"] = ex.value;
  rec["best_index"] = ex.best_index;
  rec["table_size"] = ex.table.size();
  rec["control"] = control_json(ex.control);
  rec["control_file"] = out.empty() ? json(nullptr) : json(write_control(out, ex.control, "control.csv"));
  rec["runtime_ms"] = c.timing ? json(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count())
                               : json(nullptr);
  emit(out, "result.json", rec);
  return 0;
}

int cmd_check(const Common& c, const std::string& control_file, const std::string& constant, double tol) {
  Scenario s = load(c);
  const fs::path out = ensure_out(c.out_dir);
  Problem problem = c.perturb > 0.0 ? perturb(s.problem, c.perturb, perturb_options(c, s)).problem : s.problem;
  PiecewiseControl u;
  if (!control_file.empty()) {
    std::ifstream f(control_file);
    if (!f) throw ValidationError("cannot open control file " + control_file);
    u = read_control_csv(f);
  } else if (!constant.empty()) {
    Config tmp;
    tmp.set("", "u", constant);
    u = PiecewiseControl::constant(tmp.vector("", "u"), problem.horizon, problem.cells);
  } else {
    throw ValidationError("check needs --control FILE or --constant VALUES");
  }
  u.validate(&problem.control_set);
  if (std::abs(u.horizon() - problem.horizon) > 1e-12) throw ValidationError("control horizon differs from T");
  const auto report = optimality_residual(u, problem.field, problem.target, problem.theta, problem.control_grid(),
                                          problem.optimality_options());
  if (!out.empty()) {
    std::ofstream f(out / "residuals.csv");
    write_residual_csv(f, report);
  } else {
    write_residual_csv(std::cerr, report);
  }
  json rec;
  rec["scenario"] = s.problem.name;
  rec["eps"] = c.perturb > 0.0 ? json(c.perturb) : json(nullptr);
  rec["tol"] = tol;
  rec["residual_max"] = report.max_residual;
  rec["residual_integral"] = report.integral;
  rec["pass"] = report.passes(tol);
  emit(out, "check.json", rec);
  return 0;
}

int cmd_stability(const Common& c, std::vector<double> eps_list, const std::string& method) {
  Scenario s = load(c);
  const fs::path out = ensure_out(c.out_dir);
  StabilityOptions opts;
  opts.method = method;
  opts.perturb = perturb_options(c, s);
  const auto rows = stability_experiment(s.problem, eps_list, opts);
  std::ostringstream csv;
  csv << "eps,value,rebased_value,residual_max\n";
  json table = json::array();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    csv << format_number(r.eps) << ',' << format_number(r.value) << ',' << format_number(r.rebased_value) << ','
        << format_number(r.residual_max) << '\n';
    json rec;
    rec["scenario"] = s.problem.name;
    rec["eps"] = r.eps;
    rec["value"] = r.value;
    rec["rebased_value"] = r.rebased_value;
    rec["residual_max"] = nullable(r.residual_max);
    rec["runtime_ms"] = nullptr;
    rec["control"] = control_json(r.control);
    rec["control_file"] = out.empty() ? json(nullptr)
                                      : json(write_control(out, r.control, "control_eps" + std::to_string(i) + ".csv"));
    table.push_back(rec);
  }
  if (!out.empty()) std::ofstream(out / "stability.csv") << csv.str();
  std::cerr << csv.str();
  emit(out, "stability.json", table);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimal transport of probability measures by controlled continuity equations"};
  app.require_subcommand(1);
  Common common;
  std::string method = "sweep";
  std::string control_file;
  std::string constant;
  double tol = 1e-2;
  std::vector<double> eps_list{0.2, 0.1, 0.05};
  int oracle_cells = 0;
  bool trajectory = false;

  auto* run = app.add_subcommand("run", "Solve the configured problem");
  add_common(run, common);
  run->add_option("--method", method, "exhaustive, sweep or both")->check(CLI::IsMember({"exhaustive", "sweep", "both"}));
  run->add_flag("--trajectory", trajectory, "Write particle snapshots at the control breakpoints");

  auto* check = app.add_subcommand("check", "Evaluate the necessary-condition residual of a control");
  add_common(check, common);
  check->add_option("--control", control_file, "Control CSV (t_start,t_end,u1,...)");
  check->add_option("--constant", constant, "Constant control value, e.g. 1,0");
  check->add_option("--tol", tol, "Pass threshold for the maximal residual");

  auto* stability = app.add_subcommand("stability", "Variational-stability experiment over a list of eps");
  add_common(stability, common);
  stability->add_option("--eps", eps_list, "Decreasing list of eps");
  stability->add_option("--method", method, "exhaustive or sweep")->check(CLI::IsMember({"exhaustive", "sweep"}));

  auto* oracle = app.add_subcommand("oracle", "Exhaustive search over the control grid");
  add_common(oracle, common);
  oracle->add_option("--K", oracle_cells, "Number of control cells (default: config K)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    set_num_threads(static_cast<unsigned>(std::max(0, common.threads)));
    if (run->parsed()) return cmd_run(common, method, trajectory);
    if (check->parsed()) return cmd_check(common, control_file, constant, tol);
    if (stability->parsed()) return cmd_stability(common, eps_list, method);
    if (oracle->parsed()) return cmd_oracle(common, oracle_cells);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
