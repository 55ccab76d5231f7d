#include "emgrid/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "emgrid/scenario_io.hpp"
#include "emgrid/simulation.hpp"

#ifndef EMGRID_DATA_DIR
#define EMGRID_DATA_DIR "data"
#endif

namespace emgrid {

std::string default_scenario_path() { return std::string(EMGRID_DATA_DIR) + "/microgrids4.json"; }
std::string default_series_path() {
  return std::string(EMGRID_DATA_DIR) + "/microgrids4_series.csv";
}

namespace {

struct Overrides {
  std::optional<double> rho, tau, eps_term, gamma;
  std::optional<int> nu_max;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--rho", rho, "penalty parameter")->check(CLI::PositiveNumber);
    cmd->add_option("--tau", tau, "multiplier step fraction")->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--eps-term", eps_term, "termination tolerance")->check(CLI::PositiveNumber);
    cmd->add_option("--nu-max", nu_max, "iteration limit")->check(CLI::PositiveNumber);
    cmd->add_option("--gamma", gamma, "discount factor")->check(CLI::Range(0.0, 1.0));
  }
  void apply(SolverSettings& s) const {
    if (rho) s.rho = *rho;
    if (tau) s.tau = *tau;
    if (eps_term) s.eps_term = *eps_term;
    if (nu_max) s.nu_max = *nu_max;
    if (gamma) s.gamma = *gamma;
  }
};

struct Options {
  std::string scenario = default_scenario_path();
  std::string series;
  std::string controller = "distributed";
  std::string out_dir = ".";
  int step = 1;
  int steps = 0;  // 0: the full week of 336 steps
  bool foresight = false;
  Overrides over;
};

std::string join(const std::string& dir, const std::string& file) {
  return (std::filesystem::path(dir) / file).string();
}

void make_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw InputError("cannot create " + dir + ": " + ec.message());
}

struct Inputs {
  Scenario scenario;
  DisturbanceSeries series;
};

Inputs load_inputs(const Options& o) {
  Inputs in;
  in.scenario = load_scenario(o.scenario);
  o.over.apply(in.scenario.solver);
  in.series = load_series(o.series.empty() ? default_series_path() : o.series, in.scenario);
  return in;
}

ClosedLoopSettings loop_settings(const Options& o, Controller c) {
  ClosedLoopSettings s;
  s.controller = c;
  if (o.steps > 0) s.steps = o.steps;
  s.perfect_foresight = o.foresight;
  s.keep_traces = true;
  return s;
}

std::vector<std::vector<double>> initial_energy(const Scenario& sc) {
  auto e = sc.initial_storage;
  e.resize(sc.size());
  for (int j = 0; j < sc.size(); ++j) e[j].resize(sc.microgrids[j].storage.size(), 0.0);
  return e;
}

std::string trace_csv(const ClosedLoopResult& r) {
  std::ostringstream os;
  write_trace_header(os);
  for (const auto& s : r.steps) write_trace_rows(os, s.step, s.trace);
  return os.str();
}

bool uses_consensus(Controller c) { return c == Controller::distributed || c == Controller::dd; }

int run_validate(const Options& o, std::ostream& out) {
  Scenario sc = load_scenario(o.scenario);
  o.over.apply(sc.solver);
  out << "scenario ok: " << sc.size() << " microgrids, " << sc.grid.lines().size() << " lines\n";
  if (!o.series.empty()) {
    auto series = load_series(o.series, sc);
    out << "series ok: " << series.size() << " time indices\n";
  }
  return exit_ok;
}

int run_solve(const Options& o, std::ostream& out) {
  const Controller c = parse_controller(o.controller);
  Inputs in = load_inputs(o);
  ClosedLoopSettings set = loop_settings(o, c);
  StepPlan plan = plan_step(in.scenario, in.series, o.step, initial_energy(in.scenario), set);

  make_dir(o.out_dir);
  std::ostringstream plan_csv;
  write_plan_csv(plan_csv, o.step, plan.plans);
  write_text_file(join(o.out_dir, "plan.csv"), plan_csv.str());
  if (uses_consensus(c)) {
    std::ostringstream trace;
    write_trace_header(trace);
    write_trace_rows(trace, o.step, plan.trace);
    write_text_file(join(o.out_dir, "trace.csv"), trace.str());
  }

  double total = 0.0;
  for (const auto& isl : plan.islanded) total += isl.v_star;
  out << to_string(c) << " step " << o.step << ": islanded cost " << format_number(total);
  if (uses_consensus(c)) out << ", " << plan.iterations << " iterations";
  out << (plan.converged ? "" : ", not converged") << "\n";
  return plan.converged ? exit_ok : exit_not_converged;
}

int run_simulate(const Options& o, std::ostream& out) {
  const Controller c = parse_controller(o.controller);
  Inputs in = load_inputs(o);
  ClosedLoopResult r = closed_loop_run(in.scenario, in.series, loop_settings(o, c));
  const double ts = in.scenario.solver.ts;

  make_dir(o.out_dir);
  std::ostringstream results, summary;
  write_results_csv(results, r, ts);
  write_summary_header(summary);
  write_summary_rows(summary, r, ts);
  write_text_file(join(o.out_dir, "results.csv"), results.str());
  write_text_file(join(o.out_dir, "summary.csv"), summary.str());
  if (uses_consensus(c)) write_text_file(join(o.out_dir, "trace.csv"), trace_csv(r));

  out << summary.str();
  return r.all_converged() ? exit_ok : exit_not_converged;
}

int run_compare(const Options& o, std::ostream& out) {
  Inputs in = load_inputs(o);
  const double ts = in.scenario.solver.ts;
  make_dir(o.out_dir);
  std::ostringstream summary;
  write_summary_header(summary);
  bool converged = true;
  for (Controller c :
       {Controller::islanded, Controller::central, Controller::distributed, Controller::dd}) {
    ClosedLoopResult r = closed_loop_run(in.scenario, in.series, loop_settings(o, c));
    write_summary_rows(summary, r, ts);
    converged = converged && r.all_converged();
    if (uses_consensus(c))
      write_text_file(join(o.out_dir, "trace_" + to_string(c) + ".csv"), trace_csv(r));
  }
  write_text_file(join(o.out_dir, "summary.csv"), summary.str());
  out << summary.str();
  return converged ? exit_ok : exit_not_converged;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Distributed MPC of networked microgrids"};
  app.name("emgrid");
  app.require_subcommand(1);
  Options o;

  auto* validate = app.add_subcommand("validate", "check a scenario and optionally a series");
  auto* solve = app.add_subcommand("solve", "plan one MPC instant");
  auto* simulate = app.add_subcommand("simulate", "closed-loop run of one controller");
  auto* compare = app.add_subcommand("compare", "closed-loop runs of every controller");

  for (auto* cmd : {validate, solve, simulate, compare}) {
    cmd->add_option("--scenario", o.scenario, "scenario JSON")->capture_default_str();
    cmd->add_option("--series", o.series, "disturbance CSV (default: bundled series)");
    o.over.add_to(cmd);
  }
  for (auto* cmd : {solve, simulate}) {
    cmd->add_option("--controller", o.controller, "islanded, central, distributed or dd")
        ->check(CLI::IsMember({"islanded", "central", "distributed", "dd"}))
        ->capture_default_str();
  }
  for (auto* cmd : {solve, simulate, compare}) {
    cmd->add_option("--out", o.out_dir, "output directory")->capture_default_str();
    cmd->add_flag("--perfect-foresight", o.foresight, "forecast with the realized disturbances");
  }
  solve->add_option("--step", o.step, "sampling instant k (>= 1)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  for (auto* cmd : {simulate, compare})
    cmd->add_option("--steps", o.steps, "closed-loop steps (default 336)")
        ->check(CLI::PositiveNumber);

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return exit_ok;
  } catch (const CLI::ParseError& e) {
    err << "emgrid: " << e.what() << "\n\n" << app.help();
    return exit_input;
  }

  try {
    if (validate->parsed()) return run_validate(o, out);
    if (solve->parsed()) return run_solve(o, out);
    if (simulate->parsed()) return run_simulate(o, out);
    return run_compare(o, out);
  } catch (const InputError& e) {
    err << "emgrid: " << e.what() << "\n";
    return exit_input;
  } catch (const SolverError& e) {
    err << "emgrid: " << e.what() << "\n";
    return exit_not_converged;
  }
}

int cli_main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return cli_main(args, std::cout, std::cerr);
}

}  // namespace emgrid
