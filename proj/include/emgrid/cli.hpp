#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace emgrid {

/// Exit codes of the command-line tool.
enum ExitCode : int { exit_ok = 0, exit_not_converged = 1, exit_input = 2 };

/// Entry point of the `emgrid` tool: subcommands validate, solve, simulate
/// and compare. Normal output goes to `out`, diagnostics and usage to `err`.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cli_main(int argc, char** argv);

/// Scenario and series used when --scenario / --series are not given.
std::string default_scenario_path();
std::string default_series_path();

}  // namespace emgrid
