#pragma once

// Scenario (JSON) and disturbance series (CSV) files, and the CSV outputs of
// solves and closed-loop runs. Identifiers in files are 1-based.

#include <iosfwd>
#include <string>
#include <vector>

#include "emgrid/scenario.hpp"
#include "emgrid/simulation.hpp"

namespace emgrid {

/// Parses and validates a scenario document. Throws InputError with the
/// line and column of syntax errors, the path of missing or mistyped fields,
/// or the full violation list.
Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::string& path);

std::string scenario_to_json(const Scenario& scenario);
void write_scenario(const Scenario& scenario, const std::string& path);

/// CSV with header time_index,mg_id,channel,value_kw; channel is res:<i> or
/// load:<i>. Every (time index, channel) of every microgrid must appear once
/// and time indices must be dense from 0.
DisturbanceSeries parse_series(const std::string& text, const Scenario& scenario);
DisturbanceSeries load_series(const std::string& path, const Scenario& scenario);

void write_series(std::ostream& os, const DisturbanceSeries& series);

/// 9 significant digits, negative zero printed as 0.
std::string format_number(double v);

/// step,mg,unit,switch,planned_kw,realized_kw,storage_kwh,pcc_kw,imbalance_kw
void write_results_csv(std::ostream& os, const ClosedLoopResult& result, double ts);

/// step,h,mg,unit,switch,power_kw,storage_kwh: the whole plan of one
/// instant; storage_kwh is the energy after predicted step h.
void write_plan_csv(std::ostream& os, int step, const std::vector<Trajectory>& plans);

/// controller,scope,kpi_percent,cost,imbalance_kwh,mean_iterations,
/// max_iterations,steps_not_converged,messages_per_iteration
void write_summary_header(std::ostream& os);
void write_summary_rows(std::ostream& os, const ClosedLoopResult& result, double ts);

/// step,iteration,agent,primal_residual,dual_residual,objective
void write_trace_header(std::ostream& os);
void write_trace_rows(std::ostream& os, int step, const std::vector<TraceRow>& trace);

/// Writes `content` to `path`, throwing InputError when the file cannot be
/// opened.
void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace emgrid
