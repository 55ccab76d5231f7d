#include "emgrid/scenario_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

namespace emgrid {

using nlohmann::json;

namespace {

// Field access with the document path in every error message.
class Node {
 public:
  Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {}

  void expect_object(std::initializer_list<const char*> allowed) const {
    if (!j_.is_object()) fail(path_ + ": expected an object");
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, v] : j_.items()) {
      if (!ok.count(key)) fail(path_ + ": unknown field '" + key + "'");
    }
  }
  bool has(const char* key) const { return j_.contains(key); }

  Node child(const char* key) const {
    if (!j_.contains(key)) fail(path_ + ": missing field '" + key + "'");
    return Node(j_.at(key), join(key));
  }
  double number(const char* key) const {
    Node c = child(key);
    if (!c.j_.is_number()) fail(c.path_ + ": expected a number");
    return c.j_.get<double>();
  }
  double number_or(const char* key, double fallback) const {
    return has(key) ? number(key) : fallback;
  }
  int integer(const char* key) const {
    Node c = child(key);
    if (!c.j_.is_number_integer()) fail(c.path_ + ": expected an integer");
    return c.j_.get<int>();
  }
  int integer_or(const char* key, int fallback) const { return has(key) ? integer(key) : fallback; }
  std::string text_or(const char* key, std::string fallback) const {
    if (!has(key)) return fallback;
    Node c = child(key);
    if (!c.j_.is_string()) fail(c.path_ + ": expected a string");
    return c.j_.get<std::string>();
  }
  std::vector<Node> array(const char* key, bool required = true) const {
    if (!required && !has(key)) return {};
    return child(key).elements();
  }
  std::vector<Node> elements() const {
    if (!j_.is_array()) fail(path_ + ": expected an array");
    std::vector<Node> out;
    for (size_t i = 0; i < j_.size(); ++i) out.emplace_back(j_[i], path_ + "[" + std::to_string(i) + "]");
    return out;
  }
  double as_number() const {
    if (!j_.is_number()) fail(path_ + ": expected a number");
    return j_.get<double>();
  }
  const std::string& path() const { return path_; }

  [[noreturn]] static void fail(const std::string& msg) { throw InputError(msg); }

 private:
  std::string join(const char* key) const { return path_.empty() ? key : path_ + "." + key; }
  const json& j_;
  std::string path_;
};

std::pair<size_t, size_t> line_column(const std::string& text, size_t byte) {
  size_t line = 1, col = 1;
  for (size_t i = 0; i + 1 < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

MicrogridSpec read_microgrid(const Node& m) {
  m.expect_object({"id", "name", "conventional", "storage", "res", "loads", "pcc"});
  MicrogridSpec mg;
  mg.id = m.integer("id") - 1;
  for (const auto& c : m.array("conventional", false)) {
    c.expect_object({"p_min", "p_max", "a_on", "a_lin", "a_quad"});
    mg.conv.push_back({c.number("p_min"), c.number("p_max"), c.number("a_on"), c.number("a_lin"),
                       c.number("a_quad")});
  }
  for (const auto& s : m.array("storage", false)) {
    s.expect_object({"x_min", "x_max", "p_min", "p_max", "a_wear"});
    mg.storage.push_back({s.number("x_min"), s.number("x_max"), s.number("p_min"),
                          s.number("p_max"), s.number("a_wear")});
  }
  for (const auto& r : m.array("res", false)) {
    r.expect_object({"p_max", "a_curtail"});
    mg.res.push_back({r.number("p_max"), r.number("a_curtail")});
  }
  mg.loads = m.integer_or("loads", 0);
  Node p = m.child("pcc");
  p.expect_object({"a_price", "a_fee"});
  mg.pcc = {p.number("a_price"), p.number("a_fee")};
  return mg;
}

SolverSettings read_solver(const Node& s) {
  s.expect_object({"rho", "tau", "eps_term", "nu_max", "gamma", "Ts", "H", "dd_alpha0", "dd_prox"});
  SolverSettings d;
  d.rho = s.number_or("rho", d.rho);
  d.tau = s.number_or("tau", d.tau);
  d.eps_term = s.number_or("eps_term", d.eps_term);
  d.nu_max = s.integer_or("nu_max", d.nu_max);
  d.gamma = s.number_or("gamma", d.gamma);
  d.ts = s.number_or("Ts", d.ts);
  d.horizon = s.integer_or("H", d.horizon);
  d.dd_alpha0 = s.number_or("dd_alpha0", d.dd_alpha0);
  d.dd_prox = s.number_or("dd_prox", d.dd_prox);
  return d;
}

}  // namespace

Scenario parse_scenario(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    auto [line, col] = line_column(text, e.byte);
    std::string what = e.what();
    auto colon = what.find(": ", what.find("parse error"));
    throw InputError("scenario parse error at line " + std::to_string(line) + ", column " +
                     std::to_string(col) +
                     (colon == std::string::npos ? "" : what.substr(colon)));
  }
  Node root(doc, "");
  root.expect_object({"name", "note", "grid", "microgrids", "solver", "initial_storage"});

  Scenario sc;
  sc.name = root.text_or("name", "");
  Node grid = root.child("grid");
  grid.expect_object({"nodes", "edges"});
  const int nodes = grid.integer("nodes");
  if (nodes < 1) Node::fail("grid.nodes: at least one node required");
  std::vector<Line> lines;
  for (const auto& e : grid.array("edges")) {
    e.expect_object({"a", "b", "susceptance", "p_min", "p_max", "cost_weight"});
    int a = e.integer("a"), b = e.integer("b");
    for (int v : {a, b})
      if (v < 1 || v > nodes) Node::fail(e.path() + ": unknown node " + std::to_string(v));
    if (a == b) Node::fail(e.path() + ": line connects node " + std::to_string(a) + " to itself");
    lines.push_back({a - 1, b - 1, e.number("susceptance"), e.number("p_min"), e.number("p_max"),
                     e.number("cost_weight")});
  }
  sc.grid = GridGraph(nodes, std::move(lines));

  std::map<int, MicrogridSpec> by_id;
  for (const auto& m : root.array("microgrids")) {
    MicrogridSpec mg = read_microgrid(m);
    if (mg.id < 0 || mg.id >= nodes)
      Node::fail(m.path() + ": unknown node " + std::to_string(mg.id + 1));
    if (!by_id.emplace(mg.id, mg).second)
      Node::fail(m.path() + ": duplicate microgrid id " + std::to_string(mg.id + 1));
  }
  for (auto& [id, mg] : by_id) sc.microgrids.push_back(std::move(mg));

  if (root.has("solver")) sc.solver = read_solver(root.child("solver"));

  for (const auto& row : root.array("initial_storage")) {
    std::vector<double> x;
    for (const auto& v : row.elements()) x.push_back(v.as_number());
    sc.initial_storage.push_back(std::move(x));
  }

  auto violations = validate_scenario(sc);
  if (!violations.empty())
    throw InputError("invalid scenario:\n" + format_violations(violations));
  return sc;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  out << content;
  if (!out) throw InputError("write failed: " + path);
}

Scenario load_scenario(const std::string& path) {
  try {
    return parse_scenario(read_text_file(path));
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what());
  }
}

std::string scenario_to_json(const Scenario& sc) {
  json doc;
  doc["name"] = sc.name;
  json edges = json::array();
  for (const auto& l : sc.grid.lines()) {
    edges.push_back({{"a", l.a + 1},
                     {"b", l.b + 1},
                     {"susceptance", l.susceptance},
                     {"p_min", l.p_min},
                     {"p_max", l.p_max},
                     {"cost_weight", l.cost_weight}});
  }
  doc["grid"] = {{"nodes", sc.grid.num_nodes()}, {"edges", edges}};
  json mgs = json::array();
  for (const auto& mg : sc.microgrids) {
    json conv = json::array(), st = json::array(), res = json::array();
    for (const auto& c : mg.conv)
      conv.push_back({{"p_min", c.p_min}, {"p_max", c.p_max}, {"a_on", c.a_on},
                      {"a_lin", c.a_lin}, {"a_quad", c.a_quad}});
    for (const auto& s : mg.storage)
      st.push_back({{"x_min", s.x_min}, {"x_max", s.x_max}, {"p_min", s.p_min},
                    {"p_max", s.p_max}, {"a_wear", s.a_wear}});
    for (const auto& r : mg.res) res.push_back({{"p_max", r.p_max}, {"a_curtail", r.a_curtail}});
    mgs.push_back({{"id", mg.id + 1},
                   {"conventional", conv},
                   {"storage", st},
                   {"res", res},
                   {"loads", mg.loads},
                   {"pcc", {{"a_price", mg.pcc.a_price}, {"a_fee", mg.pcc.a_fee}}}});
  }
  doc["microgrids"] = mgs;
  const auto& s = sc.solver;
  doc["solver"] = {{"rho", s.rho},     {"tau", s.tau}, {"eps_term", s.eps_term},
                   {"nu_max", s.nu_max}, {"gamma", s.gamma}, {"Ts", s.ts},
                   {"H", s.horizon},   {"dd_alpha0", s.dd_alpha0}, {"dd_prox", s.dd_prox}};
  doc["initial_storage"] = sc.initial_storage;
  return doc.dump(2) + "\n";
}

void write_scenario(const Scenario& scenario, const std::string& path) {
  write_text_file(path, scenario_to_json(scenario));
}

namespace {

[[noreturn]] void series_fail(int line, const std::string& msg) {
  throw InputError("series line " + std::to_string(line) + ": " + msg);
}

template <class T>
T parse_field(const std::string& f, int line, const char* what) {
  T v{};
  auto res = std::from_chars(f.data(), f.data() + f.size(), v);
  if (res.ec != std::errc() || res.ptr != f.data() + f.size())
    series_fail(line, std::string("bad ") + what + " '" + f + "'");
  return v;
}

}  // namespace

DisturbanceSeries parse_series(const std::string& text, const Scenario& sc) {
  std::istringstream in(text);
  std::string row;
  int line = 0;
  bool header = false;
  // (k, mg, is_load, channel) -> value
  std::map<std::tuple<int, int, int, int>, double> values;
  int last_k = -1;
  while (std::getline(in, row)) {
    ++line;
    if (!row.empty() && row.back() == '\r') row.pop_back();
    if (row.empty() || row[0] == '#') continue;
    if (!header) {
      if (row != "time_index,mg_id,channel,value_kw")
        series_fail(line, "expected header time_index,mg_id,channel,value_kw");
      header = true;
      continue;
    }
    std::vector<std::string> f;
    std::stringstream ss(row);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 4) series_fail(line, "expected 4 fields, found " + std::to_string(f.size()));
    const int k = parse_field<int>(f[0], line, "time_index");
    const int mg = parse_field<int>(f[1], line, "mg_id");
    const double v = parse_field<double>(f[3], line, "value_kw");
    if (k < 0) series_fail(line, "negative time_index");
    if (mg < 1 || mg > sc.size()) series_fail(line, "unknown microgrid " + f[1]);
    const auto colon = f[2].find(':');
    if (colon == std::string::npos) series_fail(line, "bad channel '" + f[2] + "'");
    const std::string kind = f[2].substr(0, colon);
    if (kind != "res" && kind != "load") series_fail(line, "bad channel '" + f[2] + "'");
    const int ch = parse_field<int>(f[2].substr(colon + 1), line, "channel index");
    const auto& spec = sc.microgrids[mg - 1];
    const int count = kind == "res" ? static_cast<int>(spec.res.size()) : spec.loads;
    if (ch < 1 || ch > count)
      series_fail(line, "microgrid " + f[1] + " has no channel " + f[2]);
    if (!values.emplace(std::tuple{k, mg - 1, kind == "load" ? 1 : 0, ch - 1}, v).second)
      series_fail(line, "duplicate entry for " + f[2] + " of microgrid " + f[1] + " at time index " +
                            f[0]);
    last_k = std::max(last_k, k);
  }
  if (!header) throw InputError("series: missing header");
  if (last_k < 0) throw InputError("series: no data rows");

  DisturbanceSeries out(last_k + 1);
  for (int k = 0; k <= last_k; ++k) {
    for (int j = 0; j < sc.size(); ++j) {
      const auto& spec = sc.microgrids[j];
      MgDisturbance w;
      w.res.resize(spec.res.size());
      w.load.resize(spec.loads);
      for (int kind = 0; kind < 2; ++kind) {
        auto& dst = kind == 0 ? w.res : w.load;
        for (size_t c = 0; c < dst.size(); ++c) {
          auto it = values.find({k, j, kind, static_cast<int>(c)});
          if (it == values.end())
            throw InputError("series: missing " + std::string(kind == 0 ? "res:" : "load:") +
                             std::to_string(c + 1) + " of microgrid " + std::to_string(j + 1) +
                             " at time index " + std::to_string(k));
          dst[c] = it->second;
        }
      }
      out[k].push_back(std::move(w));
    }
  }
  auto violations = validate_scenario(sc, &out);
  if (!violations.empty()) throw InputError("invalid series:\n" + format_violations(violations));
  return out;
}

DisturbanceSeries load_series(const std::string& path, const Scenario& scenario) {
  try {
    return parse_series(read_text_file(path), scenario);
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what());
  }
}

std::string format_number(double v) {
  if (v == 0.0) v = 0.0;  // drops the sign of -0
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  if (std::string(buf) == "-0") return "0";
  return buf;
}

void write_series(std::ostream& os, const DisturbanceSeries& series) {
  os << "time_index,mg_id,channel,value_kw\n";
  for (size_t k = 0; k < series.size(); ++k) {
    for (size_t j = 0; j < series[k].size(); ++j) {
      const auto& w = series[k][j];
      for (size_t c = 0; c < w.res.size(); ++c)
        os << k << ',' << j + 1 << ",res:" << c + 1 << ',' << format_number(w.res[c]) << '\n';
      for (size_t c = 0; c < w.load.size(); ++c)
        os << k << ',' << j + 1 << ",load:" << c + 1 << ',' << format_number(w.load[c]) << '\n';
    }
  }
}

void write_results_csv(std::ostream& os, const ClosedLoopResult& r, double /*ts*/) {
  os << "step,mg,unit,switch,planned_kw,realized_kw,storage_kwh,pcc_kw,imbalance_kw\n";
  for (const auto& s : r.steps) {
    for (size_t j = 0; j < s.planned.size(); ++j) {
      const auto& p = s.planned[j];
      const auto& q = s.realized[j];
      const std::string head = std::to_string(s.step) + "," + std::to_string(j + 1) + ",";
      const std::string tail =
          "," + format_number(q.pcc) + "," + format_number(s.imbalance[j]) + "\n";
      for (size_t i = 0; i < p.conv.size(); ++i)
        os << head << "conv:" << i + 1 << ',' << s.delta[j][i] << ',' << format_number(p.conv[i])
           << ',' << format_number(q.conv[i]) << ',' << tail;
      for (size_t i = 0; i < p.storage.size(); ++i)
        os << head << "storage:" << i + 1 << ",," << format_number(p.storage[i]) << ','
           << format_number(q.storage[i]) << ',' << format_number(s.energy[j][i]) << tail;
      for (size_t i = 0; i < p.res.size(); ++i)
        os << head << "res:" << i + 1 << ",," << format_number(p.res[i]) << ','
           << format_number(q.res[i]) << ',' << tail;
      os << head << "pcc,," << format_number(p.pcc) << ',' << format_number(q.pcc) << ',' << tail;
    }
  }
}

void write_plan_csv(std::ostream& os, int step, const std::vector<Trajectory>& plans) {
  os << "step,h,mg,unit,switch,power_kw,storage_kwh\n";
  for (size_t j = 0; j < plans.size(); ++j) {
    const Trajectory& t = plans[j];
    for (size_t h = 0; h < t.power.size(); ++h) {
      const auto& p = t.power[h];
      const std::string head =
          std::to_string(step) + "," + std::to_string(h) + "," + std::to_string(j + 1) + ",";
      for (size_t i = 0; i < p.conv.size(); ++i)
        os << head << "conv:" << i + 1 << ',' << t.delta[h][i] << ',' << format_number(p.conv[i])
           << ",\n";
      for (size_t i = 0; i < p.storage.size(); ++i)
        os << head << "storage:" << i + 1 << ",," << format_number(p.storage[i]) << ','
           << format_number(t.energy[h + 1][i]) << '\n';
      for (size_t i = 0; i < p.res.size(); ++i)
        os << head << "res:" << i + 1 << ",," << format_number(p.res[i]) << ",\n";
      os << head << "pcc,," << format_number(p.pcc) << ",\n";
    }
  }
}

void write_summary_header(std::ostream& os) {
  os << "controller,scope,kpi_percent,cost,imbalance_kwh,mean_iterations,max_iterations,"
        "steps_not_converged,messages_per_iteration\n";
}

void write_summary_rows(std::ostream& os, const ClosedLoopResult& r, double ts) {
  const std::string name = to_string(r.controller);
  const size_t n = r.mg_cost.size();
  std::vector<double> imb(n, 0.0);
  long iters = 0, messages = 0;
  int max_it = 0, failed = 0;
  for (const auto& s : r.steps) {
    for (size_t j = 0; j < n; ++j) imb[j] += std::abs(s.imbalance[j]) * ts;
    iters += s.iterations;
    messages += s.messages;
    max_it = std::max(max_it, s.iterations);
    if (!s.converged) ++failed;
  }
  for (size_t j = 0; j < n; ++j) {
    os << name << ",mg" << j + 1 << ',' << format_number(kpi_renewable(r, static_cast<int>(j)))
       << ',' << format_number(r.mg_cost[j]) << ',' << format_number(imb[j]) << ",,,,\n";
  }
  double total_imb = 0.0;
  for (double v : imb) total_imb += v;
  const double mean_it = r.steps.empty() ? 0.0 : static_cast<double>(iters) / r.steps.size();
  const double per_it = iters > 0 ? static_cast<double>(messages) / iters : 0.0;
  os << name << ",all," << format_number(kpi_renewable(r)) << ',' << format_number(r.total_cost)
     << ',' << format_number(total_imb) << ',' << format_number(mean_it) << ',' << max_it << ','
     << failed << ',' << format_number(per_it) << '\n';
}

void write_trace_header(std::ostream& os) {
  os << "step,iteration,agent,primal_residual,dual_residual,objective\n";
}

void write_trace_rows(std::ostream& os, int step, const std::vector<TraceRow>& trace) {
  for (const auto& t : trace) {
    os << step << ',' << t.iteration << ',' << t.agent + 1 << ',' << format_number(t.primal) << ','
       << format_number(t.dual) << ',' << format_number(t.objective) << '\n';
  }
}

}  // namespace emgrid
