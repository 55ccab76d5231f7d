#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <sstream>

#include "emgrid/cli.hpp"
#include "emgrid/scenario_io.hpp"

using namespace emgrid;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  int code = cli_main(args, out, err);
  return {code, out.str(), err.str()};
}

std::string fresh_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("emgrid_cli_" + name);
  std::filesystem::remove_all(dir);
  return dir.string();
}

// mean_iterations of the "all" row of a summary file
double mean_iterations(const std::string& summary) {
  std::istringstream in(summary);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find(",all,") == std::string::npos) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    return std::stod(f.at(5));
  }
  return -1.0;
}

}  // namespace

TEST_CASE("validate accepts the bundled scenario") {
  auto r = run({"validate", "--series", default_series_path()});
  CHECK(r.code == 0);
  CHECK(r.out.find("4 microgrids") != std::string::npos);
}

TEST_CASE("unknown flags print usage and exit 2") {
  auto r = run({"simulate", "--no-such-flag"});
  CHECK(r.code == 2);
  CHECK(r.err.find("Usage") != std::string::npos);
  CHECK(run({}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({"solve", "--controller", "fancy"}).code == 2);
  CHECK(run({"solve", "--step", "0"}).code == 2);
  CHECK(run({"solve", "--rho", "-1"}).code == 2);
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("input errors exit 2") {
  auto r = run({"validate", "--scenario", "/nonexistent/x.json"});
  CHECK(r.code == 2);
  CHECK(r.err.find("/nonexistent/x.json") != std::string::npos);
  // the bundled series has 360 time indices
  CHECK(run({"solve", "--controller", "islanded", "--step", "400", "--out", fresh_dir("late")})
            .code == 2);
}

TEST_CASE("distributed solve writes a residual trace") {
  const auto dir = fresh_dir("solve");
  auto r = run({"solve", "--controller", "distributed", "--eps-term", "1e-5", "--out", dir});
  CHECK(r.code == 0);
  const std::string trace = read_text_file(dir + "/trace.csv");
  CHECK(trace.rfind("step,iteration,agent,primal_residual,dual_residual,objective\n", 0) == 0);
  CHECK(std::count(trace.begin(), trace.end(), '\n') > 4);
  CHECK(std::filesystem::exists(dir + "/plan.csv"));
}

TEST_CASE("iteration limit reached exits 1") {
  auto r = run({"solve", "--controller", "distributed", "--nu-max", "2", "--out",
                fresh_dir("limit")});
  CHECK(r.code == 1);
  CHECK(r.out.find("not converged") != std::string::npos);
}

TEST_CASE("identical invocations give identical files") {
  const auto a = fresh_dir("det_a"), b = fresh_dir("det_b");
  CHECK(run({"simulate", "--controller", "central", "--steps", "2", "--out", a}).code == 0);
  CHECK(run({"simulate", "--controller", "central", "--steps", "2", "--out", b}).code == 0);
  for (const char* f : {"results.csv", "summary.csv"})
    CHECK(read_text_file(a + "/" + f) == read_text_file(b + "/" + f));
}

TEST_CASE("dual decomposition needs at least as many iterations as the augmented Lagrangian") {
  const auto dd = fresh_dir("dd"), al = fresh_dir("al");
  // dual decomposition may hit its iteration limit on a step (exit 1)
  CHECK(run({"simulate", "--controller", "dd", "--steps", "10", "--out", dd}).code <= 1);
  CHECK(run({"simulate", "--controller", "distributed", "--steps", "10", "--out", al}).code == 0);
  const double it_dd = mean_iterations(read_text_file(dd + "/summary.csv"));
  const double it_al = mean_iterations(read_text_file(al + "/summary.csv"));
  CHECK(it_al > 0.0);
  CHECK(it_dd >= it_al);
}
