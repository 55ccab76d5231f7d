// Writes a synthetic disturbance series for a scenario: diurnal PV with a
// random clearness per day, AR(1) wind, loads with morning and evening peaks.
// Everything is drawn from one fixed-seed generator.

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numbers>
#include <random>
#include <set>

#include "emgrid/scenario_io.hpp"

using namespace emgrid;

int main(int argc, char** argv) {
  CLI::App app{"synthetic disturbance series"};
  std::string scenario_path, out_path;
  int length = 360;
  unsigned seed = 20240601;
  std::vector<int> wind_mgs{2};
  std::vector<double> load_base{18.0, 22.0, 14.0, 30.0};
  app.add_option("--scenario", scenario_path, "scenario JSON")->required();
  app.add_option("--out", out_path, "output CSV")->required();
  app.add_option("--length", length, "number of time indices");
  app.add_option("--seed", seed, "generator seed");
  app.add_option("--wind", wind_mgs, "microgrids whose renewables are wind (1-based)");
  app.add_option("--load-base", load_base, "mean load per microgrid in kW");
  CLI11_PARSE(app, argc, argv);

  try {
    Scenario sc = load_scenario(scenario_path);
    const double ts = sc.solver.ts;
    const int n = sc.size();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const std::set<int> wind(wind_mgs.begin(), wind_mgs.end());

    const int days = static_cast<int>(std::ceil(length * ts / 24.0)) + 1;
    std::vector<std::vector<double>> clear(n, std::vector<double>(days));
    for (auto& mg : clear)
      for (auto& d : mg) d = 0.35 + 0.65 * unif(rng);
    std::vector<double> wind_state(n, 0.4);

    DisturbanceSeries series(length);
    for (int k = 0; k < length; ++k) {
      const double hour = std::fmod(k * ts, 24.0);
      const int day = static_cast<int>(k * ts / 24.0);
      for (int j = 0; j < n; ++j) {
        const auto& spec = sc.microgrids[j];
        MgDisturbance w;
        for (const auto& r : spec.res) {
          double frac;
          if (wind.count(j + 1)) {
            wind_state[j] = std::clamp(0.4 + 0.92 * (wind_state[j] - 0.4) + 0.08 * gauss(rng), 0.0, 1.0);
            frac = wind_state[j];
          } else {
            const double sun = std::max(0.0, std::sin(std::numbers::pi * (hour - 6.0) / 12.0));
            frac = std::clamp(sun * clear[j][day] * (1.0 + 0.08 * gauss(rng)), 0.0, 1.0);
          }
          w.res.push_back(r.p_max * frac);
        }
        const double base = load_base[std::min<size_t>(j, load_base.size() - 1)];
        const double shape = 0.75 + 0.35 * std::exp(-std::pow(hour - 8.0, 2) / 4.0) +
                             0.55 * std::exp(-std::pow(hour - 19.0, 2) / 6.0);
        for (int l = 0; l < spec.loads; ++l)
          w.load.push_back(-std::max(0.0, base * shape * (1.0 + 0.06 * gauss(rng))));
        series[k].push_back(std::move(w));
      }
    }
    std::ofstream out(out_path);
    if (!out) throw InputError("cannot write " + out_path);
    write_series(out, series);
  } catch (const std::exception& e) {
    std::cerr << "gen_series: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
