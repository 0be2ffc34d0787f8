// Benchmark driver: runs one solver configuration and writes the residual
// history as CSV.
//
// exit codes: 0 converged, 2 cycle budget exhausted, 3 diverged, 1 bad input

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include "adafac/bench.hpp"

int main(int argc, char** argv) {
  CLI::App app{"additive multigrid benchmark on adaptive spacetrees"};
  std::string config_file;
  app.add_option("--config", config_file, "key=value file, flags given on the command line win");

  const std::pair<const char*, const char*> keys[] = {
      {"setup", "poisson | jump | needle | checkerboard"},
      {"k", "material contrast, eps = 10^-k"},
      {"variant", "additive | expdamped | bpx | afacc | adafac-pi | adafac-jac | multiplicative"},
      {"flavor", "geometric | boxmg"},
      {"lmax", "finest level (uniform depth without amr)"},
      {"lmin", "coarsest level that gets a correction (default 1)"},
      {"omega", "Jacobi damping (default 0.6)"},
      {"omega-tilde", "damping inside the smoothed restriction (default 0.6)"},
      {"omega-hat", "base of the exponential level damping (default 0.7)"},
      {"amr", "true | false"},
      {"amr-start", "uniform depth adaptive runs start from (default 2)"},
      {"engine", "pipelined | reference"},
      {"target", "normalised residual to stop at (default 1e-8)"},
      {"max-cycles", "cycle budget (default 200)"},
      {"divergence", "normalised residual counted as divergence (default 1e4)"},
      {"rtilde-operator", "build the smoothed restriction from the material operator"},
      {"needle-axis", "bottom | left"},
      {"out", "CSV file, stdout if omitted"}};
  std::map<std::string, std::string> given;
  std::map<std::string, CLI::Option*> opts;
  for (const auto& [k, help] : keys) opts[k] = app.add_option(std::string("--") + k, given[k], help);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  adafac::ExperimentConfig cfg;
  try {
    if (!config_file.empty()) adafac::parse_config_file(cfg, config_file);
    for (const auto& [k, help] : keys)
      if (opts[k]->count() > 0) adafac::apply_setting(cfg, k, given[k]);
    adafac::validate(cfg);
  } catch (const adafac::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  }

  std::ofstream file;
  std::ostream* csv = &std::cout;
  if (!cfg.out.empty()) {
    file.open(cfg.out);
    if (!file) {
      std::cerr << "cannot write " << cfg.out << '\n';
      return 1;
    }
    csv = &file;
  }
  const adafac::RunResult r = adafac::run_experiment(cfg, csv);
  const adafac::CycleReport& last = r.history.back();
  std::cerr << adafac::to_string(cfg.variant) << ' ' << adafac::to_string(cfg.setup) << " k=" << cfg.k
            << " cycles=" << last.cycle << " res=" << last.res_l2h << " dofs=" << last.dofs << '\n';
  return static_cast<int>(r.status);
}
