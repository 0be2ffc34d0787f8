#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iomanip>
#include <memory>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "adafac/amr.hpp"
#include "adafac/pipeline.hpp"
#include "adafac/solvers.hpp"

namespace adafac {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class EngineKind { Pipelined, Reference };

struct ExperimentConfig {
  SetupKind setup = SetupKind::Poisson;
  int k = 0;
  SolverVariant variant = SolverVariant::AdaFacJac;
  OperatorFlavor flavor = OperatorFlavor::Geometric;
  int lmax = 4;
  int lmin = 1;
  double omega = 0.6;
  double omega_tilde = 0.6;
  double omega_hat = 0.7;
  bool amr = false;
  int amr_start = 2;  // uniform depth the adaptive runs start from
  EngineKind engine = EngineKind::Pipelined;
  double target = 1e-8;
  int max_cycles = 200;
  double divergence = 1e4;
  bool rtilde_true_operator = false;
  NeedleAxis needle_axis = NeedleAxis::Bottom;
  std::string out;
};

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "off" || v == "no") return false;
  throw ConfigError("invalid boolean for " + key + ": " + v);
}

inline double parse_double(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &pos);
  } catch (const std::exception&) {
    throw ConfigError("invalid number for " + key + ": " + v);
  }
  if (pos != v.size() || !std::isfinite(d)) throw ConfigError("invalid number for " + key + ": " + v);
  return d;
}

inline int parse_int(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  long d = 0;
  try {
    d = std::stol(v, &pos);
  } catch (const std::exception&) {
    throw ConfigError("invalid integer for " + key + ": " + v);
  }
  if (pos != v.size()) throw ConfigError("invalid integer for " + key + ": " + v);
  return static_cast<int>(d);
}

// Applies one key=value setting. Keys match the command line flags.
inline void apply_setting(ExperimentConfig& c, const std::string& key, const std::string& value) {
  try {
    if (key == "setup") c.setup = parse_setup(value);
    else if (key == "k") c.k = parse_int(key, value);
    else if (key == "variant") c.variant = parse_variant(value);
    else if (key == "flavor") c.flavor = parse_flavor(value);
    else if (key == "lmax") c.lmax = parse_int(key, value);
    else if (key == "lmin") c.lmin = parse_int(key, value);
    else if (key == "omega") c.omega = parse_double(key, value);
    else if (key == "omega-tilde") c.omega_tilde = parse_double(key, value);
    else if (key == "omega-hat") c.omega_hat = parse_double(key, value);
    else if (key == "amr") c.amr = parse_bool(key, value);
    else if (key == "amr-start") c.amr_start = parse_int(key, value);
    else if (key == "engine") {
      if (value == "pipelined") c.engine = EngineKind::Pipelined;
      else if (value == "reference") c.engine = EngineKind::Reference;
      else throw ConfigError("unknown engine: " + value);
    } else if (key == "target") c.target = parse_double(key, value);
    else if (key == "max-cycles") c.max_cycles = parse_int(key, value);
    else if (key == "divergence") c.divergence = parse_double(key, value);
    else if (key == "rtilde-operator") {
      if (value == "unit") c.rtilde_true_operator = false;
      else if (value == "true") c.rtilde_true_operator = true;
      else throw ConfigError("unknown rtilde-operator: " + value);
    } else if (key == "needle-axis") {
      if (value == "bottom") c.needle_axis = NeedleAxis::Bottom;
      else if (value == "left") c.needle_axis = NeedleAxis::Left;
      else throw ConfigError("unknown needle-axis: " + value);
    } else if (key == "out") c.out = value;
    else throw ConfigError("unknown key: " + key);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

inline void validate(const ExperimentConfig& c) {
  if (c.lmin < 1) throw ConfigError("lmin must be at least 1");
  if (c.lmax < c.lmin) throw ConfigError("lmax must not be below lmin");
  if (c.lmax > 9) throw ConfigError("lmax above 9 is not supported");
  if (c.k < 0) throw ConfigError("k must be non-negative");
  if (!(c.omega > 0.0) || !(c.omega_tilde >= 0.0) || !(c.omega_hat > 0.0)) throw ConfigError("damping parameters must be positive");
  if (!(c.target > 0.0)) throw ConfigError("target must be positive");
  if (c.max_cycles < 0) throw ConfigError("max-cycles must be non-negative");
  if (c.variant == SolverVariant::MultiplicativeV10) {
    if (c.amr) throw ConfigError("multiplicative runs need a static two-level grid");
    if (c.lmax != c.lmin + 1) throw ConfigError("multiplicative runs need lmax = lmin + 1");
    if (c.engine == EngineKind::Pipelined) throw ConfigError("multiplicative runs use the reference engine");
  }
  if (c.amr && c.amr_start < c.lmin) throw ConfigError("amr-start must not be below lmin");
}

// Flat key=value file, '#' starts a comment.
inline void parse_config_stream(ExperimentConfig& c, std::istream& in) {
  std::string line;
  int no = 0;
  while (std::getline(in, line)) {
    ++no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      const auto e = s.find_last_not_of(" \t\r");
      return s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(no) + ": expected key=value");
    apply_setting(c, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

inline void parse_config_file(ExperimentConfig& c, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  parse_config_stream(c, in);
}

struct CycleReport {
  int cycle = 0;
  double res_l2h = 0.0;
  double res_linf = 0.0;
  std::size_t dofs = 0;
  std::uint64_t updates_cumulative = 0;
  bool regridded = false;
};

enum class RunStatus { Converged = 0, MaxCycles = 2, Diverged = 3 };

struct RunResult {
  RunStatus status = RunStatus::MaxCycles;
  std::vector<CycleReport> history;
  std::uint64_t updates = 0;
};

inline constexpr const char* kCsvHeader = "cycle,res_l2h,res_linf,dofs,updates_cumulative,regridded";

inline void write_csv_row(std::ostream& os, const CycleReport& r) {
  os << r.cycle << ',' << std::setprecision(17) << r.res_l2h << ',' << r.res_linf << ',' << r.dofs << ','
     << r.updates_cumulative << ',' << (r.regridded ? 1 : 0) << '\n';
}

inline SolverConfig solver_config(const ExperimentConfig& c) {
  SolverConfig s;
  s.variant = c.variant;
  s.flavor = c.flavor;
  s.omega = c.omega;
  s.omega_tilde = c.omega_tilde;
  s.omega_hat = c.omega_hat;
  s.lmin = c.lmin;
  s.rtilde_true_operator = c.rtilde_true_operator;
  return s;
}

inline EpsilonField field_of(const ExperimentConfig& c) {
  EpsilonField f;
  f.kind = c.setup;
  f.k = c.k;
  f.needle_axis = c.needle_axis;
  return f;
}

inline Problem make_problem(const ExperimentConfig& c) {
  const int start = c.amr ? std::min(c.lmax, std::max(c.amr_start, c.lmin)) : c.lmax;
  return Problem(Spacetree::build_regular(start, c.lmax, boundary_value), field_of(c), solver_config(c));
}

// Cycles until the normalised residual drops below the target, diverges
// or the cycle budget is spent. Row n holds the residual of the n-th
// iterate and the updates spent to reach it.
inline RunResult run_experiment(const ExperimentConfig& c, Problem& p, std::ostream* csv = nullptr,
                                const std::function<void(const CycleReport&)>& on_row = {}) {
  validate(c);
  std::unique_ptr<PipelinedEngine> pipe;
  std::unique_ptr<ReferenceEngine> ref;
  if (c.engine == EngineKind::Pipelined) pipe = std::make_unique<PipelinedEngine>(p);
  else ref = std::make_unique<ReferenceEngine>(p);
  if (csv) *csv << kCsvHeader << '\n';

  RefinePolicy pol;
  pol.lmax = c.lmax;
  bool amr_active = c.amr;
  int empty_regrids = 0;
  ResidualNorms r0;
  RunResult res;
  for (int n = 0;; ++n) {
    const CycleStats st = pipe ? pipe->step() : ref->cycle();
    if (n == 0) r0 = st.residual;
    CycleReport row;
    row.cycle = n;
    row.res_l2h = r0.l2h > 0.0 ? st.residual.l2h / r0.l2h : 0.0;
    row.res_linf = r0.linf > 0.0 ? st.residual.linf / r0.linf : 0.0;
    row.dofs = p.tree().count_dofs();
    row.updates_cumulative = res.updates;

    RunStatus done = RunStatus::MaxCycles;
    bool stop = false;
    if (!std::isfinite(row.res_l2h) || row.res_l2h > c.divergence) {
      done = RunStatus::Diverged;
      stop = true;
    } else if (row.res_l2h < c.target && !amr_active) {
      done = RunStatus::Converged;
      stop = true;
    } else if (n >= c.max_cycles) {
      stop = true;
    }
    if (!stop && amr_active) {
      // the indicator must see the corrected iterate
      if (pipe) pipe->flush();
      Marks m = merge(mark_boundary(p.tree(), n, c.lmax), mark_curvature(p.tree(), pol));
      const std::size_t refined = apply_refinement(p, m, c.lmax);
      row.regridded = refined > 0;
      empty_regrids = refined > 0 ? 0 : empty_regrids + 1;
      if (empty_regrids >= 2) amr_active = false;
    }
    res.updates += st.updates;
    res.history.push_back(row);
    if (csv) {
      write_csv_row(*csv, row);
      csv->flush();
    }
    if (on_row) on_row(row);
    if (stop) {
      res.status = done;
      return res;
    }
  }
}

inline RunResult run_experiment(const ExperimentConfig& c, std::ostream* csv = nullptr) {
  validate(c);
  Problem p = make_problem(c);
  return run_experiment(c, p, csv);
}

// Updates of one cycle on the given tree: one per active vertex and solved
// equation on every level from lmin, damping equations included.
inline std::uint64_t count_updates(const Spacetree& t, const SolverConfig& c) {
  std::uint64_t n = 0;
  for (int l = c.lmin; l <= t.depth(); ++l)
    for (const VertexRecord& v : t.level(l).vertices) {
      if (v.active()) ++n;
      if (kernel::has_damping_equation(c, l, v)) ++n;
    }
  return n;
}

// Non-Dirichlet vertices of a virtual regular level: one Jacobi sweep.
inline std::uint64_t regular_level_updates(int l) {
  const std::uint64_t m = static_cast<std::uint64_t>(pow3(l) - 1);
  return m * m;
}

// Update count of one cycle on a uniform hierarchy lmin..lmax, computed
// arithmetically: interior vertices per solved equation and level.
inline std::uint64_t regular_updates_per_cycle(int lmin, int lmax, SolverVariant v) {
  std::uint64_t n = 0;
  for (int l = lmin; l <= lmax; ++l) {
    n += regular_level_updates(l);
    if (v == SolverVariant::AdaFacJac && l < lmax) n += regular_level_updates(l);
  }
  return n;
}

}  // namespace adafac
