#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "adafac/bench.hpp"

using namespace adafac;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(ADAFAC_BENCH_EXE) + " " + args + " > /dev/null 2>&1";
  const int st = std::system(cmd.c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

std::string temp_path(const std::string& name) { return "/tmp/adafac_test_" + std::to_string(::getpid()) + "_" + name; }

std::vector<std::string> lines_of(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

ExperimentConfig small(SolverVariant v) {
  ExperimentConfig c;
  c.variant = v;
  c.lmax = 3;
  c.max_cycles = 60;
  return c;
}

}  // namespace

TEST_CASE("csv output starts with the header and has one row per cycle") {
  std::ostringstream os;
  ExperimentConfig c = small(SolverVariant::AdaFacJac);
  c.max_cycles = 5;
  const RunResult r = run_experiment(c, &os);
  const auto lines = lines_of(os.str());
  REQUIRE(lines.size() == r.history.size() + 1);
  CHECK(lines[0] == "cycle,res_l2h,res_linf,dofs,updates_cumulative,regridded");
  CHECK(lines[1].rfind("0,1,1,676,0,0", 0) == 0);
  CHECK(r.history.back().cycle == 5);
  CHECK(r.status == RunStatus::MaxCycles);
}

TEST_CASE("config parsing") {
  ExperimentConfig c;
  std::istringstream in("# comment\nsetup = jump\nk=3\nvariant=adafac-pi # trailing\nflavor=boxmg\namr=true\n\nlmax=5\n");
  parse_config_stream(c, in);
  CHECK(c.setup == SetupKind::HalfDomainJump);
  CHECK(c.k == 3);
  CHECK(c.variant == SolverVariant::AdaFacPI);
  CHECK(c.flavor == OperatorFlavor::BoxMG);
  CHECK(c.amr);
  CHECK(c.lmax == 5);
  for (const char* bad : {"nokey\n", "variant=foo\n", "lmax=abc\n", "omega=1x\n", "colour=red\n", "amr=maybe\n"}) {
    ExperimentConfig d;
    std::istringstream b(bad);
    CHECK_THROWS_AS(parse_config_stream(d, b), ConfigError);
  }
  ExperimentConfig m;
  m.variant = SolverVariant::MultiplicativeV10;
  m.engine = EngineKind::Reference;
  m.lmax = 3;
  CHECK_THROWS_AS(validate(m), ConfigError);
  m.lmax = 2;
  CHECK_NOTHROW(validate(m));
  ExperimentConfig n;
  n.lmin = 0;
  CHECK_THROWS_AS(validate(n), ConfigError);
}

TEST_CASE("command line exit codes") {
  CHECK(run_cli("--variant adafac-jac --lmax 2") == 0);
  CHECK(run_cli("--variant adafac-jac --lmax 3 --max-cycles 2") == 2);
  CHECK(run_cli("--variant additive --lmax 2 --setup checkerboard --k 2") == 3);
  CHECK(run_cli("--variant nonsense") == 1);
  CHECK(run_cli("--lmax x") == 1);
  CHECK(run_cli("--config /nonexistent/file.cfg") == 1);
  CHECK(run_cli("--unknown-flag 3") == 1);
}

TEST_CASE("config file values are overridden by explicit flags") {
  const std::string cfg = temp_path("run.cfg"), out = temp_path("out.csv");
  {
    std::ofstream f(cfg);
    f << "variant=adafac-jac\nlmax=3\nmax-cycles=1\nout=" << out << "\n";
  }
  CHECK(run_cli("--config " + cfg + " --max-cycles 3") == 2);
  std::ifstream in(out);
  std::stringstream ss;
  ss << in.rdbuf();
  CHECK(lines_of(ss.str()).size() == 5);
  std::remove(cfg.c_str());
  std::remove(out.c_str());
}

TEST_CASE("pipelined and reference engines write the same history") {
  for (bool amr : {false, true})
    for (SolverVariant v : {SolverVariant::AdaFacJac, SolverVariant::AdaFacPI, SolverVariant::BPX}) {
      ExperimentConfig c = small(v);
      c.setup = SetupKind::HalfDomainJump;
      c.k = 2;
      c.flavor = OperatorFlavor::BoxMG;
      c.amr = amr;
      c.lmax = amr ? 4 : 3;
      c.max_cycles = 25;
      c.engine = EngineKind::Pipelined;
      const RunResult a = run_experiment(c);
      c.engine = EngineKind::Reference;
      const RunResult b = run_experiment(c);
      INFO("amr=" << amr << " variant=" << to_string(v));
      REQUIRE(a.history.size() == b.history.size());
      double worst = 0.0;
      int regrids = 0;
      for (std::size_t k = 0; k < a.history.size(); ++k) {
        worst = std::max(worst, std::abs(a.history[k].res_l2h - b.history[k].res_l2h) / b.history[k].res_l2h);
        CHECK(a.history[k].dofs == b.history[k].dofs);
        CHECK(a.history[k].updates_cumulative == b.history[k].updates_cumulative);
        CHECK(a.history[k].regridded == b.history[k].regridded);
        regrids += b.history[k].regridded;
      }
      CHECK(worst < 1e-9);
      if (amr) CHECK(regrids > 0);
      CHECK(a.status == b.status);
    }
}

TEST_CASE("counted updates on a uniform grid match the arithmetic count") {
  for (SolverVariant v : {SolverVariant::Additive, SolverVariant::AdaFacJac, SolverVariant::AdaFacPI, SolverVariant::AFACc}) {
    ExperimentConfig c = small(v);
    c.lmax = 3;
    c.max_cycles = 4;
    const RunResult r = run_experiment(c);
    CHECK(r.history.back().updates_cumulative == 4 * regular_updates_per_cycle(1, 3, v));
  }
}

TEST_CASE("adaptive runs stop refining and then converge") {
  ExperimentConfig c;
  c.variant = SolverVariant::AdaFacJac;
  c.amr = true;
  c.lmax = 4;
  c.max_cycles = 200;
  const RunResult r = run_experiment(c);
  CHECK(r.status == RunStatus::Converged);
  CHECK(r.history.back().res_l2h < 1e-8);
  CHECK(r.history.back().dofs > 676);
  CHECK_FALSE(r.history.back().regridded);
}

TEST_CASE("update counting") {
  CHECK(regular_level_updates(8) == 43033600u);
  // forty cycles on eight levels cost more than 1e9 updates
  CHECK(40 * regular_updates_per_cycle(1, 8, SolverVariant::Additive) > 1000000000u);
  CHECK(regular_updates_per_cycle(1, 1, SolverVariant::Additive) == 4u);
  SolverConfig c;
  c.variant = SolverVariant::AdaFacJac;
  Spacetree t = Spacetree::build_regular(2, 4);
  CHECK(count_updates(t, c) == regular_updates_per_cycle(1, 2, SolverVariant::AdaFacJac));
  t.refine_cells({{2, 4, 4}});
  Problem p(std::move(t), EpsilonField{}, c);
  CHECK(count_updates(p.tree(), c) == ReferenceEngine(p).cycle().updates);
}
