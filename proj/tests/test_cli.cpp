#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>

#include "actuforge/fixtures.hpp"
#include "actuforge/serialization.hpp"
#include "actuforge/study.hpp"
#include "support.hpp"

using namespace actuforge;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run run_cli(const std::string& args, const fs::path& dir) {
  const fs::path log = dir / "cli.log";
  const std::string cmd = std::string(ACTUFORGE_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int raw = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  std::ifstream in(log);
  r.out.assign(std::istreambuf_iterator<char>(in), {});
  return r;
}

struct CliFixture : ::testing::Test {
  fs::path dir;
  std::string tasks;
  std::string lib;

  void SetUp() override {
    dir = testing_support::scratch_dir(std::string("cli-") +
                                       ::testing::UnitTest::GetInstance()->current_test_info()->name());
    write_fixtures(dir);
    lib = (dir / "library.json").string();
    tasks = (dir / "walking.csv").string() + " " + (dir / "lifting.csv").string();
  }
};

}  // namespace

TEST_F(CliFixture, SolveOptimalWritesSolution) {
  const auto out = dir / "sol.json";
  auto r = run_cli("solve --library " + lib + " --tasks " + tasks + " --coupling serial --budget 4.0 --out " +
                       out.string(),
                   dir);
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("optimal"), std::string::npos);
  std::ifstream in(out);
  auto s = solution_from_json(json::parse(in));
  EXPECT_TRUE(s.optimal());
  EXPECT_LE(s.total_motor_mass, 4.0);
}

TEST_F(CliFixture, SolveInfeasibleExitsTwoWithDiagnosis) {
  auto r = run_cli("solve --library " + lib + " --tasks " + tasks + " --coupling serial --budget 0.001 --out " +
                       (dir / "sol.json").string(),
                   dir);
  EXPECT_EQ(r.code, 2) << r.out;
  EXPECT_NE(r.out.find("infeasible"), std::string::npos);
  EXPECT_NE(r.out.find("minimum feasible motor mass sum"), std::string::npos);
  EXPECT_NE(r.out.find("actuator 5"), std::string::npos);
}

TEST_F(CliFixture, InputErrorsExitOne) {
  EXPECT_EQ(run_cli("solve --library " + (dir / "none.json").string() + " --tasks " + tasks +
                        " --coupling serial --out " + (dir / "s.json").string(),
                    dir)
                .code,
            1);
  EXPECT_EQ(run_cli("solve --library " + lib + " --tasks " + tasks + " --coupling nope --out " +
                        (dir / "s.json").string(),
                    dir)
                .code,
            1);
  std::ofstream(dir / "bad.csv") << "t,w1,tau1\n0,1\n";
  auto r = run_cli("solve --library " + lib + " --tasks " + (dir / "bad.csv").string() +
                       " --coupling serial --out " + (dir / "s.json").string(),
                   dir);
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("line 2"), std::string::npos) << r.out;
}

TEST_F(CliFixture, StudyRefusesExistingDirectoryWithoutForce) {
  const auto out = (dir / "study").string();
  const std::string args =
      "study --library " + lib + " --tasks " + tasks + " --budgets 3.0:1:3.0 --couplings serial --out " + out;
  auto r = run_cli(args, dir);
  ASSERT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("1 cells"), std::string::npos) << r.out;
  auto loaded = load_study(out);
  EXPECT_EQ(loaded.cells.size(), 1u);
  const auto digest = study_digest(out);

  auto again = run_cli(args, dir);
  EXPECT_EQ(again.code, 1);
  EXPECT_NE(again.out.find("--force"), std::string::npos);
  EXPECT_EQ(study_digest(out), digest);

  EXPECT_EQ(run_cli(args + " --force", dir).code, 0);
  EXPECT_EQ(study_digest(out), digest);

  auto sum = run_cli("summarize --study " + out, dir);
  EXPECT_EQ(sum.code, 0);
  EXPECT_NE(sum.out.find("\"curves\""), std::string::npos);
}

TEST_F(CliFixture, StudyMatchesInProcessGrid) {
  const auto out = dir / "study";
  auto r = run_cli("study --library " + lib + " --tasks " + tasks +
                       " --budgets 2.2:0.6:4.0 --couplings serial,par-23 --jobs 2 --out " + out.string(),
                   dir);
  ASSERT_EQ(r.code, 0) << r.out;
  StudyGrid g;
  g.base.library = load_library(dir / "library.json");
  g.base.tasks = concatenate(TaskSet{{ingest_trajectory(dir / "walking.csv"), ingest_trajectory(dir / "lifting.csv")}});
  g.budgets = parse_budget_range("2.2:0.6:4.0");
  g.couplings = {"serial", "par-23"};
  g.base.coupling = *g.base.library.find_coupling("serial");
  const auto mine = dir / "mine";
  persist(run_grid(g, 1), mine);
  EXPECT_EQ(study_digest(mine), study_digest(out));
}
