#include <gtest/gtest.h>

#include <fstream>

#include "actuforge/errors.hpp"
#include "actuforge/fixtures.hpp"
#include "actuforge/serialization.hpp"
#include "actuforge/study.hpp"
#include "support.hpp"

using namespace actuforge;
namespace fs = std::filesystem;

namespace {

StudyGrid small_grid() {
  StudyGrid g;
  g.base.library = fixture_library();
  g.base.tasks = fixture_tasks();
  g.budgets = budget_range(2.2, 0.3, 4.0);
  g.couplings = {"serial", "par-23", "par-34"};
  g.base.coupling = *g.base.library.find_coupling("serial");
  return g;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST(BudgetRange, InclusiveEndpoints) {
  auto b = budget_range(2.2, 0.075, 4.0);
  ASSERT_EQ(b.size(), 25u);
  EXPECT_DOUBLE_EQ(b.front(), 2.2);
  EXPECT_DOUBLE_EQ(b.back(), 4.0);
  EXPECT_DOUBLE_EQ(b[1], 2.275);
  EXPECT_EQ(parse_budget_range("3.0:1:3.0"), std::vector<double>{3.0});
  EXPECT_THROW(parse_budget_range("3.0:1"), ValidationError);
  EXPECT_THROW(parse_budget_range("3.0:0:4"), ValidationError);
  EXPECT_THROW(parse_budget_range("a:1:4"), ValidationError);
}

TEST(CouplingList, AllAndExplicit) {
  auto lib = fixture_library();
  EXPECT_EQ(parse_coupling_list("all", lib).size(), 8u);
  EXPECT_EQ(parse_coupling_list("serial,par-12", lib), (std::vector<std::string>{"serial", "par-12"}));
  EXPECT_THROW(parse_coupling_list("serial,nope", lib), ValidationError);
  EXPECT_THROW(parse_coupling_list("serial,,par-12", lib), ValidationError);
}

TEST(Grid, ValidationRejectsBadGrids) {
  auto g = small_grid();
  g.budgets = {3.0, 2.0};
  EXPECT_THROW(validate(g), ValidationError);
  g = small_grid();
  g.couplings.clear();
  EXPECT_THROW(validate(g), ValidationError);
  g = small_grid();
  g.couplings.push_back("serial");
  EXPECT_THROW(validate(g), ValidationError);
}

TEST(Grid, SingleCellEqualsDirectSolve) {
  StudyGrid g = small_grid();
  g.budgets = {3.0};
  g.couplings = {"par-23"};
  auto r = run_grid(g);
  ASSERT_EQ(r.cells.size(), 1u);
  DesignProblem p = g.base;
  p.coupling = *p.library.find_coupling("par-23");
  p.rules.push_back(MassBudgetRule{3.0});
  auto s = solve(p);
  EXPECT_EQ(r.cells[0].solution, s);
  ASSERT_TRUE(r.cells[0].summary);
  EXPECT_NEAR(r.cells[0].summary->trace * static_cast<double>(p.tasks.sample_count()), s.objective_value,
              1e-9 * s.objective_value);
  auto sum = summarize(r);
  EXPECT_EQ(sum["curves"].size(), 1u);
  EXPECT_EQ(sum["curves"][0]["points"].size(), 1u);
}

TEST(Grid, DeterministicAcrossParallelism) {
  auto g = small_grid();
  auto a = run_grid(g, 1);
  auto b = run_grid(g, 3);
  ASSERT_EQ(a.cells.size(), b.cells.size());
  for (std::size_t i = 0; i < a.cells.size(); ++i) EXPECT_EQ(a.cells[i], b.cells[i]);
  EXPECT_EQ(a.inputs_hash, b.inputs_hash);
}

TEST(Grid, InfeasibleColumnIsFlaggedAndMonotone) {
  auto g = small_grid();
  auto r = run_grid(g);
  auto sum = summarize(r);
  for (const auto& curve : sum["curves"]) {
    EXPECT_TRUE(curve["trace_monotone_non_increasing"].get<bool>());
    EXPECT_TRUE(curve["feasibility_monotone"].get<bool>());
    EXPECT_EQ(curve["all_infeasible"].get<bool>(), curve["coupling_id"] == "par-34");
  }
  for (std::size_t b = 0; b < r.budgets.size(); ++b) {
    const auto& cell = r.cell(b, 2);
    EXPECT_FALSE(cell.solution.optimal());
    EXPECT_TRUE(cell.solution.diagnosis.has_value());
    EXPECT_TRUE(cell.error.empty());
  }
}

TEST(Grid, ParetoMatchesDominationOracle) {
  auto r = run_grid(small_grid());
  std::vector<std::size_t> feasible;
  for (std::size_t i = 0; i < r.cells.size(); ++i) {
    if (r.cells[i].solution.optimal()) feasible.push_back(i);
  }
  auto obj = [&](std::size_t i) {
    const auto& c = r.cells[i];
    return std::array<double, 3>{c.solution.total_motor_mass, c.solution.objective_value, c.summary->total_copper};
  };
  for (std::size_t i : feasible) {
    bool dominated = false;
    for (std::size_t j : feasible) {
      auto a = obj(j), b = obj(i);
      bool le = true, lt = false;
      for (int k = 0; k < 3; ++k) {
        le = le && a[k] <= b[k];
        lt = lt || a[k] < b[k];
      }
      dominated = dominated || (le && lt);
    }
    EXPECT_EQ(r.cells[i].pareto, !dominated) << i;
  }
}

TEST(Persist, RoundTripAndDigest) {
  auto dir = testing_support::scratch_dir("persist") / "study";
  auto r = run_grid(small_grid());
  persist(r, dir);
  EXPECT_TRUE(fs::exists(dir / "manifest.json"));
  EXPECT_TRUE(fs::exists(dir / "summary.tables"));
  EXPECT_TRUE(fs::exists(dir / "cells" / "2.2_serial.result"));
  auto back = load_study(dir);
  ASSERT_EQ(back.cells.size(), r.cells.size());
  for (std::size_t i = 0; i < r.cells.size(); ++i) EXPECT_EQ(back.cells[i], r.cells[i]);
  EXPECT_EQ(back.inputs_hash, r.inputs_hash);
  EXPECT_NO_THROW(check_inputs(back, small_grid()));
  const auto digest = study_digest(dir);
  EXPECT_EQ(digest.size(), 64u);

  auto again = testing_support::scratch_dir("persist2") / "study";
  persist(run_grid(small_grid(), 2), again);
  EXPECT_EQ(study_digest(again), digest);

  EXPECT_THROW(persist(r, dir), StudyError);
  EXPECT_NO_THROW(persist(r, dir, true));
}

TEST(Persist, DetectsTamperingAndStaleInputs) {
  auto dir = testing_support::scratch_dir("tamper") / "study";
  auto r = run_grid(small_grid());
  persist(r, dir);
  {
    auto g = small_grid();
    g.base.library.motors[0].mass += 0.01;
    EXPECT_THROW(check_inputs(r, g), StudyError);
  }
  const fs::path cell = dir / "cells" / "2.5_par-23.result";
  std::string bytes = slurp(cell);
  bytes[bytes.size() / 2] = bytes[bytes.size() / 2] == '1' ? '2' : '1';
  std::ofstream(cell, std::ios::binary | std::ios::trunc) << bytes;
  try {
    load_study(dir);
    FAIL() << "tampered cell accepted";
  } catch (const StudyError& e) {
    EXPECT_NE(std::string(e.what()).find("2.5_par-23.result"), std::string::npos);
  }
  fs::remove(cell);
  EXPECT_THROW(load_study(dir), StudyError);
}

TEST(Persist, RejectsOtherSchemaVersions) {
  auto dir = testing_support::scratch_dir("schema") / "study";
  persist(run_grid(small_grid()), dir);
  auto manifest = json::parse(slurp(dir / "manifest.json"));
  manifest["schema_version"] = 0;
  std::ofstream(dir / "manifest.json", std::ios::trunc) << manifest.dump();
  try {
    load_study(dir);
    FAIL();
  } catch (const StudyError& e) {
    EXPECT_NE(std::string(e.what()).find("schema version 0"), std::string::npos);
  }
}

TEST(Persist, ChangedInputsFileIsRejected) {
  auto dir = testing_support::scratch_dir("inputs") / "study";
  persist(run_grid(small_grid()), dir);
  auto inputs = json::parse(slurp(dir / "inputs.json"));
  inputs["margin"] = 0.05;
  std::ofstream(dir / "inputs.json", std::ios::trunc) << inputs.dump();
  EXPECT_THROW(load_study(dir), StudyError);
}

TEST(Inputs, GridRebuildsFromCanonicalInputs) {
  auto g = small_grid();
  auto back = grid_from_inputs(canonical_inputs(g));
  EXPECT_EQ(inputs_hash(back), inputs_hash(g));
  EXPECT_EQ(back.base.library, g.base.library);
  EXPECT_EQ(back.base.tasks, g.base.tasks);
}

TEST(Saturation, FindsFirstUnchangingBudget) {
  auto g = small_grid();
  g.budgets = budget_range(3.5, 0.5, 6.0);
  g.couplings = {"serial"};
  auto r = run_grid(g);
  auto s = saturation_budget(r, "serial");
  ASSERT_TRUE(s);
  const double last = r.cells.back().solution.objective_value;
  for (std::size_t b = 0; b < r.budgets.size(); ++b) {
    if (r.budgets[b] >= *s) EXPECT_EQ(r.cell(b, 0).solution.objective_value, last);
  }
  EXPECT_THROW(saturation_budget(r, "par-12"), ValidationError);
}

TEST(Hashing, KnownSha256) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
