// actuforge command line: solve, study, serve, fixture, summarize.
#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "actuforge/errors.hpp"
#include "actuforge/fixtures.hpp"
#include "actuforge/serialization.hpp"
#include "actuforge/service.hpp"
#include "actuforge/study.hpp"

namespace fs = std::filesystem;
using namespace actuforge;

namespace {

constexpr int kOptimal = 0;
constexpr int kInputError = 1;
constexpr int kInfeasible = 2;

TaskTrajectory load_tasks(const std::vector<std::string>& files) {
  TaskSet set;
  for (const auto& f : files) {
    if (!fs::exists(f)) throw ValidationError("tasks", "task file " + f + " exists");
    set.tasks.push_back(ingest_trajectory(f));
  }
  validate(set);
  return concatenate(set);
}

std::vector<DesignRule> load_rules(const std::string& file) {
  if (file.empty()) return {};
  std::ifstream in(file);
  if (!in) throw ValidationError("rules", "rules file " + file + " readable");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError("rules file is not valid JSON: " + std::string(e.what()));
  }
  return rules_from_json(doc);
}

Library load_library_checked(const std::string& path) {
  if (!fs::exists(path)) throw ValidationError("library", "library file " + path + " exists");
  return load_library(path);
}

void print_diagnosis(const InfeasibilityDiagnosis& d) {
  std::cout << "infeasible: " << d.reason << "\n";
  if (d.budget) std::printf("  budget: %.4f kg\n", *d.budget);
  if (d.min_feasible_mass_sum) std::printf("  minimum feasible motor mass sum: %.4f kg\n", *d.min_feasible_mass_sum);
  for (const auto& a : d.actuators) {
    std::printf("  actuator %d: %zu feasible cells", a.actuator + 1, a.feasible_cells);
    if (a.min_feasible_mass) {
      std::printf(", minimum feasible motor mass %.4f kg (%s)", *a.min_feasible_mass,
                  a.lightest_feasible_motor.value_or("?").c_str());
    } else {
      std::printf(", no feasible motor; peak torque %.3f N·m vs best %.3f N·m", a.peak_torque,
                  a.best_motor_peak_torque.value_or(0.0));
    }
    std::printf("\n");
  }
}

void write_text(const std::string& path, const std::string& text) {
  if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("out", "writable output path " + path);
  out << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Actuator and transmission co-selection for legged robots"};
  app.require_subcommand(1);

  // solve
  auto* solve_cmd = app.add_subcommand("solve", "Solve one design problem");
  std::string library_path, coupling, out_path, rules_path, solver_name = "auto";
  std::vector<std::string> task_files;
  std::optional<double> budget;
  double margin = 0.0;
  solve_cmd->add_option("--library", library_path, "Library JSON")->required();
  solve_cmd->add_option("--tasks", task_files, "Task CSV files, concatenated in order")->required();
  solve_cmd->add_option("--coupling", coupling, "Coupling id")->required();
  solve_cmd->add_option("--budget", budget, "Total motor mass budget [kg]");
  solve_cmd->add_option("--margin", margin, "Fraction of each operation polygon held back");
  solve_cmd->add_option("--rules", rules_path, "Rules JSON array");
  solve_cmd->add_option("--solver", solver_name, "auto, mckp or bnb")->check(CLI::IsMember({"auto", "mckp", "bnb"}));
  solve_cmd->add_option("--out", out_path, "Solution JSON")->required();

  // study
  auto* study_cmd = app.add_subcommand("study", "Run a budget x coupling grid study");
  std::string budgets_spec, couplings_spec = "all", study_out;
  int jobs = 0;
  bool force = false;
  study_cmd->add_option("--library", library_path, "Library JSON")->required();
  study_cmd->add_option("--tasks", task_files, "Task CSV files")->required();
  study_cmd->add_option("--budgets", budgets_spec, "min:step:max [kg]")->required();
  study_cmd->add_option("--couplings", couplings_spec, "\"all\" or comma-separated ids");
  study_cmd->add_option("--margin", margin, "Fraction of each operation polygon held back");
  study_cmd->add_option("--rules", rules_path, "Rules JSON array (mass budgets ignored)");
  study_cmd->add_option("--out", study_out, "Study directory")->required();
  study_cmd->add_option("--jobs", jobs, "Worker threads (default ACTUFORGE_JOBS or 1)");
  study_cmd->add_flag("--force", force, "Replace an existing study directory");

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP API");
  int port = 0;
  std::string data_dir, host = "127.0.0.1";
  serve_cmd->add_option("--port", port, "Port (default ACTUFORGE_PORT or 8080)");
  serve_cmd->add_option("--host", host, "Bind address");
  serve_cmd->add_option("--data-dir", data_dir, "Data directory (default ACTUFORGE_DATA_DIR)");
  serve_cmd->add_option("--jobs", jobs, "Workers per study (default ACTUFORGE_JOBS or 1)");

  // fixture
  auto* fixture_cmd = app.add_subcommand("fixture", "Write the fixture library and tasks");
  std::string fixture_out;
  fixture_cmd->add_option("--out", fixture_out, "Output directory")->required();

  // summarize
  auto* summarize_cmd = app.add_subcommand("summarize", "Verify a study directory and print its summary");
  std::string study_dir;
  summarize_cmd->add_option("--study", study_dir, "Study directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kInputError;
  }

  try {
    if (*solve_cmd) {
      DesignProblem p;
      p.library = load_library_checked(library_path);
      p.tasks = load_tasks(task_files);
      const auto* c = p.library.find_coupling(coupling);
      if (!c) throw ValidationError("coupling", "coupling " + coupling + " exists in library");
      p.coupling = *c;
      p.rules = load_rules(rules_path);
      if (budget) p.rules.push_back(MassBudgetRule{*budget});
      p.margin = margin;
      SolveOptions options;
      if (solver_name == "mckp") options.solver = SolverChoice::mckp;
      if (solver_name == "bnb") options.solver = SolverChoice::bnb;
      const DesignSolution s = solve(p, options);
      write_text(out_path, solution_to_json(s).dump(2) + "\n");
      if (!s.optimal()) {
        print_diagnosis(*s.diagnosis);
        return kInfeasible;
      }
      std::printf("optimal: objective %.9g kg·m², motor mass %.4f kg, coupling %s\n", s.objective_value,
                  s.total_motor_mass, s.coupling_id.c_str());
      for (std::size_t i = 0; i < s.choices.size(); ++i) {
        std::printf("  actuator %zu: %s, N = %g\n", i + 1, s.choices[i].motor_id.c_str(), s.choices[i].gear_ratio);
      }
      return kOptimal;
    }

    if (*study_cmd) {
      if (fs::exists(study_out) && !force) {
        std::cerr << "error: " << study_out << " already exists; pass --force to replace it\n";
        return kInputError;
      }
      StudyGrid g;
      g.base.library = load_library_checked(library_path);
      g.base.tasks = load_tasks(task_files);
      for (auto& r : load_rules(rules_path)) {
        if (!std::holds_alternative<MassBudgetRule>(r)) g.base.rules.push_back(std::move(r));
      }
      g.base.margin = margin;
      g.budgets = parse_budget_range(budgets_spec);
      g.couplings = parse_coupling_list(couplings_spec, g.base.library);
      validate(g);
      g.base.coupling = *g.base.library.find_coupling(g.couplings.front());
      const int workers = jobs > 0 ? jobs : service_options_from_environment().cell_parallelism;
      const StudyResult r = run_grid(g, workers);
      persist(r, study_out, force);
      std::printf("%zu cells (%zu budgets x %zu couplings) in %.2f s with %d workers\n", r.cells.size(),
                  r.budgets.size(), r.couplings.size(), r.wall_clock_seconds, workers);
      for (std::size_t c = 0; c < r.couplings.size(); ++c) {
        std::size_t feasible = 0;
        std::optional<double> first;
        for (std::size_t b = 0; b < r.budgets.size(); ++b) {
          if (r.cell(b, c).solution.optimal()) {
            ++feasible;
            if (!first) first = r.budgets[b];
          }
        }
        if (first) {
          std::printf("  %-12s %zu/%zu feasible, from %.4f kg\n", r.couplings[c].c_str(), feasible,
                      r.budgets.size(), *first);
        } else {
          std::printf("  %-12s infeasible at every budget\n", r.couplings[c].c_str());
        }
      }
      return 0;
    }

    if (*serve_cmd) {
      ServiceOptions o = service_options_from_environment();
      if (!data_dir.empty()) o.data_dir = data_dir;
      if (jobs > 0) o.cell_parallelism = jobs;
      std::cerr << "serving /api on " << host << " (data in " << o.data_dir.string() << ")\n";
      return serve(o, port, host);
    }

    if (*fixture_cmd) {
      write_fixtures(fixture_out);
      std::printf("wrote library.json, walking.csv, lifting.csv to %s\n", fixture_out.c_str());
      return 0;
    }

    if (*summarize_cmd) {
      const StudyResult r = load_study(study_dir);
      std::cout << summarize(r).dump(2) << "\n";
      return 0;
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const StudyError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInputError;
  }
  return kInputError;
}
