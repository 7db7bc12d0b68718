#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "actuforge/analysis.hpp"
#include "actuforge/optimizer.hpp"

namespace actuforge {

inline constexpr int kStudySchemaVersion = 1;

/// Budgets x couplings over one base problem. The base problem's own mass
/// budget rules are replaced by each grid budget; its coupling is ignored.
struct StudyGrid {
  std::vector<double> budgets;
  std::vector<std::string> couplings;
  DesignProblem base;
  LegKinematics kinematics;
};

void validate(const StudyGrid& grid);

/// min, min+step, ... up to max inclusive; values rounded to 1e-6 kg.
std::vector<double> budget_range(double min, double step, double max);
/// "min:step:max"
std::vector<double> parse_budget_range(std::string_view spec);
/// "all" or a comma-separated id list.
std::vector<std::string> parse_coupling_list(std::string_view spec, const Library& library);

struct CellSummary {
  double trace = 0.0;  // per-sample trace, kg·m²
  std::vector<std::string> task_names;
  std::vector<double> copper_energy;  // J per task
  double total_copper = 0.0;          // J
  double tcp_volume = 0.0;
  std::optional<double> fcp_volume;   // nominal stance
  bool operator==(const CellSummary&) const = default;
};

struct StudyCell {
  double budget = 0.0;
  std::string coupling_id;
  DesignSolution solution;
  std::optional<CellSummary> summary;
  std::string error;  // non-empty when the cell failed outright
  bool pareto = false;
  bool operator==(const StudyCell&) const = default;
};

struct StudyResult {
  std::vector<double> budgets;
  std::vector<std::string> couplings;
  std::vector<StudyCell> cells;  // index = budget_index * couplings.size() + coupling_index
  std::string inputs_hash;
  nlohmann::json inputs;
  double wall_clock_seconds = 0.0;  // kept in memory only

  const StudyCell& cell(std::size_t budget_index, std::size_t coupling_index) const {
    return cells[budget_index * couplings.size() + coupling_index];
  }
};

std::string sha256_hex(std::string_view bytes);

/// Canonical description of every input that influences the results.
nlohmann::json canonical_inputs(const StudyGrid& grid);
std::string inputs_hash(const StudyGrid& grid);
StudyGrid grid_from_inputs(const nlohmann::json& inputs);

using ProgressCallback = std::function<void(std::size_t done, std::size_t total)>;

/// Solves every cell; results do not depend on `parallelism`.
StudyResult run_grid(const StudyGrid& grid, int parallelism = 1, ProgressCallback progress = {});

/// Marks the Pareto-optimal feasible cells over
/// (total motor mass, objective, total copper energy).
void annotate_pareto(StudyResult& result);

nlohmann::json cell_to_json(const StudyCell& cell);
StudyCell cell_from_json(const nlohmann::json& doc);
std::string cell_file_name(double budget, const std::string& coupling);

/// Writes manifest.json, inputs.json, summary.tables and cells/ into `dir`
/// through a temporary sibling directory renamed into place.
void persist(const StudyResult& result, const std::filesystem::path& dir, bool force = false);
/// Verifies the schema version, the inputs hash and every cell checksum.
StudyResult load_study(const std::filesystem::path& dir);
/// Throws StudyError when `grid` differs from the inputs the study ran on.
void check_inputs(const StudyResult& result, const StudyGrid& grid);
/// SHA-256 over the persisted files in a fixed order.
std::string study_digest(const std::filesystem::path& dir);

nlohmann::json summarize(const StudyResult& result);

/// Smallest grid budget from which a coupling's objective no longer changes.
std::optional<double> saturation_budget(const StudyResult& result, const std::string& coupling,
                                        double relative_tolerance = 0.0);

}  // namespace actuforge
