#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "actuforge/bilp.hpp"
#include "actuforge/library.hpp"
#include "actuforge/polygon.hpp"
#include "actuforge/tasking.hpp"

namespace actuforge {

/// A library component placed on one actuator. Text form is
/// "<motor_id>@<actuator>" or "gear:<ratio>@<actuator>", actuators 1-based.
struct ComponentRef {
  enum class Kind { motor, gear };
  Kind kind = Kind::motor;
  std::string motor_id;
  double gear_ratio = 0.0;
  int actuator = 1;

  static ComponentRef parse(std::string_view text);
  std::string to_string() const;
  bool operator==(const ComponentRef&) const = default;
};

struct MassBudgetRule {
  double limit = 0.0;  // kg
  bool operator==(const MassBudgetRule&) const = default;
};

/// If `if_used` is selected then `then_used` is selected too.
struct RequiresRule {
  ComponentRef if_used;
  ComponentRef then_used;
  bool operator==(const RequiresRule&) const = default;
};

struct MutexRule {
  ComponentRef first;
  ComponentRef second;
  bool operator==(const MutexRule&) const = default;
};

/// Copper energy of one actuator's motor, per task segment.
struct CopperEnergyLimitRule {
  int actuator = 1;    // 1-based
  double limit = 0.0;  // J
  bool operator==(const CopperEnergyLimitRule&) const = default;
};

using DesignRule = std::variant<MassBudgetRule, RequiresRule, MutexRule, CopperEnergyLimitRule>;

struct DesignProblem {
  Library library;
  TaskTrajectory tasks;  // concatenated
  CouplingSpec coupling;
  std::vector<DesignRule> rules;
  /// Fraction of each operation polygon held back from the boundary.
  double margin = 0.0;

  int joint_count() const { return tasks.joint_count(); }
  std::optional<double> mass_budget() const;
};

void validate(const DesignProblem& problem);

struct SampleViolation {
  std::size_t sample = 0;
  OperatingPoint point;
  double slack = 0.0;
};

/// One (motor, gear) composite for one actuator under the problem's coupling.
struct CandidateCell {
  int actuator = 0;  // 0-based
  std::size_t motor_index = 0;
  std::size_t gear_index = 0;
  std::string motor_id;
  double gear_ratio = 0.0;
  /// Objective coefficient: rotor_inertia * N² * trace weight * T.
  double reflected_inertia_contribution = 0.0;
  double mass = 0.0;
  bool feasible = false;
  std::vector<double> copper_energy_per_task;  // J, one per task segment
  std::optional<SampleViolation> violation;
  std::string infeasible_reason;
};

std::vector<CandidateCell> enumerate_feasible_pairs(const DesignProblem& problem, int actuator);
std::vector<std::vector<CandidateCell>> enumerate_all_cells(const DesignProblem& problem);

/// One binary per feasible cell, exclusivity per actuator, the budget row
/// and one row per logical rule.
BilpModel assemble_bilp(const DesignProblem& problem,
                        const std::vector<std::vector<CandidateCell>>& cells);
BilpModel assemble_bilp(const DesignProblem& problem);

/// Coupling as a decision variable: one binary per coupling, selection
/// binaries per (actuator, motor, gear), and a linearized product per
/// (selection, coupling) pair carrying the objective coefficient. Pairs
/// infeasible under a coupling are excluded with a mutex row.
BilpModel assemble_coupling_selection_bilp(const DesignProblem& base,
                                           const std::vector<CouplingSpec>& couplings);

struct ActuatorChoice {
  std::string motor_id;
  double gear_ratio = 0.0;
  double mass = 0.0;
  double reflected_inertia = 0.0;  // rotor_inertia * N²
  bool operator==(const ActuatorChoice&) const = default;
};

struct ActuatorDiagnosis {
  int actuator = 0;  // 0-based
  std::size_t feasible_cells = 0;
  std::optional<double> min_feasible_mass;
  std::optional<std::string> lightest_feasible_motor;
  double peak_velocity = 0.0;  // max |actuator-side joint velocity| before gearing
  double peak_torque = 0.0;
  std::optional<double> best_motor_peak_torque;  // strongest motor at its best gear
  bool operator==(const ActuatorDiagnosis&) const = default;
};

struct InfeasibilityDiagnosis {
  std::string reason;
  std::vector<ActuatorDiagnosis> actuators;
  std::optional<double> min_feasible_mass_sum;
  std::optional<double> budget;
  bool operator==(const InfeasibilityDiagnosis&) const = default;
};

enum class SolveStatus { optimal, infeasible };

struct SolverStats {
  std::string method;  // "mckp" or "bnb"
  std::size_t nodes = 0;
  std::size_t variables = 0;
  std::size_t rows = 0;
  bool operator==(const SolverStats&) const = default;
};

struct DesignSolution {
  SolveStatus status = SolveStatus::infeasible;
  std::vector<ActuatorChoice> choices;
  std::string coupling_id;
  double objective_value = 0.0;  // kg·m², sum over samples of the trace
  CostUnits objective_units = 0;
  int cost_exponent = 0;
  double total_motor_mass = 0.0;
  std::vector<std::size_t> selected;  // model variable indices
  std::optional<InfeasibilityDiagnosis> diagnosis;
  SolverStats stats;

  bool optimal() const { return status == SolveStatus::optimal; }
  bool operator==(const DesignSolution&) const = default;
};

DesignSolution solve_mckp(const BilpModel& model);

struct BnbOptions {
  std::size_t node_limit = 5'000'000;
};

DesignSolution solve_bnb(const BilpModel& model, const BnbOptions& options = {});

enum class SolverChoice { automatic, mckp, bnb };

struct SolveOptions {
  SolverChoice solver = SolverChoice::automatic;
  BnbOptions bnb;
};

/// Dispatches to the DP when the model allows it, verifies the result by
/// recomputation and attaches a diagnosis when infeasible.
DesignSolution solve(const DesignProblem& problem, const SolveOptions& options = {});
/// Same, reusing cells enumerated for this problem's coupling and rules.
DesignSolution solve(const DesignProblem& problem, const std::vector<std::vector<CandidateCell>>& cells,
                     const SolveOptions& options = {});

/// Coupling-selection mode over `couplings`.
DesignSolution solve_with_coupling_selection(const DesignProblem& base,
                                             const std::vector<CouplingSpec>& couplings,
                                             const BnbOptions& options = {});

/// Re-projects the task through the chosen components and checks every
/// constraint; throws SolverError on any mismatch.
void verify_solution(const DesignProblem& problem, const DesignSolution& solution);

InfeasibilityDiagnosis diagnose(const DesignProblem& problem,
                                const std::vector<std::vector<CandidateCell>>& cells,
                                std::string reason);

/// Copper energy (J) of one motor torque row, trapezoid per segment.
std::vector<double> copper_energy_per_segment(const Eigen::Ref<const Eigen::RowVectorXd>& torque,
                                              const MotorSpec& motor,
                                              const std::vector<TaskSegment>& segments);

}  // namespace actuforge
