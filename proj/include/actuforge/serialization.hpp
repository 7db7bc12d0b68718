#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "actuforge/analysis.hpp"
#include "actuforge/exact_cost.hpp"
#include "actuforge/optimizer.hpp"
#include "actuforge/tasking.hpp"

namespace actuforge {

using nlohmann::json;

std::string cost_units_to_string(CostUnits units);
CostUnits cost_units_from_string(const std::string& text);

/// {"kind": "mass_budget", "limit_kg": 3.0}
/// {"kind": "requires", "component_a": "qd310@1", "component_b": "gear:6@2"}
/// {"kind": "mutex", "component_a": ..., "component_b": ...}
/// {"kind": "copper_energy_limit", "actuator": 3, "limit_J": 40.0}
json rule_to_json(const DesignRule& rule);
DesignRule rule_from_json(const json& doc, const std::string& path = "rules[0]");
json rules_to_json(const std::vector<DesignRule>& rules);
std::vector<DesignRule> rules_from_json(const json& doc, const std::string& path = "rules");

json solution_to_json(const DesignSolution& solution);
DesignSolution solution_from_json(const json& doc);

json diagnosis_to_json(const InfeasibilityDiagnosis& diagnosis);
InfeasibilityDiagnosis diagnosis_from_json(const json& doc);

/// Exact numeric round trip (shortest round-trip doubles).
json trajectory_to_json(const TaskTrajectory& traj);
TaskTrajectory trajectory_from_json(const json& doc);

json inertia_report_to_json(const InertiaReport& report);
json copper_loss_to_json(const CopperLossReport& report, bool include_power = true);
json polytope_to_json(const CapabilityPolytope& polytope);

json vector_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const json& doc, const std::string& path);
json matrix_to_json(const Eigen::MatrixXd& m);

}  // namespace actuforge
