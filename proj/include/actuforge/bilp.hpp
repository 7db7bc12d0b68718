#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "actuforge/exact_cost.hpp"

namespace actuforge {

enum class VariableRole {
  selection,  // one (motor, gear) composite for one actuator
  coupling,   // selects one coupling Jacobian
  auxiliary,  // stands in for a product of other binaries
};

struct BinaryVariable {
  std::string name;
  double cost = 0.0;
  VariableRole role = VariableRole::selection;

  // Decoding metadata for selection variables.
  int actuator = -1;  // 0-based
  std::size_t motor_index = 0;
  std::size_t gear_index = 0;
  std::string motor_id;
  double gear_ratio = 0.0;
  double mass = 0.0;  // kg
  std::optional<long long> mass_grams;
  double reflected_inertia = 0.0;  // rotor_inertia * N², kg·m²

  // Decoding metadata for coupling variables.
  std::string coupling_id;
};

enum class RowKind { budget, rule, linearization };

/// sum(coef * var) <= rhs.
struct LinearRow {
  std::string label;
  RowKind kind = RowKind::rule;
  std::vector<std::pair<std::size_t, double>> terms;
  double rhs = 0.0;
};

/// `result` equals the product of `factors`; enforced by linearization rows.
struct ProductDefinition {
  std::size_t result = 0;
  std::vector<std::size_t> factors;
};

struct BilpModel {
  std::vector<BinaryVariable> variables;
  /// Exclusivity: exactly one variable of each group is 1.
  std::vector<std::vector<std::size_t>> groups;
  std::vector<LinearRow> rows;
  std::vector<ProductDefinition> products;

  std::optional<std::size_t> budget_row;
  /// Budget in whole grams when every selection mass is gram-precise.
  std::optional<long long> budget_grams;
  /// Fixed coupling; empty when the coupling is a decision variable.
  std::string coupling_id;

  bool trivially_infeasible = false;
  std::string infeasibility_reason;

  std::size_t add_variable(BinaryVariable v);
  std::size_t add_row(LinearRow row);

  /// Only exclusivity groups and at most one gram-precise budget row over
  /// selection variables.
  bool is_mckp_shaped() const;
  CostScale cost_scale() const;
};

/// Exact linearization of z = x * y:
/// z <= x, z <= y, z >= x + y - 1.
struct Linearization {
  std::size_t product = 0;
  std::array<std::size_t, 3> rows{};
};

Linearization linearize_product(BilpModel& model, std::size_t x, std::size_t y,
                                std::string name = {});

/// k-ary form: z <= x_i for every i, z >= sum(x_i) - (k - 1).
std::size_t linearize_product(BilpModel& model, std::span<const std::size_t> factors,
                              std::string name, double cost = 0.0);

/// True when `assignment` (0/1 per variable) satisfies every exclusivity
/// group and every row.
bool satisfies(const BilpModel& model, const std::vector<int>& assignment,
               double tolerance = 1e-9);

}  // namespace actuforge
