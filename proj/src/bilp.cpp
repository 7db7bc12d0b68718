#include "actuforge/bilp.hpp"

#include <set>

#include "actuforge/errors.hpp"

namespace actuforge {

std::size_t BilpModel::add_variable(BinaryVariable v) {
  variables.push_back(std::move(v));
  return variables.size() - 1;
}

std::size_t BilpModel::add_row(LinearRow row) {
  for (const auto& [var, coef] : row.terms) {
    if (var >= variables.size()) throw SolverError("row references unknown variable");
    (void)coef;
  }
  rows.push_back(std::move(row));
  return rows.size() - 1;
}

bool BilpModel::is_mckp_shaped() const {
  if (!products.empty()) return false;
  for (const auto& v : variables) {
    if (v.role != VariableRole::selection) return false;
    if (!v.mass_grams) return false;
  }
  if (rows.size() > 1) return false;
  if (rows.size() == 1) {
    if (!budget_row || *budget_row != 0 || !budget_grams) return false;
    for (const auto& [var, coef] : rows[0].terms) {
      if (coef < 0.0) return false;
      (void)var;
    }
  }
  return true;
}

CostScale BilpModel::cost_scale() const {
  std::vector<double> costs;
  costs.reserve(variables.size());
  for (const auto& v : variables) costs.push_back(v.cost);
  return CostScale::for_values(costs);
}

Linearization linearize_product(BilpModel& model, std::size_t x, std::size_t y,
                                std::string name) {
  if (x == y) throw SolverError("linearize_product needs distinct variables");
  const std::array<std::size_t, 2> factors{x, y};
  Linearization out;
  out.product = linearize_product(model, factors, std::move(name));
  const std::size_t n = model.rows.size();
  out.rows = {n - 3, n - 2, n - 1};
  return out;
}

std::size_t linearize_product(BilpModel& model, std::span<const std::size_t> factors,
                              std::string name, double cost) {
  if (factors.size() < 2) throw SolverError("a product needs at least two factors");
  if (std::set<std::size_t>(factors.begin(), factors.end()).size() != factors.size()) {
    throw SolverError("product factors must be distinct");
  }
  for (auto f : factors) {
    if (f >= model.variables.size()) throw SolverError("product references unknown variable");
  }
  if (name.empty()) {
    name = "z";
    for (auto f : factors) name += "_" + model.variables[f].name;
  }
  BinaryVariable z;
  z.name = name;
  z.cost = cost;
  z.role = VariableRole::auxiliary;
  const std::size_t zi = model.add_variable(std::move(z));

  for (auto f : factors) {
    model.add_row({name + " <= " + model.variables[f].name, RowKind::linearization,
                   {{zi, 1.0}, {f, -1.0}}, 0.0});
  }
  // -z + sum(x_i) <= k - 1
  LinearRow lower{name + " >= sum - (k-1)", RowKind::linearization, {{zi, -1.0}},
                  static_cast<double>(factors.size() - 1)};
  for (auto f : factors) lower.terms.emplace_back(f, 1.0);
  model.add_row(std::move(lower));
  model.products.push_back({zi, std::vector<std::size_t>(factors.begin(), factors.end())});
  return zi;
}

bool satisfies(const BilpModel& model, const std::vector<int>& assignment, double tolerance) {
  if (assignment.size() != model.variables.size()) return false;
  for (int a : assignment) {
    if (a != 0 && a != 1) return false;
  }
  for (const auto& g : model.groups) {
    int count = 0;
    for (auto v : g) count += assignment[v];
    if (count != 1) return false;
  }
  for (const auto& row : model.rows) {
    double activity = 0.0;
    for (const auto& [var, coef] : row.terms) activity += coef * assignment[var];
    if (activity > row.rhs + tolerance) return false;
  }
  return true;
}

}  // namespace actuforge
