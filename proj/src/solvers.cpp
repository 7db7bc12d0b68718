#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include "actuforge/errors.hpp"
#include "actuforge/optimizer.hpp"

namespace actuforge {
namespace {

constexpr std::size_t kNoVar = std::numeric_limits<std::size_t>::max();

/// Mass of a selection, compared exactly in grams when both sides have them.
struct MassKey {
  double kg = 0.0;
  std::optional<long long> grams;
};

int compare_mass(const MassKey& a, const MassKey& b) {
  if (a.grams && b.grams) return (*a.grams < *b.grams) ? -1 : (*a.grams > *b.grams ? 1 : 0);
  return (a.kg < b.kg) ? -1 : (a.kg > b.kg ? 1 : 0);
}

/// Full tie-break key: (cost, total mass, gear ratios by actuator, motor ids
/// by actuator, coupling id).
struct SelectionKey {
  CostUnits cost = 0;
  MassKey mass;
  std::vector<double> gears;
  std::vector<std::string> motors;
  std::string coupling;
};

int compare_keys(const SelectionKey& a, const SelectionKey& b) {
  if (a.cost != b.cost) return a.cost < b.cost ? -1 : 1;
  if (int c = compare_mass(a.mass, b.mass)) return c;
  if (a.gears != b.gears) return a.gears < b.gears ? -1 : 1;
  if (a.motors != b.motors) return a.motors < b.motors ? -1 : 1;
  if (a.coupling != b.coupling) return a.coupling < b.coupling ? -1 : 1;
  return 0;
}

std::vector<CostUnits> variable_units(const BilpModel& model, const CostScale& scale) {
  if (!scale.exact()) {
    throw SolverError("objective coefficients span too many orders of magnitude for exact arithmetic");
  }
  std::vector<CostUnits> units(model.variables.size());
  for (std::size_t i = 0; i < units.size(); ++i) units[i] = scale.to_units(model.variables[i].cost);
  return units;
}

int actuator_count(const BilpModel& model) {
  int n = 0;
  for (const auto& v : model.variables) {
    if (v.role == VariableRole::selection) n = std::max(n, v.actuator + 1);
  }
  return n;
}

/// Assignment from one chosen variable per group; products are evaluated.
std::vector<int> full_assignment(const BilpModel& model, const std::vector<std::size_t>& chosen) {
  std::vector<int> x(model.variables.size(), 0);
  for (auto v : chosen) x[v] = 1;
  for (const auto& p : model.products) {
    int value = 1;
    for (auto f : p.factors) value &= x[f];
    x[p.result] = value;
  }
  return x;
}

SelectionKey make_key(const BilpModel& model, const std::vector<CostUnits>& units,
                      const std::vector<int>& x) {
  SelectionKey key;
  const int n = actuator_count(model);
  key.gears.assign(n, 0.0);
  key.motors.assign(n, std::string());
  bool all_grams = true;
  long long grams = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!x[i]) continue;
    const auto& v = model.variables[i];
    key.cost += units[i];
    if (v.role == VariableRole::selection) {
      key.mass.kg += v.mass;
      if (v.mass_grams) grams += *v.mass_grams; else all_grams = false;
      key.gears[v.actuator] = v.gear_ratio;
      key.motors[v.actuator] = v.motor_id;
    } else if (v.role == VariableRole::coupling) {
      key.coupling = v.coupling_id;
    }
  }
  if (all_grams) key.mass.grams = grams;
  return key;
}

DesignSolution decode(const BilpModel& model, const CostScale& scale,
                      const std::vector<CostUnits>& units, const std::vector<int>& x) {
  DesignSolution sol;
  sol.status = SolveStatus::optimal;
  sol.coupling_id = model.coupling_id;
  sol.cost_exponent = scale.exponent();
  sol.choices.assign(actuator_count(model), ActuatorChoice{});
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!x[i]) continue;
    const auto& v = model.variables[i];
    sol.selected.push_back(i);
    sol.objective_units += units[i];
    if (v.role == VariableRole::selection) {
      sol.choices[v.actuator] = {v.motor_id, v.gear_ratio, v.mass, v.reflected_inertia};
    } else if (v.role == VariableRole::coupling) {
      sol.coupling_id = v.coupling_id;
    }
  }
  for (const auto& c : sol.choices) sol.total_motor_mass += c.mass;
  sol.objective_value = scale.to_double(sol.objective_units);
  return sol;
}

DesignSolution infeasible_solution(const BilpModel& model, std::string method, std::size_t nodes,
                                   std::string reason) {
  DesignSolution sol;
  sol.status = SolveStatus::infeasible;
  sol.coupling_id = model.coupling_id;
  sol.stats = {std::move(method), nodes, model.variables.size(), model.rows.size()};
  InfeasibilityDiagnosis d;
  d.reason = std::move(reason);
  sol.diagnosis = std::move(d);
  return sol;
}

/// Drops items that some other item of the group beats on cost and mass
/// while also winning the tie-break. `eligible` marks items that may be
/// removed or used as dominators.
template <class Mass>
std::vector<std::size_t> undominated(const BilpModel& model, const std::vector<CostUnits>& units,
                                     const std::vector<std::size_t>& group,
                                     const std::vector<bool>& eligible, Mass mass_of) {
  std::vector<std::size_t> simple;
  std::vector<std::size_t> kept;
  for (auto v : group) (eligible[v] ? simple : kept).push_back(v);
  std::sort(simple.begin(), simple.end(), [&](std::size_t a, std::size_t b) {
    if (units[a] != units[b]) return units[a] < units[b];
    const auto ma = mass_of(a), mb = mass_of(b);
    if (ma != mb) return ma < mb;
    const auto& va = model.variables[a];
    const auto& vb = model.variables[b];
    if (va.gear_ratio != vb.gear_ratio) return va.gear_ratio < vb.gear_ratio;
    if (va.motor_id != vb.motor_id) return va.motor_id < vb.motor_id;
    return a < b;
  });
  bool have = false;
  decltype(mass_of(0)) lightest{};
  for (auto v : simple) {
    const auto m = mass_of(v);
    if (!have || m < lightest) {
      kept.push_back(v);
      lightest = m;
      have = true;
    }
  }
  std::sort(kept.begin(), kept.end());
  return kept;
}

}  // namespace

// ---------------------------------------------------------------------------
// Multiple-choice knapsack by dynamic programming over whole grams.

DesignSolution solve_mckp(const BilpModel& model) {
  if (!model.is_mckp_shaped()) {
    throw SolverError("model is not a multiple-choice knapsack; use solve_bnb");
  }
  const CostScale scale = model.cost_scale();
  const auto units = variable_units(model, scale);
  if (model.trivially_infeasible) {
    return infeasible_solution(model, "mckp", 0, model.infeasibility_reason);
  }
  const std::size_t G = model.groups.size();
  for (const auto& g : model.groups) {
    if (g.empty()) return infeasible_solution(model, "mckp", 0, "an actuator has no candidates");
  }

  auto grams_of = [&](std::size_t v) { return *model.variables[v].mass_grams; };
  const std::vector<bool> all_eligible(model.variables.size(), true);
  std::vector<std::vector<std::size_t>> items(G);
  long long max_sum = 0, min_sum = 0;
  for (std::size_t g = 0; g < G; ++g) {
    items[g] = undominated(model, units, model.groups[g], all_eligible, grams_of);
    long long lo = std::numeric_limits<long long>::max(), hi = 0;
    for (auto v : items[g]) {
      if (grams_of(v) < 0) throw SolverError("negative mass in knapsack model");
      lo = std::min(lo, grams_of(v));
      hi = std::max(hi, grams_of(v));
    }
    min_sum += lo;
    max_sum += hi;
  }
  long long capacity = max_sum;
  if (model.budget_row) capacity = std::min(capacity, *model.budget_grams);
  if (capacity < min_sum) {
    return infeasible_solution(model, "mckp", 0, "mass budget below the lightest feasible selection");
  }
  const std::size_t width = static_cast<std::size_t>(capacity) + 1;

  struct State {
    CostUnits cost = 0;
    long long grams = 0;
    int item = -1;
    bool feasible = false;
  };
  std::vector<std::vector<State>> F(G + 1, std::vector<State>(width));
  for (auto& s : F[G]) s = {0, 0, -1, true};

  // Walks two choice chains from level g, comparing gear ratios then motor ids.
  auto chain_less = [&](std::size_t g, int i1, long long r1, int i2, long long r2) {
    for (int pass = 0; pass < 2; ++pass) {
      std::size_t level = g;
      int a = i1, b = i2;
      long long ra = r1, rb = r2;
      while (level < G) {
        const auto& va = model.variables[items[level][a]];
        const auto& vb = model.variables[items[level][b]];
        if (pass == 0 && va.gear_ratio != vb.gear_ratio) return va.gear_ratio < vb.gear_ratio;
        if (pass == 1 && va.motor_id != vb.motor_id) return va.motor_id < vb.motor_id;
        ra -= grams_of(items[level][a]);
        rb -= grams_of(items[level][b]);
        ++level;
        if (level < G) {
          a = F[level][ra].item;
          b = F[level][rb].item;
        }
      }
    }
    return false;
  };

  std::size_t evaluations = 0;
  for (std::size_t g = G; g-- > 0;) {
    const auto& next = F[g + 1];
    auto& cur = F[g];
    for (long long r = 0; r <= capacity; ++r) {
      State best;
      for (std::size_t i = 0; i < items[g].size(); ++i) {
        const std::size_t v = items[g][i];
        const long long w = grams_of(v);
        if (w > r) continue;
        const State& tail = next[r - w];
        if (!tail.feasible) continue;
        ++evaluations;
        const CostUnits cost = units[v] + tail.cost;
        const long long grams = w + tail.grams;
        bool take = !best.feasible || cost < best.cost ||
                    (cost == best.cost && grams < best.grams);
        if (!take && cost == best.cost && grams == best.grams) {
          take = chain_less(g, static_cast<int>(i), r, best.item, r);
        }
        if (take) best = {cost, grams, static_cast<int>(i), true};
      }
      cur[r] = best;
    }
  }

  const State& root = F[0][capacity];
  if (!root.feasible) {
    return infeasible_solution(model, "mckp", evaluations,
                               "mass budget below the lightest feasible selection");
  }
  std::vector<std::size_t> chosen;
  long long r = capacity;
  for (std::size_t g = 0; g < G; ++g) {
    const std::size_t v = items[g][F[g][r].item];
    chosen.push_back(v);
    r -= grams_of(v);
  }
  auto sol = decode(model, scale, units, full_assignment(model, chosen));
  sol.stats = {"mckp", evaluations, model.variables.size(), model.rows.size()};
  return sol;
}

// ---------------------------------------------------------------------------
// Best-first branch and bound over exclusivity groups.

namespace {

class BranchAndBound {
 public:
  BranchAndBound(const BilpModel& model, const BnbOptions& options)
      : m_(model), options_(options), scale_(model.cost_scale()),
        units_(variable_units(model, scale_)) {
    G_ = model.groups.size();
    prepare();
  }

  DesignSolution run();

 private:
  struct Node {
    std::vector<std::size_t> choice;  // first `depth` entries are fixed
    std::size_t depth = 0;
    CostUnits partial = 0;
    double weight = 0.0;
    long long grams = 0;
    CostUnits bound = 0;
    bool evaluated = false;
    std::uint64_t seq = 0;
    std::vector<std::size_t> next_candidates;
    std::vector<CostUnits> next_effective;
  };
  struct NodeOrder {
    bool operator()(const Node& a, const Node& b) const {
      if (a.bound != b.bound) return a.bound > b.bound;
      if (a.depth != b.depth) return a.depth < b.depth;
      return a.seq > b.seq;
    }
  };

  void prepare();
  bool fixed(std::size_t group, const Node& node, std::size_t hyp_group) const {
    return group < node.depth || group == hyp_group;
  }
  int value_of(std::size_t var, const Node& node, std::size_t hyp_group, std::size_t hyp_var,
               bool& known) const;
  double row_min_activity(std::size_t row, const Node& node, std::size_t hyp_group,
                          std::size_t hyp_var) const;
  bool violates_rows(std::size_t var, std::size_t group, const Node& node, bool expansion) const;
  CostUnits effective_units(std::size_t var, std::size_t group, const Node& node) const;
  bool evaluate(Node& node, const std::optional<CostUnits>& incumbent_cost, double incumbent_value);

  const BilpModel& m_;
  BnbOptions options_;
  CostScale scale_;
  std::vector<CostUnits> units_;
  std::size_t G_ = 0;

  std::vector<std::size_t> group_of_;
  std::vector<std::vector<std::size_t>> candidates_;
  std::vector<std::size_t> product_trigger_;
  std::vector<std::size_t> product_of_result_;
  std::vector<std::vector<std::size_t>> products_of_var_;
  std::vector<bool> check_row_;
  std::vector<std::vector<std::size_t>> rows_of_var_;
  std::vector<std::vector<std::size_t>> negative_rows_of_group_;
  std::vector<std::vector<std::pair<std::size_t, double>>> row_group_min_;

  bool has_budget_ = false;
  bool budget_in_grams_ = false;
  std::vector<double> weight_;
  std::vector<long long> weight_grams_;
  double capacity_ = 0.0;
  long long capacity_grams_ = 0;
  std::vector<double> min_weight_;
  std::vector<long long> min_weight_grams_;
};

void BranchAndBound::prepare() {
  const std::size_t nv = m_.variables.size();
  group_of_.assign(nv, kNoVar);
  for (std::size_t g = 0; g < G_; ++g) {
    for (auto v : m_.groups[g]) {
      if (group_of_[v] != kNoVar) throw SolverError("variable appears in two exclusivity groups");
      group_of_[v] = g;
    }
  }
  for (std::size_t v = 0; v < nv; ++v) {
    if (group_of_[v] == kNoVar && m_.variables[v].role != VariableRole::auxiliary) {
      throw SolverError("variable '" + m_.variables[v].name + "' is in no exclusivity group");
    }
  }
  products_of_var_.assign(nv, {});
  product_trigger_.assign(m_.products.size(), 0);
  std::vector<bool> is_product_result(nv, false);
  product_of_result_.assign(nv, kNoVar);
  for (std::size_t p = 0; p < m_.products.size(); ++p) {
    std::size_t trigger = 0;
    for (auto f : m_.products[p].factors) {
      if (group_of_[f] == kNoVar) throw SolverError("product factors must be group variables");
      trigger = std::max(trigger, group_of_[f]);
      products_of_var_[f].push_back(p);
    }
    product_trigger_[p] = trigger;
    is_product_result[m_.products[p].result] = true;
    product_of_result_[m_.products[p].result] = p;
  }
  for (std::size_t v = 0; v < nv; ++v) {
    if (m_.variables[v].role == VariableRole::auxiliary && !is_product_result[v]) {
      throw SolverError("auxiliary variable '" + m_.variables[v].name + "' has no product definition");
    }
  }

  // Budget row: non-negative weights become the knapsack dimension.
  if (m_.budget_row) {
    const auto& row = m_.rows[*m_.budget_row];
    bool nonnegative = true;
    for (const auto& [v, c] : row.terms) {
      if (c < 0.0 || group_of_[v] == kNoVar) nonnegative = false;
    }
    has_budget_ = nonnegative;
    if (has_budget_) {
      weight_.assign(nv, 0.0);
      for (const auto& [v, c] : row.terms) weight_[v] += c;
      capacity_ = row.rhs;
      budget_in_grams_ = m_.budget_grams.has_value();
      weight_grams_.assign(nv, 0);
      for (const auto& [v, c] : row.terms) {
        const auto& var = m_.variables[v];
        if (!var.mass_grams || var.mass != c) budget_in_grams_ = false;
        else weight_grams_[v] = *var.mass_grams;
      }
      if (budget_in_grams_) capacity_grams_ = *m_.budget_grams;
    }
  }

  check_row_.assign(m_.rows.size(), false);
  rows_of_var_.assign(nv, {});
  negative_rows_of_group_.assign(G_, {});
  row_group_min_.assign(m_.rows.size(), {});
  for (std::size_t r = 0; r < m_.rows.size(); ++r) {
    const auto& row = m_.rows[r];
    if (row.kind == RowKind::linearization) continue;
    if (has_budget_ && m_.budget_row && r == *m_.budget_row) continue;
    check_row_[r] = true;
    std::vector<std::pair<std::size_t, double>> coef_by_group;
    for (const auto& [v, c] : row.terms) {
      if (std::find(rows_of_var_[v].begin(), rows_of_var_[v].end(), r) == rows_of_var_[v].end()) {
        rows_of_var_[v].push_back(r);
      }
    }
    for (std::size_t g = 0; g < G_; ++g) {
      bool touches = false;
      double lowest = std::numeric_limits<double>::infinity();
      for (auto v : m_.groups[g]) {
        double c = 0.0;
        for (const auto& [u, cu] : row.terms) {
          if (u == v) c += cu;
        }
        if (c != 0.0) touches = true;
        lowest = std::min(lowest, c);
      }
      if (!touches) continue;
      row_group_min_[r].emplace_back(g, lowest);
      if (lowest < 0.0) negative_rows_of_group_[g].push_back(r);
    }
  }

  // Dominance filtering applies to variables touched only by the budget row.
  std::vector<bool> simple(nv, true);
  for (std::size_t v = 0; v < nv; ++v) {
    if (!rows_of_var_[v].empty() || !products_of_var_[v].empty()) simple[v] = false;
    if (m_.variables[v].role != VariableRole::selection) simple[v] = false;
  }
  for (std::size_t g = 0; g < G_; ++g) {
    for (auto r : negative_rows_of_group_[g]) {
      (void)r;
      for (auto v : m_.groups[g]) simple[v] = false;
    }
  }
  candidates_.assign(G_, {});
  for (std::size_t g = 0; g < G_; ++g) {
    if (has_budget_ && budget_in_grams_) {
      candidates_[g] = undominated(m_, units_, m_.groups[g], simple,
                                   [&](std::size_t v) { return weight_grams_[v]; });
    } else if (has_budget_) {
      candidates_[g] = undominated(m_, units_, m_.groups[g], simple,
                                   [&](std::size_t v) { return weight_[v]; });
    } else {
      candidates_[g] = undominated(m_, units_, m_.groups[g], simple,
                                   [&](std::size_t v) { return m_.variables[v].mass; });
    }
  }
  if (has_budget_) {
    min_weight_.assign(G_, 0.0);
    min_weight_grams_.assign(G_, 0);
    for (std::size_t g = 0; g < G_; ++g) {
      double lo = std::numeric_limits<double>::infinity();
      long long lo_g = std::numeric_limits<long long>::max();
      for (auto v : candidates_[g]) {
        lo = std::min(lo, weight_[v]);
        lo_g = std::min(lo_g, weight_grams_[v]);
      }
      min_weight_[g] = candidates_[g].empty() ? 0.0 : lo;
      min_weight_grams_[g] = candidates_[g].empty() ? 0 : lo_g;
    }
  }
}

int BranchAndBound::value_of(std::size_t var, const Node& node, std::size_t hyp_group,
                             std::size_t hyp_var, bool& known) const {
  const std::size_t g = group_of_[var];
  if (g != kNoVar) {
    known = fixed(g, node, hyp_group);
    if (!known) return 0;
    const std::size_t chosen = (g == hyp_group) ? hyp_var : node.choice[g];
    return chosen == var ? 1 : 0;
  }
  // Auxiliary: known once every factor is fixed, or once any fixed factor is 0.
  const auto& prod = m_.products[product_of_result_[var]];
  bool all_fixed = true;
  for (auto f : prod.factors) {
    const std::size_t fg = group_of_[f];
    if (!fixed(fg, node, hyp_group)) {
      all_fixed = false;
      continue;
    }
    const std::size_t chosen = (fg == hyp_group) ? hyp_var : node.choice[fg];
    if (chosen != f) {
      known = true;
      return 0;
    }
  }
  known = all_fixed;
  return all_fixed ? 1 : 0;
}

double BranchAndBound::row_min_activity(std::size_t r, const Node& node, std::size_t hyp_group,
                                        std::size_t hyp_var) const {
  const auto& row = m_.rows[r];
  double activity = 0.0;
  for (const auto& [v, c] : row.terms) {
    if (group_of_[v] != kNoVar) {
      if (!fixed(group_of_[v], node, hyp_group)) continue;
      bool known = true;
      activity += c * value_of(v, node, hyp_group, hyp_var, known);
    } else {
      bool known = false;
      const int x = value_of(v, node, hyp_group, hyp_var, known);
      activity += known ? c * x : std::min(0.0, c);
    }
  }
  for (const auto& [g, lowest] : row_group_min_[r]) {
    if (!fixed(g, node, hyp_group)) activity += lowest;
  }
  return activity;
}

bool BranchAndBound::violates_rows(std::size_t var, std::size_t group, const Node& node,
                                   bool expansion) const {
  constexpr double tol = 1e-9;
  for (auto r : rows_of_var_[var]) {
    if (row_min_activity(r, node, group, var) > m_.rows[r].rhs + tol) return true;
  }
  if (expansion) {
    for (auto r : negative_rows_of_group_[group]) {
      if (row_min_activity(r, node, group, var) > m_.rows[r].rhs + tol) return true;
    }
  }
  return false;
}

CostUnits BranchAndBound::effective_units(std::size_t var, std::size_t group, const Node& node) const {
  CostUnits total = units_[var];
  for (auto p : products_of_var_[var]) {
    if (product_trigger_[p] != group) continue;
    const auto& prod = m_.products[p];
    const CostUnits pu = units_[prod.result];
    bool all_chosen = true;
    bool any_unfixed = false;
    for (auto f : prod.factors) {
      if (f == var) continue;
      const std::size_t fg = group_of_[f];
      if (fg >= node.depth && fg != group) {
        any_unfixed = true;
        continue;
      }
      if (node.choice[fg] != f) all_chosen = false;
    }
    if (!all_chosen) continue;
    if (any_unfixed) total += std::min<CostUnits>(0, pu);
    else total += pu;
  }
  return total;
}

/// Computes candidate sets and the bound of `node`; false when pruned.
bool BranchAndBound::evaluate(Node& node, const std::optional<CostUnits>& incumbent_cost,
                              double incumbent_value) {
  struct GroupItems {
    std::vector<std::size_t> vars;
    std::vector<CostUnits> eff;
  };
  std::vector<GroupItems> open(G_ - node.depth);

  double rest_min_weight = 0.0;
  long long rest_min_grams = 0;
  if (has_budget_) {
    for (std::size_t g = node.depth; g < G_; ++g) {
      rest_min_weight += min_weight_[g];
      rest_min_grams += min_weight_grams_[g];
    }
  }
  CostUnits bound = node.partial;
  for (std::size_t g = node.depth; g < G_; ++g) {
    auto& items = open[g - node.depth];
    for (auto v : candidates_[g]) {
      if (has_budget_) {
        if (budget_in_grams_) {
          if (node.grams + weight_grams_[v] + rest_min_grams - min_weight_grams_[g] > capacity_grams_) continue;
        } else if (node.weight + weight_[v] + rest_min_weight - min_weight_[g] > capacity_ + 1e-9) {
          continue;
        }
      }
      if (violates_rows(v, g, node, g == node.depth)) continue;
      items.vars.push_back(v);
      items.eff.push_back(effective_units(v, g, node));
    }
    if (items.vars.empty()) return false;
    bound += *std::min_element(items.eff.begin(), items.eff.end());
  }
  node.bound = bound;
  if (incumbent_cost && bound > *incumbent_cost) return false;

  // Fractional multiple-choice knapsack bound on the budget row.
  if (has_budget_ && incumbent_cost && node.depth < G_) {
    double base_cost = 0.0, used = 0.0;
    struct Step {
      double slope, dw, dc;
    };
    std::vector<Step> steps;
    for (const auto& items : open) {
      std::vector<std::pair<double, double>> pts;  // (weight, cost)
      for (std::size_t i = 0; i < items.vars.size(); ++i) {
        pts.emplace_back(weight_[items.vars[i]], scale_.to_double(items.eff[i]));
      }
      std::sort(pts.begin(), pts.end());
      // Lower convex hull restricted to cost-decreasing points.
      std::vector<std::pair<double, double>> hull;
      for (const auto& p : pts) {
        if (!hull.empty() && p.second >= hull.back().second) continue;
        while (hull.size() >= 2) {
          const auto& a = hull[hull.size() - 2];
          const auto& b = hull.back();
          const double cross = (b.first - a.first) * (p.second - a.second) -
                               (b.second - a.second) * (p.first - a.first);
          if (cross <= 0.0) hull.pop_back();
          else break;
        }
        hull.push_back(p);
      }
      base_cost += hull.front().second;
      used += hull.front().first;
      for (std::size_t i = 1; i < hull.size(); ++i) {
        const double dw = hull[i].first - hull[i - 1].first;
        const double dc = hull[i].second - hull[i - 1].second;
        steps.push_back({dw > 0.0 ? dc / dw : -std::numeric_limits<double>::infinity(), dw, dc});
      }
    }
    double room = capacity_ - node.weight - used;
    std::sort(steps.begin(), steps.end(), [](const Step& a, const Step& b) { return a.slope < b.slope; });
    double lp = base_cost;
    for (const auto& s : steps) {
      if (room <= 0.0) break;
      if (s.dw <= room) {
        lp += s.dc;
        room -= s.dw;
      } else {
        lp += s.dc * (room / s.dw);
        room = 0.0;
      }
    }
    const double total = scale_.to_double(node.partial) + lp;
    if (total > incumbent_value + 1e-9 * std::max(1.0, std::abs(incumbent_value))) return false;
  }

  if (node.depth < G_) {
    node.next_candidates = std::move(open.front().vars);
    node.next_effective = std::move(open.front().eff);
  }
  return true;
}

DesignSolution BranchAndBound::run() {
  if (m_.trivially_infeasible) return infeasible_solution(m_, "bnb", 0, m_.infeasibility_reason);
  if (G_ == 0) throw SolverError("model has no exclusivity groups");

  std::priority_queue<Node, std::vector<Node>, NodeOrder> queue;
  std::uint64_t seq = 0;
  Node root;
  root.choice.assign(G_, kNoVar);
  root.seq = seq++;
  queue.push(std::move(root));

  std::optional<CostUnits> best_cost;
  double best_value = 0.0;
  std::optional<SelectionKey> best_key;
  std::vector<int> best_x;
  std::size_t nodes = 0;

  while (!queue.empty()) {
    Node node = queue.top();
    queue.pop();
    if (best_cost && node.bound > *best_cost) continue;
    if (!node.evaluated) {
      if (!evaluate(node, best_cost, best_value)) continue;
      node.evaluated = true;
      if (!queue.empty() && node.bound > queue.top().bound) {
        queue.push(std::move(node));
        continue;
      }
    }
    if (++nodes > options_.node_limit) {
      throw SolverError("branch-and-bound node limit (" + std::to_string(options_.node_limit) +
                        ") exceeded");
    }
    if (node.depth == G_) {
      std::vector<std::size_t> chosen(node.choice.begin(), node.choice.end());
      auto x = full_assignment(m_, chosen);
      if (!satisfies(m_, x)) continue;
      auto key = make_key(m_, units_, x);
      if (!best_key || compare_keys(key, *best_key) < 0) {
        best_cost = key.cost;
        best_value = scale_.to_double(key.cost);
        best_key = std::move(key);
        best_x = std::move(x);
      }
      continue;
    }
    // Lower bound of the groups after this one, from this node's evaluation.
    const CostUnits rest = node.bound - node.partial -
                           *std::min_element(node.next_effective.begin(), node.next_effective.end());
    for (std::size_t i = 0; i < node.next_candidates.size(); ++i) {
      const std::size_t v = node.next_candidates[i];
      Node child;
      child.choice = node.choice;
      child.choice[node.depth] = v;
      child.depth = node.depth + 1;
      child.partial = node.partial + node.next_effective[i];
      if (has_budget_) {
        child.weight = node.weight + weight_[v];
        child.grams = node.grams + weight_grams_[v];
      }
      child.bound = child.partial + rest;
      if (best_cost && child.bound > *best_cost) continue;
      child.seq = seq++;
      queue.push(std::move(child));
    }
  }

  if (!best_key) {
    return infeasible_solution(m_, "bnb", nodes,
                               "search tree exhausted without a feasible selection");
  }
  auto sol = decode(m_, scale_, units_, best_x);
  sol.stats = {"bnb", nodes, m_.variables.size(), m_.rows.size()};
  return sol;
}

}  // namespace

DesignSolution solve_bnb(const BilpModel& model, const BnbOptions& options) {
  BranchAndBound search(model, options);
  return search.run();
}

}  // namespace actuforge
