#include "actuforge/optimizer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <regex>
#include <sstream>

#include "actuforge/errors.hpp"
#include "actuforge/transmission.hpp"

namespace actuforge {
namespace {

std::optional<long long> whole_grams(double kg) {
  const double g = kg * 1000.0;
  const double r = std::round(g);
  if (std::abs(g - r) > 1e-9 * std::max(1.0, std::abs(g))) return std::nullopt;
  return static_cast<long long>(r);
}

std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

bool matches(const ComponentRef& ref, const CandidateCell& cell) {
  if (ref.actuator - 1 != cell.actuator) return false;
  if (ref.kind == ComponentRef::Kind::motor) return ref.motor_id == cell.motor_id;
  return ref.gear_ratio == cell.gear_ratio;
}

/// Actuator-side (pre-gear) velocity and torque rows for one actuator.
struct ActuatorSignals {
  Eigen::RowVectorXd velocity;
  Eigen::RowVectorXd torque;
};

ActuatorSignals actuator_signals(const DesignProblem& problem, int actuator) {
  const auto& C = problem.coupling;
  ActuatorSignals s;
  s.velocity = C.inverse.row(actuator) * problem.tasks.velocity;
  s.torque = C.jacobian.col(actuator).transpose() * problem.tasks.torque;
  return s;
}

}  // namespace

ComponentRef ComponentRef::parse(std::string_view text) {
  static const std::regex motor_re(R"(^([^@\s]+)@([0-9]+)$)");
  static const std::regex gear_re(R"(^gear:([0-9.eE+-]+)@([0-9]+)$)");
  const std::string s(text);
  std::smatch m;
  ComponentRef ref;
  if (std::regex_match(s, m, gear_re)) {
    ref.kind = Kind::gear;
    const std::string num = m[1];
    auto res = std::from_chars(num.data(), num.data() + num.size(), ref.gear_ratio);
    if (res.ec != std::errc() || res.ptr != num.data() + num.size()) {
      throw ParseError("bad gear ratio in component reference '" + s + "'");
    }
    ref.actuator = std::stoi(m[2]);
  } else if (std::regex_match(s, m, motor_re)) {
    ref.kind = Kind::motor;
    ref.motor_id = m[1];
    ref.actuator = std::stoi(m[2]);
  } else {
    throw ParseError("component reference '" + s + "' is not <motor>@<actuator> or gear:<ratio>@<actuator>");
  }
  if (ref.kind == Kind::motor && ref.motor_id.starts_with("gear:")) {
    throw ParseError("bad gear ratio in component reference '" + s + "'");
  }
  if (ref.actuator < 1) throw ParseError("actuator index in '" + s + "' starts at 1");
  return ref;
}

std::string ComponentRef::to_string() const {
  if (kind == Kind::gear) return "gear:" + format_number(gear_ratio) + "@" + std::to_string(actuator);
  return motor_id + "@" + std::to_string(actuator);
}

std::optional<double> DesignProblem::mass_budget() const {
  std::optional<double> out;
  for (const auto& rule : rules) {
    if (const auto* b = std::get_if<MassBudgetRule>(&rule)) {
      out = out ? std::min(*out, b->limit) : b->limit;
    }
  }
  return out;
}

void validate(const DesignProblem& problem) {
  validate(problem.library);
  validate(problem.tasks);
  const int n = problem.joint_count();
  if (problem.coupling.dimension() != n) {
    throw ValidationError("coupling", "coupling dimension = joint_count");
  }
  if (!(problem.margin >= 0.0 && problem.margin < 1.0)) {
    throw ValidationError("margin", "margin in [0, 1)");
  }
  auto check_ref = [&](const ComponentRef& ref, const std::string& path) {
    if (ref.actuator < 1 || ref.actuator > n) throw ValidationError(path, "actuator in 1..n_d");
    if (ref.kind == ComponentRef::Kind::motor) {
      if (!problem.library.find_motor(ref.motor_id)) {
        throw ValidationError(path, "motor '" + ref.motor_id + "' exists in library");
      }
    } else {
      const bool found = std::any_of(problem.library.gears.begin(), problem.library.gears.end(),
                                     [&](const GearCandidate& g) { return g.ratio == ref.gear_ratio; });
      if (!found) throw ValidationError(path, "gear ratio exists in library");
    }
  };
  for (std::size_t i = 0; i < problem.rules.size(); ++i) {
    const std::string path = "rules[" + std::to_string(i) + "]";
    std::visit(
        [&](const auto& rule) {
          using T = std::decay_t<decltype(rule)>;
          if constexpr (std::is_same_v<T, MassBudgetRule>) {
            if (!(rule.limit > 0.0)) throw ValidationError(path + ".limit", "limit > 0");
          } else if constexpr (std::is_same_v<T, RequiresRule>) {
            check_ref(rule.if_used, path + ".component_a");
            check_ref(rule.then_used, path + ".component_b");
          } else if constexpr (std::is_same_v<T, MutexRule>) {
            check_ref(rule.first, path + ".component_a");
            check_ref(rule.second, path + ".component_b");
          } else {
            if (rule.actuator < 1 || rule.actuator > n) {
              throw ValidationError(path + ".actuator", "actuator in 1..n_d");
            }
            if (!(rule.limit > 0.0)) throw ValidationError(path + ".limit", "limit > 0");
          }
        },
        problem.rules[i]);
  }
}

std::vector<double> copper_energy_per_segment(const Eigen::Ref<const Eigen::RowVectorXd>& torque,
                                              const MotorSpec& motor,
                                              const std::vector<TaskSegment>& segments) {
  std::vector<double> out;
  out.reserve(segments.size());
  const double scale = motor.winding_resistance / (motor.torque_constant * motor.torque_constant);
  for (const auto& seg : segments) {
    double e = 0.0;
    for (std::size_t k = seg.begin; k + 1 < seg.end; ++k) {
      const double p0 = scale * torque(k) * torque(k);
      const double p1 = scale * torque(k + 1) * torque(k + 1);
      e += 0.5 * (p0 + p1) * seg.dt;
    }
    out.push_back(e);
  }
  return out;
}

std::vector<CandidateCell> enumerate_feasible_pairs(const DesignProblem& problem, int actuator) {
  const auto& lib = problem.library;
  if (actuator < 0 || actuator >= problem.joint_count()) {
    throw ValidationError("actuator", "actuator index in range");
  }
  const auto signals = actuator_signals(problem, actuator);
  const double weight = actuator_trace_weights(problem.coupling)(actuator);
  const double samples = static_cast<double>(problem.tasks.sample_count());

  std::vector<double> copper_limits;
  for (const auto& rule : problem.rules) {
    if (const auto* c = std::get_if<CopperEnergyLimitRule>(&rule)) {
      if (c->actuator - 1 == actuator) copper_limits.push_back(c->limit);
    }
  }

  std::vector<CandidateCell> cells;
  cells.reserve(lib.motors.size() * lib.gears.size());
  for (std::size_t mi = 0; mi < lib.motors.size(); ++mi) {
    const auto& motor = lib.motors[mi];
    ConvexPolygon polygon = operation_polygon(motor, lib);
    if (problem.margin > 0.0) polygon = polygon.scaled(1.0 - problem.margin);
    for (std::size_t gi = 0; gi < lib.gears.size(); ++gi) {
      const auto& gear = lib.gears[gi];
      CandidateCell cell;
      cell.actuator = actuator;
      cell.motor_index = mi;
      cell.gear_index = gi;
      cell.motor_id = motor.id;
      cell.gear_ratio = gear.ratio;
      cell.mass = motor.mass;
      cell.reflected_inertia_contribution =
          actuator_reflected_inertia(motor.rotor_inertia, gear.ratio) * weight * samples;

      // Motor torque needed to deliver the joint-side torque through the gear.
      const Eigen::RowVectorXd motor_velocity = gear.ratio * signals.velocity;
      const Eigen::RowVectorXd motor_torque = signals.torque / (gear.ratio * gear.efficiency);
      cell.feasible = true;
      for (Eigen::Index k = 0; k < motor_velocity.size(); ++k) {
        const OperatingPoint p{motor_velocity(k), motor_torque(k)};
        const double slack = polygon.min_slack(p);
        if (slack < -1e-9) {
          cell.feasible = false;
          cell.violation = SampleViolation{static_cast<std::size_t>(k), p, slack};
          cell.infeasible_reason = "sample " + std::to_string(k) + " outside operation domain";
          break;
        }
      }
      cell.copper_energy_per_task =
          copper_energy_per_segment(motor_torque, motor, problem.tasks.segments);
      if (cell.feasible) {
        for (double limit : copper_limits) {
          for (std::size_t s = 0; s < cell.copper_energy_per_task.size(); ++s) {
            if (cell.copper_energy_per_task[s] > limit) {
              cell.feasible = false;
              cell.infeasible_reason = "copper energy " + format_number(cell.copper_energy_per_task[s]) +
                                       " J exceeds limit in task '" +
                                       problem.tasks.segments[s].name + "'";
              break;
            }
          }
          if (!cell.feasible) break;
        }
      }
      cells.push_back(std::move(cell));
    }
  }
  return cells;
}

std::vector<std::vector<CandidateCell>> enumerate_all_cells(const DesignProblem& problem) {
  std::vector<std::vector<CandidateCell>> out;
  for (int a = 0; a < problem.joint_count(); ++a) out.push_back(enumerate_feasible_pairs(problem, a));
  return out;
}

namespace {

BinaryVariable selection_variable(const CandidateCell& cell, const Library& lib, double cost) {
  BinaryVariable v;
  v.name = "x_a" + std::to_string(cell.actuator + 1) + "_" + cell.motor_id + "_N" +
           format_number(cell.gear_ratio);
  v.cost = cost;
  v.role = VariableRole::selection;
  v.actuator = cell.actuator;
  v.motor_index = cell.motor_index;
  v.gear_index = cell.gear_index;
  v.motor_id = cell.motor_id;
  v.gear_ratio = cell.gear_ratio;
  v.mass = cell.mass;
  v.mass_grams = whole_grams(cell.mass);
  v.reflected_inertia =
      actuator_reflected_inertia(lib.motors[cell.motor_index].rotor_inertia, cell.gear_ratio);
  return v;
}

/// Budget row and logical rule rows over the selection variables.
/// `cell_of` maps each selection variable to the cell it stands for.
void add_rule_rows(BilpModel& model, const DesignProblem& problem,
                   const std::vector<std::pair<std::size_t, const CandidateCell*>>& cell_of) {
  if (auto budget = problem.mass_budget()) {
    LinearRow row{"mass_budget", RowKind::budget, {}, *budget};
    bool grams = true;
    for (const auto& [v, cell] : cell_of) {
      row.terms.emplace_back(v, cell->mass);
      if (!model.variables[v].mass_grams) grams = false;
    }
    model.budget_row = model.add_row(std::move(row));
    if (grams) model.budget_grams = static_cast<long long>(std::floor(*budget * 1000.0 + 1e-6));
  }
  auto terms_for = [&](const ComponentRef& ref, double coef) {
    std::vector<std::pair<std::size_t, double>> terms;
    for (const auto& [v, cell] : cell_of) {
      if (matches(ref, *cell)) terms.emplace_back(v, coef);
    }
    return terms;
  };
  for (const auto& rule : problem.rules) {
    if (const auto* r = std::get_if<RequiresRule>(&rule)) {
      LinearRow row{"requires " + r->if_used.to_string() + " -> " + r->then_used.to_string(),
                    RowKind::rule, terms_for(r->if_used, 1.0), 0.0};
      for (auto& t : terms_for(r->then_used, -1.0)) row.terms.push_back(t);
      model.add_row(std::move(row));
    } else if (const auto* x = std::get_if<MutexRule>(&rule)) {
      LinearRow row{"mutex " + x->first.to_string() + " / " + x->second.to_string(),
                    RowKind::rule, terms_for(x->first, 1.0), 1.0};
      for (auto& t : terms_for(x->second, 1.0)) row.terms.push_back(t);
      model.add_row(std::move(row));
    }
  }
}

}  // namespace

BilpModel assemble_bilp(const DesignProblem& problem,
                        const std::vector<std::vector<CandidateCell>>& cells) {
  BilpModel model;
  model.coupling_id = problem.coupling.id;
  std::vector<std::pair<std::size_t, const CandidateCell*>> cell_of;
  for (std::size_t a = 0; a < cells.size(); ++a) {
    std::vector<std::size_t> group;
    for (const auto& cell : cells[a]) {
      if (!cell.feasible) continue;
      const auto v = model.add_variable(
          selection_variable(cell, problem.library, cell.reflected_inertia_contribution));
      group.push_back(v);
      cell_of.emplace_back(v, &cell);
    }
    if (group.empty() && !model.trivially_infeasible) {
      model.trivially_infeasible = true;
      model.infeasibility_reason =
          "actuator " + std::to_string(a + 1) + " has no feasible motor-gear pair";
    }
    model.groups.push_back(std::move(group));
  }
  add_rule_rows(model, problem, cell_of);
  return model;
}

BilpModel assemble_bilp(const DesignProblem& problem) {
  return assemble_bilp(problem, enumerate_all_cells(problem));
}

BilpModel assemble_coupling_selection_bilp(const DesignProblem& base,
                                           const std::vector<CouplingSpec>& couplings) {
  if (couplings.empty()) throw ValidationError("couplings", "at least one coupling");
  const int n = base.joint_count();
  // cells[c][a][pair]
  std::vector<std::vector<std::vector<CandidateCell>>> cells;
  for (const auto& c : couplings) {
    if (c.dimension() != n) throw ValidationError("couplings", "coupling dimension = joint_count");
    DesignProblem p = base;
    p.coupling = c;
    cells.push_back(enumerate_all_cells(p));
  }

  BilpModel model;
  std::vector<std::size_t> coupling_vars;
  for (const auto& c : couplings) {
    BinaryVariable w;
    w.name = "w_" + c.id;
    w.role = VariableRole::coupling;
    w.coupling_id = c.id;
    coupling_vars.push_back(model.add_variable(std::move(w)));
  }
  model.groups.push_back(coupling_vars);

  std::vector<std::pair<std::size_t, const CandidateCell*>> cell_of;
  for (int a = 0; a < n; ++a) {
    std::vector<std::size_t> group;
    const std::size_t pairs = cells[0][a].size();
    for (std::size_t k = 0; k < pairs; ++k) {
      bool any = false;
      for (std::size_t c = 0; c < couplings.size(); ++c) any = any || cells[c][a][k].feasible;
      if (!any) continue;
      const CandidateCell& cell = cells[0][a][k];
      const auto v = model.add_variable(selection_variable(cell, base.library, 0.0));
      group.push_back(v);
      cell_of.emplace_back(v, &cell);
      for (std::size_t c = 0; c < couplings.size(); ++c) {
        const CandidateCell& cc = cells[c][a][k];
        if (cc.feasible) {
          const std::array<std::size_t, 2> factors{v, coupling_vars[c]};
          linearize_product(model, factors, "z_" + model.variables[v].name + "_" + couplings[c].id,
                            cc.reflected_inertia_contribution);
        } else {
          model.add_row({"excl " + model.variables[v].name + " / " + couplings[c].id, RowKind::rule,
                         {{v, 1.0}, {coupling_vars[c], 1.0}}, 1.0});
        }
      }
    }
    if (group.empty() && !model.trivially_infeasible) {
      model.trivially_infeasible = true;
      model.infeasibility_reason = "actuator " + std::to_string(a + 1) +
                                   " has no feasible motor-gear pair under any coupling";
    }
    model.groups.push_back(std::move(group));
  }
  add_rule_rows(model, base, cell_of);
  return model;
}

InfeasibilityDiagnosis diagnose(const DesignProblem& problem,
                                const std::vector<std::vector<CandidateCell>>& cells,
                                std::string reason) {
  InfeasibilityDiagnosis d;
  d.reason = std::move(reason);
  d.budget = problem.mass_budget();
  double sum = 0.0;
  bool all = true;
  for (std::size_t a = 0; a < cells.size(); ++a) {
    ActuatorDiagnosis ad;
    ad.actuator = static_cast<int>(a);
    const auto signals = actuator_signals(problem, static_cast<int>(a));
    ad.peak_velocity = signals.velocity.cwiseAbs().maxCoeff();
    ad.peak_torque = signals.torque.cwiseAbs().maxCoeff();
    for (const auto& cell : cells[a]) {
      if (!cell.feasible) continue;
      ++ad.feasible_cells;
      if (!ad.min_feasible_mass || cell.mass < *ad.min_feasible_mass) {
        ad.min_feasible_mass = cell.mass;
        ad.lightest_feasible_motor = cell.motor_id;
      }
    }
    // Strongest joint-side torque any motor offers through any gear.
    for (const auto& motor : problem.library.motors) {
      for (const auto& gear : problem.library.gears) {
        const double t = motor.peak_torque * gear.ratio * gear.efficiency;
        if (!ad.best_motor_peak_torque || t > *ad.best_motor_peak_torque) ad.best_motor_peak_torque = t;
      }
    }
    if (ad.min_feasible_mass) sum += *ad.min_feasible_mass; else all = false;
    d.actuators.push_back(std::move(ad));
  }
  if (all) d.min_feasible_mass_sum = sum;
  return d;
}

void verify_solution(const DesignProblem& problem, const DesignSolution& solution) {
  if (!solution.optimal()) return;
  const auto& lib = problem.library;
  const int n = problem.joint_count();
  if (static_cast<int>(solution.choices.size()) != n) {
    throw SolverError("verification: solution does not assign every actuator");
  }
  const CouplingSpec* coupling = &problem.coupling;
  if (solution.coupling_id != problem.coupling.id) {
    coupling = lib.find_coupling(solution.coupling_id);
    if (!coupling) throw SolverError("verification: unknown coupling '" + solution.coupling_id + "'");
  }
  Eigen::VectorXd ratios(n), efficiency(n), inertias(n);
  double mass = 0.0;
  for (int a = 0; a < n; ++a) {
    const auto& c = solution.choices[a];
    const MotorSpec* motor = lib.find_motor(c.motor_id);
    if (!motor) throw SolverError("verification: unknown motor '" + c.motor_id + "'");
    auto gear = std::find_if(lib.gears.begin(), lib.gears.end(),
                             [&](const GearCandidate& g) { return g.ratio == c.gear_ratio; });
    if (gear == lib.gears.end()) throw SolverError("verification: unknown gear ratio");
    ratios(a) = gear->ratio;
    efficiency(a) = gear->efficiency;
    inertias(a) = actuator_reflected_inertia(motor->rotor_inertia, gear->ratio);
    mass += motor->mass;
  }
  // Feasibility certificate.
  const auto mt = project_to_motor_space(problem.tasks, GearMatrix(ratios), *coupling);
  for (int a = 0; a < n; ++a) {
    const MotorSpec* motor = lib.find_motor(solution.choices[a].motor_id);
    ConvexPolygon polygon = operation_polygon(*motor, lib);
    if (problem.margin > 0.0) polygon = polygon.scaled(1.0 - problem.margin);
    for (Eigen::Index k = 0; k < mt.velocity.cols(); ++k) {
      const OperatingPoint p{mt.velocity(a, k), mt.torque(a, k) / efficiency(a)};
      if (polygon.min_slack(p) < -1e-9) {
        throw SolverError("verification: actuator " + std::to_string(a + 1) + " sample " +
                          std::to_string(k) + " outside operation domain");
      }
    }
    for (const auto& rule : problem.rules) {
      if (const auto* c = std::get_if<CopperEnergyLimitRule>(&rule)) {
        if (c->actuator - 1 != a) continue;
        const auto e = copper_energy_per_segment(mt.torque.row(a) / efficiency(a), *motor,
                                                 problem.tasks.segments);
        for (double v : e) {
          if (v > c->limit * (1.0 + 1e-9)) throw SolverError("verification: copper energy limit exceeded");
        }
      }
    }
  }
  if (auto budget = problem.mass_budget()) {
    if (mass > *budget + 1e-9) throw SolverError("verification: mass budget exceeded");
  }
  for (const auto& rule : problem.rules) {
    auto used = [&](const ComponentRef& ref) {
      const auto& c = solution.choices[ref.actuator - 1];
      return ref.kind == ComponentRef::Kind::motor ? c.motor_id == ref.motor_id
                                                    : c.gear_ratio == ref.gear_ratio;
    };
    if (const auto* r = std::get_if<RequiresRule>(&rule)) {
      if (used(r->if_used) && !used(r->then_used)) throw SolverError("verification: requires rule violated");
    } else if (const auto* x = std::get_if<MutexRule>(&rule)) {
      if (used(x->first) && used(x->second)) throw SolverError("verification: mutex rule violated");
    }
  }
  // Objective against a direct recomputation of T * trace.
  const auto H = joint_space_inertia(ActuatorInertiaSet{inertias}, *coupling);
  const double expected = trajectory_trace_cost(H, problem.tasks.sample_count());
  if (std::abs(expected - solution.objective_value) > 1e-9 * std::max(std::abs(expected), 1e-300)) {
    std::ostringstream os;
    os.precision(17);
    os << "verification: objective " << solution.objective_value << " differs from recomputed "
       << expected;
    throw SolverError(os.str());
  }
}

DesignSolution solve(const DesignProblem& problem, const SolveOptions& options) {
  validate(problem);
  return solve(problem, enumerate_all_cells(problem), options);
}

DesignSolution solve(const DesignProblem& problem, const std::vector<std::vector<CandidateCell>>& cells,
                     const SolveOptions& options) {
  const BilpModel model = assemble_bilp(problem, cells);

  DesignSolution sol;
  SolverChoice choice = options.solver;
  if (choice == SolverChoice::automatic) {
    choice = model.is_mckp_shaped() ? SolverChoice::mckp : SolverChoice::bnb;
  }
  sol = choice == SolverChoice::mckp ? solve_mckp(model) : solve_bnb(model, options.bnb);

  if (sol.optimal()) {
    verify_solution(problem, sol);
  } else {
    const std::string reason = sol.diagnosis ? sol.diagnosis->reason : "infeasible";
    sol.diagnosis = diagnose(problem, cells, reason);
  }
  return sol;
}

DesignSolution solve_with_coupling_selection(const DesignProblem& base,
                                             const std::vector<CouplingSpec>& couplings,
                                             const BnbOptions& options) {
  validate(base);
  const BilpModel model = assemble_coupling_selection_bilp(base, couplings);
  DesignSolution sol = solve_bnb(model, options);
  if (sol.optimal()) {
    DesignProblem chosen = base;
    for (const auto& c : couplings) {
      if (c.id == sol.coupling_id) chosen.coupling = c;
    }
    chosen.library.couplings = couplings;
    verify_solution(chosen, sol);
  }
  return sol;
}

}  // namespace actuforge
