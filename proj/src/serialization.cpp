#include "actuforge/serialization.hpp"

#include <algorithm>

#include "actuforge/errors.hpp"

namespace actuforge {
namespace {

const json& field(const json& doc, const char* key, const std::string& path) {
  if (!doc.is_object()) throw ValidationError(path, "object");
  auto it = doc.find(key);
  if (it == doc.end()) throw ValidationError(path + "." + key, "field present");
  return *it;
}

double number(const json& doc, const char* key, const std::string& path) {
  const json& v = field(doc, key, path);
  if (!v.is_number()) throw ValidationError(path + "." + key, "number");
  return v.get<double>();
}

std::string text(const json& doc, const char* key, const std::string& path) {
  const json& v = field(doc, key, path);
  if (!v.is_string()) throw ValidationError(path + "." + key, "string");
  return v.get<std::string>();
}

ComponentRef component(const json& doc, const char* key, const std::string& path) {
  try {
    return ComponentRef::parse(text(doc, key, path));
  } catch (const ParseError& e) {
    throw ValidationError(path + "." + key, "component reference <motor>@<actuator> or gear:<ratio>@<actuator>");
  }
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> read_optional_number(const json& doc, const char* key) {
  auto it = doc.find(key);
  if (it == doc.end() || it->is_null()) return std::nullopt;
  return it->get<double>();
}

}  // namespace

std::string cost_units_to_string(CostUnits units) {
  if (units == 0) return "0";
  const bool negative = units < 0;
  unsigned __int128 u = negative ? static_cast<unsigned __int128>(-(units + 1)) + 1
                                 : static_cast<unsigned __int128>(units);
  std::string s;
  while (u > 0) {
    s.push_back(static_cast<char>('0' + static_cast<int>(u % 10)));
    u /= 10;
  }
  if (negative) s.push_back('-');
  std::reverse(s.begin(), s.end());
  return s;
}

CostUnits cost_units_from_string(const std::string& t) {
  if (t.empty()) throw ParseError("empty cost units");
  std::size_t i = 0;
  bool negative = false;
  if (t[0] == '-') {
    negative = true;
    i = 1;
  }
  if (i == t.size()) throw ParseError("bad cost units '" + t + "'");
  CostUnits v = 0;
  for (; i < t.size(); ++i) {
    if (t[i] < '0' || t[i] > '9') throw ParseError("bad cost units '" + t + "'");
    v = v * 10 + (t[i] - '0');
  }
  return negative ? -v : v;
}

json rule_to_json(const DesignRule& rule) {
  return std::visit(
      [](const auto& r) -> json {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, MassBudgetRule>) {
          return {{"kind", "mass_budget"}, {"limit_kg", r.limit}};
        } else if constexpr (std::is_same_v<T, RequiresRule>) {
          return {{"kind", "requires"},
                  {"component_a", r.if_used.to_string()},
                  {"component_b", r.then_used.to_string()}};
        } else if constexpr (std::is_same_v<T, MutexRule>) {
          return {{"kind", "mutex"},
                  {"component_a", r.first.to_string()},
                  {"component_b", r.second.to_string()}};
        } else {
          return {{"kind", "copper_energy_limit"}, {"actuator", r.actuator}, {"limit_J", r.limit}};
        }
      },
      rule);
}

DesignRule rule_from_json(const json& doc, const std::string& path) {
  const std::string kind = text(doc, "kind", path);
  if (kind == "mass_budget") return MassBudgetRule{number(doc, "limit_kg", path)};
  if (kind == "requires") {
    return RequiresRule{component(doc, "component_a", path), component(doc, "component_b", path)};
  }
  if (kind == "mutex") {
    return MutexRule{component(doc, "component_a", path), component(doc, "component_b", path)};
  }
  if (kind == "copper_energy_limit") {
    const json& a = field(doc, "actuator", path);
    if (!a.is_number_integer()) throw ValidationError(path + ".actuator", "integer");
    return CopperEnergyLimitRule{a.get<int>(), number(doc, "limit_J", path)};
  }
  throw ValidationError(path + ".kind", "kind in {mass_budget, requires, mutex, copper_energy_limit}");
}

json rules_to_json(const std::vector<DesignRule>& rules) {
  json out = json::array();
  for (const auto& r : rules) out.push_back(rule_to_json(r));
  return out;
}

std::vector<DesignRule> rules_from_json(const json& doc, const std::string& path) {
  if (!doc.is_array()) throw ValidationError(path, "array");
  std::vector<DesignRule> out;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    out.push_back(rule_from_json(doc[i], path + "[" + std::to_string(i) + "]"));
  }
  return out;
}

json diagnosis_to_json(const InfeasibilityDiagnosis& d) {
  json acts = json::array();
  for (const auto& a : d.actuators) {
    acts.push_back({{"actuator", a.actuator + 1},
                    {"feasible_cells", a.feasible_cells},
                    {"min_feasible_mass_kg", optional_number(a.min_feasible_mass)},
                    {"lightest_feasible_motor",
                     a.lightest_feasible_motor ? json(*a.lightest_feasible_motor) : json(nullptr)},
                    {"peak_velocity_rad_s", a.peak_velocity},
                    {"peak_torque_Nm", a.peak_torque},
                    {"best_available_torque_Nm", optional_number(a.best_motor_peak_torque)}});
  }
  return {{"reason", d.reason},
          {"actuators", acts},
          {"min_feasible_mass_sum_kg", optional_number(d.min_feasible_mass_sum)},
          {"budget_kg", optional_number(d.budget)}};
}

InfeasibilityDiagnosis diagnosis_from_json(const json& doc) {
  InfeasibilityDiagnosis d;
  d.reason = doc.at("reason").get<std::string>();
  for (const auto& a : doc.at("actuators")) {
    ActuatorDiagnosis ad;
    ad.actuator = a.at("actuator").get<int>() - 1;
    ad.feasible_cells = a.at("feasible_cells").get<std::size_t>();
    ad.min_feasible_mass = read_optional_number(a, "min_feasible_mass_kg");
    if (!a.at("lightest_feasible_motor").is_null()) {
      ad.lightest_feasible_motor = a.at("lightest_feasible_motor").get<std::string>();
    }
    ad.peak_velocity = a.at("peak_velocity_rad_s").get<double>();
    ad.peak_torque = a.at("peak_torque_Nm").get<double>();
    ad.best_motor_peak_torque = read_optional_number(a, "best_available_torque_Nm");
    d.actuators.push_back(std::move(ad));
  }
  d.min_feasible_mass_sum = read_optional_number(doc, "min_feasible_mass_sum_kg");
  d.budget = read_optional_number(doc, "budget_kg");
  return d;
}

json solution_to_json(const DesignSolution& s) {
  json choices = json::array();
  for (std::size_t a = 0; a < s.choices.size(); ++a) {
    const auto& c = s.choices[a];
    choices.push_back({{"actuator", a + 1},
                       {"motor_id", c.motor_id},
                       {"gear_ratio", c.gear_ratio},
                       {"mass_kg", c.mass},
                       {"reflected_inertia_kgm2", c.reflected_inertia}});
  }
  json out = {{"status", s.optimal() ? "optimal" : "infeasible"},
              {"coupling_id", s.coupling_id},
              {"choices", choices},
              {"objective_kgm2", s.objective_value},
              {"objective_units", cost_units_to_string(s.objective_units)},
              {"cost_exponent", s.cost_exponent},
              {"total_motor_mass_kg", s.total_motor_mass},
              {"selected", s.selected},
              {"stats",
               {{"method", s.stats.method},
                {"nodes", s.stats.nodes},
                {"variables", s.stats.variables},
                {"rows", s.stats.rows}}},
              {"diagnosis", s.diagnosis ? diagnosis_to_json(*s.diagnosis) : json(nullptr)}};
  return out;
}

DesignSolution solution_from_json(const json& doc) {
  DesignSolution s;
  const std::string status = doc.at("status").get<std::string>();
  if (status != "optimal" && status != "infeasible") throw ParseError("unknown solution status '" + status + "'");
  s.status = status == "optimal" ? SolveStatus::optimal : SolveStatus::infeasible;
  s.coupling_id = doc.at("coupling_id").get<std::string>();
  for (const auto& c : doc.at("choices")) {
    s.choices.push_back({c.at("motor_id").get<std::string>(), c.at("gear_ratio").get<double>(),
                         c.at("mass_kg").get<double>(), c.at("reflected_inertia_kgm2").get<double>()});
  }
  s.objective_value = doc.at("objective_kgm2").get<double>();
  s.objective_units = cost_units_from_string(doc.at("objective_units").get<std::string>());
  s.cost_exponent = doc.at("cost_exponent").get<int>();
  s.total_motor_mass = doc.at("total_motor_mass_kg").get<double>();
  s.selected = doc.at("selected").get<std::vector<std::size_t>>();
  const auto& st = doc.at("stats");
  s.stats = {st.at("method").get<std::string>(), st.at("nodes").get<std::size_t>(),
             st.at("variables").get<std::size_t>(), st.at("rows").get<std::size_t>()};
  if (!doc.at("diagnosis").is_null()) s.diagnosis = diagnosis_from_json(doc.at("diagnosis"));
  return s;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Eigen::VectorXd vector_from_json(const json& doc, const std::string& path) {
  if (!doc.is_array()) throw ValidationError(path, "array of numbers");
  Eigen::VectorXd v(static_cast<Eigen::Index>(doc.size()));
  for (std::size_t i = 0; i < doc.size(); ++i) {
    if (!doc[i].is_number()) throw ValidationError(path + "[" + std::to_string(i) + "]", "number");
    v(static_cast<Eigen::Index>(i)) = doc[i].get<double>();
  }
  return v;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) out.push_back(vector_to_json(m.row(r).transpose()));
  return out;
}

json trajectory_to_json(const TaskTrajectory& t) {
  json segs = json::array();
  for (const auto& s : t.segments) {
    segs.push_back({{"name", s.name}, {"begin", s.begin}, {"end", s.end}, {"dt", s.dt}});
  }
  return {{"name", t.name},
          {"dt", t.dt},
          {"times", t.times},
          {"velocity", matrix_to_json(t.velocity)},
          {"torque", matrix_to_json(t.torque)},
          {"segments", segs}};
}

TaskTrajectory trajectory_from_json(const json& doc) {
  TaskTrajectory t;
  t.name = doc.at("name").get<std::string>();
  t.dt = doc.at("dt").get<double>();
  t.times = doc.at("times").get<std::vector<double>>();
  auto read_matrix = [&](const json& rows, const char* what) {
    const auto n = static_cast<Eigen::Index>(rows.size());
    const auto T = static_cast<Eigen::Index>(t.times.size());
    Eigen::MatrixXd m(n, T);
    for (Eigen::Index r = 0; r < n; ++r) {
      const auto& row = rows[static_cast<std::size_t>(r)];
      if (static_cast<Eigen::Index>(row.size()) != T) {
        throw ValidationError(std::string(what) + "[" + std::to_string(r) + "]", "one value per sample");
      }
      for (Eigen::Index k = 0; k < T; ++k) m(r, k) = row[static_cast<std::size_t>(k)].get<double>();
    }
    return m;
  };
  t.velocity = read_matrix(doc.at("velocity"), "velocity");
  t.torque = read_matrix(doc.at("torque"), "torque");
  for (const auto& s : doc.at("segments")) {
    t.segments.push_back({s.at("name").get<std::string>(), s.at("begin").get<std::size_t>(),
                          s.at("end").get<std::size_t>(), s.at("dt").get<double>()});
  }
  validate(t);
  return t;
}

json inertia_report_to_json(const InertiaReport& r) {
  return {{"matrix_kgm2", matrix_to_json(r.matrix)},
          {"eigenvalues_kgm2", vector_to_json(r.eigenvalues)},
          {"trace_kgm2", r.trace}};
}

json copper_loss_to_json(const CopperLossReport& r, bool include_power) {
  json tasks = json::array();
  for (std::size_t s = 0; s < r.task_names.size(); ++s) {
    tasks.push_back({{"task", r.task_names[s]},
                     {"energy_J", r.task_energy[s]},
                     {"per_motor_J", vector_to_json(r.energy.col(static_cast<Eigen::Index>(s)))}});
  }
  json out = {{"tasks", tasks}, {"total_energy_J", r.total_energy}};
  if (include_power) out["power_W"] = matrix_to_json(r.power);
  return out;
}

json polytope_to_json(const CapabilityPolytope& p) {
  json hs = json::array();
  for (const auto& h : p.halfspaces) hs.push_back({{"normal", vector_to_json(h.normal)}, {"offset", h.offset}});
  json vs = json::array();
  for (const auto& v : p.vertices) vs.push_back(vector_to_json(v));
  return {{"space", p.space == PolytopeSpace::joint ? "joint" : "task"},
          {"halfspaces", hs},
          {"vertices", vs},
          {"volume", p.volume}};
}

}  // namespace actuforge
