#include "actuforge/library.hpp"

#include <boost/rational.hpp>

#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <regex>
#include <set>
#include <sstream>

#include "actuforge/errors.hpp"

namespace actuforge {
namespace {

using Rational = boost::rational<long long>;
using RationalBlock = std::array<std::array<Rational, 2>, 2>;

// Block entries of C and C^-1 in exact arithmetic.
RationalBlock differential_rational() {
  const Rational h(1, 2);
  return {{{h, h}, {-h, h}}};
}

RationalBlock invert(const RationalBlock& m) {
  const Rational det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
  if (det.numerator() == 0) throw ValidationError("jacobian", "jacobian invertible");
  return {{{m[1][1] / det, -m[0][1] / det}, {-m[1][0] / det, m[0][0] / det}}};
}

double to_double(const Rational& r) {
  return static_cast<double>(r.numerator()) / static_cast<double>(r.denominator());
}

std::string index_path(const char* list, std::size_t i) {
  return std::string(list) + "[" + std::to_string(i) + "]";
}

void require_positive(double v, const std::string& path, const char* invariant) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError(path, invariant);
}

// Reads exactly one of several unit-annotated keys and converts to SI.
double read_quantity(const nlohmann::json& obj, const std::string& path,
                     std::initializer_list<std::pair<const char*, double>> keys) {
  std::optional<double> value;
  std::string found;
  for (const auto& [key, scale] : keys) {
    if (!obj.contains(key)) continue;
    if (value) {
      throw ValidationError(path + "." + key, "only one of " + found + ", " + key);
    }
    const auto& field = obj.at(key);
    if (!field.is_number()) throw ValidationError(path + "." + key, "numeric value");
    value = field.get<double>() * scale;
    found = key;
  }
  if (!value) throw ValidationError(path + "." + keys.begin()->first, "field present");
  return *value;
}

OperationDomainTemplate template_from_json(const nlohmann::json& j, const std::string& path) {
  if (!j.is_object() || !j.contains("alpha") || !j.contains("beta")) {
    throw ValidationError(path, "alpha and beta present");
  }
  OperationDomainTemplate t;
  try {
    t.alpha = j.at("alpha").get<std::vector<double>>();
    t.beta = j.at("beta").get<std::vector<double>>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError(path, "numeric alpha and beta arrays");
  }
  return t;
}

nlohmann::json template_to_json(const OperationDomainTemplate& t) {
  return {{"alpha", t.alpha}, {"beta", t.beta}};
}

}  // namespace

const MotorSpec* Library::find_motor(std::string_view id) const {
  for (const auto& m : motors) {
    if (m.id == id) return &m;
  }
  return nullptr;
}

const CouplingSpec* Library::find_coupling(std::string_view id) const {
  for (const auto& c : couplings) {
    if (c.id == id) return &c;
  }
  return nullptr;
}

Eigen::Matrix2d differential_block() {
  Eigen::Matrix2d c;
  c << 0.5, 0.5, -0.5, 0.5;
  return c;
}

CouplingSpec build_coupling(const std::vector<CouplingBlock>& blocks, std::string id) {
  if (blocks.empty()) throw ValidationError("blocks", "non-empty block list");
  int next = 1;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto& b = blocks[i];
    if (b.first_joint < next) {
      throw ValidationError(index_path("blocks", i), "blocks do not overlap");
    }
    if (b.first_joint > next) {
      throw ValidationError(index_path("blocks", i), "blocks leave no gap");
    }
    next += b.size();
  }
  const int n = next - 1;

  CouplingSpec spec;
  spec.blocks = blocks;
  spec.verified = true;
  spec.jacobian = Eigen::MatrixXd::Zero(n, n);
  spec.inverse = Eigen::MatrixXd::Zero(n, n);
  const RationalBlock cd = differential_rational();
  const RationalBlock cd_inv = invert(cd);
  for (const auto& b : blocks) {
    const int k = b.first_joint - 1;
    if (b.kind == BlockKind::serial) {
      spec.jacobian(k, k) = 1.0;
      spec.inverse(k, k) = 1.0;
      continue;
    }
    for (int r = 0; r < 2; ++r) {
      for (int c = 0; c < 2; ++c) {
        spec.jacobian(k + r, k + c) = to_double(cd[r][c]);
        spec.inverse(k + r, k + c) = to_double(cd_inv[r][c]);
      }
    }
  }

  if (id.empty()) {
    std::string name;
    for (const auto& b : blocks) {
      if (b.kind != BlockKind::differential) continue;
      name += "-" + std::to_string(b.first_joint) + std::to_string(b.first_joint + 1);
    }
    id = name.empty() ? "serial" : "par" + name;
  }
  spec.id = std::move(id);
  return spec;
}

std::vector<CouplingBlock> parse_coupling_blocks(const std::vector<std::string>& tokens) {
  static const std::regex diff_re(R"(^\s*d\s*\(\s*(\d+)\s*,\s*(\d+)\s*\)\s*$)");
  static const std::regex serial_re(R"(^\s*s\s*$)");
  std::vector<CouplingBlock> blocks;
  int next = 1;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    std::smatch m;
    if (std::regex_match(tokens[i], m, serial_re)) {
      blocks.push_back({BlockKind::serial, next});
      next += 1;
      continue;
    }
    if (!std::regex_match(tokens[i], m, diff_re)) {
      throw ValidationError(index_path("blocks", i), "block token is \"s\" or \"d(i,j)\"");
    }
    const int a = std::stoi(m[1].str());
    const int b = std::stoi(m[2].str());
    if (b != a + 1) {
      throw ValidationError(index_path("blocks", i), "couplings join consecutive joints");
    }
    if (a != next) {
      throw ValidationError(index_path("blocks", i),
                            a < next ? "blocks do not overlap" : "blocks leave no gap");
    }
    blocks.push_back({BlockKind::differential, a});
    next += 2;
  }
  return blocks;
}

std::vector<std::string> format_coupling_blocks(const std::vector<CouplingBlock>& blocks) {
  std::vector<std::string> out;
  for (const auto& b : blocks) {
    if (b.kind == BlockKind::serial) {
      out.emplace_back("s");
    } else {
      out.push_back("d(" + std::to_string(b.first_joint) + "," +
                    std::to_string(b.first_joint + 1) + ")");
    }
  }
  return out;
}

CouplingSpec raw_coupling(std::string id, const Eigen::MatrixXd& jacobian) {
  if (jacobian.rows() == 0 || jacobian.rows() != jacobian.cols()) {
    throw ValidationError("jacobian", "jacobian square");
  }
  if (!jacobian.allFinite()) throw ValidationError("jacobian", "jacobian finite");
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(jacobian);
  if (!(std::abs(lu.determinant()) > 1e-9)) {
    throw ValidationError("jacobian", "jacobian invertible");
  }
  CouplingSpec spec;
  spec.id = std::move(id);
  spec.jacobian = jacobian;
  spec.inverse = lu.inverse();
  spec.verified = false;
  return spec;
}

std::vector<CouplingSpec> standard_couplings() {
  const auto s = [](int j) { return CouplingBlock{BlockKind::serial, j}; };
  const auto d = [](int j) { return CouplingBlock{BlockKind::differential, j}; };
  return {
      build_coupling({s(1), s(2), s(3), s(4), s(5)}),
      build_coupling({d(1), s(3), s(4), s(5)}),
      build_coupling({s(1), d(2), s(4), s(5)}),
      build_coupling({s(1), s(2), d(3), s(5)}),
      build_coupling({s(1), s(2), s(3), d(4)}),
      build_coupling({d(1), d(3), s(5)}),
      build_coupling({d(1), s(3), d(4)}),
      build_coupling({s(1), d(2), d(4)}),
  };
}

ConvexPolygon operation_polygon(const MotorSpec& motor, const OperationDomainTemplate& tmpl) {
  if (tmpl.alpha.size() != tmpl.beta.size()) {
    throw ValidationError("domain_template", "alpha and beta of equal length");
  }
  std::vector<OperatingPoint> pts;
  pts.reserve(tmpl.alpha.size());
  for (std::size_t i = 0; i < tmpl.alpha.size(); ++i) {
    pts.push_back({tmpl.alpha[i] * motor.rated_velocity, tmpl.beta[i] * motor.peak_torque});
  }
  return ConvexPolygon::from_points(std::move(pts));
}

ConvexPolygon operation_polygon(const MotorSpec& motor, const Library& library) {
  return operation_polygon(motor, motor.domain_override.value_or(library.domain_template));
}

void validate(const OperationDomainTemplate& tmpl, const std::string& path) {
  if (tmpl.alpha.size() != tmpl.beta.size()) {
    throw ValidationError(path, "alpha and beta of equal length");
  }
  if (tmpl.alpha.size() < 3) throw ValidationError(path, "at least 3 coefficients");
  // Positive axis scaling preserves convexity and winding, so the unit
  // motor is representative of every motor.
  MotorSpec unit;
  unit.rated_velocity = 1.0;
  unit.peak_torque = 1.0;
  try {
    (void)operation_polygon(unit, tmpl);
  } catch (const ValidationError& e) {
    throw ValidationError(path, "convex non-degenerate polygon (" + e.invariant() + ")");
  }
}

void validate(const Library& library) {
  if (library.motors.empty()) throw ValidationError("motors", "non-empty list");
  if (library.gears.empty()) throw ValidationError("gears", "non-empty list");
  if (library.couplings.empty()) throw ValidationError("couplings", "non-empty list");
  validate(library.domain_template, "domain_template");

  std::set<std::string> ids;
  for (std::size_t i = 0; i < library.motors.size(); ++i) {
    const auto& m = library.motors[i];
    const auto p = index_path("motors", i);
    if (m.id.empty()) throw ValidationError(p + ".id", "non-empty id");
    if (!ids.insert(m.id).second) throw ValidationError(p + ".id", "id unique");
    require_positive(m.mass, p + ".mass_kg", "mass > 0");
    require_positive(m.rotor_inertia, p + ".rotor_inertia_kgm2", "rotor_inertia > 0");
    require_positive(m.rated_velocity, p + ".rated_velocity_rad_s", "rated_velocity > 0");
    require_positive(m.peak_torque, p + ".peak_torque_Nm", "peak_torque > 0");
    require_positive(m.torque_constant, p + ".torque_constant_Nm_A", "torque_constant > 0");
    require_positive(m.winding_resistance, p + ".winding_resistance_ohm",
                     "winding_resistance > 0");
    if (m.domain_override) validate(*m.domain_override, p + ".domain_template");
  }

  std::set<double> ratios;
  for (std::size_t i = 0; i < library.gears.size(); ++i) {
    const auto& g = library.gears[i];
    const auto p = index_path("gears", i);
    require_positive(g.ratio, p + ".ratio", "ratio > 0");
    if (!(g.efficiency > 0.0 && g.efficiency <= 1.0)) {
      throw ValidationError(p + ".efficiency", "efficiency in (0,1]");
    }
    if (!ratios.insert(g.ratio).second) throw ValidationError(p + ".ratio", "ratio unique");
  }

  std::set<std::string> coupling_ids;
  const int dim = library.couplings.front().dimension();
  for (std::size_t i = 0; i < library.couplings.size(); ++i) {
    const auto& c = library.couplings[i];
    const auto p = index_path("couplings", i);
    if (c.id.empty()) throw ValidationError(p + ".id", "non-empty id");
    if (!coupling_ids.insert(c.id).second) throw ValidationError(p + ".id", "id unique");
    if (c.jacobian.rows() != c.jacobian.cols() || c.jacobian.rows() == 0) {
      throw ValidationError(p + ".jacobian", "jacobian square");
    }
    if (c.dimension() != dim) {
      throw ValidationError(p + ".jacobian", "consistent joint count");
    }
    if (!(std::abs(c.jacobian.determinant()) > 1e-9)) {
      throw ValidationError(p + ".jacobian", "jacobian invertible");
    }
  }
}

Library library_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ParseError("library document must be an object");
  for (const char* key : {"motors", "gears", "couplings", "domain_template"}) {
    if (!doc.contains(key)) throw ValidationError(key, "field present");
  }
  const auto& motors = doc.at("motors");
  const auto& gears = doc.at("gears");
  const auto& couplings = doc.at("couplings");
  if (!motors.is_array()) throw ValidationError("motors", "array");
  if (!gears.is_array()) throw ValidationError("gears", "array");
  if (!couplings.is_array()) throw ValidationError("couplings", "array");

  Library lib;
  constexpr double kRpm = 2.0 * std::numbers::pi / 60.0;
  for (std::size_t i = 0; i < motors.size(); ++i) {
    const auto& m = motors[i];
    const auto p = index_path("motors", i);
    if (!m.is_object()) throw ValidationError(p, "object");
    MotorSpec spec;
    if (!m.contains("id") || !m.at("id").is_string()) {
      throw ValidationError(p + ".id", "string id");
    }
    spec.id = m.at("id").get<std::string>();
    spec.mass = read_quantity(m, p, {{"mass_kg", 1.0}, {"mass_g", 1e-3}});
    spec.rotor_inertia = read_quantity(
        m, p, {{"rotor_inertia_kgm2", 1.0}, {"rotor_inertia_gcm2", 1e-7}, {"rotor_inertia_kgcm2", 1e-4}});
    spec.rated_velocity =
        read_quantity(m, p, {{"rated_velocity_rad_s", 1.0}, {"rated_velocity_rpm", kRpm}});
    spec.peak_torque = read_quantity(m, p, {{"peak_torque_Nm", 1.0}});
    spec.torque_constant = read_quantity(m, p, {{"torque_constant_Nm_A", 1.0}});
    spec.winding_resistance = read_quantity(m, p, {{"winding_resistance_ohm", 1.0}});
    if (m.contains("domain_template")) {
      spec.domain_override = template_from_json(m.at("domain_template"), p + ".domain_template");
    }
    lib.motors.push_back(std::move(spec));
  }

  for (std::size_t i = 0; i < gears.size(); ++i) {
    const auto& g = gears[i];
    const auto p = index_path("gears", i);
    GearCandidate gear;
    if (g.is_number()) {
      gear.ratio = g.get<double>();
    } else if (g.is_object() && g.contains("ratio") && g.at("ratio").is_number()) {
      gear.ratio = g.at("ratio").get<double>();
      if (g.contains("efficiency")) {
        if (!g.at("efficiency").is_number()) {
          throw ValidationError(p + ".efficiency", "numeric value");
        }
        gear.efficiency = g.at("efficiency").get<double>();
      }
    } else {
      throw ValidationError(p, "number or {ratio, efficiency}");
    }
    lib.gears.push_back(gear);
  }

  for (std::size_t i = 0; i < couplings.size(); ++i) {
    const auto& c = couplings[i];
    const auto p = index_path("couplings", i);
    if (!c.is_object()) throw ValidationError(p, "object");
    std::string id = c.value("id", std::string{});
    if (c.contains("blocks")) {
      std::vector<std::string> tokens;
      try {
        tokens = c.at("blocks").get<std::vector<std::string>>();
      } catch (const nlohmann::json::exception&) {
        throw ValidationError(p + ".blocks", "array of block tokens");
      }
      try {
        lib.couplings.push_back(build_coupling(parse_coupling_blocks(tokens), id));
      } catch (const ValidationError& e) {
        throw ValidationError(p + "." + e.path(), e.invariant());
      }
    } else if (c.contains("matrix")) {
      std::vector<std::vector<double>> rows;
      try {
        rows = c.at("matrix").get<std::vector<std::vector<double>>>();
      } catch (const nlohmann::json::exception&) {
        throw ValidationError(p + ".jacobian", "numeric matrix");
      }
      const auto n = static_cast<Eigen::Index>(rows.size());
      Eigen::MatrixXd m(n, n);
      for (Eigen::Index r = 0; r < n; ++r) {
        if (static_cast<Eigen::Index>(rows[r].size()) != n) {
          throw ValidationError(p + ".jacobian", "jacobian square");
        }
        for (Eigen::Index k = 0; k < n; ++k) m(r, k) = rows[r][k];
      }
      if (id.empty()) throw ValidationError(p + ".id", "non-empty id");
      try {
        lib.couplings.push_back(raw_coupling(id, m));
      } catch (const ValidationError& e) {
        throw ValidationError(p + "." + e.path(), e.invariant());
      }
    } else {
      throw ValidationError(p, "blocks or matrix present");
    }
  }

  lib.domain_template = template_from_json(doc.at("domain_template"), "domain_template");
  validate(lib);
  return lib;
}

nlohmann::json library_to_json(const Library& library) {
  nlohmann::json motors = nlohmann::json::array();
  for (const auto& m : library.motors) {
    nlohmann::json j = {
        {"id", m.id},
        {"mass_kg", m.mass},
        {"rotor_inertia_kgm2", m.rotor_inertia},
        {"rated_velocity_rad_s", m.rated_velocity},
        {"peak_torque_Nm", m.peak_torque},
        {"torque_constant_Nm_A", m.torque_constant},
        {"winding_resistance_ohm", m.winding_resistance},
    };
    if (m.domain_override) j["domain_template"] = template_to_json(*m.domain_override);
    motors.push_back(std::move(j));
  }
  nlohmann::json gears = nlohmann::json::array();
  for (const auto& g : library.gears) {
    gears.push_back({{"ratio", g.ratio}, {"efficiency", g.efficiency}});
  }
  nlohmann::json couplings = nlohmann::json::array();
  for (const auto& c : library.couplings) {
    if (c.verified) {
      couplings.push_back({{"id", c.id}, {"blocks", format_coupling_blocks(c.blocks)}});
      continue;
    }
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < c.jacobian.rows(); ++r) {
      std::vector<double> row(c.jacobian.cols());
      for (Eigen::Index k = 0; k < c.jacobian.cols(); ++k) row[k] = c.jacobian(r, k);
      rows.push_back(row);
    }
    couplings.push_back({{"id", c.id}, {"matrix", rows}, {"unverified", true}});
  }
  return {{"motors", motors},
          {"gears", gears},
          {"couplings", couplings},
          {"domain_template", template_to_json(library.domain_template)}};
}

Library load_library(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open library file: " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("malformed library file " + path.string() + ": " + e.what());
  }
  return library_from_json(doc);
}

void save_library(const Library& library, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write library file: " + path.string());
  out << library_to_json(library).dump(2) << '\n';
}

}  // namespace actuforge
