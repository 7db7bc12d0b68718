#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "actuforge/polygon.hpp"

namespace actuforge {

/// Tuning coefficients placing polygon vertices at
/// (alpha_i * rated_velocity, beta_i * peak_torque).
struct OperationDomainTemplate {
  std::vector<double> alpha;
  std::vector<double> beta;

  bool operator==(const OperationDomainTemplate&) const = default;
};

struct MotorSpec {
  std::string id;
  double mass = 0.0;                // kg
  double rotor_inertia = 0.0;       // kg·m²
  double rated_velocity = 0.0;      // rad/s
  double peak_torque = 0.0;         // N·m
  double torque_constant = 0.0;     // N·m/A
  double winding_resistance = 0.0;  // Ω
  std::optional<OperationDomainTemplate> domain_override;

  bool operator==(const MotorSpec&) const = default;
};

struct GearCandidate {
  double ratio = 1.0;
  double efficiency = 1.0;

  bool operator==(const GearCandidate&) const = default;
};

enum class BlockKind { serial, differential };

/// One diagonal block of a coupling Jacobian. Joints are 1-based.
struct CouplingBlock {
  BlockKind kind = BlockKind::serial;
  int first_joint = 1;

  int size() const { return kind == BlockKind::serial ? 1 : 2; }
  bool operator==(const CouplingBlock&) const = default;
};

/// Actuator-to-joint velocity map C (joint_velocity = C * actuator_velocity)
/// with its inverse cached at construction.
struct CouplingSpec {
  std::string id;
  Eigen::MatrixXd jacobian;
  Eigen::MatrixXd inverse;
  std::vector<CouplingBlock> blocks;  // empty for raw matrices
  bool verified = true;               // false for the raw-matrix escape hatch

  int dimension() const { return static_cast<int>(jacobian.rows()); }
  bool operator==(const CouplingSpec& o) const {
    return id == o.id && jacobian == o.jacobian && inverse == o.inverse &&
           blocks == o.blocks && verified == o.verified;
  }
};

struct Library {
  std::vector<MotorSpec> motors;
  std::vector<GearCandidate> gears;
  std::vector<CouplingSpec> couplings;
  OperationDomainTemplate domain_template;

  const MotorSpec* find_motor(std::string_view id) const;
  const CouplingSpec* find_coupling(std::string_view id) const;
  bool operator==(const Library&) const = default;
};

/// Differential block C_d = 1/2 [[1, 1], [-1, 1]].
Eigen::Matrix2d differential_block();

/// Assembles a block-diagonal coupling. Blocks must partition joints
/// 1..n consecutively; an empty id yields the conventional name
/// ("serial", "par-12", "par-23-45", ...).
CouplingSpec build_coupling(const std::vector<CouplingBlock>& blocks, std::string id = {});

/// Parses tokens such as {"d(1,2)", "s", "d(4,5)"}; each token's joints
/// must start where the previous block ended.
std::vector<CouplingBlock> parse_coupling_blocks(const std::vector<std::string>& tokens);
std::vector<std::string> format_coupling_blocks(const std::vector<CouplingBlock>& blocks);

/// Arbitrary invertible matrix, inverted by partial-pivot LU and flagged
/// unverified.
CouplingSpec raw_coupling(std::string id, const Eigen::MatrixXd& jacobian);

/// The eight couplings of a 5-joint leg: serial, par-12, par-23, par-34,
/// par-45, par-12-34, par-12-45, par-23-45.
std::vector<CouplingSpec> standard_couplings();

ConvexPolygon operation_polygon(const MotorSpec& motor, const OperationDomainTemplate& tmpl);
/// Uses the motor's override when present, else the library template.
ConvexPolygon operation_polygon(const MotorSpec& motor, const Library& library);

void validate(const OperationDomainTemplate& tmpl, const std::string& path = "domain_template");
void validate(const Library& library);

/// Library document (JSON). Accepts unit-annotated alternates
/// (mass_g, rotor_inertia_gcm2, rotor_inertia_kgcm2, rated_velocity_rpm);
/// always writes SI keys.
Library library_from_json(const nlohmann::json& doc);
nlohmann::json library_to_json(const Library& library);
Library load_library(const std::filesystem::path& path);
void save_library(const Library& library, const std::filesystem::path& path);

}  // namespace actuforge
