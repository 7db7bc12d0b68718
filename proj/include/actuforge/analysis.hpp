#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "actuforge/library.hpp"
#include "actuforge/optimizer.hpp"
#include "actuforge/tasking.hpp"

namespace actuforge {

/// Components of a solved design resolved against a library.
struct SelectedDesign {
  std::vector<const MotorSpec*> motors;
  Eigen::VectorXd ratios;
  Eigen::VectorXd efficiencies;
  CouplingSpec coupling;
};

/// Looks up the solution's motors, gears and coupling. `coupling` overrides
/// the library lookup (for couplings that are not stored in the library).
SelectedDesign resolve_design(const DesignSolution& solution, const Library& library,
                              const CouplingSpec* coupling = nullptr);

struct InertiaReport {
  Eigen::MatrixXd matrix;       // joint space, kg·m²
  Eigen::VectorXd eigenvalues;  // descending
  double trace = 0.0;
};

InertiaReport inertia_report(const SelectedDesign& design);
InertiaReport inertia_report(const DesignSolution& solution, const Library& library,
                             const CouplingSpec* coupling = nullptr);

struct CopperLossReport {
  Eigen::MatrixXd power;                 // W, motor x sample
  std::vector<std::string> task_names;   // one per task segment
  Eigen::MatrixXd energy;                // J, motor x task
  std::vector<double> task_energy;       // J, summed over motors
  double total_energy = 0.0;             // J
};

/// P = R (tau_m / k_t)² per motor and sample; energy by trapezoids within
/// each task segment.
CopperLossReport copper_loss(const SelectedDesign& design, const TaskTrajectory& tasks);
CopperLossReport copper_loss(const DesignSolution& solution, const TaskTrajectory& tasks,
                             const Library& library, const CouplingSpec* coupling = nullptr);

enum class PolytopeSpace { joint, task };

/// normal . x <= offset
struct Halfspace {
  Eigen::VectorXd normal;
  double offset = 0.0;
};

struct CapabilityPolytope {
  PolytopeSpace space = PolytopeSpace::joint;
  std::vector<Halfspace> halfspaces;
  std::vector<Eigen::VectorXd> vertices;
  double volume = 0.0;
};

/// lo <= A x <= hi as halfspaces.
std::vector<Halfspace> interval_halfspaces(const Eigen::MatrixXd& A, const Eigen::VectorXd& lo,
                                           const Eigen::VectorXd& hi);

/// Vertex enumeration by intersecting every subset of d planes (d = 2 or 3),
/// merging duplicates within 1e-9; area or volume of the hull.
CapabilityPolytope polytope_from_halfspaces(std::vector<Halfspace> halfspaces, PolytopeSpace space);

/// Available motor torque per actuator: the operation polygon's vertical
/// slice at the given motor velocity (zero when absent). An empty slice is
/// reported as [0, 0].
std::vector<Interval> motor_torque_intervals(const SelectedDesign& design, const Library& library,
                                             const std::optional<Eigen::VectorXd>& motor_velocity);

/// Joint-torque capability: image of the motor-torque box under
/// tau_j = C^-T N tau_m, with volume |det(C^-T N)| * prod(widths).
CapabilityPolytope joint_torque_polytope(const SelectedDesign& design, const Library& library,
                                         const std::optional<Eigen::VectorXd>& motor_velocity = {});
CapabilityPolytope joint_torque_polytope(const DesignSolution& solution, const Library& library,
                                         const std::optional<Eigen::VectorXd>& motor_velocity = {},
                                         const CouplingSpec* coupling = nullptr);

/// Parallelotope {T u : lo <= u <= hi} for an invertible T.
CapabilityPolytope parallelotope(const Eigen::MatrixXd& T, const Eigen::VectorXd& lo,
                                 const Eigen::VectorXd& hi);

/// Five-joint leg: hip yaw (z), hip roll (x), hip pitch (y), knee pitch (y),
/// ankle pitch (y). At q = 0 the leg hangs along -z.
struct LegKinematics {
  double thigh = 0.22;  // m
  double shank = 0.22;  // m
  Eigen::Vector3d yaw_to_roll = Eigen::Vector3d::Zero();
  Eigen::Vector3d roll_to_pitch = Eigen::Vector3d::Zero();
  Eigen::Vector3d ankle_to_foot = Eigen::Vector3d::Zero();
};

void validate(const LegKinematics& kin);

/// Joint origins (5) followed by the foot point, in the hip frame.
std::vector<Eigen::Vector3d> leg_points(const LegKinematics& kin, const Eigen::VectorXd& q);
Eigen::Vector3d foot_position(const LegKinematics& kin, const Eigen::VectorXd& q);
/// 3x5 linear-velocity Jacobian of the foot point.
Eigen::MatrixXd leg_jacobian(const LegKinematics& kin, const Eigen::VectorXd& q);

/// A bent-knee stance used when no configuration is given.
Eigen::VectorXd nominal_configuration();

/// {F : lo <= A J^T F <= hi} where lo <= A tau_j <= hi is the joint-torque
/// capability. Throws SolverError("singular configuration") if rank J < 3.
CapabilityPolytope force_capability_polytope(const SelectedDesign& design, const Library& library,
                                             const LegKinematics& kin, const Eigen::VectorXd& q,
                                             const std::optional<Eigen::VectorXd>& motor_velocity = {});
CapabilityPolytope force_capability_polytope(const DesignSolution& solution, const Library& library,
                                             const LegKinematics& kin, const Eigen::VectorXd& q,
                                             const std::optional<Eigen::VectorXd>& motor_velocity = {},
                                             const CouplingSpec* coupling = nullptr);

/// {F : lo <= M F <= hi}; M must have full column rank.
CapabilityPolytope force_polytope(const Eigen::MatrixXd& M, const Eigen::VectorXd& lo,
                                  const Eigen::VectorXd& hi);

/// Mean and covariance of log-volume of the force polytope over configurations.
struct VolumeStatistics {
  std::size_t samples = 0;
  double mean_log_volume = 0.0;
  double variance_log_volume = 0.0;
  std::size_t singular = 0;  // configurations skipped
};

VolumeStatistics force_polytope_statistics(const SelectedDesign& design, const Library& library,
                                           const LegKinematics& kin,
                                           const std::vector<Eigen::VectorXd>& configurations);

/// Indices of the non-dominated points (component-wise minimization),
/// in input order.
std::vector<std::size_t> pareto_front(const std::vector<std::vector<double>>& points);

}  // namespace actuforge
