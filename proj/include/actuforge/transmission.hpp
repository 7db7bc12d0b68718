#pragma once

#include <cstddef>

#include <Eigen/Dense>

#include "actuforge/library.hpp"
#include "actuforge/tasking.hpp"

namespace actuforge {

/// Diagonal gear-ratio Jacobian N.
struct GearMatrix {
  Eigen::VectorXd ratios;

  explicit GearMatrix(Eigen::VectorXd r);
  static GearMatrix identity(int n) { return GearMatrix(Eigen::VectorXd::Ones(n)); }
  Eigen::MatrixXd matrix() const { return ratios.asDiagonal(); }
  int size() const { return static_cast<int>(ratios.size()); }
};

/// Per-actuator reflected inertias (kg·m²), the diagonal of H_a.
struct ActuatorInertiaSet {
  Eigen::VectorXd values;
};

/// Joint-space reflected inertia C^-T H_a C^-1.
struct JointInertiaMatrix {
  Eigen::MatrixXd matrix;
};

/// rotor_inertia * ratio².
double actuator_reflected_inertia(double rotor_inertia, double ratio);

JointInertiaMatrix joint_space_inertia(const ActuatorInertiaSet& inertias,
                                       const CouplingSpec& coupling);

double trace_cost(const JointInertiaMatrix& inertia);

/// Sum over `samples` time steps of the trace. The coupling and H_a are
/// configuration independent, so this is samples * trace, accumulated
/// without rounding drift.
double trajectory_trace_cost(const JointInertiaMatrix& inertia, std::size_t samples);

/// Weight of actuator a in the trace: sum_r (C^-1)_{a,r}^2, so that
/// trace(C^-T H_a C^-1) = sum_a weight_a * I_a.
Eigen::VectorXd actuator_trace_weights(const CouplingSpec& coupling);

/// Motor-space samples, joint_count x sample_count.
struct MotorTrajectory {
  Eigen::MatrixXd velocity;
  Eigen::MatrixXd torque;
};

/// w_m = N C^-1 w_j, tau_m = N^-1 C^T tau_j for every sample.
MotorTrajectory project_to_motor_space(const TaskTrajectory& traj, const GearMatrix& gears,
                                       const CouplingSpec& coupling);

}  // namespace actuforge
