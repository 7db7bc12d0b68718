#include "actuforge/transmission.hpp"

#include <array>

#include "actuforge/errors.hpp"
#include "actuforge/exact_cost.hpp"

namespace actuforge {

GearMatrix::GearMatrix(Eigen::VectorXd r) : ratios(std::move(r)) {
  for (Eigen::Index i = 0; i < ratios.size(); ++i) {
    if (!(ratios(i) > 0.0)) {
      throw ValidationError("gears[" + std::to_string(i) + "]", "ratio > 0");
    }
  }
}

double actuator_reflected_inertia(double rotor_inertia, double ratio) {
  if (!(rotor_inertia > 0.0)) throw ValidationError("rotor_inertia", "rotor_inertia > 0");
  if (!(ratio > 0.0)) throw ValidationError("ratio", "ratio > 0");
  return rotor_inertia * ratio * ratio;
}

JointInertiaMatrix joint_space_inertia(const ActuatorInertiaSet& inertias,
                                       const CouplingSpec& coupling) {
  if (inertias.values.size() != coupling.dimension()) {
    throw ValidationError("inertias", "dimension matches coupling");
  }
  for (Eigen::Index i = 0; i < inertias.values.size(); ++i) {
    if (!(inertias.values(i) > 0.0)) {
      throw ValidationError("inertias[" + std::to_string(i) + "]", "inertia > 0");
    }
  }
  const Eigen::MatrixXd& inv = coupling.inverse;
  JointInertiaMatrix out{inv.transpose() * inertias.values.asDiagonal() * inv};
  // Symmetric by construction; remove rounding asymmetry.
  out.matrix = 0.5 * (out.matrix + out.matrix.transpose()).eval();
  return out;
}

double trace_cost(const JointInertiaMatrix& inertia) { return inertia.matrix.trace(); }

double trajectory_trace_cost(const JointInertiaMatrix& inertia, std::size_t samples) {
  const double per_sample = trace_cost(inertia);
  const std::array<double, 1> values{per_sample};
  const auto scale = CostScale::for_values(values);
  const CostUnits unit = scale.to_units(per_sample);
  CostUnits total = 0;
  for (std::size_t k = 0; k < samples; ++k) total += unit;
  return scale.to_double(total);
}

Eigen::VectorXd actuator_trace_weights(const CouplingSpec& coupling) {
  return coupling.inverse.rowwise().squaredNorm();
}

MotorTrajectory project_to_motor_space(const TaskTrajectory& traj, const GearMatrix& gears,
                                       const CouplingSpec& coupling) {
  if (traj.joint_count() != coupling.dimension() || gears.size() != coupling.dimension()) {
    throw ValidationError("trajectory", "joint count matches coupling and gears");
  }
  MotorTrajectory out;
  out.velocity = gears.ratios.asDiagonal() * (coupling.inverse * traj.velocity);
  out.torque = gears.ratios.cwiseInverse().asDiagonal() * (coupling.jacobian.transpose() * traj.torque);
  return out;
}

}  // namespace actuforge
