#include <cmath>

#include <Eigen/Geometry>

#include "actuforge/analysis.hpp"
#include "actuforge/errors.hpp"

namespace actuforge {
namespace {

Eigen::Matrix3d rot(const Eigen::Vector3d& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis).toRotationMatrix();
}

const Eigen::Vector3d kAxes[5] = {Eigen::Vector3d::UnitZ(), Eigen::Vector3d::UnitX(),
                                  Eigen::Vector3d::UnitY(), Eigen::Vector3d::UnitY(),
                                  Eigen::Vector3d::UnitY()};

struct Chain {
  std::vector<Eigen::Vector3d> origins;  // 5 joints + foot
  std::vector<Eigen::Vector3d> axes;     // world axes of the 5 joints
};

Chain forward(const LegKinematics& kin, const Eigen::VectorXd& q) {
  validate(kin);
  if (q.size() != 5) throw ValidationError("q", "five joint angles");
  const Eigen::Vector3d links[5] = {kin.yaw_to_roll, kin.roll_to_pitch,
                                    Eigen::Vector3d(0, 0, -kin.thigh),
                                    Eigen::Vector3d(0, 0, -kin.shank), kin.ankle_to_foot};
  Chain c;
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d p = Eigen::Vector3d::Zero();
  for (int i = 0; i < 5; ++i) {
    c.origins.push_back(p);
    c.axes.push_back(R * kAxes[i]);
    R = R * rot(kAxes[i], q(i));
    p = p + R * links[i];
  }
  c.origins.push_back(p);
  return c;
}

}  // namespace

void validate(const LegKinematics& kin) {
  if (!(kin.thigh > 0.0)) throw ValidationError("kinematics.thigh", "thigh > 0");
  if (!(kin.shank > 0.0)) throw ValidationError("kinematics.shank", "shank > 0");
  if (!kin.yaw_to_roll.allFinite() || !kin.roll_to_pitch.allFinite() || !kin.ankle_to_foot.allFinite()) {
    throw ValidationError("kinematics", "finite offsets");
  }
}

std::vector<Eigen::Vector3d> leg_points(const LegKinematics& kin, const Eigen::VectorXd& q) {
  return forward(kin, q).origins;
}

Eigen::Vector3d foot_position(const LegKinematics& kin, const Eigen::VectorXd& q) {
  return forward(kin, q).origins.back();
}

Eigen::MatrixXd leg_jacobian(const LegKinematics& kin, const Eigen::VectorXd& q) {
  const Chain c = forward(kin, q);
  Eigen::MatrixXd J(3, 5);
  const Eigen::Vector3d& foot = c.origins.back();
  for (int i = 0; i < 5; ++i) J.col(i) = c.axes[i].cross(foot - c.origins[i]);
  return J;
}

Eigen::VectorXd nominal_configuration() {
  Eigen::VectorXd q(5);
  q << 0.0, 0.0, -0.4, 0.8, -0.4;
  return q;
}

}  // namespace actuforge
