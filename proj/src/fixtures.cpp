#include "actuforge/fixtures.hpp"

#include <cmath>
#include <numbers>

namespace actuforge {
namespace {

double round_sig(double v, int digits) {
  if (v == 0.0) return 0.0;
  const double p = std::pow(10.0, digits - 1 - static_cast<int>(std::floor(std::log10(std::abs(v)))));
  return std::round(v * p) / p;
}

constexpr double kPi = std::numbers::pi;

// Per-joint walking profile: w = W sin(2 pi f t + phase),
// tau = T0 + T1 sin(2 pi f t + phase + 0.5).
struct JointWave {
  double w, t0, t1, phase;
};

constexpr JointWave kWalking[5] = {
    {6.0, 0.0, 28.0, 0.0},    // hip yaw
    {6.0, 32.0, 8.0, 0.3},    // hip roll
    {17.0, -5.0, 15.0, 0.0},  // hip pitch
    {-25.0, 30.0, 10.0, 0.0}, // knee pitch
    {15.0, 30.0, 10.0, 0.8},  // ankle pitch
};

// Lift on pitch joints: w = W sin(s), tau = T0 (1 - cos s)/2 + T1 sin(2 s).
struct LiftWave {
  double w, t0, t1;
};

constexpr LiftWave kLifting[5] = {
    {0.0, 0.0, 0.0}, {0.0, 0.0, 0.0}, {1.5, 48.0, 5.0}, {-2.0, -66.0, 5.0}, {1.2, 50.0, 4.0},
};

TaskTrajectory make_trajectory(std::string name, std::size_t samples, double dt) {
  TaskTrajectory t;
  t.name = name;
  t.dt = dt;
  t.velocity = Eigen::MatrixXd::Zero(5, static_cast<Eigen::Index>(samples));
  t.torque = Eigen::MatrixXd::Zero(5, static_cast<Eigen::Index>(samples));
  for (std::size_t k = 0; k < samples; ++k) t.times.push_back(static_cast<double>(k) * dt);
  t.segments = {{std::move(name), 0, samples, dt}};
  return t;
}

}  // namespace

Library fixture_library() {
  Library lib;
  const double masses[10] = {0.20, 0.25, 0.31, 0.37, 0.44, 0.51, 0.59, 0.68, 0.78, 0.90};
  for (double m : masses) {
    const double s = m / 0.5;
    MotorSpec motor;
    motor.id = "qd" + std::to_string(static_cast<int>(std::lround(m * 1000.0)));
    motor.mass = m;
    motor.rotor_inertia = round_sig(6.0e-5 * std::pow(s, 5.0 / 3.0), 4);
    motor.rated_velocity = round_sig(150.0 * std::pow(s, -1.0 / 3.0), 4);
    motor.peak_torque = round_sig(4.0 * std::pow(s, 4.0 / 3.0), 4);
    motor.torque_constant = round_sig(0.1 * std::pow(s, 2.0 / 3.0), 4);
    motor.winding_resistance = round_sig(0.2 * std::pow(s, -1.0 / 3.0), 4);
    lib.motors.push_back(std::move(motor));
  }
  for (int r = 1; r <= 12; ++r) lib.gears.push_back({static_cast<double>(r), 1.0});
  lib.couplings = standard_couplings();
  lib.domain_template = {{1.5, -2.5, -2.5, 1.5}, {1.2, 1.2, -1.2, -1.2}};
  return lib;
}

TaskTrajectory walking_fixture() {
  constexpr std::size_t samples = 150;
  constexpr double dt = 0.001;
  constexpr double f = 1.0 / 0.3;
  TaskTrajectory t = make_trajectory("walking", samples, dt);
  for (int j = 0; j < 5; ++j) {
    const auto& w = kWalking[j];
    for (std::size_t k = 0; k < samples; ++k) {
      const double x = 2.0 * kPi * f * t.times[k] + w.phase;
      // Small 120 Hz ripple stands in for planner noise; the filter removes most of it.
      const double ripple = 0.03 * w.w * std::sin(2.0 * kPi * 120.0 * t.times[k]);
      t.velocity(j, k) = w.w * std::sin(x) + ripple;
      t.torque(j, k) = w.t0 + w.t1 * std::sin(x + 0.5);
    }
  }
  return lowpass_filter(t, 30.0);
}

TaskTrajectory lifting_fixture() {
  constexpr std::size_t samples = 3600;
  constexpr double dt = 0.001;
  TaskTrajectory t = make_trajectory("lifting", samples, dt);
  for (int j = 0; j < 5; ++j) {
    const auto& w = kLifting[j];
    for (std::size_t k = 0; k < samples; ++k) {
      const double s = 2.0 * kPi * t.times[k] / 3.6;
      t.velocity(j, k) = w.w * std::sin(s);
      t.torque(j, k) = w.t0 * 0.5 * (1.0 - std::cos(s)) + w.t1 * std::sin(2.0 * s);
    }
  }
  return t;
}

TaskTrajectory fixture_tasks() { return concatenate(TaskSet{{walking_fixture(), lifting_fixture()}}); }

void write_fixtures(const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_library(fixture_library(), dir / "library.json");
  save_trajectory(walking_fixture(), dir / "walking.csv");
  save_trajectory(lifting_fixture(), dir / "lifting.csv");
}

}  // namespace actuforge
