#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace actuforge {

/// Samples [begin, end) that came from one task, with that task's time step.
struct TaskSegment {
  std::string name;
  std::size_t begin = 0;
  std::size_t end = 0;
  double dt = 0.0;

  std::size_t size() const { return end - begin; }
  bool operator==(const TaskSegment&) const = default;
};

/// Joint-space velocity/torque samples. `velocity` and `torque` are
/// joint_count x sample_count. A freshly ingested or synthesized trajectory
/// has one segment; concatenation keeps one segment per source task.
struct TaskTrajectory {
  std::string name;
  double dt = 0.0;
  std::vector<double> times;
  Eigen::MatrixXd velocity;
  Eigen::MatrixXd torque;
  std::vector<TaskSegment> segments;

  int joint_count() const { return static_cast<int>(velocity.rows()); }
  std::size_t sample_count() const { return static_cast<std::size_t>(velocity.cols()); }
  /// Start index of every segment after the first.
  std::vector<std::size_t> boundaries() const;

  bool operator==(const TaskTrajectory& o) const {
    return name == o.name && dt == o.dt && times == o.times && velocity == o.velocity &&
           torque == o.torque && segments == o.segments;
  }
};

struct TaskSet {
  std::vector<TaskTrajectory> tasks;
};

void validate(const TaskTrajectory& traj);
void validate(const TaskSet& tasks);

/// CSV with header `t,w1..wn,tau1..taun`, one row per sample, uniform step.
TaskTrajectory parse_trajectory_csv(std::string_view text, std::string name);
TaskTrajectory ingest_trajectory(const std::filesystem::path& path);
/// Shortest round-trip formatting; re-ingesting reproduces every value.
std::string trajectory_to_csv(const TaskTrajectory& traj);
void save_trajectory(const TaskTrajectory& traj, const std::filesystem::path& path);

/// w_j(t) = velocity_amplitude_j cos(2 pi f t + phase_j),
/// tau_j(t) = torque_amplitude_j sin(2 pi f t + phase_j),
/// sampled at t = k dt for k < round(duration / dt).
struct SinusoidProfile {
  std::string name = "synthetic";
  Eigen::VectorXd velocity_amplitude;
  Eigen::VectorXd torque_amplitude;
  Eigen::VectorXd phase;  // optional, zero when empty
  double frequency = 1.0;
  double duration = 1.0;
  double dt = 0.01;
};

TaskTrajectory synthesize_trajectory(const SinusoidProfile& profile);

/// Zero-phase low-pass on velocities: a single-pole filter run forward then
/// backward, each pass in periodic steady state. Torques are untouched.
TaskTrajectory lowpass_filter(const TaskTrajectory& traj, double cutoff_hz);

/// Appends tasks in order; segments record which samples came from which task.
TaskTrajectory concatenate(const TaskSet& tasks);

}  // namespace actuforge
