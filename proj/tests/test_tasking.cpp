#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "actuforge/errors.hpp"
#include "actuforge/fixtures.hpp"
#include "actuforge/tasking.hpp"
#include "actuforge/transmission.hpp"
#include "support.hpp"

using namespace actuforge;

namespace {

std::string parse_message(const std::string& csv) {
  try {
    parse_trajectory_csv(csv, "task");
  } catch (const ParseError& e) {
    return e.what();
  }
  return "<no error>";
}

TaskTrajectory random_trajectory(std::mt19937_64& rng, int n, std::size_t samples) {
  std::normal_distribution<double> g(0.0, 10.0);
  TaskTrajectory t;
  t.name = "rand";
  t.dt = 0.002;
  t.velocity = Eigen::MatrixXd(n, static_cast<Eigen::Index>(samples));
  t.torque = Eigen::MatrixXd(n, static_cast<Eigen::Index>(samples));
  for (std::size_t k = 0; k < samples; ++k) {
    t.times.push_back(static_cast<double>(k) * t.dt);
    for (int j = 0; j < n; ++j) {
      t.velocity(j, static_cast<Eigen::Index>(k)) = g(rng);
      t.torque(j, static_cast<Eigen::Index>(k)) = g(rng);
    }
  }
  t.segments = {{"rand", 0, samples, t.dt}};
  return t;
}

}  // namespace

TEST(TrajectoryCsv, ParsesHeaderAndRows) {
  auto t = parse_trajectory_csv("t,w1,w2,tau1,tau2\n0,1,2,3,4\n0.01,5,6,7,8\n", "walk");
  EXPECT_EQ(t.joint_count(), 2);
  EXPECT_EQ(t.sample_count(), 2u);
  EXPECT_DOUBLE_EQ(t.dt, 0.01);
  EXPECT_EQ(t.velocity(1, 1), 6.0);
  EXPECT_EQ(t.torque(0, 1), 7.0);
  ASSERT_EQ(t.segments.size(), 1u);
  EXPECT_EQ(t.segments[0].name, "walk");
}

TEST(TrajectoryCsv, ErrorsNameLineAndColumn) {
  EXPECT_NE(parse_message("t,w1,tau1\n0,1,2\n0.1,x,2\n").find("line 3, column 'w1'"), std::string::npos);
  EXPECT_NE(parse_message("t,w1,tau1\n0,1,2\n0.1,1,nan\n").find("column 'tau1'"), std::string::npos);
  EXPECT_NE(parse_message("t,v1,tau1\n0,1,2\n").find("header column 2"), std::string::npos);
  EXPECT_NE(parse_message("t,w1,tau1\n0,1,2\n0.1,1,2\n0.3,1,2\n").find("non-uniform"), std::string::npos);
  EXPECT_NE(parse_message("").find("empty"), std::string::npos);
}

TEST(TrajectoryCsv, RoundTripIsBitExact) {
  std::mt19937_64 rng(11);
  auto t = random_trajectory(rng, 3, 50);
  auto back = parse_trajectory_csv(trajectory_to_csv(t), "rand");
  EXPECT_EQ(back.velocity, t.velocity);
  EXPECT_EQ(back.torque, t.torque);
  EXPECT_EQ(back.times, t.times);
}

TEST(Concatenate, KeepsSegmentsAndContinuousTime) {
  auto w = walking_fixture();
  auto l = lifting_fixture();
  auto c = concatenate(TaskSet{{w, l}});
  EXPECT_EQ(c.sample_count(), 3750u);
  ASSERT_EQ(c.segments.size(), 2u);
  EXPECT_EQ(c.segments[0].name, "walking");
  EXPECT_EQ(c.segments[1].begin, 150u);
  EXPECT_EQ(c.boundaries(), std::vector<std::size_t>{150});
  EXPECT_NEAR(c.times[150] - c.times[149], 0.001, 1e-12);
  EXPECT_EQ(c.velocity.col(150), l.velocity.col(0));
  EXPECT_THROW(concatenate(TaskSet{}), ValidationError);
}

TEST(Concatenate, RejectsMismatchedJointCounts) {
  std::mt19937_64 rng(2);
  EXPECT_THROW(concatenate(TaskSet{{random_trajectory(rng, 2, 5), random_trajectory(rng, 3, 5)}}), ValidationError);
}

TEST(Lowpass, SinusoidGainMatchesTransferFunction) {
  // A window holding whole periods is a periodic signal; the forward-backward
  // pass scales each harmonic by |H|^2 of the single-pole filter, with no phase.
  const std::size_t n = 200;
  const double dt = 0.001, fc = 30.0;
  for (int cycles : {1, 3, 10, 40}) {
    TaskTrajectory t;
    t.name = "s";
    t.dt = dt;
    t.velocity = Eigen::MatrixXd(1, n);
    t.torque = Eigen::MatrixXd::Zero(1, n);
    const double w = 2.0 * std::numbers::pi * cycles / static_cast<double>(n);
    for (std::size_t k = 0; k < n; ++k) {
      t.times.push_back(static_cast<double>(k) * dt);
      t.velocity(0, static_cast<Eigen::Index>(k)) = std::sin(w * static_cast<double>(k) + 0.3);
    }
    t.segments = {{"s", 0, n, dt}};
    auto f = lowpass_filter(t, fc);
    const double rc = 1.0 / (2.0 * std::numbers::pi * fc);
    const double a = dt / (rc + dt);
    const std::complex<double> z = std::polar(1.0, -w);
    const double gain = std::norm(a / (1.0 - (1.0 - a) * z));
    for (std::size_t k = 0; k < n; ++k) {
      EXPECT_NEAR(f.velocity(0, static_cast<Eigen::Index>(k)), gain * t.velocity(0, static_cast<Eigen::Index>(k)), 1e-9);
    }
    EXPECT_EQ(f.torque, t.torque);
  }
}

TEST(Lowpass, RejectsCutoffAboveNyquist) {
  std::mt19937_64 rng(1);
  auto t = random_trajectory(rng, 1, 10);
  EXPECT_THROW(lowpass_filter(t, 1000.0), ValidationError);
  EXPECT_THROW(lowpass_filter(t, -1.0), ValidationError);
}

TEST(Synthesize, SampleCountAndValues) {
  SinusoidProfile p;
  p.velocity_amplitude = Eigen::Vector2d(1.0, 2.0);
  p.torque_amplitude = Eigen::Vector2d(3.0, 4.0);
  p.frequency = 2.0;
  p.duration = 1.0;
  p.dt = 0.01;
  auto t = synthesize_trajectory(p);
  EXPECT_EQ(t.sample_count(), 100u);
  EXPECT_NEAR(t.velocity(1, 10), 2.0 * std::cos(2.0 * std::numbers::pi * 2.0 * 0.1), 1e-12);
  EXPECT_NEAR(t.torque(0, 10), 3.0 * std::sin(2.0 * std::numbers::pi * 2.0 * 0.1), 1e-12);
}

TEST(Transmission, PowerIsConservedPerSample) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> ratio(1, 12);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 5;
    auto t = random_trajectory(rng, n, 20);
    const auto shapes = testing_support::coupling_shapes(n);
    const auto& c = shapes[static_cast<std::size_t>(trial) % shapes.size()];
    Eigen::VectorXd r(n);
    for (int j = 0; j < n; ++j) r(j) = ratio(rng);
    auto m = project_to_motor_space(t, GearMatrix(r), c);
    for (Eigen::Index k = 0; k < m.velocity.cols(); ++k) {
      const double pj = t.velocity.col(k).dot(t.torque.col(k));
      const double pm = m.velocity.col(k).dot(m.torque.col(k));
      const double scale = t.velocity.col(k).norm() * t.torque.col(k).norm() * 12.0;
      EXPECT_LE(std::abs(pj - pm), 1e-12 * scale);
    }
  }
}

TEST(Transmission, DifferentialBlockTraceIdentity) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(1e-6, 1e-2);
  for (const auto& c : standard_couplings()) {
    for (int trial = 0; trial < 20; ++trial) {
      Eigen::VectorXd I(5);
      for (int j = 0; j < 5; ++j) I(j) = u(rng);
      const double trace = trace_cost(joint_space_inertia({I}, c));
      double expected = 0.0;
      for (const auto& b : c.blocks) {
        const int k = b.first_joint - 1;
        expected += b.kind == BlockKind::serial ? I(k) : 2.0 * (I(k) + I(k + 1));
      }
      EXPECT_NEAR(trace, expected, 1e-15);
      if (c.id != "serial") EXPECT_GT(trace, I.sum());
    }
  }
}

TEST(Transmission, TraceWeightsAreRowNorms) {
  for (const auto& c : standard_couplings()) {
    auto w = actuator_trace_weights(c);
    for (int a = 0; a < 5; ++a) EXPECT_DOUBLE_EQ(w(a), c.inverse.row(a).squaredNorm());
  }
  // Non-symmetric case where rows and columns differ.
  Eigen::Matrix2d m;
  m << 1, 2, 0, 1;
  auto c = raw_coupling("tri", m);
  Eigen::Vector2d I(3.0, 5.0);
  EXPECT_NEAR(trace_cost(joint_space_inertia({I}, c)), actuator_trace_weights(c).dot(I), 1e-12);
}

TEST(Transmission, TrajectoryCostIsSamplesTimesTrace) {
  Eigen::VectorXd I = Eigen::VectorXd::Constant(5, 0.1);
  auto H = joint_space_inertia({I}, standard_couplings()[0]);
  EXPECT_DOUBLE_EQ(trajectory_trace_cost(H, 3750), 0.5 * 3750);
  EXPECT_DOUBLE_EQ(actuator_reflected_inertia(2e-5, 6), 7.2e-4);
}

TEST(Fixtures, TaskShapes) {
  auto t = fixture_tasks();
  EXPECT_EQ(t.joint_count(), 5);
  EXPECT_EQ(t.sample_count(), 3750u);
  EXPECT_EQ(t.segments.size(), 2u);
  EXPECT_EQ(t.segments[1].name, "lifting");
}
