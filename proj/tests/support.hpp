// Shared helpers for unit and acceptance tests: random instances and
// brute-force oracles written without the library's solver code paths.
#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "actuforge/fixtures.hpp"
#include "actuforge/optimizer.hpp"

namespace testing_support {

using namespace actuforge;

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("actuforge-test-" + name + "-" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

/// Coupling shapes available for n joints: serial and every placement of
/// one or more non-overlapping differential blocks.
inline std::vector<CouplingSpec> coupling_shapes(int n) {
  std::vector<CouplingSpec> out;
  // Bitmask over joints where a differential block starts.
  for (int mask = 0; mask < (1 << n); ++mask) {
    std::vector<CouplingBlock> blocks;
    bool ok = true;
    for (int j = 1; j <= n && ok;) {
      if (mask & (1 << (j - 1))) {
        if (j + 1 > n) ok = false;
        blocks.push_back({BlockKind::differential, j});
        j += 2;
      } else {
        blocks.push_back({BlockKind::serial, j});
        j += 1;
      }
    }
    // Skip masks with bits set inside a block (they describe the same shape).
    if (!ok) continue;
    int rebuilt = 0;
    for (const auto& b : blocks) {
      if (b.kind == BlockKind::differential) rebuilt |= 1 << (b.first_joint - 1);
    }
    if (rebuilt != mask) continue;
    out.push_back(build_coupling(blocks));
  }
  return out;
}

struct InstanceOptions {
  int max_actuators = 3;
  int max_motors = 4;
  int max_gears = 4;
  bool with_rules = false;
  std::size_t samples = 24;
};

/// Small random problem whose costs are exact binary fractions, so that
/// objective comparisons can be exact. `coupling_pick` selects the shape.
inline DesignProblem random_instance(std::mt19937_64& rng, const InstanceOptions& o, int coupling_pick = -1) {
  std::uniform_int_distribution<int> n_dist(1, o.max_actuators);
  std::uniform_int_distribution<int> m_dist(1, o.max_motors);
  std::uniform_int_distribution<int> g_dist(1, o.max_gears);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  DesignProblem p;
  const int n = n_dist(rng);
  const int motors = m_dist(rng);
  const int gears = g_dist(rng);

  std::vector<int> ratio_pool = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::shuffle(ratio_pool.begin(), ratio_pool.end(), rng);
  for (int g = 0; g < gears; ++g) p.library.gears.push_back({static_cast<double>(ratio_pool[g]), 1.0});

  for (int m = 0; m < motors; ++m) {
    MotorSpec s;
    s.id = "m" + std::to_string(m);
    s.mass = std::uniform_int_distribution<int>(150, 900)(rng) / 1000.0;
    s.rotor_inertia = std::uniform_int_distribution<int>(1, 4096)(rng) * std::ldexp(1.0, -24);
    s.rated_velocity = 20.0 + 80.0 * unit(rng);
    s.peak_torque = 1.0 + 9.0 * unit(rng);
    s.torque_constant = 0.05 + 0.1 * unit(rng);
    s.winding_resistance = 0.1 + 0.3 * unit(rng);
    p.library.motors.push_back(s);
  }
  p.library.domain_template = {{1.5, -2.5, -2.5, 1.5}, {1.2, 1.2, -1.2, -1.2}};
  const auto shapes = coupling_shapes(n);
  p.library.couplings = shapes;
  const int pick = coupling_pick >= 0 ? coupling_pick % static_cast<int>(shapes.size())
                                      : std::uniform_int_distribution<int>(0, static_cast<int>(shapes.size()) - 1)(rng);
  p.coupling = shapes[static_cast<std::size_t>(pick)];

  SinusoidProfile prof;
  prof.velocity_amplitude = Eigen::VectorXd(n);
  prof.torque_amplitude = Eigen::VectorXd(n);
  prof.phase = Eigen::VectorXd(n);
  for (int j = 0; j < n; ++j) {
    prof.velocity_amplitude(j) = 2.0 + 25.0 * unit(rng);
    prof.torque_amplitude(j) = 2.0 + 30.0 * unit(rng);
    prof.phase(j) = 6.0 * unit(rng);
  }
  prof.frequency = 1.0;
  prof.dt = 1.0 / static_cast<double>(o.samples);
  prof.duration = 1.0;
  p.tasks = synthesize_trajectory(prof);

  // Budget somewhere between the lightest and heaviest possible sums.
  double lo = 0.0, hi = 0.0;
  for (int a = 0; a < n; ++a) {
    double mn = 1e9, mx = 0.0;
    for (const auto& m : p.library.motors) {
      mn = std::min(mn, m.mass);
      mx = std::max(mx, m.mass);
    }
    lo += mn;
    hi += mx;
  }
  if (unit(rng) < 0.8) p.rules.push_back(MassBudgetRule{std::round((lo + (hi - lo) * unit(rng)) * 1000.0) / 1000.0});

  if (o.with_rules) {
    auto ref = [&] {
      ComponentRef r;
      r.actuator = std::uniform_int_distribution<int>(1, n)(rng);
      if (unit(rng) < 0.6) {
        r.kind = ComponentRef::Kind::motor;
        r.motor_id = p.library.motors[std::uniform_int_distribution<int>(0, motors - 1)(rng)].id;
      } else {
        r.kind = ComponentRef::Kind::gear;
        r.gear_ratio = p.library.gears[std::uniform_int_distribution<int>(0, gears - 1)(rng)].ratio;
      }
      return r;
    };
    const int rules = std::uniform_int_distribution<int>(1, 3)(rng);
    for (int i = 0; i < rules; ++i) {
      if (unit(rng) < 0.5) {
        p.rules.push_back(RequiresRule{ref(), ref()});
      } else {
        p.rules.push_back(MutexRule{ref(), ref()});
      }
    }
  }
  return p;
}

/// Independent point-in-convex-polygon test: vertices sorted by angle about
/// their centroid, then every edge cross product checked.
inline bool inside_convex(std::vector<Eigen::Vector2d> v, const Eigen::Vector2d& p) {
  Eigen::Vector2d c = Eigen::Vector2d::Zero();
  for (const auto& x : v) c += x;
  c /= static_cast<double>(v.size());
  std::sort(v.begin(), v.end(), [&](const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    return std::atan2(a.y() - c.y(), a.x() - c.x()) < std::atan2(b.y() - c.y(), b.x() - c.x());
  });
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Eigen::Vector2d e = v[(i + 1) % v.size()] - v[i];
    const Eigen::Vector2d d = p - v[i];
    const double cross = e.x() * d.y() - e.y() * d.x();
    if (cross / e.norm() < -1e-9) return false;
  }
  return true;
}

struct OracleResult {
  bool feasible = false;
  double objective = std::numeric_limits<double>::infinity();
  std::vector<std::pair<std::size_t, std::size_t>> selection;  // (motor, gear) per actuator
  std::size_t combinations = 0;
};

inline bool oracle_cell_ok(const DesignProblem& p, int a, std::size_t mi, std::size_t gi) {
  const auto& motor = p.library.motors[mi];
  const auto& gear = p.library.gears[gi];
  const auto& tmpl = motor.domain_override ? *motor.domain_override : p.library.domain_template;
  std::vector<Eigen::Vector2d> poly;
  for (std::size_t i = 0; i < tmpl.alpha.size(); ++i) {
    poly.emplace_back((1.0 - p.margin) * tmpl.alpha[i] * motor.rated_velocity,
                      (1.0 - p.margin) * tmpl.beta[i] * motor.peak_torque);
  }
  const Eigen::MatrixXd Cinv = p.coupling.jacobian.inverse();
  const Eigen::MatrixXd CT = p.coupling.jacobian.transpose();
  for (std::size_t k = 0; k < p.tasks.sample_count(); ++k) {
    const auto col = static_cast<Eigen::Index>(k);
    const double w_act = Cinv.row(a).dot(p.tasks.velocity.col(col));
    const double t_act = CT.row(a).dot(p.tasks.torque.col(col));
    const Eigen::Vector2d pt(gear.ratio * w_act, t_act / (gear.ratio * gear.efficiency));
    if (!inside_convex(poly, pt)) return false;
  }
  return true;
}

/// Trace of C^-T H C^-1 from the full matrix, times sample count.
inline double oracle_objective(const DesignProblem& p, const std::vector<std::pair<std::size_t, std::size_t>>& sel) {
  const int n = p.joint_count();
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, n);
  for (int a = 0; a < n; ++a) {
    const double r = p.library.gears[sel[a].second].ratio;
    H(a, a) = p.library.motors[sel[a].first].rotor_inertia * r * r;
  }
  const Eigen::MatrixXd Cinv = p.coupling.jacobian.inverse();
  const Eigen::MatrixXd J = Cinv.transpose() * H * Cinv;
  return J.trace() * static_cast<double>(p.tasks.sample_count());
}

inline bool ref_matches(const ComponentRef& r, const DesignProblem& p, int a, std::size_t mi, std::size_t gi) {
  if (r.actuator - 1 != a) return false;
  if (r.kind == ComponentRef::Kind::motor) return p.library.motors[mi].id == r.motor_id;
  return p.library.gears[gi].ratio == r.gear_ratio;
}

/// Every (motor, gear) combination for every actuator.
inline OracleResult brute_force(const DesignProblem& p) {
  const int n = p.joint_count();
  const std::size_t M = p.library.motors.size(), G = p.library.gears.size();
  std::vector<std::vector<bool>> ok(n, std::vector<bool>(M * G));
  for (int a = 0; a < n; ++a) {
    for (std::size_t mi = 0; mi < M; ++mi) {
      for (std::size_t gi = 0; gi < G; ++gi) ok[a][mi * G + gi] = oracle_cell_ok(p, a, mi, gi);
    }
  }
  OracleResult best;
  std::vector<std::size_t> idx(n, 0);
  const auto budget = p.mass_budget();
  for (;;) {
    ++best.combinations;
    bool feasible = true;
    long long grams = 0;
    std::vector<std::pair<std::size_t, std::size_t>> sel;
    for (int a = 0; a < n && feasible; ++a) {
      if (!ok[a][idx[a]]) feasible = false;
      sel.emplace_back(idx[a] / G, idx[a] % G);
      grams += std::llround(p.library.motors[idx[a] / G].mass * 1000.0);
    }
    if (feasible && budget && grams > std::llround(*budget * 1000.0)) feasible = false;
    for (const auto& rule : p.rules) {
      if (!feasible) break;
      auto used = [&](const ComponentRef& r) {
        for (int a = 0; a < n; ++a) {
          if (ref_matches(r, p, a, sel[a].first, sel[a].second)) return true;
        }
        return false;
      };
      if (const auto* q = std::get_if<RequiresRule>(&rule)) {
        if (used(q->if_used) && !used(q->then_used)) feasible = false;
      } else if (const auto* x = std::get_if<MutexRule>(&rule)) {
        if (used(x->first) && used(x->second)) feasible = false;
      }
    }
    if (feasible) {
      const double obj = oracle_objective(p, sel);
      if (!best.feasible || obj < best.objective) {
        best.feasible = true;
        best.objective = obj;
        best.selection = sel;
      }
    }
    int a = 0;
    while (a < n && ++idx[a] == M * G) idx[a++] = 0;
    if (a == n) break;
  }
  return best;
}

}  // namespace testing_support
