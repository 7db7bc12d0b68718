#include "actuforge/analysis.hpp"

#include <algorithm>
#include <numeric>

#include "actuforge/errors.hpp"
#include "actuforge/transmission.hpp"

namespace actuforge {

SelectedDesign resolve_design(const DesignSolution& solution, const Library& library,
                              const CouplingSpec* coupling) {
  if (!solution.optimal()) throw SolverError("design analysis needs an optimal solution");
  SelectedDesign d;
  if (coupling) {
    d.coupling = *coupling;
  } else {
    const CouplingSpec* c = library.find_coupling(solution.coupling_id);
    if (!c) throw ValidationError("coupling_id", "coupling '" + solution.coupling_id + "' exists in library");
    d.coupling = *c;
  }
  const auto n = static_cast<Eigen::Index>(solution.choices.size());
  if (n != d.coupling.dimension()) throw ValidationError("choices", "one choice per coupling joint");
  d.ratios.resize(n);
  d.efficiencies.resize(n);
  for (Eigen::Index a = 0; a < n; ++a) {
    const auto& c = solution.choices[a];
    const MotorSpec* m = library.find_motor(c.motor_id);
    if (!m) throw ValidationError("choices[" + std::to_string(a) + "].motor_id", "motor exists in library");
    auto g = std::find_if(library.gears.begin(), library.gears.end(),
                          [&](const GearCandidate& gc) { return gc.ratio == c.gear_ratio; });
    if (g == library.gears.end()) {
      throw ValidationError("choices[" + std::to_string(a) + "].gear_ratio", "gear exists in library");
    }
    d.motors.push_back(m);
    d.ratios(a) = g->ratio;
    d.efficiencies(a) = g->efficiency;
  }
  return d;
}

InertiaReport inertia_report(const SelectedDesign& design) {
  Eigen::VectorXd inertias(design.ratios.size());
  for (Eigen::Index a = 0; a < inertias.size(); ++a) {
    inertias(a) = actuator_reflected_inertia(design.motors[a]->rotor_inertia, design.ratios(a));
  }
  InertiaReport r;
  r.matrix = joint_space_inertia(ActuatorInertiaSet{inertias}, design.coupling).matrix;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(r.matrix);
  r.eigenvalues = es.eigenvalues().reverse();
  r.trace = r.matrix.trace();
  return r;
}

InertiaReport inertia_report(const DesignSolution& solution, const Library& library,
                             const CouplingSpec* coupling) {
  return inertia_report(resolve_design(solution, library, coupling));
}

CopperLossReport copper_loss(const SelectedDesign& design, const TaskTrajectory& tasks) {
  const auto mt = project_to_motor_space(tasks, GearMatrix(design.ratios), design.coupling);
  const Eigen::Index n = mt.torque.rows();
  CopperLossReport r;
  r.power.resize(n, mt.torque.cols());
  r.energy = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(tasks.segments.size()));
  for (const auto& s : tasks.segments) r.task_names.push_back(s.name);
  for (Eigen::Index a = 0; a < n; ++a) {
    const MotorSpec& m = *design.motors[a];
    const Eigen::RowVectorXd torque = mt.torque.row(a) / design.efficiencies(a);
    const Eigen::RowVectorXd current = torque / m.torque_constant;
    r.power.row(a) = m.winding_resistance * current.array().square();
    const auto e = copper_energy_per_segment(torque, m, tasks.segments);
    for (std::size_t s = 0; s < e.size(); ++s) r.energy(a, static_cast<Eigen::Index>(s)) = e[s];
  }
  for (Eigen::Index s = 0; s < r.energy.cols(); ++s) r.task_energy.push_back(r.energy.col(s).sum());
  r.total_energy = std::accumulate(r.task_energy.begin(), r.task_energy.end(), 0.0);
  return r;
}

CopperLossReport copper_loss(const DesignSolution& solution, const TaskTrajectory& tasks,
                             const Library& library, const CouplingSpec* coupling) {
  return copper_loss(resolve_design(solution, library, coupling), tasks);
}

std::vector<Interval> motor_torque_intervals(const SelectedDesign& design, const Library& library,
                                             const std::optional<Eigen::VectorXd>& motor_velocity) {
  const auto n = design.ratios.size();
  if (motor_velocity && motor_velocity->size() != n) {
    throw ValidationError("velocity", "one motor velocity per actuator");
  }
  std::vector<Interval> out;
  for (Eigen::Index a = 0; a < n; ++a) {
    const ConvexPolygon polygon = operation_polygon(*design.motors[a], library);
    const double w = motor_velocity ? (*motor_velocity)(a) : 0.0;
    const auto slice = polygon.torque_slice(w);
    out.push_back(slice ? *slice : Interval{0.0, 0.0});
  }
  return out;
}

std::vector<Halfspace> interval_halfspaces(const Eigen::MatrixXd& A, const Eigen::VectorXd& lo,
                                           const Eigen::VectorXd& hi) {
  std::vector<Halfspace> out;
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    out.push_back({A.row(i).transpose(), hi(i)});
    out.push_back({-A.row(i).transpose(), -lo(i)});
  }
  return out;
}

CapabilityPolytope parallelotope(const Eigen::MatrixXd& T, const Eigen::VectorXd& lo,
                                 const Eigen::VectorXd& hi) {
  const Eigen::Index n = T.rows();
  if (T.cols() != n || lo.size() != n || hi.size() != n) {
    throw ValidationError("parallelotope", "square map and matching bounds");
  }
  const double det = T.determinant();
  if (std::abs(det) <= 1e-12) throw SolverError("parallelotope map is singular");
  CapabilityPolytope p;
  p.space = PolytopeSpace::joint;
  p.halfspaces = interval_halfspaces(T.inverse(), lo, hi);
  double widths = 1.0;
  for (Eigen::Index i = 0; i < n; ++i) widths *= std::max(0.0, hi(i) - lo(i));
  p.volume = std::abs(det) * widths;
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    Eigen::VectorXd u(n);
    for (Eigen::Index i = 0; i < n; ++i) u(i) = (mask >> i) & 1u ? hi(i) : lo(i);
    Eigen::VectorXd v = T * u;
    const bool dup = std::any_of(p.vertices.begin(), p.vertices.end(), [&](const Eigen::VectorXd& w) {
      return (w - v).lpNorm<Eigen::Infinity>() <= 1e-9 * std::max(1.0, v.lpNorm<Eigen::Infinity>());
    });
    if (!dup) p.vertices.push_back(std::move(v));
  }
  return p;
}

namespace {

/// tau_j = C^-T N tau_m, and its inverse A = N^-1 C^T.
Eigen::MatrixXd torque_map(const SelectedDesign& d) {
  return d.coupling.inverse.transpose() * d.ratios.asDiagonal();
}

Eigen::MatrixXd torque_constraint_matrix(const SelectedDesign& d) {
  return d.ratios.cwiseInverse().asDiagonal() * d.coupling.jacobian.transpose();
}

/// Joint-torque bounds lo <= A tau_j <= hi (motor torque scaled by gear efficiency).
void motor_torque_bounds(const SelectedDesign& design, const Library& library,
                         const std::optional<Eigen::VectorXd>& motor_velocity, Eigen::VectorXd& lo,
                         Eigen::VectorXd& hi) {
  const auto intervals = motor_torque_intervals(design, library, motor_velocity);
  const auto n = design.ratios.size();
  lo.resize(n);
  hi.resize(n);
  for (Eigen::Index a = 0; a < n; ++a) {
    lo(a) = intervals[a].lower * design.efficiencies(a);
    hi(a) = intervals[a].upper * design.efficiencies(a);
  }
}

}  // namespace

CapabilityPolytope joint_torque_polytope(const SelectedDesign& design, const Library& library,
                                         const std::optional<Eigen::VectorXd>& motor_velocity) {
  Eigen::VectorXd lo, hi;
  motor_torque_bounds(design, library, motor_velocity, lo, hi);
  auto p = parallelotope(torque_map(design), lo, hi);
  // Express the halfspaces through the exact coupling instead of a numeric inverse.
  p.halfspaces = interval_halfspaces(torque_constraint_matrix(design), lo, hi);
  return p;
}

CapabilityPolytope joint_torque_polytope(const DesignSolution& solution, const Library& library,
                                         const std::optional<Eigen::VectorXd>& motor_velocity,
                                         const CouplingSpec* coupling) {
  return joint_torque_polytope(resolve_design(solution, library, coupling), library, motor_velocity);
}

CapabilityPolytope force_capability_polytope(const SelectedDesign& design, const Library& library,
                                             const LegKinematics& kin, const Eigen::VectorXd& q,
                                             const std::optional<Eigen::VectorXd>& motor_velocity) {
  if (design.ratios.size() != 5) throw ValidationError("design", "five actuators for the leg model");
  const Eigen::MatrixXd J = leg_jacobian(kin, q);
  Eigen::VectorXd lo, hi;
  motor_torque_bounds(design, library, motor_velocity, lo, hi);
  return force_polytope(torque_constraint_matrix(design) * J.transpose(), lo, hi);
}

CapabilityPolytope force_capability_polytope(const DesignSolution& solution, const Library& library,
                                             const LegKinematics& kin, const Eigen::VectorXd& q,
                                             const std::optional<Eigen::VectorXd>& motor_velocity,
                                             const CouplingSpec* coupling) {
  return force_capability_polytope(resolve_design(solution, library, coupling), library, kin, q,
                                   motor_velocity);
}

CapabilityPolytope force_polytope(const Eigen::MatrixXd& M, const Eigen::VectorXd& lo,
                                  const Eigen::VectorXd& hi) {
  Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
  lu.setThreshold(1e-10);
  if (lu.rank() < M.cols()) throw SolverError("singular configuration");
  auto p = polytope_from_halfspaces(interval_halfspaces(M, lo, hi), PolytopeSpace::task);
  return p;
}

VolumeStatistics force_polytope_statistics(const SelectedDesign& design, const Library& library,
                                           const LegKinematics& kin,
                                           const std::vector<Eigen::VectorXd>& configurations) {
  VolumeStatistics s;
  std::vector<double> logs;
  for (const auto& q : configurations) {
    try {
      const auto p = force_capability_polytope(design, library, kin, q);
      if (p.volume > 0.0) logs.push_back(std::log(p.volume));
      else ++s.singular;
    } catch (const SolverError&) {
      ++s.singular;
    }
  }
  s.samples = logs.size();
  if (logs.empty()) return s;
  s.mean_log_volume = std::accumulate(logs.begin(), logs.end(), 0.0) / logs.size();
  double var = 0.0;
  for (double l : logs) var += (l - s.mean_log_volume) * (l - s.mean_log_volume);
  s.variance_log_volume = logs.size() > 1 ? var / (logs.size() - 1) : 0.0;
  return s;
}

std::vector<std::size_t> pareto_front(const std::vector<std::vector<double>>& points) {
  if (points.empty()) return {};
  const std::size_t d = points.front().size();
  for (const auto& p : points) {
    if (p.size() != d) throw ValidationError("points", "consistent dimensionality");
  }
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return points[a] < points[b]; });
  auto dominates = [&](const std::vector<double>& a, const std::vector<double>& b) {
    bool strict = false;
    for (std::size_t k = 0; k < d; ++k) {
      if (a[k] > b[k]) return false;
      if (a[k] < b[k]) strict = true;
    }
    return strict;
  };
  // In lexicographic order a point can only be dominated by earlier ones,
  // and a dominated earlier point is itself dominated by a front member.
  std::vector<std::size_t> front;
  for (auto i : order) {
    const bool dominated = std::any_of(front.begin(), front.end(),
                                       [&](std::size_t f) { return dominates(points[f], points[i]); });
    if (!dominated) front.push_back(i);
  }
  std::sort(front.begin(), front.end());
  return front;
}

}  // namespace actuforge
