// Acceptance run: one PASS/FAIL line per criterion, exit code 1 if any fails.
#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <thread>

#include "actuforge/analysis.hpp"
#include "actuforge/bilp.hpp"
#include "actuforge/errors.hpp"
#include "actuforge/fixtures.hpp"
#include "actuforge/optimizer.hpp"
#include "actuforge/study.hpp"
#include "actuforge/transmission.hpp"
#include "../support.hpp"

using namespace actuforge;
namespace ts = testing_support;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Outcome linearization() {
  BilpModel m;
  const auto x = m.add_variable({"x"});
  const auto y = m.add_variable({"y"});
  const auto lin = linearize_product(m, x, y, "z");
  int admitted = 0;
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      for (int z = 0; z < 2; ++z) {
        std::vector<int> v(3);
        v[x] = a;
        v[y] = b;
        v[lin.product] = z;
        const bool ok = satisfies(m, v, 0.0);
        if (ok != (z == a * b)) return {false, fmt("x=%d y=%d z=%d admitted=%d", a, b, z, int(ok))};
        admitted += ok;
      }
    }
  }
  return {admitted == 4, fmt("%d of 8 assignments admitted, each with z = x*y", admitted)};
}

// Instances shared by criteria 2 and 3.
std::vector<DesignProblem> oracle_instances() {
  std::mt19937_64 rng(1234567);
  std::vector<DesignProblem> out;
  for (int i = 0; i < 160; ++i) {
    ts::InstanceOptions o;
    o.with_rules = i % 4 == 3;
    out.push_back(ts::random_instance(rng, o, i));  // cycles through the coupling shapes
  }
  return out;
}

Outcome solver_oracle(const std::vector<DesignProblem>& instances) {
  const auto t0 = Clock::now();
  int feasible = 0;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const auto& p = instances[i];
    const auto oracle = ts::brute_force(p);
    const auto s = solve(p);
    if (s.optimal() != oracle.feasible) return {false, fmt("instance %zu: feasibility differs", i)};
    if (!oracle.feasible) continue;
    ++feasible;
    if (s.objective_value != oracle.objective) {
      return {false, fmt("instance %zu: %.17g vs oracle %.17g", i, s.objective_value, oracle.objective)};
    }
  }
  const double t = seconds_since(t0);
  return {t < 10.0, fmt("%zu instances (%d feasible) exact, %.2f s", instances.size(), feasible, t)};
}

Outcome dp_vs_bnb(const std::vector<DesignProblem>& instances) {
  int compared = 0;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const auto model = assemble_bilp(instances[i]);
    if (!model.is_mckp_shaped()) continue;
    const auto dp = solve_mckp(model);
    const auto bb = solve_bnb(model);
    if (dp.status != bb.status || dp.objective_units != bb.objective_units || dp.selected != bb.selected ||
        dp.choices != bb.choices) {
      return {false, fmt("instance %zu disagrees", i)};
    }
    ++compared;
  }
  return {compared > 0, fmt("%d MCKP-shaped instances agree on objective and selection", compared)};
}

Outcome power_conservation() {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> g(0.0, 20.0);
  std::uniform_int_distribution<int> joints(1, 5);
  std::uniform_int_distribution<int> ratio(1, 12);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = joints(rng);
    const auto shapes = ts::coupling_shapes(n);
    const auto& c = shapes[std::uniform_int_distribution<std::size_t>(0, shapes.size() - 1)(rng)];
    TaskTrajectory t;
    t.name = "r";
    t.dt = 0.001;
    const Eigen::Index samples = 16;
    t.velocity = Eigen::MatrixXd(n, samples);
    t.torque = Eigen::MatrixXd(n, samples);
    for (Eigen::Index k = 0; k < samples; ++k) {
      t.times.push_back(double(k) * t.dt);
      for (int j = 0; j < n; ++j) {
        t.velocity(j, k) = g(rng);
        t.torque(j, k) = g(rng);
      }
    }
    t.segments = {{"r", 0, std::size_t(samples), t.dt}};
    Eigen::VectorXd r(n);
    for (int j = 0; j < n; ++j) r(j) = ratio(rng);
    const auto m = project_to_motor_space(t, GearMatrix(r), c);
    for (Eigen::Index k = 0; k < samples; ++k) {
      const double pj = t.velocity.col(k).dot(t.torque.col(k));
      const double pm = m.velocity.col(k).dot(m.torque.col(k));
      // Relative to |w||tau| so samples with near-zero net power stay meaningful.
      const double rel = std::abs(pj - pm) / (t.velocity.col(k).norm() * t.torque.col(k).norm());
      worst = std::max(worst, rel);
    }
  }
  return {worst <= 1e-9, fmt("1000 triples, worst relative error %.3g", worst)};
}

Outcome trace_identity() {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(1e-6, 1e-2);
  double worst = 0.0;
  bool strict = true, serial_ok = true;
  for (int trial = 0; trial < 1000; ++trial) {
    Eigen::VectorXd I(5);
    for (int j = 0; j < 5; ++j) I(j) = u(rng);
    for (const auto& c : standard_couplings()) {
      const double trace = trace_cost(joint_space_inertia({I}, c));
      double expected = 0.0;
      for (const auto& b : c.blocks) {
        const int k = b.first_joint - 1;
        expected += b.kind == BlockKind::serial ? I(k) : 2.0 * (I(k) + I(k + 1));
      }
      worst = std::max(worst, std::abs(trace - expected));
      if (c.id == "serial") serial_ok = serial_ok && std::abs(trace - I.sum()) <= 1e-12;
      else strict = strict && trace > I.sum();
    }
  }
  return {worst <= 1e-12 && strict && serial_ok,
          fmt("worst |trace - identity| %.3g, serial = sum %s, coupled > serial %s", worst, serial_ok ? "yes" : "no",
              strict ? "yes" : "no")};
}

StudyGrid fixture_grid() {
  StudyGrid g;
  g.base.library = fixture_library();
  g.base.tasks = fixture_tasks();
  g.budgets = budget_range(2.2, 0.075, 4.0);
  g.couplings = parse_coupling_list("all", g.base.library);
  g.base.coupling = *g.base.library.find_coupling(g.couplings.front());
  return g;
}

Outcome grid_protocol(const StudyGrid& g) {
  const int workers = std::max(1u, std::thread::hardware_concurrency());
  const auto r = run_grid(g, workers);
  const auto sum = summarize(r);
  bool monotone = true;
  std::string bad;
  for (const auto& curve : sum["curves"]) {
    const bool ok = curve["trace_monotone_non_increasing"].get<bool>() && curve["feasibility_monotone"].get<bool>();
    if (!ok) bad += curve["coupling_id"].get<std::string>() + " ";
    monotone = monotone && ok;
  }
  // Independent pass over the raw cells.
  for (std::size_t c = 0; c < r.couplings.size(); ++c) {
    for (std::size_t b = 1; b < r.budgets.size(); ++b) {
      const auto& lo = r.cell(b - 1, c).solution;
      const auto& hi = r.cell(b, c).solution;
      if (lo.optimal() && !hi.optimal()) monotone = false;
      if (lo.optimal() && hi.optimal() && hi.objective_value > lo.objective_value) monotone = false;
    }
  }
  const double t = r.wall_clock_seconds;
  return {monotone && t < 100.0 && r.cells.size() == 200,
          fmt("%zu cells, T = %zu, %.2f s on %d worker(s), monotone %s%s", r.cells.size(),
              g.base.tasks.sample_count(), t, workers, monotone ? "yes" : "no", bad.empty() ? "" : (" bad: " + bad).c_str())};
}

Outcome infeasibility_flip() {
  DesignProblem p;
  p.library = fixture_library();
  p.tasks = fixture_tasks();
  p.coupling = *p.library.find_coupling("serial");
  p.rules = {MassBudgetRule{0.001}};
  const auto low = solve(p);
  if (low.optimal() || !low.diagnosis || low.diagnosis->actuators.size() != 5 || !low.diagnosis->min_feasible_mass_sum) {
    return {false, "no per-actuator diagnosis at 0.001 kg"};
  }
  for (const auto& a : low.diagnosis->actuators) {
    if (!a.min_feasible_mass) return {false, fmt("actuator %d has no feasible motor", a.actuator + 1)};
  }
  const double threshold = *low.diagnosis->min_feasible_mass_sum;
  int flips = 0;
  bool prev = false, below_ok = true;
  for (double b = threshold - 0.5; b <= threshold + 1.0 + 1e-12; b += 0.01) {
    p.rules = {MassBudgetRule{b}};
    const bool feasible = solve(p).optimal();
    if (feasible != prev) ++flips;
    if (b < threshold - 1e-6 && feasible) below_ok = false;
    prev = feasible;
  }
  p.rules = {MassBudgetRule{threshold - 0.001}};
  const bool just_below = solve(p).optimal();
  p.rules = {MassBudgetRule{threshold + 1e-6}};
  const bool just_above = solve(p).optimal();
  return {flips == 1 && below_ok && !just_below && just_above && prev,
          fmt("serial threshold %.4f kg, %d flip(s) over the sweep", threshold, flips)};
}

bool inside(const CapabilityPolytope& p, const Eigen::VectorXd& x, double tol) {
  for (const auto& h : p.halfspaces) {
    if (h.normal.dot(x) > h.offset + tol) return false;
  }
  return true;
}

Outcome polytopes() {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.5, 2.0), unit(0.0, 1.0);
  double worst_mc = 0.0;
  const auto shapes = ts::coupling_shapes(3);
  for (int trial = 0; trial < 20; ++trial) {
    Library lib;
    const auto& c = shapes[std::size_t(trial) % shapes.size()];
    for (int i = 0; i < 3; ++i) {
      lib.motors.push_back(MotorSpec{"m" + std::to_string(i), 0.3, 1e-4, 10.0, u(rng), 0.1, 0.5, {}});
    }
    lib.gears = {{1.0, 1.0}};
    lib.couplings = {c};
    lib.domain_template = {{1.5, -2.5, -2.5, 1.5}, {1.2, 1.2, -1.2, -1.2}};
    SelectedDesign d;
    for (const auto& m : lib.motors) d.motors.push_back(&m);
    d.ratios = Eigen::VectorXd(3);
    for (int i = 0; i < 3; ++i) d.ratios(i) = 3.0 * u(rng);
    d.efficiencies = Eigen::VectorXd::Ones(3);
    d.coupling = c;
    const auto tcp = joint_torque_polytope(d, lib);
    Eigen::VectorXd lo = tcp.vertices.front(), hi = lo;
    for (const auto& v : tcp.vertices) {
      lo = lo.cwiseMin(v);
      hi = hi.cwiseMax(v);
    }
    const std::size_t n = 1000000;
    std::size_t hits = 0;
    Eigen::VectorXd x(3);
    for (std::size_t s = 0; s < n; ++s) {
      for (int i = 0; i < 3; ++i) x(i) = lo(i) + (hi(i) - lo(i)) * unit(rng);
      hits += inside(tcp, x, 0.0);
    }
    const double mc = (hi - lo).prod() * double(hits) / double(n);
    worst_mc = std::max(worst_mc, std::abs(mc / tcp.volume - 1.0));
  }

  // FCP on fixture designs at random non-singular configurations.
  const auto lib = fixture_library();
  std::uniform_real_distribution<double> q(-1.0, 1.0);
  std::uniform_int_distribution<std::size_t> motor(0, lib.motors.size() - 1), gear(0, lib.gears.size() - 1),
      coupling(0, lib.couplings.size() - 1);
  double worst_fcp = 0.0;
  int fcp_checked = 0;
  for (int trial = 0; trial < 20; ++trial) {
    DesignSolution s;
    s.status = SolveStatus::optimal;
    s.coupling_id = lib.couplings[coupling(rng)].id;
    for (int i = 0; i < 5; ++i) {
      const auto& m = lib.motors[motor(rng)];
      const auto& gr = lib.gears[gear(rng)];
      s.choices.push_back({m.id, gr.ratio, m.mass, 0.0});
    }
    Eigen::VectorXd cfg(5);
    for (int i = 0; i < 5; ++i) cfg(i) = q(rng);
    try {
      const auto p = force_capability_polytope(s, lib, LegKinematics{}, cfg);
      for (const auto& v : p.vertices) {
        for (const auto& h : p.halfspaces) worst_fcp = std::max(worst_fcp, h.normal.dot(v) - h.offset);
      }
      ++fcp_checked;
    } catch (const SolverError&) {
    }
  }

  Eigen::Matrix2d jt;
  jt << 1, 0, 1, 1;
  const double area = force_polytope(jt, -Eigen::Vector2d::Ones(), Eigen::Vector2d::Ones()).volume;
  return {worst_mc <= 0.02 && worst_fcp <= 1e-9 && fcp_checked > 0 && area == 4.0,
          fmt("TCP worst MC error %.2f%% (20 x 1e6), FCP worst violation %.2g over %d designs, parallelogram %.17g",
              100.0 * worst_mc, worst_fcp, fcp_checked, area)};
}

Outcome jacobian() {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(-std::numbers::pi, std::numbers::pi);
  const LegKinematics k;
  const double h = 1e-6;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::VectorXd q(5);
    for (int i = 0; i < 5; ++i) q(i) = u(rng);
    const auto J = leg_jacobian(k, q);
    for (int i = 0; i < 5; ++i) {
      Eigen::VectorXd a = q, b = q;
      a(i) += h;
      b(i) -= h;
      const Eigen::Vector3d fd = (foot_position(k, a) - foot_position(k, b)) / (2.0 * h);
      worst = std::max(worst, (J.col(i) - fd).cwiseAbs().maxCoeff());
    }
  }
  return {worst <= 1e-6, fmt("100 configurations, worst |J - FD| %.3g", worst)};
}

Outcome pareto() {
  std::mt19937_64 rng(2718);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::vector<double>> pts(1000);
  for (auto& p : pts) p = {u(rng), u(rng), u(rng)};
  std::vector<std::size_t> oracle;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < pts.size() && !dominated; ++j) {
      bool le = true, lt = false;
      for (int k = 0; k < 3; ++k) {
        le = le && pts[j][k] <= pts[i][k];
        lt = lt || pts[j][k] < pts[i][k];
      }
      dominated = le && lt;
    }
    if (!dominated) oracle.push_back(i);
  }
  const auto front = pareto_front(pts);
  return {front == oracle, fmt("1000 points, %zu on the front", oracle.size())};
}

Outcome determinism(const StudyGrid& g) {
  const auto root = ts::scratch_dir("acceptance");
  std::vector<std::string> digests;
  for (int workers : {1, 4, 2}) {
    const auto dir = root / ("jobs" + std::to_string(workers));
    persist(run_grid(g, workers), dir);
    digests.push_back(study_digest(dir));
  }
  const bool same = digests[0] == digests[1] && digests[1] == digests[2];
  std::filesystem::remove_all(root);
  return {same, fmt("digest %.16s... for parallelism 1, 4, 2", digests[0].c_str())};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int n, const char* name, const std::function<Outcome()>& f) {
    Outcome o;
    try {
      o = f();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s criterion %d: %s (%s)\n", o.pass ? "PASS" : "FAIL", n, name, o.detail.c_str());
    std::fflush(stdout);
    failures += !o.pass;
  };
  const auto instances = oracle_instances();
  const auto grid = fixture_grid();
  report(1, "linearization truth table", linearization);
  report(2, "solver equals exhaustive enumeration", [&] { return solver_oracle(instances); });
  report(3, "DP and branch-and-bound agree", [&] { return dp_vs_bnb(instances); });
  report(4, "power conservation", power_conservation);
  report(5, "coupled trace identity", trace_identity);
  report(6, "25 x 8 fixture grid", [&] { return grid_protocol(grid); });
  report(7, "infeasibility threshold", infeasibility_flip);
  report(8, "polytope correctness", polytopes);
  report(9, "leg Jacobian vs finite differences", jacobian);
  report(10, "Pareto front vs domination oracle", pareto);
  report(11, "persisted grid determinism", [&] { return determinism(grid); });
  return failures == 0 ? 0 : 1;
}
