#include "actuforge/tasking.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "actuforge/errors.hpp"

namespace actuforge {
namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::string column_name(std::size_t col, int joints) {
  if (col == 0) return "t";
  if (col <= static_cast<std::size_t>(joints)) return "w" + std::to_string(col);
  return "tau" + std::to_string(col - joints);
}

void append_number(std::string& out, double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

// One periodic steady-state pass of y[k] = (1-a) y[k-1] + a x[k].
void single_pole_periodic(Eigen::Ref<Eigen::VectorXd> x, double a, bool reverse) {
  const Eigen::Index n = x.size();
  auto at = [&](Eigen::Index k) -> double& { return reverse ? x(n - 1 - k) : x(k); };
  double state = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) state = (1.0 - a) * state + a * at(k);
  const double decay = std::pow(1.0 - a, static_cast<double>(n));
  state = state / (1.0 - decay);
  for (Eigen::Index k = 0; k < n; ++k) {
    state = (1.0 - a) * state + a * at(k);
    at(k) = state;
  }
}

}  // namespace

std::vector<std::size_t> TaskTrajectory::boundaries() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 1; i < segments.size(); ++i) out.push_back(segments[i].begin);
  return out;
}

void validate(const TaskTrajectory& traj) {
  if (traj.sample_count() < 1) throw ValidationError(traj.name, "T >= 1");
  if (!(traj.dt > 0.0)) throw ValidationError(traj.name + ".dt", "dt > 0");
  if (traj.torque.rows() != traj.velocity.rows() || traj.torque.cols() != traj.velocity.cols()) {
    throw ValidationError(traj.name, "velocity and torque of equal shape");
  }
  if (traj.joint_count() < 1) throw ValidationError(traj.name, "joint_count >= 1");
  if (traj.times.size() != traj.sample_count()) {
    throw ValidationError(traj.name + ".times", "one timestamp per sample");
  }
  if (!traj.velocity.allFinite() || !traj.torque.allFinite()) {
    throw ValidationError(traj.name, "finite values");
  }
  std::size_t cursor = 0;
  for (const auto& s : traj.segments) {
    if (s.begin != cursor || s.end <= s.begin || !(s.dt > 0.0)) {
      throw ValidationError(traj.name + ".segments", "segments partition the samples");
    }
    cursor = s.end;
  }
  if (cursor != traj.sample_count()) {
    throw ValidationError(traj.name + ".segments", "segments partition the samples");
  }
}

void validate(const TaskSet& tasks) {
  if (tasks.tasks.empty()) throw ValidationError("tasks", "non-empty task set");
  const int n = tasks.tasks.front().joint_count();
  for (std::size_t i = 0; i < tasks.tasks.size(); ++i) {
    validate(tasks.tasks[i]);
    if (tasks.tasks[i].joint_count() != n) {
      throw ValidationError("tasks[" + std::to_string(i) + "]", "consistent joint_count");
    }
  }
}

TaskTrajectory parse_trajectory_csv(std::string_view text, std::string name) {
  std::vector<std::string_view> lines;
  {
    std::size_t start = 0;
    while (start < text.size()) {
      auto pos = text.find('\n', start);
      if (pos == std::string_view::npos) pos = text.size();
      auto line = trim(text.substr(start, pos - start));
      if (!line.empty()) lines.push_back(line);
      start = pos + 1;
    }
  }
  if (lines.empty()) throw ParseError(name + ": empty trajectory file");

  const auto header = split_commas(lines[0]);
  if (header.size() < 3 || header.size() % 2 == 0) {
    throw ParseError(name + ": header must have 1 + 2*n columns, got " +
                     std::to_string(header.size()));
  }
  const int joints = static_cast<int>((header.size() - 1) / 2);
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (trim(header[c]) != column_name(c, joints)) {
      throw ParseError(name + ": header column " + std::to_string(c + 1) + " must be '" +
                       column_name(c, joints) + "'");
    }
  }
  const std::size_t rows = lines.size() - 1;

  TaskTrajectory traj;
  traj.name = std::move(name);
  traj.velocity.resize(joints, static_cast<Eigen::Index>(rows));
  traj.torque.resize(joints, static_cast<Eigen::Index>(rows));
  traj.times.resize(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto cells = split_commas(lines[r + 1]);
    const std::size_t line_no = r + 2;
    if (cells.size() != header.size()) {
      throw ParseError(traj.name + ": line " + std::to_string(line_no) + " has " +
                       std::to_string(cells.size()) + " columns, expected " +
                       std::to_string(header.size()));
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const auto cell = trim(cells[c]);
      double v = 0.0;
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      const bool parsed = res.ec == std::errc() && res.ptr == cell.data() + cell.size();
      if (!parsed || !std::isfinite(v)) {
        throw ParseError(traj.name + ": line " + std::to_string(line_no) + ", column '" +
                         column_name(c, joints) + "': " +
                         (parsed ? "non-finite value" : "not a number") + " '" +
                         std::string(cell) + "'");
      }
      if (c == 0) {
        traj.times[r] = v;
      } else if (c <= static_cast<std::size_t>(joints)) {
        traj.velocity(static_cast<Eigen::Index>(c - 1), static_cast<Eigen::Index>(r)) = v;
      } else {
        traj.torque(static_cast<Eigen::Index>(c - 1 - joints), static_cast<Eigen::Index>(r)) = v;
      }
    }
  }

  if (rows < 2) throw ParseError(traj.name + ": at least 2 rows are needed to determine the time step");
  traj.dt = traj.times[1] - traj.times[0];
  if (!(traj.dt > 0.0)) throw ParseError(traj.name + ": timestamps must increase");
  for (std::size_t r = 1; r < rows; ++r) {
    const double step = traj.times[r] - traj.times[r - 1];
    if (std::abs(step - traj.dt) > 1e-6) {
      throw ParseError(traj.name + ": non-uniform timestamps at line " + std::to_string(r + 2));
    }
  }
  traj.segments = {{traj.name, 0, rows, traj.dt}};
  return traj;
}

TaskTrajectory ingest_trajectory(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open trajectory file: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_trajectory_csv(ss.str(), path.stem().string());
}

std::string trajectory_to_csv(const TaskTrajectory& traj) {
  const int n = traj.joint_count();
  std::string out = "t";
  for (int j = 1; j <= n; ++j) out += ",w" + std::to_string(j);
  for (int j = 1; j <= n; ++j) out += ",tau" + std::to_string(j);
  out += '\n';
  for (std::size_t k = 0; k < traj.sample_count(); ++k) {
    const auto col = static_cast<Eigen::Index>(k);
    append_number(out, traj.times[k]);
    for (int j = 0; j < n; ++j) {
      out += ',';
      append_number(out, traj.velocity(j, col));
    }
    for (int j = 0; j < n; ++j) {
      out += ',';
      append_number(out, traj.torque(j, col));
    }
    out += '\n';
  }
  return out;
}

void save_trajectory(const TaskTrajectory& traj, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write trajectory file: " + path.string());
  out << trajectory_to_csv(traj);
}

TaskTrajectory synthesize_trajectory(const SinusoidProfile& profile) {
  if (!(profile.dt > 0.0)) throw ValidationError("profile.dt", "dt > 0");
  if (!(profile.duration > 0.0)) throw ValidationError("profile.duration", "duration > 0");
  if (profile.duration < profile.dt) throw ValidationError("profile.duration", "duration >= dt");
  const auto n = profile.velocity_amplitude.size();
  if (n == 0 || profile.torque_amplitude.size() != n) {
    throw ValidationError("profile", "one velocity and torque amplitude per joint");
  }
  if (profile.phase.size() != 0 && profile.phase.size() != n) {
    throw ValidationError("profile.phase", "one phase per joint");
  }
  if (!profile.velocity_amplitude.allFinite() || !profile.torque_amplitude.allFinite() ||
      !std::isfinite(profile.frequency)) {
    throw ValidationError("profile", "finite amplitudes");
  }

  const auto samples = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(profile.duration / profile.dt)));
  TaskTrajectory traj;
  traj.name = profile.name;
  traj.dt = profile.dt;
  traj.times.resize(samples);
  traj.velocity.resize(n, static_cast<Eigen::Index>(samples));
  traj.torque.resize(n, static_cast<Eigen::Index>(samples));
  const double w = 2.0 * std::numbers::pi * profile.frequency;
  for (std::size_t k = 0; k < samples; ++k) {
    const double t = static_cast<double>(k) * profile.dt;
    traj.times[k] = t;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double arg = w * t + (profile.phase.size() ? profile.phase(j) : 0.0);
      traj.velocity(j, static_cast<Eigen::Index>(k)) = profile.velocity_amplitude(j) * std::cos(arg);
      traj.torque(j, static_cast<Eigen::Index>(k)) = profile.torque_amplitude(j) * std::sin(arg);
    }
  }
  traj.segments = {{traj.name, 0, samples, traj.dt}};
  return traj;
}

TaskTrajectory lowpass_filter(const TaskTrajectory& traj, double cutoff_hz) {
  validate(traj);
  if (!(cutoff_hz > 0.0)) throw ValidationError("cutoff", "cutoff > 0");
  TaskTrajectory out = traj;
  for (const auto& seg : traj.segments) {
    const double nyquist = 0.5 / seg.dt;
    if (!(cutoff_hz < nyquist)) throw ValidationError("cutoff", "cutoff below Nyquist");
    const double rc = 1.0 / (2.0 * std::numbers::pi * cutoff_hz);
    const double a = seg.dt / (rc + seg.dt);
    for (int j = 0; j < out.joint_count(); ++j) {
      Eigen::VectorXd x = out.velocity.row(j)
                              .segment(static_cast<Eigen::Index>(seg.begin),
                                       static_cast<Eigen::Index>(seg.size()))
                              .transpose();
      single_pole_periodic(x, a, false);
      single_pole_periodic(x, a, true);
      out.velocity.row(j).segment(static_cast<Eigen::Index>(seg.begin),
                                  static_cast<Eigen::Index>(seg.size())) = x.transpose();
    }
  }
  return out;
}

TaskTrajectory concatenate(const TaskSet& tasks) {
  validate(tasks);
  if (tasks.tasks.size() == 1) return tasks.tasks.front();

  const int n = tasks.tasks.front().joint_count();
  std::size_t total = 0;
  for (const auto& t : tasks.tasks) total += t.sample_count();

  TaskTrajectory out;
  out.dt = tasks.tasks.front().dt;
  out.velocity.resize(n, static_cast<Eigen::Index>(total));
  out.torque.resize(n, static_cast<Eigen::Index>(total));
  out.times.reserve(total);
  std::size_t cursor = 0;
  double clock = 0.0;
  for (const auto& t : tasks.tasks) {
    out.name += (out.name.empty() ? "" : "+") + t.name;
    const auto cols = static_cast<Eigen::Index>(t.sample_count());
    out.velocity.middleCols(static_cast<Eigen::Index>(cursor), cols) = t.velocity;
    out.torque.middleCols(static_cast<Eigen::Index>(cursor), cols) = t.torque;
    const double t0 = t.times.front();
    const double shift = cursor == 0 ? 0.0 : clock + t.dt - t0;
    for (double time : t.times) out.times.push_back(time + shift);
    for (const auto& seg : t.segments) {
      out.segments.push_back({seg.name, seg.begin + cursor, seg.end + cursor, seg.dt});
    }
    cursor += t.sample_count();
    clock = out.times.back();
  }
  return out;
}

}  // namespace actuforge
