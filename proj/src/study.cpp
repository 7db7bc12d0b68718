#include "actuforge/study.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include "actuforge/errors.hpp"
#include "actuforge/serialization.hpp"

namespace actuforge {
namespace fs = std::filesystem;

namespace {

std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_number(std::string_view s, const std::string& what) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw ValidationError(what, "number");
  }
  return v;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw StudyError("cannot read " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw StudyError("cannot write " + p.string());
  out << bytes;
  if (!out) throw StudyError("write failed for " + p.string());
}

json kinematics_to_json(const LegKinematics& k) {
  return {{"thigh_m", k.thigh},
          {"shank_m", k.shank},
          {"yaw_to_roll_m", vector_to_json(k.yaw_to_roll)},
          {"roll_to_pitch_m", vector_to_json(k.roll_to_pitch)},
          {"ankle_to_foot_m", vector_to_json(k.ankle_to_foot)}};
}

LegKinematics kinematics_from_json(const json& doc) {
  LegKinematics k;
  k.thigh = doc.at("thigh_m").get<double>();
  k.shank = doc.at("shank_m").get<double>();
  k.yaw_to_roll = vector_from_json(doc.at("yaw_to_roll_m"), "kinematics.yaw_to_roll_m");
  k.roll_to_pitch = vector_from_json(doc.at("roll_to_pitch_m"), "kinematics.roll_to_pitch_m");
  k.ankle_to_foot = vector_from_json(doc.at("ankle_to_foot_m"), "kinematics.ankle_to_foot_m");
  return k;
}

std::vector<DesignRule> rules_without_budget(const std::vector<DesignRule>& rules) {
  std::vector<DesignRule> out;
  for (const auto& r : rules) {
    if (!std::holds_alternative<MassBudgetRule>(r)) out.push_back(r);
  }
  return out;
}

CellSummary summarize_cell(const DesignProblem& problem, const DesignSolution& solution,
                           const LegKinematics& kin) {
  const SelectedDesign design = resolve_design(solution, problem.library, &problem.coupling);
  CellSummary s;
  s.trace = inertia_report(design).trace;
  const auto copper = copper_loss(design, problem.tasks);
  s.task_names = copper.task_names;
  s.copper_energy = copper.task_energy;
  s.total_copper = copper.total_energy;
  s.tcp_volume = joint_torque_polytope(design, problem.library).volume;
  if (problem.joint_count() == 5) {
    try {
      s.fcp_volume = force_capability_polytope(design, problem.library, kin, nominal_configuration()).volume;
    } catch (const SolverError&) {
      s.fcp_volume.reset();
    }
  }
  return s;
}

/// Runs fn(i) for i in [0, n) on `workers` threads; exceptions propagate.
template <class Fn>
void parallel_for(std::size_t n, int workers, Fn fn) {
  const std::size_t pool = std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(std::max(1, workers)), n));
  if (pool <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> threads;
  for (std::size_t t = 0; t < pool; ++t) {
    threads.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

void validate(const StudyGrid& grid) {
  if (grid.budgets.empty()) throw ValidationError("budgets", "non-empty");
  if (grid.couplings.empty()) throw ValidationError("couplings", "non-empty");
  for (std::size_t i = 0; i < grid.budgets.size(); ++i) {
    const std::string path = "budgets[" + std::to_string(i) + "]";
    if (!(grid.budgets[i] > 0.0) || !std::isfinite(grid.budgets[i])) throw ValidationError(path, "budget > 0");
    if (i > 0 && !(grid.budgets[i] > grid.budgets[i - 1])) throw ValidationError(path, "budgets strictly increasing");
  }
  validate(grid.base.library);
  validate(grid.base.tasks);
  for (std::size_t i = 0; i < grid.couplings.size(); ++i) {
    const auto* c = grid.base.library.find_coupling(grid.couplings[i]);
    if (!c) throw ValidationError("couplings[" + std::to_string(i) + "]", "coupling exists in library");
    if (c->dimension() != grid.base.joint_count()) {
      throw ValidationError("couplings[" + std::to_string(i) + "]", "coupling dimension = joint_count");
    }
    if (std::count(grid.couplings.begin(), grid.couplings.end(), grid.couplings[i]) > 1) {
      throw ValidationError("couplings[" + std::to_string(i) + "]", "coupling ids unique");
    }
  }
  validate(grid.kinematics);
}

std::vector<double> budget_range(double min, double step, double max) {
  if (!(min > 0.0)) throw ValidationError("budgets.min", "min > 0");
  if (!(step > 0.0)) throw ValidationError("budgets.step", "step > 0");
  if (!(max >= min)) throw ValidationError("budgets.max", "max >= min");
  std::vector<double> out;
  const long long count = static_cast<long long>(std::floor((max - min) / step + 1e-9));
  for (long long i = 0; i <= count; ++i) {
    out.push_back(std::round((min + static_cast<double>(i) * step) * 1e6) / 1e6);
  }
  return out;
}

std::vector<double> parse_budget_range(std::string_view spec) {
  const auto a = spec.find(':');
  const auto b = a == std::string_view::npos ? a : spec.find(':', a + 1);
  if (a == std::string_view::npos || b == std::string_view::npos || spec.find(':', b + 1) != std::string_view::npos) {
    throw ValidationError("budgets", "budgets in min:step:max form");
  }
  return budget_range(parse_number(spec.substr(0, a), "budgets.min"),
                      parse_number(spec.substr(a + 1, b - a - 1), "budgets.step"),
                      parse_number(spec.substr(b + 1), "budgets.max"));
}

std::vector<std::string> parse_coupling_list(std::string_view spec, const Library& library) {
  std::vector<std::string> out;
  if (spec == "all") {
    for (const auto& c : library.couplings) out.push_back(c.id);
    return out;
  }
  std::size_t start = 0;
  while (start <= spec.size()) {
    const auto end = std::min(spec.find(',', start), spec.size());
    std::string id(spec.substr(start, end - start));
    if (id.empty()) throw ValidationError("couplings", "comma-separated coupling ids");
    if (!library.find_coupling(id)) throw ValidationError("couplings", "coupling '" + id + "' exists in library");
    out.push_back(std::move(id));
    start = end + 1;
  }
  return out;
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw StudyError("SHA-256 computation failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 15]);
  }
  return out;
}

json canonical_inputs(const StudyGrid& grid) {
  return {{"schema_version", kStudySchemaVersion},
          {"library", library_to_json(grid.base.library)},
          {"tasks", trajectory_to_json(grid.base.tasks)},
          {"rules", rules_to_json(rules_without_budget(grid.base.rules))},
          {"margin", grid.base.margin},
          {"budgets", grid.budgets},
          {"couplings", grid.couplings},
          {"kinematics", kinematics_to_json(grid.kinematics)}};
}

std::string inputs_hash(const StudyGrid& grid) { return sha256_hex(canonical_inputs(grid).dump()); }

StudyGrid grid_from_inputs(const json& inputs) {
  StudyGrid g;
  g.base.library = library_from_json(inputs.at("library"));
  g.base.tasks = trajectory_from_json(inputs.at("tasks"));
  g.base.rules = rules_from_json(inputs.at("rules"));
  g.base.margin = inputs.at("margin").get<double>();
  g.budgets = inputs.at("budgets").get<std::vector<double>>();
  g.couplings = inputs.at("couplings").get<std::vector<std::string>>();
  g.kinematics = kinematics_from_json(inputs.at("kinematics"));
  if (!g.couplings.empty()) {
    if (const auto* c = g.base.library.find_coupling(g.couplings.front())) g.base.coupling = *c;
  }
  return g;
}

StudyResult run_grid(const StudyGrid& grid, int parallelism, ProgressCallback progress) {
  const auto started = std::chrono::steady_clock::now();
  validate(grid);
  const std::size_t nb = grid.budgets.size();
  const std::size_t nc = grid.couplings.size();

  StudyResult result;
  result.budgets = grid.budgets;
  result.couplings = grid.couplings;
  result.inputs = canonical_inputs(grid);
  result.inputs_hash = sha256_hex(result.inputs.dump());
  result.cells.resize(nb * nc);

  // Candidate cells depend on the coupling only, so they are shared across budgets.
  std::vector<DesignProblem> problems(nc);
  std::vector<std::vector<std::vector<CandidateCell>>> cells(nc);
  std::vector<std::string> enumeration_errors(nc);
  parallel_for(nc, parallelism, [&](std::size_t c) {
    DesignProblem p = grid.base;
    p.rules = rules_without_budget(grid.base.rules);
    p.coupling = *grid.base.library.find_coupling(grid.couplings[c]);
    try {
      validate(p);
      cells[c] = enumerate_all_cells(p);
    } catch (const std::exception& e) {
      enumeration_errors[c] = e.what();
    }
    problems[c] = std::move(p);
  });

  std::atomic<std::size_t> done{0};
  std::mutex progress_mutex;
  parallel_for(nb * nc, parallelism, [&](std::size_t i) {
    const std::size_t b = i / nc, c = i % nc;
    StudyCell& cell = result.cells[i];
    cell.budget = grid.budgets[b];
    cell.coupling_id = grid.couplings[c];
    if (!enumeration_errors[c].empty()) {
      cell.error = enumeration_errors[c];
    } else {
      DesignProblem p = problems[c];
      p.rules.push_back(MassBudgetRule{grid.budgets[b]});
      try {
        cell.solution = solve(p, cells[c]);
        if (cell.solution.optimal()) cell.summary = summarize_cell(p, cell.solution, grid.kinematics);
      } catch (const std::exception& e) {
        cell.error = e.what();
      }
    }
    const std::size_t finished = ++done;
    if (progress) {
      std::lock_guard<std::mutex> lock(progress_mutex);
      progress(finished, nb * nc);
    }
  });
  annotate_pareto(result);
  result.wall_clock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

void annotate_pareto(StudyResult& result) {
  std::vector<std::vector<double>> points;
  std::vector<std::size_t> index;
  for (std::size_t i = 0; i < result.cells.size(); ++i) {
    auto& cell = result.cells[i];
    cell.pareto = false;
    if (!cell.solution.optimal() || !cell.summary) continue;
    points.push_back({cell.solution.total_motor_mass, cell.solution.objective_value, cell.summary->total_copper});
    index.push_back(i);
  }
  for (auto k : pareto_front(points)) result.cells[index[k]].pareto = true;
}

json cell_to_json(const StudyCell& cell) {
  json summary = nullptr;
  if (cell.summary) {
    const auto& s = *cell.summary;
    json tasks = json::array();
    for (std::size_t i = 0; i < s.task_names.size(); ++i) {
      tasks.push_back({{"task", s.task_names[i]}, {"copper_energy_J", s.copper_energy[i]}});
    }
    summary = {{"trace_kgm2", s.trace},
               {"tasks", tasks},
               {"total_copper_J", s.total_copper},
               {"tcp_volume", s.tcp_volume},
               {"fcp_volume", s.fcp_volume ? json(*s.fcp_volume) : json(nullptr)}};
  }
  return {{"budget_kg", cell.budget},
          {"coupling_id", cell.coupling_id},
          {"solution", solution_to_json(cell.solution)},
          {"summary", summary},
          {"error", cell.error},
          {"pareto", cell.pareto}};
}

StudyCell cell_from_json(const json& doc) {
  StudyCell cell;
  cell.budget = doc.at("budget_kg").get<double>();
  cell.coupling_id = doc.at("coupling_id").get<std::string>();
  cell.solution = solution_from_json(doc.at("solution"));
  if (!doc.at("summary").is_null()) {
    const auto& s = doc.at("summary");
    CellSummary cs;
    cs.trace = s.at("trace_kgm2").get<double>();
    for (const auto& t : s.at("tasks")) {
      cs.task_names.push_back(t.at("task").get<std::string>());
      cs.copper_energy.push_back(t.at("copper_energy_J").get<double>());
    }
    cs.total_copper = s.at("total_copper_J").get<double>();
    cs.tcp_volume = s.at("tcp_volume").get<double>();
    if (!s.at("fcp_volume").is_null()) cs.fcp_volume = s.at("fcp_volume").get<double>();
    cell.summary = std::move(cs);
  }
  cell.error = doc.at("error").get<std::string>();
  cell.pareto = doc.at("pareto").get<bool>();
  return cell;
}

std::string cell_file_name(double budget, const std::string& coupling) {
  return format_number(budget) + "_" + coupling + ".result";
}

void persist(const StudyResult& result, const fs::path& dir, bool force) {
  if (fs::exists(dir) && !force) {
    throw StudyError("study directory " + dir.string() + " already exists (use --force to replace it)");
  }
  const fs::path parent = dir.has_parent_path() ? dir.parent_path() : fs::path(".");
  fs::create_directories(parent);
  std::random_device rd;
  const fs::path tmp = parent / (dir.filename().string() + ".tmp-" + std::to_string(rd()));
  fs::create_directories(tmp / "cells");
  try {
    const std::string inputs = result.inputs.dump();
    write_file(tmp / "inputs.json", inputs);
    json manifest_cells = json::array();
    for (const auto& cell : result.cells) {
      const std::string name = cell_file_name(cell.budget, cell.coupling_id);
      const std::string bytes = cell_to_json(cell).dump(1);
      write_file(tmp / "cells" / name, bytes);
      manifest_cells.push_back({{"budget_kg", cell.budget},
                                {"coupling_id", cell.coupling_id},
                                {"file", "cells/" + name},
                                {"sha256", sha256_hex(bytes)}});
    }
    json manifest = {{"schema_version", kStudySchemaVersion},
                     {"inputs_hash", result.inputs_hash},
                     {"grid", {{"budgets_kg", result.budgets}, {"couplings", result.couplings}}},
                     {"cells", manifest_cells}};
    write_file(tmp / "manifest.json", manifest.dump(2));
    write_file(tmp / "summary.tables", summarize(result).dump(2));
    if (fs::exists(dir)) fs::remove_all(dir);
    fs::rename(tmp, dir);
  } catch (...) {
    std::error_code ec;
    fs::remove_all(tmp, ec);
    throw;
  }
}

StudyResult load_study(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw StudyError("no study at " + dir.string());
  json manifest;
  try {
    manifest = json::parse(read_file(dir / "manifest.json"));
  } catch (const json::exception& e) {
    throw StudyError("manifest is not valid JSON: " + std::string(e.what()));
  }
  const int version = manifest.value("schema_version", 0);
  if (version != kStudySchemaVersion) {
    throw StudyError("study schema version " + std::to_string(version) + " is not supported (expected " +
                     std::to_string(kStudySchemaVersion) + ")");
  }
  StudyResult r;
  r.inputs_hash = manifest.at("inputs_hash").get<std::string>();
  const std::string inputs = read_file(dir / "inputs.json");
  if (sha256_hex(inputs) != r.inputs_hash) {
    throw StudyError("inputs hash mismatch: inputs changed since the study ran");
  }
  r.inputs = json::parse(inputs);
  r.budgets = manifest.at("grid").at("budgets_kg").get<std::vector<double>>();
  r.couplings = manifest.at("grid").at("couplings").get<std::vector<std::string>>();
  for (const auto& entry : manifest.at("cells")) {
    const std::string file = entry.at("file").get<std::string>();
    if (!fs::exists(dir / file)) throw StudyError("missing cell file " + file);
    const std::string bytes = read_file(dir / file);
    if (sha256_hex(bytes) != entry.at("sha256").get<std::string>()) {
      throw StudyError("checksum mismatch for cell " + file);
    }
    r.cells.push_back(cell_from_json(json::parse(bytes)));
  }
  if (r.cells.size() != r.budgets.size() * r.couplings.size()) {
    throw StudyError("manifest lists " + std::to_string(r.cells.size()) + " cells for a " +
                     std::to_string(r.budgets.size()) + "x" + std::to_string(r.couplings.size()) + " grid");
  }
  return r;
}

void check_inputs(const StudyResult& result, const StudyGrid& grid) {
  if (inputs_hash(grid) != result.inputs_hash) {
    throw StudyError("inputs hash mismatch: inputs changed since the study ran");
  }
}

std::string study_digest(const fs::path& dir) {
  std::vector<fs::path> files = {"manifest.json", "inputs.json", "summary.tables"};
  std::vector<fs::path> cells;
  for (const auto& e : fs::directory_iterator(dir / "cells")) cells.push_back(fs::path("cells") / e.path().filename());
  std::sort(cells.begin(), cells.end());
  files.insert(files.end(), cells.begin(), cells.end());
  std::string all;
  for (const auto& f : files) {
    all += f.generic_string();
    all.push_back('\0');
    all += sha256_hex(read_file(dir / f));
    all.push_back('\n');
  }
  return sha256_hex(all);
}

json summarize(const StudyResult& r) {
  const std::size_t nc = r.couplings.size();
  json curves = json::array();
  json feasibility = json::array();
  for (std::size_t b = 0; b < r.budgets.size(); ++b) {
    json row = json::array();
    for (std::size_t c = 0; c < nc; ++c) row.push_back(r.cell(b, c).solution.optimal());
    feasibility.push_back(row);
  }
  for (std::size_t c = 0; c < nc; ++c) {
    json points = json::array();
    bool any_feasible = false, monotone = true, feasibility_monotone = true;
    std::optional<double> previous;
    bool seen_feasible = false;
    for (std::size_t b = 0; b < r.budgets.size(); ++b) {
      const auto& cell = r.cell(b, c);
      json p = {{"budget_kg", cell.budget}, {"status", cell.solution.optimal() ? "optimal" : "infeasible"}};
      if (!cell.error.empty()) p["status"] = "error";
      if (cell.solution.optimal()) {
        any_feasible = true;
        seen_feasible = true;
        p["objective_kgm2"] = cell.solution.objective_value;
        p["total_motor_mass_kg"] = cell.solution.total_motor_mass;
        if (cell.summary) {
          p["trace_kgm2"] = cell.summary->trace;
          json copper = json::object();
          for (std::size_t t = 0; t < cell.summary->task_names.size(); ++t) {
            copper[cell.summary->task_names[t]] = cell.summary->copper_energy[t];
          }
          p["copper_energy_J"] = copper;
          p["total_copper_J"] = cell.summary->total_copper;
        }
        if (previous && cell.solution.objective_value > *previous) monotone = false;
        previous = cell.solution.objective_value;
      } else if (seen_feasible) {
        feasibility_monotone = false;
      }
      points.push_back(p);
    }
    curves.push_back({{"coupling_id", r.couplings[c]},
                      {"all_infeasible", !any_feasible},
                      {"trace_monotone_non_increasing", monotone},
                      {"feasibility_monotone", feasibility_monotone},
                      {"points", points}});
  }
  json pareto = json::array();
  for (const auto& cell : r.cells) {
    if (!cell.pareto) continue;
    pareto.push_back({{"budget_kg", cell.budget},
                      {"coupling_id", cell.coupling_id},
                      {"total_motor_mass_kg", cell.solution.total_motor_mass},
                      {"objective_kgm2", cell.solution.objective_value},
                      {"total_copper_J", cell.summary ? cell.summary->total_copper : 0.0}});
  }
  return {{"schema_version", kStudySchemaVersion},
          {"inputs_hash", r.inputs_hash},
          {"budgets_kg", r.budgets},
          {"couplings", r.couplings},
          {"curves", curves},
          {"feasibility", feasibility},
          {"pareto_objectives", {"total_motor_mass_kg", "objective_kgm2", "total_copper_J"}},
          {"pareto", pareto}};
}

std::optional<double> saturation_budget(const StudyResult& result, const std::string& coupling,
                                        double relative_tolerance) {
  auto it = std::find(result.couplings.begin(), result.couplings.end(), coupling);
  if (it == result.couplings.end()) throw ValidationError("coupling", "coupling in study");
  const std::size_t c = static_cast<std::size_t>(it - result.couplings.begin());
  const std::size_t nb = result.budgets.size();
  if (nb == 0 || !result.cell(nb - 1, c).solution.optimal()) return std::nullopt;
  const double last = result.cell(nb - 1, c).solution.objective_value;
  std::size_t first = nb - 1;
  for (std::size_t b = nb - 1; b-- > 0;) {
    const auto& s = result.cell(b, c).solution;
    if (!s.optimal()) break;
    if (std::abs(s.objective_value - last) > relative_tolerance * std::abs(last)) break;
    first = b;
  }
  return result.budgets[first];
}

}  // namespace actuforge
