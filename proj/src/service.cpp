#include "actuforge/service.hpp"

#include <httplib.h>

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "actuforge/errors.hpp"
#include "actuforge/fixtures.hpp"
#include "actuforge/serialization.hpp"

namespace actuforge {
namespace fs = std::filesystem;

namespace {

std::string index_path(const std::string& base, std::size_t i) { return base + "[" + std::to_string(i) + "]"; }

std::vector<double> parse_number_list(const std::string& text, const std::string& path) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = std::min(text.find(',', start), text.size());
    const std::string item = text.substr(start, end - start);
    double v = 0.0;
    auto res = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || res.ec != std::errc() || res.ptr != item.data() + item.size() || !std::isfinite(v)) {
      throw ValidationError(path, "comma-separated numbers");
    }
    out.push_back(v);
    start = end + 1;
  }
  return out;
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

double required_number(const json& body, const char* key) {
  if (!body.contains(key)) throw ValidationError(key, "field present");
  if (!body.at(key).is_number()) throw ValidationError(key, "number");
  return body.at(key).get<double>();
}

Library request_library(const json& body, const Library* fallback) {
  if (body.contains("library")) {
    try {
      return library_from_json(body.at("library"));
    } catch (const ValidationError& e) {
      throw ValidationError("library." + e.path(), e.invariant());
    } catch (const ParseError&) {
      throw ValidationError("library", "library object");
    }
  }
  if (!fallback) throw ValidationError("library", "library given or stored");
  return *fallback;
}

LegKinematics request_kinematics(const json& body) {
  LegKinematics k;
  if (!body.contains("kinematics")) return k;
  const auto& doc = body.at("kinematics");
  if (!doc.is_object()) throw ValidationError("kinematics", "object");
  if (doc.contains("thigh_m")) k.thigh = doc.at("thigh_m").get<double>();
  if (doc.contains("shank_m")) k.shank = doc.at("shank_m").get<double>();
  if (doc.contains("yaw_to_roll_m")) k.yaw_to_roll = vector_from_json(doc.at("yaw_to_roll_m"), "kinematics.yaw_to_roll_m");
  if (doc.contains("roll_to_pitch_m")) {
    k.roll_to_pitch = vector_from_json(doc.at("roll_to_pitch_m"), "kinematics.roll_to_pitch_m");
  }
  if (doc.contains("ankle_to_foot_m")) {
    k.ankle_to_foot = vector_from_json(doc.at("ankle_to_foot_m"), "kinematics.ankle_to_foot_m");
  }
  validate(k);
  return k;
}

json envelope(json data) { return {{"schema_version", kApiSchemaVersion}, {"data", std::move(data)}}; }

HttpResponse reply(int status, json data) {
  HttpResponse r;
  r.status = status;
  r.body = envelope(std::move(data)).dump();
  r.headers["Content-Type"] = "application/json";
  return r;
}

HttpResponse error_reply(int status, const std::string& message, json fields = json::array()) {
  HttpResponse r;
  r.status = status;
  r.body = json{{"schema_version", kApiSchemaVersion},
                {"error", {{"message", message}, {"fields", std::move(fields)}}}}
               .dump();
  r.headers["Content-Type"] = "application/json";
  return r;
}

HttpResponse validation_reply(const ValidationError& e) {
  return error_reply(400, e.what(), json::array({{{"path", e.path()}, {"message", e.invariant() + " violated"}}}));
}

json parse_body(const std::string& body) {
  try {
    return json::parse(body);
  } catch (const json::exception& e) {
    throw ParseError(std::string("request body is not valid JSON: ") + e.what());
  }
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::stringstream ss(path);
  std::string item;
  while (std::getline(ss, item, '/')) {
    if (!item.empty()) parts.push_back(item);
  }
  return parts;
}

}  // namespace

TaskTrajectory tasks_from_request(const json& tasks, const fs::path& base_dir, const std::string& path) {
  if (!tasks.is_array() || tasks.empty()) throw ValidationError(path, "non-empty array");
  TaskSet set;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const auto& t = tasks[i];
    const std::string p = index_path(path, i);
    try {
      if (t.is_string()) {
        fs::path file = t.get<std::string>();
        if (file.is_relative()) file = base_dir / file;
        if (!fs::exists(file)) throw ValidationError(p, "task file exists");
        set.tasks.push_back(ingest_trajectory(file));
      } else if (t.is_object() && t.contains("csv")) {
        set.tasks.push_back(parse_trajectory_csv(t.at("csv").get<std::string>(),
                                                 t.value("name", "task" + std::to_string(i + 1))));
      } else if (t.is_object()) {
        set.tasks.push_back(trajectory_from_json(t));
      } else {
        throw ValidationError(p, "file path or task object");
      }
    } catch (const ParseError& e) {
      throw ValidationError(p, std::string("parsable trajectory (") + e.what() + ")");
    } catch (const json::exception&) {
      throw ValidationError(p, "trajectory object");
    }
  }
  validate(set);
  return concatenate(set);
}

DesignProblem problem_from_request(const json& body, const Library* fallback, const fs::path& base_dir) {
  if (!body.is_object()) throw ValidationError("body", "object");
  DesignProblem p;
  p.library = request_library(body, fallback);
  if (!body.contains("tasks")) throw ValidationError("tasks", "field present");
  p.tasks = tasks_from_request(body.at("tasks"), base_dir);
  if (!body.contains("coupling") || !body.at("coupling").is_string()) {
    throw ValidationError("coupling", "coupling id string");
  }
  const auto* c = p.library.find_coupling(body.at("coupling").get<std::string>());
  if (!c) throw ValidationError("coupling", "coupling exists in library");
  p.coupling = *c;
  if (body.contains("rules")) p.rules = rules_from_json(body.at("rules"));
  if (body.contains("budget_kg")) p.rules.push_back(MassBudgetRule{required_number(body, "budget_kg")});
  if (body.contains("margin")) p.margin = required_number(body, "margin");
  validate(p);
  return p;
}

StudyGrid grid_from_request(const json& body, const Library* fallback, const fs::path& base_dir) {
  if (!body.is_object()) throw ValidationError("body", "object");
  StudyGrid g;
  g.base.library = request_library(body, fallback);
  if (!body.contains("tasks")) throw ValidationError("tasks", "field present");
  g.base.tasks = tasks_from_request(body.at("tasks"), base_dir);
  if (body.contains("rules")) {
    for (auto& r : rules_from_json(body.at("rules"))) {
      if (!std::holds_alternative<MassBudgetRule>(r)) g.base.rules.push_back(std::move(r));
    }
  }
  if (body.contains("margin")) g.base.margin = required_number(body, "margin");

  if (!body.contains("budgets")) throw ValidationError("budgets", "field present");
  const auto& b = body.at("budgets");
  if (b.is_string()) {
    g.budgets = parse_budget_range(b.get<std::string>());
  } else if (b.is_object()) {
    for (const char* key : {"min", "step", "max"}) {
      if (!b.contains(key) || !b.at(key).is_number()) throw ValidationError(std::string("budgets.") + key, "number");
    }
    g.budgets = budget_range(b.at("min").get<double>(), b.at("step").get<double>(), b.at("max").get<double>());
  } else if (b.is_array()) {
    for (std::size_t i = 0; i < b.size(); ++i) {
      if (!b[i].is_number()) throw ValidationError(index_path("budgets", i), "number");
      g.budgets.push_back(b[i].get<double>());
    }
  } else {
    throw ValidationError("budgets", "min:step:max, {min, step, max} or list");
  }

  if (!body.contains("couplings")) throw ValidationError("couplings", "field present");
  const auto& c = body.at("couplings");
  if (c.is_string()) {
    g.couplings = parse_coupling_list(c.get<std::string>(), g.base.library);
  } else if (c.is_array()) {
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (!c[i].is_string()) throw ValidationError(index_path("couplings", i), "coupling id string");
      g.couplings.push_back(c[i].get<std::string>());
    }
  } else {
    throw ValidationError("couplings", "\"all\", comma list or array");
  }
  g.kinematics = request_kinematics(body);
  validate(g);
  g.base.coupling = *g.base.library.find_coupling(g.couplings.front());
  return g;
}

std::string to_string(JobState state) {
  switch (state) {
    case JobState::queued: return "queued";
    case JobState::running: return "running";
    case JobState::complete: return "complete";
    case JobState::failed: return "failed";
  }
  return "failed";
}

ServiceOptions service_options_from_environment() {
  ServiceOptions o;
  if (const char* d = std::getenv("ACTUFORGE_DATA_DIR"); d && *d) o.data_dir = d;
  if (const char* j = std::getenv("ACTUFORGE_JOBS"); j && *j) {
    const int n = std::atoi(j);
    if (n < 1) throw ValidationError("ACTUFORGE_JOBS", "positive integer");
    o.cell_parallelism = n;
  }
  return o;
}

Service::Service(ServiceOptions options) : options_(std::move(options)) {
  fs::create_directories(options_.data_dir / "studies");
  const fs::path lib = options_.data_dir / "library.json";
  if (fs::exists(lib)) {
    library_ = load_library(lib);
  } else {
    library_ = fixture_library();
    save_library(*library_, lib);
  }
  // Ids continue after studies left by an earlier process.
  for (const auto& e : fs::directory_iterator(options_.data_dir / "studies")) {
    const std::string name = e.path().filename().string();
    if (name.rfind("study-", 0) == 0) {
      const std::size_t n = std::strtoull(name.c_str() + 6, nullptr, 10);
      next_job_ = std::max(next_job_, n + 1);
    }
  }
  const int workers = std::max(1, options_.concurrent_studies);
  for (int i = 0; i < workers; ++i) workers_.emplace_back([this] { worker_loop(); });
}

Service::~Service() {
  {
    std::lock_guard<std::mutex> lock(mutex_);
    stopping_ = true;
  }
  wake_.notify_all();
  for (auto& t : workers_) t.join();
}

fs::path Service::study_dir(const std::string& id) const { return options_.data_dir / "studies" / id; }

std::optional<JobStatus> Service::status(const std::string& id) const {
  std::lock_guard<std::mutex> lock(mutex_);
  auto it = jobs_.find(id);
  if (it == jobs_.end()) return std::nullopt;
  return it->second.status;
}

void Service::wait_idle() {
  std::unique_lock<std::mutex> lock(mutex_);
  idle_.wait(lock, [&] { return queue_.empty() && active_ == 0; });
}

void Service::worker_loop() {
  for (;;) {
    std::string id;
    {
      std::unique_lock<std::mutex> lock(mutex_);
      wake_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
      if (stopping_) return;
      id = queue_.front();
      queue_.pop_front();
      ++active_;
      auto& job = jobs_.at(id);
      job.status.state = JobState::running;
    }
    run_job(id);
    {
      std::lock_guard<std::mutex> lock(mutex_);
      --active_;
    }
    idle_.notify_all();
  }
}

void Service::run_job(const std::string& id) {
  StudyGrid grid;
  {
    std::lock_guard<std::mutex> lock(mutex_);
    grid = jobs_.at(id).grid;
  }
  try {
    StudyResult result = run_grid(grid, options_.cell_parallelism, [&](std::size_t done, std::size_t total) {
      std::lock_guard<std::mutex> lock(mutex_);
      auto& s = jobs_.at(id).status;
      s.cells_done = done;
      s.cells_total = total;
    });
    persist(result, study_dir(id));
    std::lock_guard<std::mutex> lock(mutex_);
    loaded_studies_[id] = std::move(result);
    auto& job = jobs_.at(id);
    job.status.state = JobState::complete;
    job.grid = StudyGrid{};
  } catch (const std::exception& e) {
    std::lock_guard<std::mutex> lock(mutex_);
    auto& job = jobs_.at(id);
    job.status.state = JobState::failed;
    job.status.reason = e.what();
    job.grid = StudyGrid{};
  }
}

HttpResponse Service::handle(const HttpRequest& request) {
  try {
    const auto parts = split_path(request.path);
    if (parts.empty() || parts[0] != "api") return error_reply(404, "unknown route " + request.path);
    const std::string& m = request.method;
    if (parts.size() == 2 && parts[1] == "healthz" && m == "GET") return reply(200, {{"status", "ok"}});
    if (parts.size() == 2 && parts[1] == "library") {
      if (m == "GET") return get_library();
      if (m == "PUT") return put_library(request);
      return error_reply(405, "method not allowed");
    }
    if (parts.size() == 2 && parts[1] == "solve") {
      if (m == "POST") return post_solve(request);
      return error_reply(405, "method not allowed");
    }
    if (parts.size() == 2 && parts[1] == "studies") {
      if (m == "POST") return post_study(request);
      return error_reply(405, "method not allowed");
    }
    if (parts.size() == 3 && parts[1] == "studies" && m == "GET") return get_study(parts[2]);
    if (parts.size() == 4 && parts[1] == "studies" && parts[3] == "summary" && m == "GET") {
      return get_summary(parts[2], request);
    }
    if (parts.size() == 4 && parts[1] == "solutions" && parts[3] == "analysis" && m == "GET") {
      return get_analysis(parts[2], request);
    }
    return error_reply(404, "unknown route " + request.path);
  } catch (const ValidationError& e) {
    return validation_reply(e);
  } catch (const ParseError& e) {
    return error_reply(400, e.what());
  } catch (const json::exception& e) {
    return error_reply(400, std::string("malformed request: ") + e.what());
  } catch (const std::exception& e) {
    return error_reply(500, e.what());
  }
}

HttpResponse Service::get_library() {
  std::lock_guard<std::mutex> lock(mutex_);
  return reply(200, library_to_json(*library_));
}

HttpResponse Service::put_library(const HttpRequest& request) {
  const json body = parse_body(request.body);
  Library lib;
  try {
    lib = library_from_json(body);
  } catch (const ParseError& e) {
    throw ValidationError("library", "library object");
  }
  std::lock_guard<std::mutex> lock(mutex_);
  for (const auto& [id, job] : jobs_) {
    const bool live = job.status.state == JobState::queued || job.status.state == JobState::running;
    if (live && job.uses_stored_library) {
      return error_reply(409, "study " + id + " uses the stored library and has not finished");
    }
  }
  save_library(lib, options_.data_dir / "library.json");
  library_ = std::move(lib);
  return reply(200, library_to_json(*library_));
}

HttpResponse Service::post_solve(const HttpRequest& request) {
  const json body = parse_body(request.body);
  DesignProblem problem;
  {
    Library stored;
    {
      std::lock_guard<std::mutex> lock(mutex_);
      stored = *library_;
    }
    problem = problem_from_request(body, &stored, options_.data_dir);
  }
  DesignSolution solution = solve(problem);
  json data = solution_to_json(solution);
  const std::string id = "sol-" + sha256_hex(body.dump() + data.dump()).substr(0, 16);
  {
    std::lock_guard<std::mutex> lock(mutex_);
    if (solution.optimal()) solutions_[id] = StoredSolution{std::move(problem), solution};
  }
  return reply(200, {{"solution_id", solution.optimal() ? json(id) : json(nullptr)}, {"solution", data}});
}

HttpResponse Service::post_study(const HttpRequest& request) {
  const json body = parse_body(request.body);
  Library stored;
  {
    std::lock_guard<std::mutex> lock(mutex_);
    stored = *library_;
  }
  StudyGrid grid = grid_from_request(body, &stored, options_.data_dir);
  std::string id;
  {
    std::lock_guard<std::mutex> lock(mutex_);
    if (queue_.size() >= options_.queue_capacity) return error_reply(409, "study queue is full");
    id = "study-" + std::to_string(next_job_++);
    Job job;
    job.status.id = id;
    job.status.cells_total = grid.budgets.size() * grid.couplings.size();
    job.grid = std::move(grid);
    job.uses_stored_library = !body.contains("library");
    jobs_[id] = std::move(job);
    queue_.push_back(id);
  }
  wake_.notify_one();
  HttpResponse r = reply(202, {{"id", id}, {"state", "queued"}});
  r.headers["Location"] = "/api/studies/" + id;
  return r;
}

HttpResponse Service::get_study(const std::string& id) {
  auto s = status(id);
  if (!s) {
    if (fs::exists(study_dir(id) / "manifest.json")) {
      JobStatus done;
      done.id = id;
      done.state = JobState::complete;
      auto result = load_study(study_dir(id));
      done.cells_done = done.cells_total = result.cells.size();
      s = done;
    } else {
      return error_reply(404, "unknown study " + id);
    }
  }
  json data = {{"id", s->id},
               {"state", to_string(s->state)},
               {"cells_done", s->cells_done},
               {"cells_total", s->cells_total}};
  if (s->state == JobState::failed) data["reason"] = s->reason;
  return reply(200, data);
}

HttpResponse Service::get_summary(const std::string& id, const HttpRequest& request) {
  auto s = status(id);
  const bool on_disk = fs::exists(study_dir(id) / "manifest.json");
  if (!s && !on_disk) return error_reply(404, "unknown study " + id);
  if (s && s->state != JobState::complete) {
    return error_reply(409, "study " + id + " is " + to_string(s->state));
  }
  const std::string etag = "\"" + study_digest(study_dir(id)) + "\"";
  auto it = request.headers.find("if-none-match");
  if (it != request.headers.end() && (it->second == etag || it->second == "*")) {
    HttpResponse r;
    r.status = 304;
    r.headers["ETag"] = etag;
    r.headers["Cache-Control"] = "public, max-age=31536000, immutable";
    return r;
  }
  StudyResult result;
  {
    std::lock_guard<std::mutex> lock(mutex_);
    auto cached = loaded_studies_.find(id);
    if (cached != loaded_studies_.end()) result = cached->second;
  }
  if (result.cells.empty()) {
    result = load_study(study_dir(id));
    std::lock_guard<std::mutex> lock(mutex_);
    loaded_studies_[id] = result;
  }
  json data = summarize(result);
  json ids = json::array();
  for (std::size_t b = 0; b < result.budgets.size(); ++b) {
    for (std::size_t c = 0; c < result.couplings.size(); ++c) {
      const auto& cell = result.cell(b, c);
      ids.push_back({{"budget_kg", cell.budget},
                     {"coupling_id", cell.coupling_id},
                     {"solution_id", cell.solution.optimal()
                                         ? json(id + "." + std::to_string(b) + "." + std::to_string(c))
                                         : json(nullptr)}});
    }
  }
  data["cells"] = ids;
  data["study_id"] = id;
  HttpResponse r = reply(200, data);
  r.headers["ETag"] = etag;
  r.headers["Cache-Control"] = "public, max-age=31536000, immutable";
  return r;
}

std::optional<Service::StoredSolution> Service::find_solution(const std::string& id) {
  {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = solutions_.find(id);
    if (it != solutions_.end()) return it->second;
  }
  // Study cells: <study>.<budget index>.<coupling index>
  const auto second = id.rfind('.');
  if (second == std::string::npos || second == 0) return std::nullopt;
  const auto first = id.rfind('.', second - 1);
  if (first == std::string::npos) return std::nullopt;
  const std::string study = id.substr(0, first);
  std::size_t b = 0, c = 0;
  try {
    b = std::stoul(id.substr(first + 1, second - first - 1));
    c = std::stoul(id.substr(second + 1));
  } catch (const std::exception&) {
    return std::nullopt;
  }
  auto s = status(study);
  if (s && s->state != JobState::complete) return std::nullopt;
  if (!fs::exists(study_dir(study) / "manifest.json")) return std::nullopt;
  StudyResult result;
  {
    std::lock_guard<std::mutex> lock(mutex_);
    auto cached = loaded_studies_.find(study);
    if (cached != loaded_studies_.end()) result = cached->second;
  }
  if (result.cells.empty()) result = load_study(study_dir(study));
  if (b >= result.budgets.size() || c >= result.couplings.size()) return std::nullopt;
  const auto& cell = result.cell(b, c);
  if (!cell.solution.optimal()) return std::nullopt;
  StudyGrid grid = grid_from_inputs(result.inputs);
  StoredSolution stored;
  stored.problem = grid.base;
  stored.problem.coupling = *grid.base.library.find_coupling(cell.coupling_id);
  stored.problem.rules.push_back(MassBudgetRule{cell.budget});
  stored.solution = cell.solution;
  std::lock_guard<std::mutex> lock(mutex_);
  solutions_[id] = stored;
  return stored;
}

HttpResponse Service::get_analysis(const std::string& id, const HttpRequest& request) {
  auto stored = find_solution(id);
  if (!stored) return error_reply(404, "unknown solution " + id);
  const int n = stored->problem.joint_count();

  Eigen::VectorXd q = nominal_configuration();
  std::string config_key = "nominal";
  if (auto it = request.query.find("config"); it != request.query.end() && !it->second.empty()) {
    const auto values = parse_number_list(it->second, "config");
    if (values.size() != 5) throw ValidationError("config", "five joint angles");
    q = to_vector(values);
    config_key = json(values).dump();
  }
  std::optional<Eigen::VectorXd> velocity;
  std::string velocity_key = "zero";
  if (auto it = request.query.find("velocity"); it != request.query.end() && !it->second.empty()) {
    const auto values = parse_number_list(it->second, "velocity");
    if (static_cast<int>(values.size()) != n) {
      throw ValidationError("velocity", "one motor velocity per actuator");
    }
    velocity = to_vector(values);
    velocity_key = json(values).dump();
  }
  const std::string key = id + "|" + config_key + "|" + velocity_key;
  {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = analysis_cache_.find(key);
    if (it != analysis_cache_.end()) {
      HttpResponse r;
      r.body = it->second;
      r.headers["Content-Type"] = "application/json";
      return r;
    }
  }

  const auto& problem = stored->problem;
  const SelectedDesign design = resolve_design(stored->solution, problem.library, &problem.coupling);
  json data = {{"solution_id", id},
               {"solution", solution_to_json(stored->solution)},
               {"configuration", vector_to_json(q)},
               {"motor_velocity", velocity ? vector_to_json(*velocity) : json(nullptr)},
               {"inertia", inertia_report_to_json(inertia_report(design))},
               {"copper_loss", copper_loss_to_json(copper_loss(design, problem.tasks), false)},
               {"tcp", polytope_to_json(joint_torque_polytope(design, problem.library, velocity))}};
  if (n == 5) {
    try {
      data["fcp"] = polytope_to_json(force_capability_polytope(design, problem.library, LegKinematics{}, q, velocity));
    } catch (const SolverError& e) {
      data["fcp"] = nullptr;
      data["fcp_error"] = e.what();
    }
  } else {
    data["fcp"] = nullptr;
    data["fcp_error"] = "force capability needs the five-joint leg";
  }
  HttpResponse r = reply(200, data);
  std::lock_guard<std::mutex> lock(mutex_);
  analysis_cache_[key] = r.body;
  return r;
}

void Service::bind(httplib::Server& server) {
  auto handler = [this](const httplib::Request& req, httplib::Response& res) {
    HttpRequest r;
    r.method = req.method;
    r.path = req.path;
    for (const auto& [k, v] : req.params) r.query[k] = v;
    for (const auto& [k, v] : req.headers) {
      std::string name = k;
      std::transform(name.begin(), name.end(), name.begin(), [](unsigned char ch) { return std::tolower(ch); });
      r.headers[name] = v;
    }
    r.body = req.body;
    HttpResponse out = handle(r);
    res.status = out.status;
    std::string type = "application/json";
    for (const auto& [k, v] : out.headers) {
      if (k == "Content-Type") {
        type = v;
      } else {
        res.set_header(k, v);
      }
    }
    if (out.status != 304) res.set_content(out.body, type);
  };
  server.Get(R"(/api/.*)", handler);
  server.Put(R"(/api/.*)", handler);
  server.Post(R"(/api/.*)", handler);
}

int serve(const ServiceOptions& options, int port, const std::string& host) {
  if (port == 0) {
    const char* p = std::getenv("ACTUFORGE_PORT");
    port = p && *p ? std::atoi(p) : 8080;
  }
  if (port <= 0 || port > 65535) throw ValidationError("port", "port in 1..65535");
  Service service(options);
  httplib::Server server;
  service.bind(server);
  if (!server.listen(host, port)) return 1;
  return 0;
}

}  // namespace actuforge
