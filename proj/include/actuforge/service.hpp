#pragma once

#include <condition_variable>
#include <cstddef>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "actuforge/study.hpp"

namespace httplib {
class Server;
}

namespace actuforge {

inline constexpr int kApiSchemaVersion = 1;

/// Task references in a request body: a file path (relative paths resolve
/// against `base_dir`), {"name", "csv"} or a full trajectory object.
TaskTrajectory tasks_from_request(const nlohmann::json& tasks, const std::filesystem::path& base_dir,
                                  const std::string& path = "tasks");

/// Body of a solve request: {library?, tasks, coupling, budget_kg?, margin?, rules?}.
/// `fallback` is used when no inline library is given.
DesignProblem problem_from_request(const nlohmann::json& body, const Library* fallback,
                                   const std::filesystem::path& base_dir);

/// Body of a study request: {library?, tasks, rules?, margin?, budgets, couplings,
/// kinematics?}. budgets is "min:step:max", {min, step, max} or a list; couplings is
/// "all", a comma list or an array.
StudyGrid grid_from_request(const nlohmann::json& body, const Library* fallback,
                            const std::filesystem::path& base_dir);

struct HttpRequest {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::map<std::string, std::string> headers;  // lower-case names
  std::string body;
};

struct HttpResponse {
  int status = 200;
  std::string body;
  std::map<std::string, std::string> headers;
};

enum class JobState { queued, running, complete, failed };
std::string to_string(JobState state);

struct JobStatus {
  std::string id;
  JobState state = JobState::queued;
  std::size_t cells_done = 0;
  std::size_t cells_total = 0;
  std::string reason;
};

struct ServiceOptions {
  std::filesystem::path data_dir = "actuforge-data";
  int cell_parallelism = 1;       // workers per study
  int concurrent_studies = 1;     // studies executing at once
  std::size_t queue_capacity = 16;
};

/// ACTUFORGE_DATA_DIR and ACTUFORGE_JOBS over the defaults.
ServiceOptions service_options_from_environment();

/// In-process API. Studies run on background workers; everything else is
/// answered synchronously by handle().
class Service {
 public:
  explicit Service(ServiceOptions options);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  HttpResponse handle(const HttpRequest& request);
  /// Routes every /api request of `server` to handle().
  void bind(httplib::Server& server);

  std::optional<JobStatus> status(const std::string& id) const;
  /// Blocks until no study is queued or running.
  void wait_idle();

 private:
  struct Job {
    JobStatus status;
    StudyGrid grid;
    bool uses_stored_library = false;
  };
  struct StoredSolution {
    DesignProblem problem;
    DesignSolution solution;
  };

  HttpResponse get_library();
  HttpResponse put_library(const HttpRequest& request);
  HttpResponse post_solve(const HttpRequest& request);
  HttpResponse post_study(const HttpRequest& request);
  HttpResponse get_study(const std::string& id);
  HttpResponse get_summary(const std::string& id, const HttpRequest& request);
  HttpResponse get_analysis(const std::string& id, const HttpRequest& request);
  void worker_loop();
  void run_job(const std::string& id);
  std::filesystem::path study_dir(const std::string& id) const;
  std::optional<StoredSolution> find_solution(const std::string& id);

  ServiceOptions options_;
  mutable std::mutex mutex_;
  std::condition_variable wake_;
  std::condition_variable idle_;
  std::optional<Library> library_;
  std::map<std::string, Job> jobs_;
  std::deque<std::string> queue_;
  std::size_t active_ = 0;
  std::size_t next_job_ = 1;
  std::map<std::string, StoredSolution> solutions_;
  std::map<std::string, std::string> analysis_cache_;
  std::map<std::string, StudyResult> loaded_studies_;
  bool stopping_ = false;
  std::vector<std::thread> workers_;
};

/// Blocking HTTP server on `port` (ACTUFORGE_PORT when 0).
int serve(const ServiceOptions& options, int port, const std::string& host = "127.0.0.1");

}  // namespace actuforge
