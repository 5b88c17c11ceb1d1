#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "stagelens/bundle.hpp"

namespace httplib {
class Server;
}

namespace stagelens {

enum class RunStatus { Queued, Running, Ready, Failed };
std::string_view to_string(RunStatus s);
RunStatus parse_run_status(std::string_view s);

inline constexpr std::size_t kRunQueueDepth = 4;

// Carries the HTTP status the failure maps to.
class ServiceError : public std::runtime_error {
 public:
  ServiceError(int http_status, const std::string& what, std::string status = {})
      : std::runtime_error(what), http_status(http_status), status(std::move(status)) {}
  int http_status;
  std::string status;  // lifecycle status, for 409
};

struct ReadyRun {
  std::string run_id;
  std::string text;  // the bundle file, byte for byte
  Json bundle;
};

// Sessions live under <data_dir>/sessions/<id>/: the copied inputs,
// session.json, and runs/<run id>/{run.json,bundle.json}. Bundles are renamed
// into place before their run is marked Ready.
class SessionStore {
 public:
  SessionStore(std::filesystem::path data_dir, int workers, std::optional<std::uint64_t> default_seed = {});
  ~SessionStore();
  SessionStore(const SessionStore&) = delete;
  SessionStore& operator=(const SessionStore&) = delete;

  Json create_session(const Json& body);
  Json list_sessions() const;
  Json session_info(const std::string& session_id) const;
  Json submit_run(const std::string& session_id, const Json& overrides);
  Json list_runs(const std::string& session_id) const;
  Json run_info(const std::string& session_id, const std::string& run_id) const;

  // The named run, or the latest Ready revision. 404 / 409 as ServiceError.
  std::shared_ptr<const ReadyRun> ready_run(const std::string& session_id,
                                            const std::optional<std::string>& run_id) const;

  // Blocks until no run is queued or running.
  void wait_idle();

 private:
  struct Run {
    std::string id;
    int revision = 0;
    PipelineParams params;
    RunStatus status = RunStatus::Queued;
    std::string reason;
  };
  struct Session {
    std::string id;
    Json manifest;  // session.json contents
    std::vector<Run> runs;
    std::deque<std::size_t> queue;  // indices into runs
    bool running = false;
    std::optional<std::size_t> latest_ready;
    mutable std::map<std::string, std::shared_ptr<const ReadyRun>> cache;
    std::shared_ptr<const PipelineInput> input;
  };

  void load();
  void worker();
  void execute(const std::string& session_id, std::size_t run_index);
  void write_run(const Session& s, const Run& r) const;
  Json run_json(const Session& s, const Run& r) const;
  Json session_json(const Session& s) const;
  Session& find(const std::string& id);
  const Session& find(const std::string& id) const;
  std::filesystem::path session_dir(const std::string& id) const;

  std::filesystem::path data_dir_;
  std::optional<std::uint64_t> default_seed_;
  mutable std::mutex mu_;
  std::condition_variable work_cv_, idle_cv_;
  std::map<std::string, Session> sessions_;
  std::deque<std::string> ready_sessions_;  // sessions with queued work, not running
  int next_session_ = 1;
  std::size_t active_ = 0;
  bool stopping_ = false;
  std::vector<std::thread> workers_;
};

void mount_routes(httplib::Server& server, SessionStore& store);

struct ServiceConfig {
  std::filesystem::path data_dir = "data";
  std::string host = "127.0.0.1";
  int port = 8080;
  int workers = 2;
  std::optional<std::uint64_t> default_seed;
};

// Reads the bundle straight from disk, without a running service. Throws
// ServiceError: 404 for unknown ids, 409 when nothing Ready exists.
std::string read_ready_bundle(const std::filesystem::path& data_dir, const std::string& session_id,
                              const std::optional<std::string>& run_id);

}  // namespace stagelens
