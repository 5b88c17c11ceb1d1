#include "stagelens/service.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <httplib.h>

#include "stagelens/schema.hpp"

namespace stagelens {

namespace fs = std::filesystem;

std::string_view to_string(RunStatus s) {
  switch (s) {
    case RunStatus::Queued: return "Queued";
    case RunStatus::Running: return "Running";
    case RunStatus::Ready: return "Ready";
    case RunStatus::Failed: return "Failed";
  }
  return "?";
}

RunStatus parse_run_status(std::string_view s) {
  if (s == "Queued") return RunStatus::Queued;
  if (s == "Running") return RunStatus::Running;
  if (s == "Ready") return RunStatus::Ready;
  if (s == "Failed") return RunStatus::Failed;
  throw std::invalid_argument("unknown run status '" + std::string(s) + "'");
}

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_atomic(const fs::path& p, const std::string& text) {
  const fs::path tmp = p.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << text;
    if (!out.flush()) throw std::runtime_error("cannot write " + tmp.string());
  }
  fs::rename(tmp, p);
}

std::string numbered(char prefix, int n, int width) {
  std::string digits = std::to_string(n);
  if (static_cast<int>(digits.size()) < width) digits.insert(0, static_cast<std::size_t>(width) - digits.size(), '0');
  return std::string(1, prefix) + digits;
}

int parse_number(const std::string& id) {
  if (id.size() < 2) return 0;
  try {
    return std::stoi(id.substr(1));
  } catch (const std::exception&) {
    return 0;
  }
}

bool safe_id(const std::string& id) {
  return !id.empty() && std::all_of(id.begin(), id.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '-';
  });
}

}  // namespace

// ---------------------------------------------------------------------------

SessionStore::SessionStore(fs::path data_dir, int workers, std::optional<std::uint64_t> default_seed)
    : data_dir_(std::move(data_dir)), default_seed_(default_seed) {
  fs::create_directories(data_dir_ / "sessions");
  load();
  for (int i = 0; i < workers; ++i) workers_.emplace_back([this] { worker(); });
}

SessionStore::~SessionStore() {
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
  }
  work_cv_.notify_all();
  for (auto& t : workers_) t.join();
}

fs::path SessionStore::session_dir(const std::string& id) const { return data_dir_ / "sessions" / id; }

void SessionStore::load() {
  std::vector<fs::path> dirs;
  for (const auto& e : fs::directory_iterator(data_dir_ / "sessions"))
    if (e.is_directory() && fs::exists(e.path() / "session.json")) dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());
  for (const auto& d : dirs) {
    Session s;
    s.manifest = Json::parse(read_file(d / "session.json"));
    s.id = s.manifest.at("session_id").get<std::string>();
    next_session_ = std::max(next_session_, parse_number(s.id) + 1);
    std::vector<fs::path> runs;
    if (fs::exists(d / "runs"))
      for (const auto& e : fs::directory_iterator(d / "runs"))
        if (fs::exists(e.path() / "run.json")) runs.push_back(e.path());
    std::sort(runs.begin(), runs.end());
    for (const auto& rd : runs) {
      const Json j = Json::parse(read_file(rd / "run.json"));
      Run r;
      r.id = j.at("run_id").get<std::string>();
      r.revision = j.at("revision").get<int>();
      r.params = params_from_json(j.at("params"));
      r.status = parse_run_status(j.at("status").get<std::string>());
      r.reason = j.value("reason", "");
      // A previous process died mid-run; the run did not finish.
      if (r.status == RunStatus::Queued || r.status == RunStatus::Running) {
        r.status = RunStatus::Failed;
        r.reason = "interrupted before completion";
      }
      s.runs.push_back(std::move(r));
    }
    std::sort(s.runs.begin(), s.runs.end(), [](const Run& a, const Run& b) { return a.revision < b.revision; });
    for (std::size_t i = 0; i < s.runs.size(); ++i)
      if (s.runs[i].status == RunStatus::Ready) s.latest_ready = i;
    sessions_.emplace(s.id, std::move(s));
  }
}

SessionStore::Session& SessionStore::find(const std::string& id) {
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw ServiceError(404, "unknown session '" + id + "'");
  return it->second;
}

const SessionStore::Session& SessionStore::find(const std::string& id) const {
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) throw ServiceError(404, "unknown session '" + id + "'");
  return it->second;
}

Json SessionStore::run_json(const Session& s, const Run& r) const {
  Json j = {{"run_id", r.id},
            {"session_id", s.id},
            {"revision", r.revision},
            {"status", to_string(r.status)},
            {"params", to_json(r.params)}};
  if (!r.reason.empty()) j["reason"] = r.reason;
  return j;
}

void SessionStore::write_run(const Session& s, const Run& r) const {
  const fs::path dir = session_dir(s.id) / "runs" / r.id;
  fs::create_directories(dir);
  write_atomic(dir / "run.json", run_json(s, r).dump(1) + "\n");
}

Json SessionStore::session_json(const Session& s) const {
  Json j = s.manifest;
  j["status"] = s.runs.empty() ? std::string("Ingested") : std::string(to_string(s.runs.back().status));
  j["latest_ready"] = s.latest_ready ? Json(s.runs[*s.latest_ready].id) : Json(nullptr);
  Json runs = Json::array();
  for (const auto& r : s.runs) runs.push_back(run_json(s, r));
  j["runs"] = std::move(runs);
  return j;
}

Json SessionStore::create_session(const Json& body) {
  if (!body.is_object()) throw ServiceError(400, "body must be an object");
  for (const char* key : {"posts_file", "responses_file"})
    if (!body.contains(key) || !body.at(key).is_string()) throw ServiceError(400, std::string(key) + " must be a string");
  if (!body.contains("split_time") || !body.at("split_time").is_number_integer())
    throw ServiceError(400, "split_time must be an integer (seconds)");
  const fs::path posts = body.at("posts_file").get<std::string>();
  const fs::path responses = body.at("responses_file").get<std::string>();
  const auto split = body.at("split_time").get<std::int64_t>();

  IngestResult in;
  try {
    in = ingest(posts, responses);
  } catch (const IngestError& e) {
    throw ServiceError(400, e.what());
  }
  const GroupAssignment groups = assign_groups(in.posts, split);

  std::unique_lock lock(mu_);
  const std::string id = numbered('s', next_session_++, 6);
  lock.unlock();

  const fs::path dir = session_dir(id);
  fs::create_directories(dir / "runs");
  fs::copy_file(posts, dir / "posts.jsonl", fs::copy_options::overwrite_existing);
  fs::copy_file(responses, dir / "responses.jsonl", fs::copy_options::overwrite_existing);

  Json m;
  m["session_id"] = id;
  m["split_time"] = split;
  m["posts_digest"] = in.posts_digest;
  m["responses_digest"] = in.responses_digest;
  std::map<std::string, std::size_t> counts{{"recovery", 0}, {"middle", 0}, {"deterioration", 0}};
  for (const auto& [u, g] : groups.groups) ++counts[std::string(to_string(g))];
  m["users"] = counts;
  m["dropped"] = groups.dropped;
  m["malformed"] = {{"posts", in.posts_report.malformed}, {"responses", in.responses_report.malformed}};
  write_atomic(dir / "session.json", m.dump(1) + "\n");

  Session s;
  s.id = id;
  s.manifest = std::move(m);
  auto input = std::make_shared<PipelineInput>();
  input->posts = std::move(in.posts);
  input->responses = std::move(in.responses);
  input->split_time = split;
  input->posts_digest = in.posts_digest;
  input->responses_digest = in.responses_digest;
  s.input = std::move(input);

  lock.lock();
  auto& stored = sessions_.emplace(id, std::move(s)).first->second;
  return session_json(stored);
}

Json SessionStore::list_sessions() const {
  std::lock_guard lock(mu_);
  Json out = Json::array();
  for (const auto& [id, s] : sessions_) out.push_back(session_json(s));
  return out;
}

Json SessionStore::session_info(const std::string& id) const {
  std::lock_guard lock(mu_);
  return session_json(find(id));
}

Json SessionStore::submit_run(const std::string& id, const Json& overrides) {
  std::lock_guard lock(mu_);
  Session& s = find(id);
  PipelineParams base;
  if (default_seed_) base.seed = *default_seed_;
  Run r;
  try {
    r.params = params_from_json(overrides.is_null() ? Json::object() : overrides, base);
  } catch (const std::exception& e) {
    throw ServiceError(400, e.what());
  }
  if (s.queue.size() >= kRunQueueDepth) throw ServiceError(429, "run queue full for session '" + id + "'");
  r.revision = s.runs.empty() ? 1 : s.runs.back().revision + 1;
  r.id = numbered('r', r.revision, 4);
  write_run(s, r);
  s.runs.push_back(r);
  s.queue.push_back(s.runs.size() - 1);
  if (!s.running && std::find(ready_sessions_.begin(), ready_sessions_.end(), id) == ready_sessions_.end())
    ready_sessions_.push_back(id);
  work_cv_.notify_one();
  return run_json(s, s.runs.back());
}

Json SessionStore::list_runs(const std::string& id) const {
  std::lock_guard lock(mu_);
  const Session& s = find(id);
  Json out = Json::array();
  for (const auto& r : s.runs) out.push_back(run_json(s, r));
  return out;
}

Json SessionStore::run_info(const std::string& id, const std::string& run_id) const {
  std::lock_guard lock(mu_);
  const Session& s = find(id);
  for (const auto& r : s.runs)
    if (r.id == run_id) return run_json(s, r);
  throw ServiceError(404, "unknown run '" + run_id + "'");
}

std::shared_ptr<const ReadyRun> SessionStore::ready_run(const std::string& id,
                                                        const std::optional<std::string>& run_id) const {
  std::lock_guard lock(mu_);
  const Session& s = find(id);
  const Run* run = nullptr;
  if (run_id) {
    for (const auto& r : s.runs)
      if (r.id == *run_id) run = &r;
    if (!run) throw ServiceError(404, "unknown run '" + *run_id + "'");
  } else {
    if (!s.latest_ready) {
      const std::string st = s.runs.empty() ? "Ingested" : std::string(to_string(s.runs.back().status));
      throw ServiceError(409, "session '" + id + "' has no Ready run", st);
    }
    run = &s.runs[*s.latest_ready];
  }
  if (run->status != RunStatus::Ready)
    throw ServiceError(409, "run '" + run->id + "' is not ready", std::string(to_string(run->status)));
  if (auto it = s.cache.find(run->id); it != s.cache.end()) return it->second;
  auto ready = std::make_shared<ReadyRun>();
  ready->run_id = run->id;
  ready->text = read_file(session_dir(id) / "runs" / run->id / "bundle.json");
  ready->bundle = Json::parse(ready->text);
  s.cache.emplace(run->id, ready);
  return ready;
}

void SessionStore::wait_idle() {
  std::unique_lock lock(mu_);
  idle_cv_.wait(lock, [this] {
    if (active_ > 0 || !ready_sessions_.empty()) return false;
    return std::all_of(sessions_.begin(), sessions_.end(),
                       [](const auto& kv) { return kv.second.queue.empty() && !kv.second.running; });
  });
}

void SessionStore::worker() {
  std::unique_lock lock(mu_);
  for (;;) {
    work_cv_.wait(lock, [this] { return stopping_ || !ready_sessions_.empty(); });
    if (stopping_) return;
    const std::string id = ready_sessions_.front();
    ready_sessions_.pop_front();
    Session& s = sessions_.at(id);
    if (s.running || s.queue.empty()) continue;
    const std::size_t run_index = s.queue.front();
    s.queue.pop_front();
    s.running = true;
    ++active_;
    lock.unlock();
    execute(id, run_index);
    lock.lock();
    --active_;
    s.running = false;
    if (!s.queue.empty()) {
      ready_sessions_.push_back(id);
      work_cv_.notify_one();
    }
    idle_cv_.notify_all();
  }
}

void SessionStore::execute(const std::string& id, std::size_t run_index) {
  std::shared_ptr<const PipelineInput> input;
  PipelineParams params;
  const fs::path dir = session_dir(id);
  {
    std::lock_guard lock(mu_);
    Session& s = sessions_.at(id);
    s.runs[run_index].status = RunStatus::Running;
    write_run(s, s.runs[run_index]);
    params = s.runs[run_index].params;
    input = s.input;
  }
  std::string error;
  std::string text;
  try {
    if (!input) {
      IngestResult in = ingest(dir / "posts.jsonl", dir / "responses.jsonl");
      auto loaded = std::make_shared<PipelineInput>();
      loaded->posts = std::move(in.posts);
      loaded->responses = std::move(in.responses);
      {
        std::lock_guard lock(mu_);
        const Json& m = sessions_.at(id).manifest;
        loaded->split_time = m.at("split_time").get<std::int64_t>();
        loaded->posts_digest = m.at("posts_digest").get<std::string>();
        loaded->responses_digest = m.at("responses_digest").get<std::string>();
        sessions_.at(id).input = loaded;
      }
      input = loaded;
    }
    text = dump_bundle(bundle_json(run_pipeline(*input, params)));
  } catch (const std::exception& e) {
    error = e.what();
  }

  std::lock_guard lock(mu_);
  Session& s = sessions_.at(id);
  Run& r = s.runs[run_index];
  if (error.empty()) {
    try {
      write_atomic(dir / "runs" / r.id / "bundle.json", text);
    } catch (const std::exception& e) {
      error = e.what();
    }
  }
  if (error.empty()) {
    auto ready = std::make_shared<ReadyRun>();
    ready->run_id = r.id;
    ready->text = std::move(text);
    ready->bundle = Json::parse(ready->text);
    s.cache[r.id] = std::move(ready);
    r.status = RunStatus::Ready;
    if (!s.latest_ready || s.runs[*s.latest_ready].revision < r.revision) s.latest_ready = run_index;
  } else {
    r.status = RunStatus::Failed;
    r.reason = error;
  }
  write_run(s, r);
}

// ---------------------------------------------------------------------------

std::string read_ready_bundle(const fs::path& data_dir, const std::string& session_id,
                              const std::optional<std::string>& run_id) {
  if (!safe_id(session_id)) throw ServiceError(404, "unknown session '" + session_id + "'");
  const fs::path dir = data_dir / "sessions" / session_id;
  if (!fs::exists(dir / "session.json")) throw ServiceError(404, "unknown session '" + session_id + "'");
  std::vector<Json> runs;
  if (fs::exists(dir / "runs"))
    for (const auto& e : fs::directory_iterator(dir / "runs"))
      if (fs::exists(e.path() / "run.json")) runs.push_back(Json::parse(read_file(e.path() / "run.json")));
  std::sort(runs.begin(), runs.end(),
            [](const Json& a, const Json& b) { return a.at("revision").get<int>() < b.at("revision").get<int>(); });
  const Json* chosen = nullptr;
  if (run_id) {
    for (const auto& r : runs)
      if (r.at("run_id") == *run_id) chosen = &r;
    if (!chosen) throw ServiceError(404, "unknown run '" + *run_id + "'");
  } else {
    for (const auto& r : runs)
      if (r.at("status") == "Ready") chosen = &r;
    if (!chosen) {
      const std::string st = runs.empty() ? "Ingested" : runs.back().at("status").get<std::string>();
      throw ServiceError(409, "not ready: session '" + session_id + "' has no Ready run (status " + st + ")", st);
    }
  }
  const std::string st = chosen->at("status").get<std::string>();
  if (st != "Ready")
    throw ServiceError(409, "not ready: run '" + chosen->at("run_id").get<std::string>() + "' is " + st, st);
  return read_file(dir / "runs" / chosen->at("run_id").get<std::string>() / "bundle.json");
}

// ---------------------------------------------------------------------------
// HTTP

namespace {

void send_json(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump() + "\n", "application/json");
}

void send_error(httplib::Response& res, const ServiceError& e) {
  Json body = {{"error", e.what()}};
  if (!e.status.empty()) body["status"] = e.status;
  send_json(res, e.http_status, body);
}

template <typename F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const ServiceError& e) {
      send_error(res, e);
    } catch (const PatternAbsent& e) {
      send_error(res, ServiceError(404, e.what()));
    } catch (const Json::exception& e) {
      send_error(res, ServiceError(400, std::string("bad request: ") + e.what()));
    } catch (const std::invalid_argument& e) {
      send_error(res, ServiceError(400, e.what()));
    } catch (const std::exception& e) {
      send_error(res, ServiceError(500, e.what()));
    }
  };
}

Json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return Json::object();
  try {
    return Json::parse(req.body);
  } catch (const Json::exception&) {
    throw ServiceError(400, "body is not valid JSON");
  }
}

std::set<int> parse_contains(const std::string& s) {
  std::set<int> out;
  if (s.empty()) return out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(item, &used);
      if (used != item.size() || v < 1) throw std::invalid_argument(item);
      out.insert(v);
    } catch (const std::exception&) {
      throw ServiceError(400, "contains must be comma-separated stage ids, got '" + s + "'");
    }
  }
  return out;
}

std::optional<Group> parse_group_param(const httplib::Request& req) {
  if (!req.has_param("group")) return std::nullopt;
  const std::string g = req.get_param_value("group");
  if (g == "all") return std::nullopt;
  try {
    return parse_group(g);
  } catch (const std::exception&) {
    throw ServiceError(400, "group must be recovery, middle, deterioration or all");
  }
}

}  // namespace

void mount_routes(httplib::Server& svr, SessionStore& store) {
  svr.Get("/health", [](const httplib::Request&, httplib::Response& res) { send_json(res, 200, {{"status", "ok"}}); });
  svr.Get("/schemas", [](const httplib::Request&, httplib::Response& res) { send_json(res, 200, schema_names()); });
  svr.Get(R"(/schemas/([a-z_]+))", guarded([](const httplib::Request& req, httplib::Response& res) {
            try {
              send_json(res, 200, route_schema(req.matches[1].str()));
            } catch (const std::out_of_range&) {
              throw ServiceError(404, "unknown schema");
            }
          }));

  svr.Post("/sessions", guarded([&store](const httplib::Request& req, httplib::Response& res) {
             send_json(res, 201, store.create_session(parse_body(req)));
           }));
  svr.Get("/sessions", guarded([&store](const httplib::Request&, httplib::Response& res) {
            send_json(res, 200, store.list_sessions());
          }));
  svr.Get(R"(/sessions/([^/]+))", guarded([&store](const httplib::Request& req, httplib::Response& res) {
            send_json(res, 200, store.session_info(req.matches[1].str()));
          }));
  svr.Post(R"(/sessions/([^/]+)/runs)", guarded([&store](const httplib::Request& req, httplib::Response& res) {
             Json body = parse_body(req);
             if (body.is_object() && body.contains("params")) body = body.at("params");
             res.set_header("Location", "/sessions/" + req.matches[1].str() + "/runs");
             send_json(res, 202, store.submit_run(req.matches[1].str(), body));
           }));
  svr.Get(R"(/sessions/([^/]+)/runs)", guarded([&store](const httplib::Request& req, httplib::Response& res) {
            send_json(res, 200, store.list_runs(req.matches[1].str()));
          }));
  svr.Get(R"(/sessions/([^/]+)/runs/([^/]+))", guarded([&store](const httplib::Request& req, httplib::Response& res) {
            send_json(res, 200, store.run_info(req.matches[1].str(), req.matches[2].str()));
          }));

  // Artifact routes exist per run and for the session's latest Ready run.
  using Artifact = std::function<void(const ReadyRun&, const httplib::Request&, httplib::Response&, const std::string&)>;
  auto artifact = [&svr, &store](const std::string& suffix, Artifact f) {
    svr.Get("/sessions/([^/]+)/runs/([^/]+)" + suffix,
            guarded([&store, f](const httplib::Request& req, httplib::Response& res) {
              const auto run = store.ready_run(req.matches[1].str(), req.matches[2].str());
              f(*run, req, res, req.matches.size() > 3 ? req.matches[3].str() : std::string());
            }));
    svr.Get("/sessions/([^/]+)" + suffix, guarded([&store, f](const httplib::Request& req, httplib::Response& res) {
              const auto run = store.ready_run(req.matches[1].str(), std::nullopt);
              f(*run, req, res, req.matches.size() > 2 ? req.matches[2].str() : std::string());
            }));
  };

  artifact("/clusters", [](const ReadyRun& run, const httplib::Request& req, httplib::Response& res, const std::string&) {
    BehaviorKind kind = BehaviorKind::Proactive;
    if (req.has_param("kind")) {
      try {
        kind = parse_kind(req.get_param_value("kind"));
      } catch (const std::exception&) {
        throw ServiceError(400, "kind must be proactive or reactive");
      }
    }
    send_json(res, 200, clusters_payload(run.bundle, kind));
  });
  artifact("/stages", [](const ReadyRun& run, const httplib::Request&, httplib::Response& res, const std::string&) {
    send_json(res, 200, stages_payload(run.bundle));
  });
  artifact("/progression", [](const ReadyRun& run, const httplib::Request& req, httplib::Response& res,
                              const std::string&) {
    send_json(res, 200, progression_payload(run.bundle, parse_group_param(req)));
  });
  artifact("/patterns", [](const ReadyRun& run, const httplib::Request& req, httplib::Response& res,
                           const std::string&) {
    PatternSortKey key = PatternSortKey::Positivity;
    if (req.has_param("sort")) {
      try {
        key = parse_sort_key(req.get_param_value("sort"));
      } catch (const std::exception&) {
        throw ServiceError(400, "sort must be w, impact or support");
      }
    }
    const auto contains = parse_contains(req.has_param("contains") ? req.get_param_value("contains") : "");
    send_json(res, 200, patterns_payload(run.bundle, key, contains));
  });
  artifact("/patterns/([^/]+)/context", [](const ReadyRun& run, const httplib::Request& req, httplib::Response& res,
                                           const std::string& key) {
    try {
      parse_pattern_key(key);
    } catch (const std::invalid_argument&) {
      throw ServiceError(404, "no pattern '" + key + "'");
    }
    send_json(res, 200, context_payload(run.bundle, key, parse_group_param(req)));
  });
  artifact("/export", [](const ReadyRun& run, const httplib::Request&, httplib::Response& res, const std::string&) {
    res.status = 200;
    res.set_content(run.text, "application/json");
  });
}

}  // namespace stagelens
