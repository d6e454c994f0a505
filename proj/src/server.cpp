#include "spikelab/server.hpp"

#include <httplib.h>

#include <cstdio>
#include <regex>

#include "spikelab/error.hpp"
#include "spikelab/serialization.hpp"

namespace spikelab {
namespace {

constexpr std::size_t kMaxLogEvents = 200000;

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::not_found: return 404;
    case ErrorCode::precondition_failed: return 412;
    case ErrorCode::conflict: return 409;
    case ErrorCode::file_too_large: return 413;
    case ErrorCode::numerical_divergence: return 422;
    case ErrorCode::cancelled: return 409;
    default: return 400;
  }
}

nlohmann::json error_json(const Error& e) {
  return {{"error", {{"code", to_string(e.code())}, {"message", e.what()}, {"field", e.field()}}}};
}

void check_session_id(const std::string& id) {
  static const std::regex pattern("[A-Za-z0-9_-]{1,64}");
  if (!std::regex_match(id, pattern))
    throw Error(ErrorCode::invalid_input, "invalid session id '" + id + "'", "session_id");
}

}  // namespace

std::string_view to_string(RunStatus s) {
  switch (s) {
    case RunStatus::queued: return "queued";
    case RunStatus::running: return "running";
    case RunStatus::done: return "done";
    case RunStatus::cancelled: return "cancelled";
    case RunStatus::failed: return "failed";
  }
  return "unknown";
}

bool is_terminal(RunStatus s) {
  return s == RunStatus::done || s == RunStatus::cancelled || s == RunStatus::failed;
}

bool transition_allowed(RunStatus from, RunStatus to) {
  if (from == RunStatus::queued) return to == RunStatus::running;
  if (from == RunStatus::running) return is_terminal(to);
  return false;
}

// ---------------------------------------------------------------------------

struct Service::Run {
  std::string id;
  std::string session_id;
  RunConfig config;
  std::shared_ptr<const TrialDataset> dataset;
  std::atomic<bool> cancel{false};

  mutable std::mutex m;
  RunStatus status = RunStatus::queued;
  std::optional<SimulationResult> result;
  nlohmann::json errors = nlohmann::json::array();
  std::string digest;

  RunStatus current_status() const {
    std::lock_guard lk(m);
    return status;
  }
};

struct Service::Session {
  std::string id;
  std::mutex m;
  std::condition_variable cv;
  std::deque<StreamEvent> log;
  std::uint64_t next_seq = 0;
  std::shared_ptr<Run> current;
  std::shared_ptr<Run> pending;
  bool expired = false;
  bool stopping = false;
  std::chrono::steady_clock::time_point last_activity = std::chrono::steady_clock::now();
  std::jthread worker;  // declared last: joined before the rest is destroyed

  ~Session() {
    {
      std::lock_guard lk(m);
      stopping = true;
      if (current) current->cancel = true;
    }
    cv.notify_all();
  }

  // Caller holds m.
  void publish(const std::string& run_id, nlohmann::json body) {
    StreamEvent ev;
    ev.seq = next_seq++;
    ev.run_id = run_id;
    body["seq"] = ev.seq;
    body["run_id"] = run_id;
    ev.body = std::move(body);
    log.push_back(std::move(ev));
    if (log.size() > kMaxLogEvents)
      while (log.size() > kMaxLogEvents / 2) log.pop_front();
    cv.notify_all();
  }

  // Caller holds m.
  void set_status(Run& run, RunStatus to, nlohmann::json extra = nlohmann::json::object()) {
    {
      std::lock_guard lk(run.m);
      if (!transition_allowed(run.status, to))
        throw std::logic_error("illegal run transition " + std::string(to_string(run.status)) +
                               " -> " + std::string(to_string(to)));
      run.status = to;
    }
    extra["type"] = "status";
    extra["status"] = to_string(to);
    publish(run.id, std::move(extra));
  }
};

Service::Service(ModelRegistry registry, ServiceOptions options)
    : registry_(std::move(registry)), options_(options) {
  nlohmann::json models = nlohmann::json::array();
  for (const auto& d : registry_.descriptors()) {
    check_descriptor(d);
    models.push_back(to_json(d));
  }
  nlohmann::json controls = nlohmann::json::array();
  for (const auto& c : preprocess_controls()) controls.push_back(to_json(c));
  models_json_ = nlohmann::json{{"models", std::move(models)}, {"preprocess_controls", std::move(controls)}}.dump();
}

Service::~Service() { stop(); }

void Service::stop() {
  std::map<std::string, std::shared_ptr<Session>> doomed;
  {
    std::lock_guard lk(mutex_);
    stopping_ = true;
    doomed.swap(sessions_);
  }
  for (auto& [_, s] : doomed) {
    std::lock_guard lk(s->m);
    s->stopping = true;
    if (s->current) s->current->cancel = true;
    s->cv.notify_all();
  }
  doomed.clear();
}

nlohmann::json Service::load_dataset(const std::filesystem::path& path) {
  LoadOptions opts;
  opts.max_bytes = options_.max_upload_bytes;
  return upload_dataset(load(path, opts));
}

nlohmann::json Service::upload_dataset(TrialDataset dataset) {
  dataset.validate();
  auto ds = std::make_shared<const TrialDataset>(std::move(dataset));
  std::lock_guard lk(mutex_);
  dataset_ = ds;
  return metadata_json(*ds);
}

nlohmann::json Service::dataset_metadata() const {
  std::lock_guard lk(mutex_);
  if (!dataset_) throw Error(ErrorCode::precondition_failed, "no dataset loaded");
  return metadata_json(*dataset_);
}

std::shared_ptr<Service::Session> Service::session(const std::string& id, bool create) {
  std::lock_guard lk(mutex_);
  if (stopping_) throw Error(ErrorCode::precondition_failed, "service is stopping");
  auto it = sessions_.find(id);
  if (it != sessions_.end()) {
    std::lock_guard slk(it->second->m);
    it->second->last_activity = std::chrono::steady_clock::now();
    return it->second;
  }
  if (!create) throw Error(ErrorCode::not_found, "unknown session '" + id + "'", id);
  check_session_id(id);
  auto s = std::make_shared<Session>();
  s->id = id;
  Session* raw = s.get();
  s->worker = std::jthread([this, raw] { worker_loop_raw(*raw); });
  sessions_.emplace(id, s);
  return s;
}

std::string Service::create_session() {
  std::string id;
  {
    std::lock_guard lk(mutex_);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "s%06llu", static_cast<unsigned long long>(next_session_++));
    id = buf;
  }
  session(id, true);
  return id;
}

void Service::touch(const std::string& session_id) { session(session_id, false); }

void Service::open_session(const std::string& session_id) { session(session_id, true); }

std::string Service::submit_run(const std::string& session_id, const RunConfig& config) {
  std::shared_ptr<const TrialDataset> ds;
  {
    std::lock_guard lk(mutex_);
    ds = dataset_;
  }
  if (!ds) throw Error(ErrorCode::precondition_failed, "load a dataset before submitting runs");
  validate_run_config(config, *ds, registry_);

  auto s = session(session_id, true);
  auto run = std::make_shared<Run>();
  run->session_id = session_id;
  run->config = config;
  run->dataset = ds;
  {
    std::lock_guard lk(mutex_);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "run-%06llu", static_cast<unsigned long long>(next_run_++));
    run->id = buf;
    runs_.emplace(run->id, run);
  }

  std::lock_guard lk(s->m);
  if (s->stopping) throw Error(ErrorCode::precondition_failed, "session is closed");
  if (auto prev = s->current; prev && !is_terminal(prev->current_status())) {
    prev->cancel = true;
    if (prev->current_status() == RunStatus::queued) s->set_status(*prev, RunStatus::running);
    s->set_status(*prev, RunStatus::cancelled, {{"superseded_by", run->id}});
  }
  s->current = run;
  s->pending = run;
  s->publish(run->id, {{"type", "status"}, {"status", "queued"}});
  return run->id;
}

void Service::worker_loop_raw(Session& s) {
  for (;;) {
    std::shared_ptr<Run> run;
    {
      std::unique_lock lk(s.m);
      s.cv.wait(lk, [&] { return s.pending || s.stopping; });
      if (s.stopping) return;
      run = std::exchange(s.pending, nullptr);
      if (run->current_status() != RunStatus::queued) continue;
      s.set_status(*run, RunStatus::running);
    }
    execute(s, run);
  }
}

void Service::execute(Session& s, const std::shared_ptr<Run>& run) {
  RunOptions opts;
  opts.cancel = &run->cancel;
  opts.batch_steps = options_.batch_steps;
  opts.threads = options_.sim_threads;
  opts.run_id = run->id;
  opts.registry = &registry_;

  std::optional<SimulationResult> result;
  nlohmann::json failure;
  try {
    result = spikelab::run(run->config, *run->dataset, opts);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::cancelled) failure = error_json(e)["error"];
  } catch (const std::exception& e) {
    failure = {{"code", "internal"}, {"message", e.what()}, {"field", ""}};
  }

  std::lock_guard lk(s.m);
  // Superseded runs were already reported as cancelled; publish nothing more.
  if (run->current_status() != RunStatus::running) return;
  if (!result) {
    if (failure.is_null()) {
      s.set_status(*run, RunStatus::cancelled);
      return;
    }
    {
      std::lock_guard rlk(run->m);
      run->errors.push_back(failure);
    }
    s.set_status(*run, RunStatus::failed, {{"errors", run->errors}});
    return;
  }

  const SimulationResult& r = *result;
  const std::size_t value_count = r.state_names.size() - 1;
  for (std::size_t c = 0; c < r.channels.size(); ++c) {
    if (r.state_traces.empty() || r.state_traces[0][c].empty()) continue;
    const std::size_t len = r.state_traces[0][c].size();
    for (std::size_t off = 0; off < len; off += options_.trace_chunk) {
      const std::size_t end = std::min(len, off + options_.trace_chunk);
      nlohmann::json states = nlohmann::json::object();
      for (std::size_t v = 0; v < value_count; ++v) {
        const auto& tr = r.state_traces[v][c];
        states[r.state_names[v]] = std::vector<double>(tr.begin() + off, tr.begin() + end);
      }
      const auto& in = r.input_traces[c];
      s.publish(run->id, {{"type", "trace_chunk"},
                          {"channel", c},
                          {"offset", off},
                          {"states", std::move(states)},
                          {"input", std::vector<double>(in.begin() + off, in.begin() + end)}});
    }
  }
  auto raster = to_json(r.spike_raster);
  raster["type"] = "raster";
  raster["dt_sim"] = r.dt_sim;
  s.publish(run->id, std::move(raster));
  auto stats = to_json(spike_statistics(r.spike_raster, r.dt_sim));
  stats["type"] = "statistics";
  s.publish(run->id, std::move(stats));

  const std::string digest = fnv1a_hex(to_json(r).dump());
  const bool failed = r.failed();
  {
    std::lock_guard rlk(run->m);
    run->digest = digest;
    for (const auto& e : r.channel_errors)
      run->errors.push_back({{"code", "numerical_divergence"}, {"message", e.message},
                             {"channel", e.channel}, {"step", e.step}, {"field", e.variable}});
    run->result = std::move(result);
  }
  nlohmann::json extra{{"digest", digest}};
  if (failed) extra["errors"] = run->errors;
  s.set_status(*run, failed ? RunStatus::failed : RunStatus::done, std::move(extra));
}

std::shared_ptr<Service::Run> Service::find_run(const std::string& id) const {
  std::lock_guard lk(mutex_);
  auto it = runs_.find(id);
  if (it == runs_.end()) throw Error(ErrorCode::not_found, "unknown run '" + id + "'", id);
  return it->second;
}

RunStatus Service::run_status(const std::string& run_id) const {
  return find_run(run_id)->current_status();
}

nlohmann::json Service::run_json(const std::string& run_id) const {
  auto run = find_run(run_id);
  std::lock_guard lk(run->m);
  nlohmann::json j{{"run_id", run->id},
                   {"session_id", run->session_id},
                   {"status", to_string(run->status)},
                   {"errors", run->errors},
                   {"request", to_json(run->config)},
                   {"result", nullptr}};
  if (run->result) {
    j["result"] = to_json(*run->result);
    j["digest"] = run->digest;
  }
  return j;
}

SimulationResult Service::run_result(const std::string& run_id) const {
  auto run = find_run(run_id);
  std::lock_guard lk(run->m);
  if (!run->result)
    throw Error(ErrorCode::conflict,
                "run '" + run_id + "' has no result (status " + std::string(to_string(run->status)) + ")",
                run_id);
  return *run->result;
}

std::vector<std::uint8_t> Service::run_audio(const std::string& run_id, const AudioConfig& audio) const {
  const SimulationResult r = run_result(run_id);
  return encode_wav(render(r.spike_raster, r.dt_sim, audio));
}

std::string Service::run_raster_csv(const std::string& run_id) const {
  const SimulationResult r = run_result(run_id);
  return raster_csv(r.spike_raster, r.dt_sim);
}

bool Service::wait_events(const std::string& session_id, std::uint64_t from,
                          std::chrono::milliseconds timeout, std::vector<StreamEvent>& out) {
  std::shared_ptr<Session> s;
  {
    std::lock_guard lk(mutex_);
    auto it = sessions_.find(session_id);
    if (it == sessions_.end() || stopping_) return false;
    s = it->second;
  }
  std::unique_lock lk(s->m);
  s->last_activity = std::chrono::steady_clock::now();  // an open stream keeps the session alive
  s->cv.wait_for(lk, timeout, [&] { return s->next_seq > from || s->expired || s->stopping; });
  for (const auto& ev : s->log)
    if (ev.seq >= from) out.push_back(ev);
  return !(s->expired || s->stopping);
}

std::size_t Service::expire_sessions(std::chrono::steady_clock::time_point now) {
  std::vector<std::shared_ptr<Session>> doomed;
  {
    std::lock_guard lk(mutex_);
    for (auto it = sessions_.begin(); it != sessions_.end();) {
      bool idle;
      {
        std::lock_guard slk(it->second->m);
        idle = now - it->second->last_activity > options_.session_ttl;
      }
      if (idle) {
        doomed.push_back(it->second);
        it = sessions_.erase(it);
      } else {
        ++it;
      }
    }
  }
  for (auto& s : doomed) {
    std::lock_guard lk(s->m);
    s->expired = true;
    s->stopping = true;
    if (s->current) s->current->cancel = true;
    s->cv.notify_all();
  }
  return doomed.size();
}

// ---------------------------------------------------------------------------

namespace {

template <typename Handler>
auto guarded(Handler handler) {
  return [handler](const httplib::Request& req, httplib::Response& res) {
    try {
      handler(req, res);
    } catch (const Error& e) {
      res.status = http_status(e.code());
      res.set_content(error_json(e).dump(), "application/json");
    } catch (const nlohmann::json::exception& e) {
      res.status = 400;
      res.set_content(error_json(Error(ErrorCode::malformed_file, e.what())).dump(), "application/json");
    } catch (const std::exception& e) {
      res.status = 500;
      res.set_content(nlohmann::json{{"error", {{"code", "internal"}, {"message", e.what()}}}}.dump(),
                      "application/json");
    }
  };
}

nlohmann::json parse_body(const httplib::Request& req) {
  try {
    return nlohmann::json::parse(req.body);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::malformed_file, std::string("request body: ") + e.what());
  }
}

double number_param(const httplib::Request& req, const char* key, double fallback) {
  if (!req.has_param(key)) return fallback;
  try {
    return std::stod(req.get_param_value(key));
  } catch (const std::exception&) {
    throw Error(ErrorCode::invalid_parameter, std::string("query parameter ") + key + " must be a number", key);
  }
}

AudioConfig audio_from_query(const httplib::Request& req) {
  AudioConfig a;
  a.sample_rate_hz = static_cast<std::uint32_t>(number_param(req, "rate", a.sample_rate_hz));
  a.tick_duration_ms = number_param(req, "tick_ms", a.tick_duration_ms);
  a.tick_frequency_hz = number_param(req, "tick_hz", a.tick_frequency_hz);
  a.playback_time_scale = number_param(req, "time_scale", a.playback_time_scale);
  a.master_gain = number_param(req, "gain", a.master_gain);
  a.validate();
  return a;
}

}  // namespace

HttpServer::HttpServer(ServerConfig config) : config_(std::move(config)) {
  ModelRegistry registry = config_.preset_file ? ModelRegistry::with_preset_file(*config_.preset_file)
                                               : ModelRegistry::bundled();
  config_.service.max_upload_bytes = config_.max_upload_mb * 1024 * 1024;
  service_ = std::make_unique<Service>(std::move(registry), config_.service);
  http_ = std::make_unique<httplib::Server>();
  http_->set_payload_max_length(config_.service.max_upload_bytes);
  install_routes();
}

HttpServer::~HttpServer() { stop(); }

void HttpServer::install_routes() {
  auto& srv = *http_;
  Service& svc = *service_;

  srv.Get("/api/models", guarded([&svc](const httplib::Request&, httplib::Response& res) {
            res.set_content(svc.models_json(), "application/json");
          }));

  srv.Post("/api/dataset", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
             const auto body = parse_body(req);
             nlohmann::json meta;
             if (body.contains("path")) {
               meta = svc.load_dataset(body["path"].get<std::string>());
             } else if (body.contains("synthesize")) {
               const auto& p = body["synthesize"];
               meta = svc.upload_dataset(synthesize_example(
                   p.value("classes", 2), p.value("repetitions", 3), p.value("channels", 12),
                   p.value("samples", 200), p.value("seed", std::uint64_t{7}),
                   p.value("sample_rate_hz", 100.0)));
             } else if (body.contains("dataset")) {
               meta = svc.upload_dataset(dataset_from_json(body["dataset"]));
             } else {
               meta = svc.upload_dataset(dataset_from_json(body));
             }
             res.set_content(meta.dump(), "application/json");
           }));

  srv.Get("/api/dataset", guarded([&svc](const httplib::Request&, httplib::Response& res) {
            res.set_content(svc.dataset_metadata().dump(), "application/json");
          }));

  srv.Post("/api/sessions", guarded([&svc](const httplib::Request&, httplib::Response& res) {
             res.status = 201;
             res.set_content(nlohmann::json{{"session_id", svc.create_session()}}.dump(),
                             "application/json");
           }));

  srv.Post(R"(/api/sessions/([^/]+)/runs)",
           guarded([&svc](const httplib::Request& req, httplib::Response& res) {
             const RunConfig config = run_config_from_json(parse_body(req));
             const std::string run_id = svc.submit_run(req.matches[1], config);
             res.status = 202;
             res.set_content(nlohmann::json{{"run_id", run_id}}.dump(), "application/json");
           }));

  srv.Get(R"(/api/sessions/([^/]+)/stream)",
          guarded([this, &svc](const httplib::Request& req, httplib::Response& res) {
            const std::string sid = req.matches[1];
            check_session_id(sid);
            svc.open_session(sid);
            auto cursor = std::make_shared<std::uint64_t>(
                req.has_param("from") ? std::stoull(req.get_param_value("from")) : 0);
            std::optional<std::string> until;
            if (req.has_param("until")) until = req.get_param_value("until");
            res.set_chunked_content_provider(
                "application/x-ndjson", [this, &svc, sid, cursor, until](std::size_t, httplib::DataSink& sink) {
                  std::vector<StreamEvent> events;
                  const bool alive = svc.wait_events(sid, *cursor, std::chrono::milliseconds(200), events);
                  for (const auto& ev : events) {
                    const std::string line = ev.body.dump() + "\n";
                    if (!sink.write(line.data(), line.size())) return false;
                    *cursor = ev.seq + 1;
                    if (until && ev.run_id == *until && ev.body.value("type", "") == "status" &&
                        ev.body.value("status", "") != "queued" && ev.body.value("status", "") != "running") {
                      sink.done();
                      return true;
                    }
                  }
                  if (!alive || stopping_) {
                    const std::string line =
                        nlohmann::json{{"type", "stream_end"},
                                       {"reason", stopping_ ? "server_stopping" : "session_closed"}}
                            .dump() + "\n";
                    sink.write(line.data(), line.size());
                    sink.done();
                  }
                  return true;
                });
          }));

  srv.Get(R"(/api/runs/([^/]+))", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
            res.set_content(svc.run_json(req.matches[1]).dump(), "application/json");
          }));

  srv.Get(R"(/api/runs/([^/]+)/audio)",
          guarded([&svc](const httplib::Request& req, httplib::Response& res) {
            const auto bytes = svc.run_audio(req.matches[1], audio_from_query(req));
            res.set_content(std::string(bytes.begin(), bytes.end()), "audio/wav");
          }));

  srv.Get(R"(/api/runs/([^/]+)/raster\.csv)",
          guarded([&svc](const httplib::Request& req, httplib::Response& res) {
            res.set_content(svc.run_raster_csv(req.matches[1]), "text/csv");
          }));
}

int HttpServer::bind() {
  if (config_.port == 0) {
    port_ = http_->bind_to_any_port(config_.host);
  } else {
    port_ = http_->bind_to_port(config_.host, config_.port) ? config_.port : -1;
  }
  if (port_ <= 0)
    throw Error(ErrorCode::io_error,
                "cannot bind " + config_.host + ":" + std::to_string(config_.port));
  const auto period = std::max(std::chrono::milliseconds(50),
                               std::min(std::chrono::milliseconds(1000), config_.service.session_ttl / 4));
  reaper_ = std::jthread([this, period](std::stop_token st) {
    auto next = std::chrono::steady_clock::now() + period;
    while (!st.stop_requested()) {
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
      if (std::chrono::steady_clock::now() < next) continue;
      service_->expire_sessions();
      next += period;
    }
  });
  return port_;
}

int HttpServer::start() {
  const int p = bind();
  listener_ = std::thread([this] { http_->listen_after_bind(); });
  http_->wait_until_ready();
  return p;
}

void HttpServer::run_blocking(const std::function<void(int)>& on_bound) {
  const int p = bind();
  if (on_bound) on_bound(p);
  http_->listen_after_bind();
}

void HttpServer::stop() {
  if (stopping_.exchange(true)) return;
  if (reaper_.joinable()) {
    reaper_.request_stop();
    reaper_.join();
  }
  service_->stop();
  http_->stop();
  if (listener_.joinable()) listener_.join();
}

}  // namespace spikelab
