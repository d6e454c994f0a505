#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "spikelab/audio.hpp"
#include "spikelab/dataset.hpp"
#include "spikelab/engine.hpp"
#include "spikelab/model_registry.hpp"

namespace httplib {
class Server;
}

namespace spikelab {

enum class RunStatus { queued, running, done, cancelled, failed };

std::string_view to_string(RunStatus status);
bool is_terminal(RunStatus status);
bool transition_allowed(RunStatus from, RunStatus to);

struct ServiceOptions {
  std::uint64_t max_upload_bytes = 512ull * 1024 * 1024;
  std::chrono::milliseconds session_ttl{30 * 60 * 1000};
  std::size_t trace_chunk = 256;  // display samples per trace_chunk event
  unsigned sim_threads = 1;
  std::size_t batch_steps = 1024;
};

/// One NDJSON line on a session stream.
struct StreamEvent {
  std::uint64_t seq = 0;
  std::string run_id;
  nlohmann::json body;  // includes "seq", "run_id" and "type"
};

/// Transport-independent service: dataset, sessions, run lifecycle and the
/// per-session event log. All public members are thread-safe.
class Service {
 public:
  explicit Service(ModelRegistry registry = ModelRegistry::bundled(), ServiceOptions options = {});
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Byte-stable model listing: {"models": [...], "preprocess_controls": [...]}.
  const std::string& models_json() const { return models_json_; }

  nlohmann::json load_dataset(const std::filesystem::path& path);
  nlohmann::json upload_dataset(TrialDataset dataset);
  /// Throws PreconditionFailed when nothing is loaded.
  nlohmann::json dataset_metadata() const;

  std::string create_session();
  /// Creates the session with this client-chosen id unless it exists.
  void open_session(const std::string& session_id);
  /// Validates synchronously, supersedes the session's in-flight run and
  /// returns the new run id without waiting for it.
  std::string submit_run(const std::string& session_id, const RunConfig& config);

  RunStatus run_status(const std::string& run_id) const;
  /// {"run_id", "session_id", "status", "errors", "result"}; result is null
  /// until the run has finished.
  nlohmann::json run_json(const std::string& run_id) const;
  /// Conflict unless the run finished with a result.
  SimulationResult run_result(const std::string& run_id) const;
  std::vector<std::uint8_t> run_audio(const std::string& run_id, const AudioConfig& audio) const;
  std::string run_raster_csv(const std::string& run_id) const;

  /// Blocks up to `timeout` for events with seq >= from. Returns false once
  /// the session has expired or the service is stopping.
  bool wait_events(const std::string& session_id, std::uint64_t from,
                   std::chrono::milliseconds timeout, std::vector<StreamEvent>& out);
  void touch(const std::string& session_id);

  /// Drops sessions idle longer than the TTL. Called periodically by the
  /// HTTP server; exposed for tests.
  std::size_t expire_sessions(std::chrono::steady_clock::time_point now =
                                  std::chrono::steady_clock::now());

  void stop();
  const ModelRegistry& registry() const { return registry_; }

 private:
  struct Run;
  struct Session;

  std::shared_ptr<Session> session(const std::string& id, bool create);
  std::shared_ptr<Run> find_run(const std::string& id) const;
  void worker_loop_raw(Session& session);
  void execute(Session& session, const std::shared_ptr<Run>& run);

  ModelRegistry registry_;
  ServiceOptions options_;
  std::string models_json_;

  mutable std::mutex mutex_;
  std::shared_ptr<const TrialDataset> dataset_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::map<std::string, std::shared_ptr<Run>> runs_;
  std::uint64_t next_session_ = 1;
  std::uint64_t next_run_ = 1;
  bool stopping_ = false;
};

struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 binds an ephemeral port
  std::optional<std::filesystem::path> preset_file;
  std::uint64_t max_upload_mb = 512;
  ServiceOptions service;
};

/// HTTP front end:
///   GET  /api/models
///   POST /api/dataset              {"path": ...} | {"dataset": {...}} | {"synthesize": {...}}
///   GET  /api/dataset
///   POST /api/sessions
///   POST /api/sessions/{id}/runs   run request -> {"run_id"}
///   GET  /api/sessions/{id}/stream ?from=<seq>&until=<run_id>  (NDJSON)
///   GET  /api/runs/{run_id}
///   GET  /api/runs/{run_id}/audio  (audio/wav)
///   GET  /api/runs/{run_id}/raster.csv
class HttpServer {
 public:
  explicit HttpServer(ServerConfig config);
  ~HttpServer();

  /// Binds and starts serving on a background thread; returns the port.
  int start();
  /// Binds and serves on the calling thread until stop().
  void run_blocking(const std::function<void(int)>& on_bound = {});
  void stop();
  int port() const { return port_; }
  Service& service() { return *service_; }

 private:
  void install_routes();
  int bind();

  ServerConfig config_;
  std::unique_ptr<Service> service_;
  std::unique_ptr<httplib::Server> http_;
  std::thread listener_;
  std::jthread reaper_;
  std::atomic<bool> stopping_{false};
  int port_ = 0;
};

}  // namespace spikelab
