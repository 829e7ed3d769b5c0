#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "tdlfd/ik.hpp"
#include "tdlfd/learning.hpp"
#include "tdlfd/mesh.hpp"
#include "tdlfd/tasks.hpp"

namespace tdlfd {

inline constexpr int kProtocolVersion = 1;

/// Append-only demonstration store shared by every session of a server.
class DemoStoreWriter {
 public:
  /// Counts the records already present; the file is created on first append.
  explicit DemoStoreWriter(std::filesystem::path path);

  /// Returns the 0-based index of the appended record.
  std::size_t append(const Demonstration& demo);
  std::size_t size() const;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  mutable std::mutex mutex_;
  std::size_t count_ = 0;
};

struct TeleopOptions {
  IkSettings ik = [] {
    IkSettings s;
    s.fk_steps = 100;
    return s;
  }();
  IkSettings playback_ik;  // offline accuracy for model playback
  int max_ik_steps = 5;
  std::size_t backbone_points = 64;
  std::size_t waypoints = 50;
  std::chrono::milliseconds playback_cadence{0};  // 0 = burst
  std::string store_manifest;  // written into saved records
};

/// Loads robots, tasks and models named in client messages.
struct ResourceResolver {
  std::function<RobotSpec(const std::string&)> robot;
  std::function<TaskDef(const std::string&)> task;
  std::function<ContextModel(const std::string&)> model;

  /// Names resolved through resolve_resource().
  static ResourceResolver from_data_path();
};

struct Environment {
  RobotSpec robot;
  TaskDef task;
  std::shared_ptr<const Mesh> mesh;  // anatomy only
};

Environment load_environment(const ResourceResolver& resolver, const std::string& task_name,
                             const std::string& robot_name);

enum class SessionState { idle, recording, playback };

std::string_view to_string(SessionState state);

struct RecordedSample {
  Vec3 tip;
  double time = 0.0;  // seconds since the recording started
};

/// One client's teleoperation session. Not thread-safe; a connection handler
/// owns it and feeds it messages in arrival order.
class Session {
 public:
  Session(Environment env, DemoStoreWriter* store, ResourceResolver resolver, TeleopOptions options = {},
          std::string session_id = "session-0");

  /// Dispatches one protocol message. Malformed or failing requests produce a
  /// single error reply and leave the session unchanged.
  std::vector<nlohmann::json> handle(const nlohmann::json& message);
  std::vector<nlohmann::json> handle_text(std::string_view text);

  nlohmann::json handle_init(const std::string& task, const std::string& robot);
  nlohmann::json handle_context(const std::vector<double>& values);
  nlohmann::json handle_target(const Vec3& target);
  nlohmann::json handle_record(std::string_view action);
  std::vector<nlohmann::json> handle_playback(const ContextModel& model, const std::vector<double>& context);
  nlohmann::json handle_reset();

  nlohmann::json env_message() const;
  nlohmann::json state_message() const;

  const Config& config() const { return config_; }
  const Vec3& tip() const { return tip_; }
  SessionState state() const { return state_; }
  const std::vector<RecordedSample>& buffer() const { return buffer_; }
  const std::optional<ContextVector>& context() const { return context_; }
  const Environment& environment() const { return env_; }
  const TeleopOptions& options() const { return options_; }

 private:
  void refresh_shape();
  ContextVector parse_context(const std::vector<double>& values) const;

  Environment env_;
  DemoStoreWriter* store_;
  ResourceResolver resolver_;
  TeleopOptions options_;
  std::string session_id_;

  Config config_;
  Vec3 tip_ = Vec3::Zero();
  std::vector<Vec3> backbone_;
  double residual_ = 0.0;
  SessionState state_ = SessionState::idle;
  std::vector<RecordedSample> buffer_;
  bool stopped_ = false;  // a stop has happened since the last start
  std::chrono::steady_clock::time_point record_start_;
  std::optional<ContextVector> context_;
  std::vector<Vec3> predicted_;
};

nlohmann::json error_message(std::string_view code, std::string_view msg);

/// Evenly spaced subset of at most `limit` points keeping both ends.
std::vector<Vec3> decimate(const std::vector<Vec3>& points, std::size_t limit);

struct ServerConfig {
  std::string address = "127.0.0.1";
  unsigned short port = 0;  // 0 = ephemeral
  std::string task;
  std::string robot;
  std::filesystem::path demos_out;
  TeleopOptions options;
  int threads = 1;
};

/// WebSocket front end: one Session per connection, one JSON message per frame.
class TeleopServer {
 public:
  TeleopServer(ServerConfig config, ResourceResolver resolver);
  ~TeleopServer();
  TeleopServer(const TeleopServer&) = delete;
  TeleopServer& operator=(const TeleopServer&) = delete;

  /// Binds and starts serving on background threads. Throws BindFailure.
  void start();
  /// Closes the listener and every open connection, then joins.
  void stop();
  /// Blocks until SIGINT/SIGTERM, then stops.
  void run_until_signal();

  unsigned short port() const;
  std::size_t connections_served() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace tdlfd
