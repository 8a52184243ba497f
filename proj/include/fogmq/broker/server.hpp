#pragma once

#include <atomic>
#include <condition_variable>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "fogmq/broker/gossip.hpp"
#include "fogmq/broker/monitors.hpp"
#include "fogmq/broker/net.hpp"
#include "fogmq/broker/registry.hpp"
#include "fogmq/flock.hpp"

namespace fogmq::broker {

struct ServerConfig {
  std::string server_id;
  std::string bind_addr = "127.0.0.1:0";
  double capacity_gamma = 100.0;
  double delta = 1.0;
  std::vector<std::string> bootstrap;  // peer endpoints to seed the view
  double gossip_period_s = 1.0;
  double tick_period_s = 30.0;
  double eta = 0.9;
  double a = 9.0;
  double probe_period_s = 1.0;
  double view_expiry_s = 60.0;
  double demand_window_s = 60.0;
  double io_timeout_s = 5.0;
  std::uint64_t seed = 0;  // flock target sampling
  // Declared one-way latencies (server_id -> ms) used instead of measured
  // probes when present; lets loopback deployments model a wide-area tau.
  std::map<std::string, double> tau_override_ms;

  nlohmann::json to_json() const;
  static ServerConfig from_json(const nlohmann::json& j);
};

enum class CloneLiveness { kPrepared, kActive, kDraining };

/// Snapshot of one hosted clone for monitoring and audits.
struct CloneStatus {
  std::string clone_id;
  std::string device_id;
  CloneLiveness liveness = CloneLiveness::kPrepared;
  std::map<std::string, std::string> peer_subscriptions;  // peer -> status
  std::map<std::string, double> demands;  // peer device -> d_ij (msgs/s)
  double p99_latency_ms = 0.0;
  std::uint64_t relayed = 0;
};

struct MigrationReport {
  std::string device_id;
  std::string from_server;
  std::string to_server;
  bool ok = false;
  std::string error;  // TARGET_REJECTED | STATE_TRANSFER_FAILED | ...
  double started_s = 0.0;
  double committed_s = 0.0;
};

/// One FogMQ broker node: accepts device registrations, hosts clone
/// runtimes (device reader + per-peer subscriber workers + push-back),
/// measures demand and latency, gossips membership/weights/registry rows,
/// and migrates clones by the shared flock decision rule.
class FogMQServer {
public:
  explicit FogMQServer(ServerConfig config);
  ~FogMQServer();

  FogMQServer(const FogMQServer&) = delete;
  FogMQServer& operator=(const FogMQServer&) = delete;

  void start();
  void stop();

  const ServerConfig& config() const { return config_; }
  Endpoint endpoint() const;
  Registry& registry() { return registry_; }
  GossipView& view() { return view_; }

  /// Local wall clock in seconds (monotonic origin shared per process).
  static double now_s();

  std::vector<CloneStatus> clone_statuses() const;
  std::size_t active_clone_count() const;

  /// Registers a device and spawns its clone here. Throws RegistryError
  /// (DUPLICATE_DEVICE) or NetError (UNREACHABLE_ENDPOINT).
  std::string register_device(const DeviceRecord& record);

  /// One decision pass over hosted clones; each samples one candidate from
  /// the gossip view and migrates when the shared rule accepts. Returns the
  /// reports of attempted migrations.
  std::vector<MigrationReport> flock_tick();

  /// Executes the migration protocol unconditionally (testing/operations).
  MigrationReport force_migrate(const std::string& device_id,
                                const std::string& target_server_id);

  /// Measured (or overridden) one-way latency to a peer server, ms.
  double tau_to_ms(const std::string& server_id) const;

  /// Current measured load L_x (msgs/s) and weight w_x.
  double measured_load() const;
  double measured_weight() const;

private:
  struct CloneRuntime;
  struct SpawnedState;

  void accept_loop();
  void handle_connection(Connection conn);
  void handle_register(Connection& conn, const nlohmann::json& payload);
  void handle_subscribe(Connection conn, const nlohmann::json& payload);
  void handle_gossip(Connection& conn, const nlohmann::json& payload);
  void handle_migrate(Connection& conn, const nlohmann::json& begin_payload);
  void gossip_loop();
  void probe_loop();
  void gossip_with(const Endpoint& ep);
  void refresh_self_info();

  void spawn_clone(std::shared_ptr<CloneRuntime> clone);
  void drain_clone(const std::string& device_id);
  void device_reader_loop(std::shared_ptr<CloneRuntime> clone);
  void peer_worker_loop(std::shared_ptr<CloneRuntime> clone,
                        std::string peer_device_id);
  void deliver_to_device(CloneRuntime& clone, const Frame& frame);

  /// Game terms for one clone from measured demand + gossiped state.
  struct MoveTerms {
    double u_current, w_current, u_target, w_target;
  };
  std::optional<MoveTerms> evaluate_terms(const CloneRuntime& clone,
                                          const std::string& target_server_id);

  ServerConfig config_;
  RegularizationParams params_;
  std::unique_ptr<Listener> listener_;
  std::atomic<bool> running_{false};
  std::thread accept_thread_;
  std::thread gossip_thread_;
  std::thread probe_thread_;
  std::vector<std::thread> conn_threads_;
  std::mutex conn_threads_mutex_;

  Registry registry_;
  GossipView view_;
  mutable std::mutex clones_mutex_;
  std::map<std::string, std::shared_ptr<CloneRuntime>> clones_;  // by device

  mutable std::mutex probes_mutex_;
  std::map<std::string, EwmaLatency> probes_;  // peer server -> EWMA

  std::mutex migrate_mutex_;  // serializes outbound migrations per server
  std::mutex rng_mutex_;
  std::mt19937_64 rng_;
};

/// Blocking entry point for the CLI: runs one server until SIGINT/SIGTERM.
int run_broker_from_config(const std::string& config_path);

/// Client-side registration helper: sends REGISTER to a server and returns
/// the clone id from the ack. Throws on rejection.
std::string register_device_remote(const Endpoint& server,
                                   const DeviceRecord& record,
                                   double timeout_s = 5.0);

}  // namespace fogmq::broker
