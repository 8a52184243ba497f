#pragma once

#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace fogmq::broker {

/// What one server knows about another: contact point, last advertised game
/// state (weight, load, capacity), that server's measured one-way latency
/// row, and freshness.
struct ServerInfo {
  std::string server_id;
  std::string endpoint;
  double weight = 0.0;    // w_x
  double load = 0.0;      // L_x, messages/s
  double capacity = 0.0;  // gamma_x
  // one-way ms from `server_id` to the keyed server, as measured by
  // `server_id`; gossiped so every node has an all-pairs view.
  std::map<std::string, double> tau_ms;
  double last_seen_s = 0.0;

  nlohmann::json to_json() const;
  static ServerInfo from_json(const nlohmann::json& j);
};

/// Eventually consistent membership + state view. Thread-safe. Merge keeps
/// the fresher row per server; expiry drops servers silent for longer than
/// the configured horizon (never self).
class GossipView {
public:
  explicit GossipView(std::string self_id, double expiry_s = 60.0);

  void upsert_self(const ServerInfo& self);
  bool merge(const ServerInfo& info);

  std::optional<ServerInfo> get(const std::string& server_id) const;
  std::vector<ServerInfo> snapshot() const;

  /// Peer ids (excluding self), for gossip-partner and flock-target sampling.
  std::vector<std::string> peer_ids() const;

  void expire(double now_s);

  /// tau between two servers from the freshest row that knows it; falls back
  /// to the reverse direction (probes are reciprocal), then to nullopt.
  std::optional<double> tau_between(const std::string& a,
                                    const std::string& b) const;

  const std::string& self_id() const { return self_id_; }

  nlohmann::json to_json() const;
  void merge_json(const nlohmann::json& rows);

private:
  std::string self_id_;
  double expiry_s_;
  mutable std::mutex mutex_;
  std::map<std::string, ServerInfo> servers_;
};

}  // namespace fogmq::broker
