#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace fogmq::broker {

class RegistryError : public std::runtime_error {
public:
  explicit RegistryError(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

private:
  std::string code_;
};

struct DeviceRecord {
  std::string device_id;
  std::string publish_endpoint;
  std::string push_endpoint;
  std::vector<std::string> peer_ids;

  nlohmann::json to_json() const;
  static DeviceRecord from_json(const nlohmann::json& j);
};

/// One device's registry row. `version` increases on every ownership change;
/// replicas merge by taking the higher version, which makes the current
/// host's update win everywhere once gossip delivers it.
struct RegistryEntry {
  DeviceRecord record;
  std::string clone_id;
  std::string host_server_id;
  std::uint64_t version = 1;

  nlohmann::json to_json() const;
  static RegistryEntry from_json(const nlohmann::json& j);
  bool operator==(const RegistryEntry&) const = default;
};

/// Thread-safe device_id -> RegistryEntry map. Each server holds a replica;
/// only the server hosting a device's clone writes its row (single-writer),
/// and rows spread to other replicas through gossip merge.
class Registry {
public:
  /// Insert a new device; throws DUPLICATE_DEVICE if the id exists.
  void create(const RegistryEntry& entry);

  /// Replace an existing row with a higher-version row (migration cutover).
  /// Throws if the device is unknown or the version does not increase.
  void update(const RegistryEntry& entry);

  std::optional<RegistryEntry> lookup(const std::string& device_id) const;
  std::vector<RegistryEntry> snapshot() const;

  /// Merge a replicated row: insert if unknown, replace if strictly newer.
  /// Returns true when the local replica changed.
  bool merge(const RegistryEntry& entry);

  /// Bumped on every visible change; subscriber workers poll this to notice
  /// host changes cheaply.
  std::uint64_t change_counter() const;

  nlohmann::json to_json() const;
  void merge_json(const nlohmann::json& rows);

private:
  mutable std::mutex mutex_;
  std::map<std::string, RegistryEntry> entries_;
  std::uint64_t changes_ = 0;
};

}  // namespace fogmq::broker
