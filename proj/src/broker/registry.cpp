#include "fogmq/broker/registry.hpp"

#include <nlohmann/json.hpp>

namespace fogmq::broker {

nlohmann::json DeviceRecord::to_json() const {
  return {{"device_id", device_id},
          {"publish_endpoint", publish_endpoint},
          {"push_endpoint", push_endpoint},
          {"peer_ids", peer_ids}};
}

DeviceRecord DeviceRecord::from_json(const nlohmann::json& j) {
  DeviceRecord r;
  r.device_id = j.at("device_id").get<std::string>();
  r.publish_endpoint = j.at("publish_endpoint").get<std::string>();
  r.push_endpoint = j.at("push_endpoint").get<std::string>();
  r.peer_ids = j.at("peer_ids").get<std::vector<std::string>>();
  return r;
}

nlohmann::json RegistryEntry::to_json() const {
  return {{"record", record.to_json()},
          {"clone_id", clone_id},
          {"host_server_id", host_server_id},
          {"version", version}};
}

RegistryEntry RegistryEntry::from_json(const nlohmann::json& j) {
  RegistryEntry e;
  e.record = DeviceRecord::from_json(j.at("record"));
  e.clone_id = j.at("clone_id").get<std::string>();
  e.host_server_id = j.at("host_server_id").get<std::string>();
  e.version = j.at("version").get<std::uint64_t>();
  return e;
}

void Registry::create(const RegistryEntry& entry) {
  std::lock_guard lock(mutex_);
  auto [it, inserted] = entries_.emplace(entry.record.device_id, entry);
  if (!inserted) {
    throw RegistryError("DUPLICATE_DEVICE",
                        "device already registered: " + entry.record.device_id);
  }
  ++changes_;
}

void Registry::update(const RegistryEntry& entry) {
  std::lock_guard lock(mutex_);
  auto it = entries_.find(entry.record.device_id);
  if (it == entries_.end()) {
    throw RegistryError("UNKNOWN_DEVICE",
                        "device not registered: " + entry.record.device_id);
  }
  if (entry.version <= it->second.version) {
    throw RegistryError("STALE_UPDATE",
                        "registry update must increase the version");
  }
  it->second = entry;
  ++changes_;
}

std::optional<RegistryEntry> Registry::lookup(const std::string& device_id) const {
  std::lock_guard lock(mutex_);
  auto it = entries_.find(device_id);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::vector<RegistryEntry> Registry::snapshot() const {
  std::lock_guard lock(mutex_);
  std::vector<RegistryEntry> out;
  out.reserve(entries_.size());
  for (const auto& [id, entry] : entries_) out.push_back(entry);
  return out;
}

bool Registry::merge(const RegistryEntry& entry) {
  std::lock_guard lock(mutex_);
  auto it = entries_.find(entry.record.device_id);
  if (it == entries_.end()) {
    entries_.emplace(entry.record.device_id, entry);
    ++changes_;
    return true;
  }
  if (entry.version > it->second.version) {
    it->second = entry;
    ++changes_;
    return true;
  }
  return false;
}

std::uint64_t Registry::change_counter() const {
  std::lock_guard lock(mutex_);
  return changes_;
}

nlohmann::json Registry::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& entry : snapshot()) rows.push_back(entry.to_json());
  return rows;
}

void Registry::merge_json(const nlohmann::json& rows) {
  for (const auto& row : rows) merge(RegistryEntry::from_json(row));
}

}  // namespace fogmq::broker
