#include "fogmq/broker/gossip.hpp"

#include <nlohmann/json.hpp>

namespace fogmq::broker {

nlohmann::json ServerInfo::to_json() const {
  return {{"server_id", server_id}, {"endpoint", endpoint},
          {"weight", weight},       {"load", load},
          {"capacity", capacity},   {"tau_ms", tau_ms},
          {"last_seen_s", last_seen_s}};
}

ServerInfo ServerInfo::from_json(const nlohmann::json& j) {
  ServerInfo s;
  s.server_id = j.at("server_id").get<std::string>();
  s.endpoint = j.at("endpoint").get<std::string>();
  s.weight = j.at("weight").get<double>();
  s.load = j.at("load").get<double>();
  s.capacity = j.at("capacity").get<double>();
  s.tau_ms = j.at("tau_ms").get<std::map<std::string, double>>();
  s.last_seen_s = j.at("last_seen_s").get<double>();
  return s;
}

GossipView::GossipView(std::string self_id, double expiry_s)
    : self_id_(std::move(self_id)), expiry_s_(expiry_s) {}

void GossipView::upsert_self(const ServerInfo& self) {
  std::lock_guard lock(mutex_);
  ServerInfo row = self;
  row.server_id = self_id_;
  row.tau_ms[self_id_] = 0.0;  // invariant: self latency is zero
  servers_[self_id_] = std::move(row);
}

bool GossipView::merge(const ServerInfo& info) {
  std::lock_guard lock(mutex_);
  if (info.server_id == self_id_) return false;  // we are the authority on self
  auto it = servers_.find(info.server_id);
  if (it == servers_.end() || info.last_seen_s > it->second.last_seen_s) {
    servers_[info.server_id] = info;
    return true;
  }
  return false;
}

std::optional<ServerInfo> GossipView::get(const std::string& server_id) const {
  std::lock_guard lock(mutex_);
  auto it = servers_.find(server_id);
  if (it == servers_.end()) return std::nullopt;
  return it->second;
}

std::vector<ServerInfo> GossipView::snapshot() const {
  std::lock_guard lock(mutex_);
  std::vector<ServerInfo> out;
  out.reserve(servers_.size());
  for (const auto& [id, info] : servers_) out.push_back(info);
  return out;
}

std::vector<std::string> GossipView::peer_ids() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [id, info] : servers_) {
    if (id != self_id_) out.push_back(id);
  }
  return out;
}

void GossipView::expire(double now_s) {
  std::lock_guard lock(mutex_);
  for (auto it = servers_.begin(); it != servers_.end();) {
    if (it->first != self_id_ && now_s - it->second.last_seen_s > expiry_s_) {
      it = servers_.erase(it);
    } else {
      ++it;
    }
  }
}

std::optional<double> GossipView::tau_between(const std::string& a,
                                              const std::string& b) const {
  if (a == b) return 0.0;
  std::lock_guard lock(mutex_);
  auto row = servers_.find(a);
  if (row != servers_.end()) {
    auto cell = row->second.tau_ms.find(b);
    if (cell != row->second.tau_ms.end()) return cell->second;
  }
  auto reverse = servers_.find(b);
  if (reverse != servers_.end()) {
    auto cell = reverse->second.tau_ms.find(a);
    if (cell != reverse->second.tau_ms.end()) return cell->second;
  }
  return std::nullopt;
}

nlohmann::json GossipView::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& info : snapshot()) rows.push_back(info.to_json());
  return rows;
}

void GossipView::merge_json(const nlohmann::json& rows) {
  for (const auto& row : rows) merge(ServerInfo::from_json(row));
}

}  // namespace fogmq::broker
