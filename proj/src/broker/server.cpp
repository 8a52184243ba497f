#include "fogmq/broker/server.hpp"

#include <chrono>
#include <csignal>
#include <deque>
#include <fstream>
#include <iostream>
#include <unordered_set>

#include <nlohmann/json.hpp>

namespace fogmq::broker {

namespace {

constexpr std::size_t kDedupWindow = 10'000;

double rho_of(double load, double capacity, double delta) {
  if (load >= capacity) return kSaturated;
  if (load <= 0.0) return 0.0;
  return delta * load / (capacity - load);
}

}  // namespace

nlohmann::json ServerConfig::to_json() const {
  return {{"server_id", server_id},
          {"bind_addr", bind_addr},
          {"capacity_gamma", capacity_gamma},
          {"delta", delta},
          {"bootstrap", bootstrap},
          {"gossip_period_s", gossip_period_s},
          {"tick_period_s", tick_period_s},
          {"eta", eta},
          {"a", a},
          {"probe_period_s", probe_period_s},
          {"view_expiry_s", view_expiry_s},
          {"demand_window_s", demand_window_s},
          {"io_timeout_s", io_timeout_s},
          {"seed", seed},
          {"tau_override_ms", tau_override_ms}};
}

ServerConfig ServerConfig::from_json(const nlohmann::json& j) {
  ServerConfig c;
  c.server_id = j.at("server_id").get<std::string>();
  c.bind_addr = j.value("bind_addr", c.bind_addr);
  c.capacity_gamma = j.value("capacity_gamma", c.capacity_gamma);
  c.delta = j.value("delta", c.delta);
  c.bootstrap = j.value("bootstrap", c.bootstrap);
  c.gossip_period_s = j.value("gossip_period_s", c.gossip_period_s);
  c.tick_period_s = j.value("tick_period_s", c.tick_period_s);
  c.eta = j.value("eta", c.eta);
  c.a = j.value("a", c.a);
  c.probe_period_s = j.value("probe_period_s", c.probe_period_s);
  c.view_expiry_s = j.value("view_expiry_s", c.view_expiry_s);
  c.demand_window_s = j.value("demand_window_s", c.demand_window_s);
  c.io_timeout_s = j.value("io_timeout_s", c.io_timeout_s);
  c.seed = j.value("seed", c.seed);
  c.tau_override_ms =
      j.value("tau_override_ms", std::map<std::string, double>{});
  return c;
}

// ---------------------------------------------------------------------------

struct FogMQServer::CloneRuntime {
  std::string clone_id;
  DeviceRecord record;
  std::atomic<CloneLiveness> liveness{CloneLiveness::kPrepared};
  std::atomic<bool> stop{false};

  mutable std::mutex mon_mutex;
  DemandMonitor demand;
  QuantileEstimator latency{1.01, 1e-3};  // ms samples
  std::uint64_t relayed = 0;
  std::map<std::string, std::string> peer_status;

  struct Dedup {
    std::deque<std::uint64_t> order;
    std::unordered_set<std::uint64_t> seen;
  };
  std::mutex dedup_mutex;
  std::map<std::string, Dedup> dedup;  // source device -> recent seqs

  std::mutex push_mutex;
  Connection push_conn;

  struct Sub {
    std::shared_ptr<Connection> conn;
    std::string subscriber_device;
  };
  std::mutex subs_mutex;
  std::vector<Sub> subscribers;

  std::optional<Connection> initial_device_conn;
  std::thread device_thread;
  std::vector<std::thread> peer_threads;

  explicit CloneRuntime(double window_s) : demand(window_s, 1.0) {}

  /// True when `seq` from `source` was already delivered; records it if new.
  bool seen_before(const std::string& source, std::uint64_t seq) {
    std::lock_guard lock(dedup_mutex);
    Dedup& d = dedup[source];
    if (d.seen.contains(seq)) return true;
    d.seen.insert(seq);
    d.order.push_back(seq);
    if (d.order.size() > kDedupWindow) {
      d.seen.erase(d.order.front());
      d.order.pop_front();
    }
    return false;
  }

  nlohmann::json dedup_json() {
    std::lock_guard lock(dedup_mutex);
    nlohmann::json out = nlohmann::json::object();
    for (const auto& [source, d] : dedup) {
      out[source] = std::vector<std::uint64_t>(d.order.begin(), d.order.end());
    }
    return out;
  }

  void load_dedup(const nlohmann::json& j) {
    std::lock_guard lock(dedup_mutex);
    for (const auto& [source, seqs] : j.items()) {
      Dedup& d = dedup[source];
      for (std::uint64_t s : seqs.get<std::vector<std::uint64_t>>()) {
        if (d.seen.insert(s).second) d.order.push_back(s);
      }
    }
  }
};

// ---------------------------------------------------------------------------

FogMQServer::FogMQServer(ServerConfig config)
    : config_(std::move(config)),
      params_{config_.a, 1e-3},
      view_(config_.server_id, config_.view_expiry_s),
      rng_(config_.seed) {
  if (config_.server_id.empty()) {
    throw std::invalid_argument("server_id must be set");
  }
  params_.check();
}

FogMQServer::~FogMQServer() { stop(); }

double FogMQServer::now_s() {
  static const auto origin = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - origin)
      .count();
}

Endpoint FogMQServer::endpoint() const {
  if (!listener_) throw NetError("server not started");
  return listener_->endpoint();
}

void FogMQServer::start() {
  if (running_.exchange(true)) return;
  listener_ = std::make_unique<Listener>(Endpoint::parse(config_.bind_addr));
  refresh_self_info();
  accept_thread_ = std::thread([this] { accept_loop(); });
  gossip_thread_ = std::thread([this] { gossip_loop(); });
  probe_thread_ = std::thread([this] { probe_loop(); });
}

void FogMQServer::stop() {
  if (!running_.exchange(false)) return;
  if (listener_) listener_->close();
  if (accept_thread_.joinable()) accept_thread_.join();
  if (gossip_thread_.joinable()) gossip_thread_.join();
  if (probe_thread_.joinable()) probe_thread_.join();
  std::vector<std::string> devices;
  {
    std::lock_guard lock(clones_mutex_);
    for (const auto& [device, clone] : clones_) devices.push_back(device);
  }
  for (const auto& device : devices) drain_clone(device);
  std::vector<std::thread> handlers;
  {
    std::lock_guard lock(conn_threads_mutex_);
    handlers.swap(conn_threads_);
  }
  for (auto& t : handlers) {
    if (t.joinable()) t.join();
  }
}

// --------------------------- connection handling ---------------------------

void FogMQServer::accept_loop() {
  while (running_) {
    std::optional<Connection> conn;
    try {
      conn = listener_->accept(0.2);
    } catch (const NetError&) {
      break;  // listener closed during shutdown
    }
    if (!conn) continue;
    std::lock_guard lock(conn_threads_mutex_);
    conn_threads_.emplace_back(
        [this, c = std::make_shared<Connection>(std::move(*conn))]() mutable {
          handle_connection(std::move(*c));
        });
  }
}

void FogMQServer::handle_connection(Connection conn) {
  try {
    auto frame = conn.receive(config_.io_timeout_s);
    if (!frame) return;
    switch (frame->type) {
      case FrameType::kRegister:
        handle_register(conn, payload_json(*frame));
        // Allow several registrations on one connection.
        while (running_) {
          auto next = conn.receive(0.5);
          if (!next) break;
          if (next->type != FrameType::kRegister) break;
          handle_register(conn, payload_json(*next));
        }
        break;
      case FrameType::kSubscribe:
        handle_subscribe(std::move(conn), payload_json(*frame));
        break;
      case FrameType::kGossip:
        handle_gossip(conn, payload_json(*frame));
        break;
      case FrameType::kProbe:
        // Echo probes on this connection until the prober hangs up.
        conn.send(Frame{FrameType::kProbeAck, frame->payload});
        while (running_) {
          auto probe = conn.receive(2.0);
          if (!probe || probe->type != FrameType::kProbe) break;
          conn.send(Frame{FrameType::kProbeAck, probe->payload});
        }
        break;
      case FrameType::kMigrateBegin:
        handle_migrate(conn, payload_json(*frame));
        break;
      default:
        break;  // unexpected opener; drop the connection
    }
  } catch (const std::exception&) {
    // Connection-scoped failures only affect this peer; the acceptor and
    // other connections keep running.
  }
}

void FogMQServer::handle_register(Connection& conn,
                                  const nlohmann::json& payload) {
  nlohmann::json ack;
  try {
    std::string clone_id =
        register_device(DeviceRecord::from_json(payload));
    ack = {{"ok", true}, {"clone_id", clone_id}};
  } catch (const RegistryError& e) {
    ack = {{"ok", false}, {"error", e.code()}, {"message", e.what()}};
  } catch (const NetError& e) {
    ack = {{"ok", false}, {"error", "UNREACHABLE_ENDPOINT"}, {"message", e.what()}};
  }
  conn.send(make_frame(FrameType::kRegisterAck, ack));
}

std::string FogMQServer::register_device(const DeviceRecord& record) {
  if (registry_.lookup(record.device_id)) {
    throw RegistryError("DUPLICATE_DEVICE",
                        "device already registered: " + record.device_id);
  }
  // Validate the publish endpoint before committing the registry row; the
  // established connection seeds the reader so no initial messages are lost.
  Connection device_conn =
      Connection::dial(Endpoint::parse(record.publish_endpoint),
                       config_.io_timeout_s);
  RegistryEntry entry;
  entry.record = record;
  entry.clone_id = record.device_id + ".1";
  entry.host_server_id = config_.server_id;
  entry.version = 1;
  registry_.create(entry);

  auto clone = std::make_shared<CloneRuntime>(config_.demand_window_s);
  clone->clone_id = entry.clone_id;
  clone->record = record;
  clone->liveness = CloneLiveness::kActive;
  clone->initial_device_conn = std::move(device_conn);
  spawn_clone(clone);
  return entry.clone_id;
}

void FogMQServer::handle_subscribe(Connection conn,
                                   const nlohmann::json& payload) {
  std::string topic = payload.at("topic").get<std::string>();
  std::string subscriber = payload.at("subscriber_device").get<std::string>();
  std::shared_ptr<CloneRuntime> owner;
  {
    std::lock_guard lock(clones_mutex_);
    for (const auto& [device, clone] : clones_) {
      if (clone->clone_id == topic) {
        owner = clone;
        break;
      }
    }
  }
  if (!owner) return;  // unknown topic: closing tells the peer to re-resolve
  std::lock_guard lock(owner->subs_mutex);
  owner->subscribers.push_back(
      {std::make_shared<Connection>(std::move(conn)), subscriber});
}

void FogMQServer::handle_gossip(Connection& conn,
                                const nlohmann::json& payload) {
  view_.merge_json(payload.at("view"));
  registry_.merge_json(payload.at("registry"));
  refresh_self_info();
  conn.send(make_frame(FrameType::kGossip, {{"view", view_.to_json()},
                                            {"registry", registry_.to_json()}}));
}

// ------------------------------- clone runtime -----------------------------

void FogMQServer::spawn_clone(std::shared_ptr<CloneRuntime> clone) {
  {
    std::lock_guard lock(clones_mutex_);
    clones_[clone->record.device_id] = clone;
  }
  clone->device_thread =
      std::thread([this, clone] { device_reader_loop(clone); });
  for (const auto& peer : clone->record.peer_ids) {
    clone->peer_threads.emplace_back(
        [this, clone, peer] { peer_worker_loop(clone, peer); });
  }
}

void FogMQServer::drain_clone(const std::string& device_id) {
  std::shared_ptr<CloneRuntime> clone;
  {
    std::lock_guard lock(clones_mutex_);
    auto it = clones_.find(device_id);
    if (it == clones_.end()) return;
    clone = it->second;
    clones_.erase(it);
  }
  clone->liveness = CloneLiveness::kDraining;
  clone->stop = true;
  {
    std::lock_guard lock(clone->subs_mutex);
    for (auto& sub : clone->subscribers) sub.conn->close();
    clone->subscribers.clear();
  }
  if (clone->device_thread.joinable()) clone->device_thread.join();
  for (auto& t : clone->peer_threads) {
    if (t.joinable()) t.join();
  }
  std::lock_guard lock(clone->push_mutex);
  clone->push_conn.close();
}

void FogMQServer::device_reader_loop(std::shared_ptr<CloneRuntime> clone) {
  Connection conn;
  if (clone->initial_device_conn) {
    conn = std::move(*clone->initial_device_conn);
    clone->initial_device_conn.reset();
  }
  while (!clone->stop) {
    try {
      if (!conn.valid()) {
        conn = Connection::dial(Endpoint::parse(clone->record.publish_endpoint),
                                1.0);
      }
      auto frame = conn.receive(0.2);
      if (!frame) continue;
      if (frame->type != FrameType::kPublish) continue;
      double now = now_s();
      {
        std::lock_guard mon(clone->mon_mutex);
        ++clone->relayed;
      }
      std::lock_guard lock(clone->subs_mutex);
      for (auto it = clone->subscribers.begin();
           it != clone->subscribers.end();) {
        try {
          it->conn->send(*frame);
          std::lock_guard mon(clone->mon_mutex);
          clone->demand.record_sent(it->subscriber_device, now);
          ++it;
        } catch (const NetError&) {
          it->conn->close();
          it = clone->subscribers.erase(it);
        }
      }
    } catch (const std::exception&) {
      conn.close();
      // Device unreachable or stream corrupt; retry until drained.
      std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
  }
}

void FogMQServer::peer_worker_loop(std::shared_ptr<CloneRuntime> clone,
                                   std::string peer_device_id) {
  std::mt19937_64 backoff_rng(
      std::hash<std::string>{}(clone->clone_id + "/" + peer_device_id));
  auto set_status = [&](const std::string& s) {
    std::lock_guard lock(clone->mon_mutex);
    clone->peer_status[peer_device_id] = s;
  };
  set_status("PENDING");
  int failures = 0;
  auto backoff = [&] {
    // Exponentially growing randomized wait, capped; covers the deferred
    // registration case (peer not yet known) and reconnects.
    double cap = std::min(1.6, 0.05 * std::pow(2.0, std::min(failures, 5)));
    std::uniform_real_distribution<double> d(0.02, cap);
    double wait = d(backoff_rng);
    for (double t = 0.0; t < wait && !clone->stop; t += 0.02) {
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    ++failures;
  };

  while (!clone->stop) {
    // A prepared replacement must not subscribe yet: its draining
    // predecessor still owns the peer subscriptions, and two live
    // subscriptions would double-deliver.
    if (clone->liveness == CloneLiveness::kPrepared) {
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
      continue;
    }
    auto entry = registry_.lookup(peer_device_id);
    if (!entry) {
      backoff();
      continue;
    }
    Endpoint host_ep;
    if (entry->host_server_id == config_.server_id) {
      host_ep = listener_->endpoint();
    } else {
      auto info = view_.get(entry->host_server_id);
      if (!info) {
        backoff();
        continue;
      }
      try {
        host_ep = Endpoint::parse(info->endpoint);
      } catch (const NetError&) {
        backoff();
        continue;
      }
    }
    try {
      Connection conn = Connection::dial(host_ep, 1.0);
      conn.send(make_frame(FrameType::kSubscribe,
                           {{"topic", entry->clone_id},
                            {"subscriber_device", clone->record.device_id}}));
      set_status("SUBSCRIBED");
      failures = 0;
      std::string topic = entry->clone_id;
      while (!clone->stop) {
        auto frame = conn.receive(0.2);
        // Re-resolve when the peer migrated (new clone id / host).
        auto current = registry_.lookup(peer_device_id);
        if (!current || current->clone_id != topic) break;
        if (!frame) continue;
        if (frame->type != FrameType::kPublish) continue;
        nlohmann::json msg = payload_json(*frame);
        std::string source = msg.at("device_id").get<std::string>();
        std::uint64_t seq = msg.at("seq").get<std::uint64_t>();
        double now = now_s();
        {
          std::lock_guard mon(clone->mon_mutex);
          clone->demand.record_received(peer_device_id, now);
          double sent_s = msg.value("t_sent_s", now);
          clone->latency.record((now - sent_s) * 1000.0);
        }
        if (clone->seen_before(source, seq)) continue;
        // Only the ACTIVE clone delivers. A prepared replacement and a
        // draining predecessor can both be subscribed for a moment during
        // cutover; if both pushed, the device would see duplicates. The
        // draining side drops instead (a gap inside the cutover window).
        if (clone->liveness != CloneLiveness::kActive) continue;
        deliver_to_device(*clone, *frame);
      }
    } catch (const NetError&) {
      set_status("DISCONNECTED");
      backoff();
    } catch (const WireError&) {
      set_status("DISCONNECTED");
      backoff();
    }
  }
}

void FogMQServer::deliver_to_device(CloneRuntime& clone, const Frame& frame) {
  std::lock_guard lock(clone.push_mutex);
  for (int attempt = 0; attempt < 2; ++attempt) {
    try {
      if (!clone.push_conn.valid()) {
        clone.push_conn = Connection::dial(
            Endpoint::parse(clone.record.push_endpoint), 1.0);
      }
      clone.push_conn.send(Frame{FrameType::kPush, frame.payload});
      return;
    } catch (const NetError&) {
      clone.push_conn.close();
    }
  }
}

// ------------------------------ gossip & probes ----------------------------

void FogMQServer::refresh_self_info() {
  ServerInfo self;
  self.server_id = config_.server_id;
  self.endpoint = listener_ ? listener_->endpoint().str() : "";
  self.capacity = config_.capacity_gamma;
  self.load = measured_load();
  self.weight = measured_weight();
  self.last_seen_s = now_s();
  for (const auto& id : view_.peer_ids()) self.tau_ms[id] = tau_to_ms(id);
  for (const auto& [id, ms] : config_.tau_override_ms) self.tau_ms[id] = ms;
  view_.upsert_self(self);
}

void FogMQServer::gossip_loop() {
  std::mt19937_64 rng(config_.seed ^ 0x6055A1u);
  while (running_) {
    refresh_self_info();
    view_.expire(now_s());
    // Candidate partners: everyone in the view plus configured bootstraps.
    std::vector<std::string> endpoints = config_.bootstrap;
    for (const auto& info : view_.snapshot()) {
      if (info.server_id != config_.server_id && !info.endpoint.empty()) {
        endpoints.push_back(info.endpoint);
      }
    }
    std::string own = listener_ ? listener_->endpoint().str() : "";
    std::erase(endpoints, own);
    if (!endpoints.empty()) {
      std::uniform_int_distribution<std::size_t> pick(0, endpoints.size() - 1);
      try {
        gossip_with(Endpoint::parse(endpoints[pick(rng)]));
      } catch (const std::exception&) {
        // Unreachable partner this round; try another next round.
      }
    }
    for (double t = 0.0; t < config_.gossip_period_s && running_; t += 0.05) {
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
  }
}

void FogMQServer::gossip_with(const Endpoint& ep) {
  Connection conn = Connection::dial(ep, config_.io_timeout_s);
  conn.send(make_frame(FrameType::kGossip, {{"view", view_.to_json()},
                                            {"registry", registry_.to_json()}}));
  auto reply = conn.receive(config_.io_timeout_s);
  if (reply && reply->type == FrameType::kGossip) {
    nlohmann::json j = payload_json(*reply);
    view_.merge_json(j.at("view"));
    registry_.merge_json(j.at("registry"));
  }
}

void FogMQServer::probe_loop() {
  while (running_) {
    for (const auto& info : view_.snapshot()) {
      if (!running_) break;
      if (info.server_id == config_.server_id || info.endpoint.empty()) continue;
      try {
        Connection conn =
            Connection::dial(Endpoint::parse(info.endpoint), 1.0);
        for (int i = 0; i < 3; ++i) {
          auto t0 = std::chrono::steady_clock::now();
          conn.send(make_frame(FrameType::kProbe, {{"n", i}}));
          auto ack = conn.receive(1.0);
          if (!ack || ack->type != FrameType::kProbeAck) break;
          double rtt_ms = std::chrono::duration<double, std::milli>(
                              std::chrono::steady_clock::now() - t0)
                              .count();
          std::lock_guard lock(probes_mutex_);
          probes_.try_emplace(info.server_id, 0.2);
          probes_.at(info.server_id).record_rtt_ms(rtt_ms);
        }
      } catch (const std::exception&) {
        // TIMEOUT/unreachable: the pair simply keeps its last estimate and
        // the membership expiry eventually evicts a dead server.
      }
    }
    for (double t = 0.0; t < config_.probe_period_s && running_; t += 0.05) {
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
  }
}

double FogMQServer::tau_to_ms(const std::string& server_id) const {
  if (server_id == config_.server_id) return 0.0;
  auto it = config_.tau_override_ms.find(server_id);
  if (it != config_.tau_override_ms.end()) return it->second;
  std::lock_guard lock(probes_mutex_);
  auto probe = probes_.find(server_id);
  if (probe != probes_.end() && probe->second.has_value()) {
    return probe->second.one_way_ms();
  }
  return 0.0;
}

// ------------------------------ game evaluation ----------------------------

double FogMQServer::measured_load() const {
  double now = now_s();
  double total = 0.0;
  std::lock_guard lock(clones_mutex_);
  for (const auto& [device, clone] : clones_) {
    std::lock_guard mon(clone->mon_mutex);
    for (const auto& [peer, d] : clone->demand.demands(now)) total += d;
  }
  return total;
}

double FogMQServer::measured_weight() const {
  double now = now_s();
  double rho_self = rho_of(measured_load(), config_.capacity_gamma,
                           config_.delta);
  if (is_saturated(rho_self)) return kSaturated;
  double total = 0.0;
  std::vector<std::shared_ptr<CloneRuntime>> clones;
  {
    std::lock_guard lock(clones_mutex_);
    for (const auto& [device, clone] : clones_) clones.push_back(clone);
  }
  for (const auto& clone : clones) {
    std::map<std::string, double> demands;
    {
      std::lock_guard mon(clone->mon_mutex);
      demands = clone->demand.demands(now);
    }
    for (const auto& [peer, d] : demands) {
      if (d <= 0.0) continue;
      auto entry = registry_.lookup(peer);
      if (!entry) continue;
      const std::string& host = entry->host_server_id;
      double rho_peer = rho_self;
      double tau = 0.0;
      if (host != config_.server_id) {
        auto info = view_.get(host);
        if (!info) continue;
        rho_peer = rho_of(info->load, info->capacity, config_.delta);
        tau = view_.tau_between(config_.server_id, host).value_or(0.0);
      }
      if (is_saturated(rho_peer)) return kSaturated;
      total += d * (tau + rho_self + rho_peer);
    }
  }
  return total;
}

std::optional<FogMQServer::MoveTerms> FogMQServer::evaluate_terms(
    const CloneRuntime& clone, const std::string& target_server_id) {
  auto target = view_.get(target_server_id);
  if (!target || target_server_id == config_.server_id) return std::nullopt;

  double now = now_s();
  std::map<std::string, double> demands;
  {
    std::lock_guard mon(clone.mon_mutex);
    demands = clone.demand.demands(now);
  }
  double d_i = 0.0;
  for (const auto& [peer, d] : demands) d_i += d;

  double load_self = measured_load();
  double rho_self = rho_of(load_self, config_.capacity_gamma, config_.delta);

  // Hypothetical loads with this clone's traffic shifted to the target.
  double load_self_after = std::max(0.0, load_self - d_i);
  double load_target_after = target->load + d_i;
  double rho_self_after =
      rho_of(load_self_after, config_.capacity_gamma, config_.delta);
  double rho_target_after =
      rho_of(load_target_after, target->capacity, config_.delta);

  auto rho_host = [&](const std::string& host, bool after) -> double {
    if (host == config_.server_id) return after ? rho_self_after : rho_self;
    if (host == target_server_id) {
      return after ? rho_target_after
                   : rho_of(target->load, target->capacity, config_.delta);
    }
    auto info = view_.get(host);
    if (!info) return kSaturated;  // unknown host: treat as unusable
    return rho_of(info->load, info->capacity, config_.delta);
  };

  double u_current = 0.0;
  double u_target = is_saturated(rho_target_after) ? kSaturated : 0.0;
  for (const auto& [peer, d] : demands) {
    if (d <= 0.0) continue;
    auto entry = registry_.lookup(peer);
    if (!entry) continue;
    const std::string& host = entry->host_server_id;
    double rho_now = rho_host(host, false);
    double tau_now =
        view_.tau_between(config_.server_id, host).value_or(0.0);
    u_current = is_saturated(rho_self) || is_saturated(rho_now) ||
                        is_saturated(u_current)
                    ? kSaturated
                    : u_current + d * (tau_now + rho_self + rho_now);
    if (!is_saturated(u_target)) {
      double rho_then = rho_host(host, true);
      auto tau_then = view_.tau_between(target_server_id, host);
      if (is_saturated(rho_then) || !tau_then) {
        u_target = kSaturated;
      } else {
        u_target += d * (*tau_then + rho_target_after + rho_then);
      }
    }
  }
  return MoveTerms{u_current, measured_weight(), u_target, target->weight};
}

std::vector<MigrationReport> FogMQServer::flock_tick() {
  std::vector<MigrationReport> reports;
  std::vector<std::shared_ptr<CloneRuntime>> clones;
  {
    std::lock_guard lock(clones_mutex_);
    for (const auto& [device, clone] : clones_) {
      if (clone->liveness == CloneLiveness::kActive) clones.push_back(clone);
    }
  }
  std::vector<std::string> candidates = view_.peer_ids();
  if (candidates.empty()) return reports;
  for (const auto& clone : clones) {
    std::string target;
    {
      std::lock_guard lock(rng_mutex_);
      std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
      target = candidates[pick(rng_)];
    }
    auto terms = evaluate_terms(*clone, target);
    if (!terms) continue;
    // The shared rule is the only decision-maker; the broker carries no
    // second copy of the migration condition.
    if (!accept_migration_terms(params_, config_.eta, terms->u_current,
                                terms->w_current, terms->u_target,
                                terms->w_target)) {
      continue;
    }
    reports.push_back(force_migrate(clone->record.device_id, target));
  }
  return reports;
}

// -------------------------------- migration --------------------------------

MigrationReport FogMQServer::force_migrate(const std::string& device_id,
                                           const std::string& target_server_id) {
  std::lock_guard serialize(migrate_mutex_);
  MigrationReport report;
  report.device_id = device_id;
  report.from_server = config_.server_id;
  report.to_server = target_server_id;
  report.started_s = now_s();

  std::shared_ptr<CloneRuntime> clone;
  {
    std::lock_guard lock(clones_mutex_);
    auto it = clones_.find(device_id);
    if (it != clones_.end()) clone = it->second;
  }
  auto entry = registry_.lookup(device_id);
  if (!clone || !entry || entry->host_server_id != config_.server_id) {
    report.error = "NOT_HOSTED_HERE";
    return report;
  }
  auto target_info = view_.get(target_server_id);
  if (!target_info || target_info->endpoint.empty()) {
    report.error = "UNKNOWN_TARGET";
    return report;
  }

  RegistryEntry next = *entry;
  next.host_server_id = target_server_id;
  next.version = entry->version + 1;
  next.clone_id = device_id + "." + std::to_string(next.version);

  double now = now_s();
  double d_i = 0.0;
  nlohmann::json state;
  {
    std::lock_guard mon(clone->mon_mutex);
    for (const auto& [peer, d] : clone->demand.demands(now)) d_i += d;
    state = {{"entry", next.to_json()},
             {"demand", clone->demand.to_json()},
             {"latency", clone->latency.to_json()},
             {"load_estimate", d_i}};
  }
  state["dedup"] = clone->dedup_json();

  try {
    Connection conn = Connection::dial(Endpoint::parse(target_info->endpoint),
                                       config_.io_timeout_s);
    conn.send(make_frame(FrameType::kMigrateBegin,
                         {{"device_id", device_id},
                          {"from", config_.server_id},
                          {"load_estimate", d_i}}));
    conn.send(make_frame(FrameType::kState, state));
    auto ready = conn.receive(config_.io_timeout_s);
    if (!ready || ready->type == FrameType::kMigrateAbort) {
      report.error = ready ? payload_json(*ready)
                                 .value("error", std::string("TARGET_REJECTED"))
                           : "STATE_TRANSFER_FAILED";
      return report;
    }
    if (ready->type != FrameType::kMigrateCommit) {
      report.error = "STATE_TRANSFER_FAILED";
      return report;
    }
    // Replacement is live and subscribed; cut over. Order matters for the
    // uniqueness audit: the old clone stops being ACTIVE before the final
    // commit lets the replacement become ACTIVE.
    clone->liveness = CloneLiveness::kDraining;
    registry_.update(next);
    conn.send(make_frame(FrameType::kMigrateCommit,
                         {{"entry", next.to_json()}}));
    drain_clone(device_id);
    report.ok = true;
    report.committed_s = now_s();
    return report;
  } catch (const std::exception& e) {
    report.error = std::string("STATE_TRANSFER_FAILED: ") + e.what();
    return report;
  }
}

void FogMQServer::handle_migrate(Connection& conn,
                                 const nlohmann::json& begin_payload) {
  double advertised = begin_payload.value("load_estimate", 0.0);
  if (measured_load() + advertised >= config_.capacity_gamma) {
    conn.send(make_frame(FrameType::kMigrateAbort,
                         {{"error", "TARGET_REJECTED"}}));
    return;
  }
  auto state_frame = conn.receive(config_.io_timeout_s);
  if (!state_frame || state_frame->type != FrameType::kState) return;
  nlohmann::json state = payload_json(*state_frame);
  RegistryEntry next = RegistryEntry::from_json(state.at("entry"));

  auto clone = std::make_shared<CloneRuntime>(config_.demand_window_s);
  clone->clone_id = next.clone_id;
  clone->record = next.record;
  clone->liveness = CloneLiveness::kPrepared;
  {
    std::lock_guard mon(clone->mon_mutex);
    clone->demand = DemandMonitor::from_json(state.at("demand"));
    clone->latency = QuantileEstimator::from_json(state.at("latency"));
  }
  clone->load_dedup(state.at("dedup"));
  try {
    clone->initial_device_conn = Connection::dial(
        Endpoint::parse(next.record.publish_endpoint), config_.io_timeout_s);
  } catch (const NetError&) {
    conn.send(make_frame(FrameType::kMigrateAbort,
                         {{"error", "STATE_TRANSFER_FAILED"}}));
    return;
  }
  spawn_clone(clone);
  conn.send(make_frame(FrameType::kMigrateCommit, {{"ready", true}}));
  try {
    auto final = conn.receive(config_.io_timeout_s);
    if (final && final->type == FrameType::kMigrateCommit) {
      registry_.merge(RegistryEntry::from_json(payload_json(*final).at("entry")));
      clone->liveness = CloneLiveness::kActive;
      return;
    }
  } catch (const std::exception&) {
    // fall through to rollback
  }
  drain_clone(next.record.device_id);
}

// -------------------------------- inspection -------------------------------

std::vector<CloneStatus> FogMQServer::clone_statuses() const {
  double now = now_s();
  std::vector<CloneStatus> out;
  std::vector<std::shared_ptr<CloneRuntime>> clones;
  {
    std::lock_guard lock(clones_mutex_);
    for (const auto& [device, clone] : clones_) clones.push_back(clone);
  }
  for (const auto& clone : clones) {
    CloneStatus s;
    s.clone_id = clone->clone_id;
    s.device_id = clone->record.device_id;
    s.liveness = clone->liveness;
    std::lock_guard mon(clone->mon_mutex);
    s.peer_subscriptions = clone->peer_status;
    s.demands = clone->demand.demands(now);
    s.p99_latency_ms = clone->latency.p99();
    s.relayed = clone->relayed;
    out.push_back(std::move(s));
  }
  return out;
}

std::size_t FogMQServer::active_clone_count() const {
  std::lock_guard lock(clones_mutex_);
  std::size_t n = 0;
  for (const auto& [device, clone] : clones_) {
    if (clone->liveness == CloneLiveness::kActive) ++n;
  }
  return n;
}

// ----------------------------- CLI entry points ----------------------------

std::string register_device_remote(const Endpoint& server,
                                   const DeviceRecord& record,
                                   double timeout_s) {
  Connection conn = Connection::dial(server, timeout_s);
  conn.send(make_frame(FrameType::kRegister, record.to_json()));
  auto ack = conn.receive(timeout_s);
  if (!ack || ack->type != FrameType::kRegisterAck) {
    throw NetError("no registration ack from " + server.str());
  }
  nlohmann::json j = payload_json(*ack);
  if (!j.value("ok", false)) {
    throw RegistryError(j.value("error", std::string("REGISTER_FAILED")),
                        j.value("message", std::string("registration rejected")));
  }
  return j.at("clone_id").get<std::string>();
}

namespace {
std::atomic<bool> g_signalled{false};
void on_signal(int) { g_signalled = true; }
}  // namespace

int run_broker_from_config(const std::string& config_path) {
  std::ifstream in(config_path);
  if (!in) {
    std::cerr << "cannot read config " << config_path << "\n";
    return 3;
  }
  nlohmann::json j = nlohmann::json::parse(in);
  FogMQServer server(ServerConfig::from_json(j));
  server.start();
  std::cout << "fogmq server " << server.config().server_id << " listening on "
            << server.endpoint().str() << std::endl;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  double last_tick = FogMQServer::now_s();
  while (!g_signalled) {
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
    if (FogMQServer::now_s() - last_tick >= server.config().tick_period_s) {
      last_tick = FogMQServer::now_s();
      for (const auto& r : server.flock_tick()) {
        std::cout << "migration " << r.device_id << " -> " << r.to_server
                  << (r.ok ? " ok" : " failed: " + r.error) << std::endl;
      }
    }
  }
  server.stop();
  return 0;
}

}  // namespace fogmq::broker
