#include "fogmq/broker/device.hpp"

#include <chrono>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "fogmq/broker/registry.hpp"
#include "fogmq/broker/server.hpp"

namespace fogmq::broker {

DeviceEmulator::DeviceEmulator(std::string device_id, std::uint64_t seed)
    : device_id_(std::move(device_id)),
      rng_(seed ^ std::hash<std::string>{}(device_id_)) {}

DeviceEmulator::~DeviceEmulator() { stop(); }

void DeviceEmulator::start() {
  if (running_.exchange(true)) return;
  publish_listener_ =
      std::make_unique<Listener>(Endpoint::parse("127.0.0.1:0"));
  push_listener_ = std::make_unique<Listener>(Endpoint::parse("127.0.0.1:0"));
  publish_accept_thread_ = std::thread([this] { accept_publish_loop(); });
  push_accept_thread_ = std::thread([this] { accept_push_loop(); });
}

void DeviceEmulator::stop() {
  if (!running_.exchange(false)) return;
  stop_publishing();
  if (publish_listener_) publish_listener_->close();
  if (push_listener_) push_listener_->close();
  if (publish_accept_thread_.joinable()) publish_accept_thread_.join();
  if (push_accept_thread_.joinable()) push_accept_thread_.join();
  {
    std::lock_guard lock(subs_mutex_);
    for (auto& conn : subscribers_) conn->close();
    subscribers_.clear();
  }
  std::vector<std::thread> readers;
  {
    std::lock_guard lock(push_threads_mutex_);
    readers.swap(push_reader_threads_);
  }
  for (auto& t : readers) {
    if (t.joinable()) t.join();
  }
}

std::string DeviceEmulator::publish_endpoint() const {
  return publish_listener_->endpoint().str();
}

std::string DeviceEmulator::push_endpoint() const {
  return push_listener_->endpoint().str();
}

void DeviceEmulator::accept_publish_loop() {
  while (running_) {
    std::optional<Connection> conn;
    try {
      conn = publish_listener_->accept(0.2);
    } catch (const NetError&) {
      break;
    }
    if (!conn) continue;
    std::lock_guard lock(subs_mutex_);
    subscribers_.push_back(std::make_shared<Connection>(std::move(*conn)));
  }
}

void DeviceEmulator::accept_push_loop() {
  while (running_) {
    std::optional<Connection> conn;
    try {
      conn = push_listener_->accept(0.2);
    } catch (const NetError&) {
      break;
    }
    if (!conn) continue;
    auto shared = std::make_shared<Connection>(std::move(*conn));
    std::lock_guard lock(push_threads_mutex_);
    push_reader_threads_.emplace_back(
        [this, shared] { push_reader_loop(shared); });
  }
}

void DeviceEmulator::push_reader_loop(std::shared_ptr<Connection> conn) {
  try {
    while (running_) {
      auto frame = conn->receive(0.2);
      if (!frame) continue;
      if (frame->type != FrameType::kPush) continue;
      nlohmann::json msg = payload_json(*frame);
      std::string source = msg.at("device_id").get<std::string>();
      std::uint64_t seq = msg.at("seq").get<std::uint64_t>();
      double now = FogMQServer::now_s();
      std::lock_guard lock(audit_mutex_);
      ReceiptRecord& r = received_[source][seq];
      if (r.count == 0) r.t_first_s = now;
      if (++r.count > 1) ++duplicates_;
    }
  } catch (const std::exception&) {
    // Clone hung up (e.g. it migrated); the replacement dials a new
    // connection, so this reader just ends.
  }
}

std::uint64_t DeviceEmulator::publish_now() {
  nlohmann::json msg;
  double now = FogMQServer::now_s();
  std::uint64_t seq;
  {
    std::lock_guard lock(audit_mutex_);
    seq = next_seq_++;
  }
  msg = {{"device_id", device_id_}, {"seq", seq}, {"t_sent_s", now}};
  Frame frame = make_frame(FrameType::kPublish, msg);
  bool delivered = false;
  {
    std::lock_guard lock(subs_mutex_);
    for (auto it = subscribers_.begin(); it != subscribers_.end();) {
      try {
        (*it)->send(frame);
        delivered = true;
        ++it;
      } catch (const NetError&) {
        (*it)->close();
        it = subscribers_.erase(it);
      }
    }
  }
  std::lock_guard lock(audit_mutex_);
  published_.push_back({seq, now, delivered});
  return seq;
}

void DeviceEmulator::start_publishing(double mean_interval_s) {
  if (publishing_.exchange(true)) return;
  publisher_thread_ =
      std::thread([this, mean_interval_s] { publisher_loop(mean_interval_s); });
}

void DeviceEmulator::stop_publishing() {
  if (!publishing_.exchange(false)) return;
  if (publisher_thread_.joinable()) publisher_thread_.join();
}

void DeviceEmulator::publisher_loop(double mean_interval_s) {
  std::exponential_distribution<double> next(1.0 / mean_interval_s);
  while (publishing_ && running_) {
    double wait = next(rng_);
    auto deadline = std::chrono::steady_clock::now() +
                    std::chrono::duration<double>(wait);
    while (publishing_ && std::chrono::steady_clock::now() < deadline) {
      std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
    if (!publishing_) break;
    publish_now();
  }
}

std::size_t DeviceEmulator::subscriber_count() const {
  std::lock_guard lock(subs_mutex_);
  return subscribers_.size();
}

std::vector<DeviceEmulator::PublishRecord> DeviceEmulator::published() const {
  std::lock_guard lock(audit_mutex_);
  return published_;
}

std::map<std::string, std::map<std::uint64_t, DeviceEmulator::ReceiptRecord>>
DeviceEmulator::received() const {
  std::lock_guard lock(audit_mutex_);
  return received_;
}

std::uint64_t DeviceEmulator::duplicate_deliveries() const {
  std::lock_guard lock(audit_mutex_);
  return duplicates_;
}

// ---------------------------------------------------------------------------

int run_device_sim(const std::string& registry_addr, int devices,
                   const std::string& graph_spec, const std::string& rate_spec,
                   double duration_s, std::uint64_t seed) {
  if (devices <= 0) throw std::invalid_argument("need at least one device");
  double edge_prob = 0.3;
  if (graph_spec.rfind("binomial:", 0) == 0) {
    edge_prob = std::stod(graph_spec.substr(9));
  } else {
    throw std::invalid_argument("graph must be binomial:p, got " + graph_spec);
  }
  double rate_lo = 1.0, rate_hi = 30.0;
  {
    std::istringstream ss(rate_spec);
    std::string lo, hi;
    if (std::getline(ss, lo, ':') && std::getline(ss, hi)) {
      rate_lo = std::stod(lo);
      rate_hi = std::stod(hi);
    } else {
      throw std::invalid_argument("rate-range must be lo:hi");
    }
  }
  Endpoint registrar = Endpoint::parse(registry_addr);
  std::mt19937_64 rng(seed);

  std::vector<std::unique_ptr<DeviceEmulator>> emulators;
  std::vector<std::vector<int>> peers(devices);
  for (int i = 0; i < devices; ++i) {
    emulators.push_back(std::make_unique<DeviceEmulator>(
        "dev" + std::to_string(i), seed + static_cast<std::uint64_t>(i)));
    emulators.back()->start();
  }
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  for (int i = 0; i < devices; ++i) {
    for (int j = i + 1; j < devices; ++j) {
      if (coin(rng) < edge_prob) {
        peers[i].push_back(j);
        peers[j].push_back(i);
      }
    }
  }
  for (int i = 0; i < devices; ++i) {
    DeviceRecord record;
    record.device_id = emulators[i]->device_id();
    record.publish_endpoint = emulators[i]->publish_endpoint();
    record.push_endpoint = emulators[i]->push_endpoint();
    for (int j : peers[i]) record.peer_ids.push_back("dev" + std::to_string(j));
    std::string clone_id = register_device_remote(registrar, record);
    std::cout << "registered " << record.device_id << " -> clone " << clone_id
              << "\n";
  }

  std::uniform_real_distribution<double> interval(rate_lo, rate_hi);
  for (auto& dev : emulators) dev->start_publishing(interval(rng));
  std::this_thread::sleep_for(std::chrono::duration<double>(duration_s));
  for (auto& dev : emulators) dev->stop_publishing();
  // Let in-flight deliveries settle before auditing.
  std::this_thread::sleep_for(std::chrono::seconds(2));

  std::uint64_t published_total = 0, received_total = 0, duplicates = 0,
                missing = 0;
  for (int i = 0; i < devices; ++i) {
    auto pubs = emulators[i]->published();
    published_total += pubs.size();
    for (int j : peers[i]) {
      auto recv = emulators[j]->received();
      auto it = recv.find(emulators[i]->device_id());
      for (const auto& p : pubs) {
        if (!p.had_subscriber) continue;
        bool got = it != recv.end() && it->second.contains(p.seq);
        if (got) {
          ++received_total;
        } else {
          ++missing;
        }
      }
    }
    duplicates += emulators[i]->duplicate_deliveries();
  }
  for (auto& dev : emulators) dev->stop();
  std::cout << "published=" << published_total
            << " pair_deliveries=" << received_total << " missing=" << missing
            << " duplicates=" << duplicates << "\n";
  return duplicates == 0 ? 0 : 4;
}

}  // namespace fogmq::broker
