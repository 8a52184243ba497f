#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "fogmq/broker/net.hpp"

namespace fogmq::broker {

/// An emulated publishing device: binds its own publish endpoint (clones
/// dial in and receive every publication) and a push endpoint (clones
/// deliver peer messages here). Keeps a full audit trail of what it
/// published and what it received, keyed by per-device sequence numbers.
class DeviceEmulator {
public:
  struct PublishRecord {
    std::uint64_t seq;
    double t_sent_s;
    bool had_subscriber;  // false while no clone was attached yet
  };
  struct ReceiptRecord {
    std::uint64_t count = 0;
    double t_first_s = 0.0;
  };

  explicit DeviceEmulator(std::string device_id, std::uint64_t seed = 0);
  ~DeviceEmulator();

  DeviceEmulator(const DeviceEmulator&) = delete;
  DeviceEmulator& operator=(const DeviceEmulator&) = delete;

  void start();
  void stop();

  const std::string& device_id() const { return device_id_; }
  std::string publish_endpoint() const;
  std::string push_endpoint() const;

  /// Emit one publication immediately; returns its sequence number.
  std::uint64_t publish_now();

  /// Background Poisson publishing with the given mean inter-arrival time.
  void start_publishing(double mean_interval_s);
  void stop_publishing();

  std::size_t subscriber_count() const;

  std::vector<PublishRecord> published() const;
  /// source device -> seq -> receipt info, as delivered to push_endpoint.
  std::map<std::string, std::map<std::uint64_t, ReceiptRecord>> received() const;
  std::uint64_t duplicate_deliveries() const;

private:
  void accept_publish_loop();
  void accept_push_loop();
  void push_reader_loop(std::shared_ptr<Connection> conn);
  void publisher_loop(double mean_interval_s);

  std::string device_id_;
  std::mt19937_64 rng_;
  std::atomic<bool> running_{false};
  std::atomic<bool> publishing_{false};

  std::unique_ptr<Listener> publish_listener_;
  std::unique_ptr<Listener> push_listener_;
  std::thread publish_accept_thread_;
  std::thread push_accept_thread_;
  std::thread publisher_thread_;
  std::vector<std::thread> push_reader_threads_;
  std::mutex push_threads_mutex_;

  mutable std::mutex subs_mutex_;
  std::vector<std::shared_ptr<Connection>> subscribers_;

  mutable std::mutex audit_mutex_;
  std::uint64_t next_seq_ = 1;
  std::vector<PublishRecord> published_;
  std::map<std::string, std::map<std::uint64_t, ReceiptRecord>> received_;
  std::uint64_t duplicates_ = 0;
};

/// CLI entry point: emulates `devices` publishing devices against a broker,
/// registers a binomial peer graph, runs Poisson traffic for `duration_s`,
/// then prints the sequence-delivery audit. Returns a process exit code.
int run_device_sim(const std::string& registry_addr, int devices,
                   const std::string& graph_spec, const std::string& rate_spec,
                   double duration_s, std::uint64_t seed);

}  // namespace fogmq::broker
