#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace fogmq::broker {

/// Sliding-window message-rate estimator: fixed-width time buckets (default
/// 1 s) over a bounded window (default 60 s). All methods take explicit
/// timestamps in seconds, so tests can drive a virtual clock.
class RateWindow {
public:
  explicit RateWindow(double window_s = 60.0, double bucket_s = 1.0);

  void record(double now_s, std::uint64_t count = 1);

  /// Messages per second over the part of the window that has elapsed
  /// (shorter horizon right after startup, full window afterwards).
  double rate(double now_s) const;

  nlohmann::json to_json() const;
  static RateWindow from_json(const nlohmann::json& j);

  double window_s() const { return window_s_; }
  double bucket_s() const { return bucket_s_; }

private:
  void evict(double now_s);

  double window_s_;
  double bucket_s_;
  double start_s_ = -1.0;  // first observation; bounds the startup horizon
  // (bucket index, count) pairs, oldest first; gaps mean empty buckets.
  std::deque<std::pair<std::int64_t, std::uint64_t>> buckets_;
};

/// Per-peer demand estimator for one clone. d_ij is symmetrized traffic:
/// (rate i->j + rate j->i) / 2, each direction measured locally.
class DemandMonitor {
public:
  explicit DemandMonitor(double window_s = 60.0, double bucket_s = 1.0);

  void record_sent(const std::string& peer, double now_s,
                   std::uint64_t count = 1);
  void record_received(const std::string& peer, double now_s,
                       std::uint64_t count = 1);

  /// d_ij estimate for one peer at `now_s`; 0 for unknown peers.
  double demand(const std::string& peer, double now_s) const;

  /// All peers with any recorded traffic.
  std::map<std::string, double> demands(double now_s) const;

  nlohmann::json to_json() const;
  static DemandMonitor from_json(const nlohmann::json& j);

private:
  struct Pair {
    RateWindow sent;
    RateWindow received;
  };
  double window_s_;
  double bucket_s_;
  std::map<std::string, Pair> peers_;
};

/// Streaming quantile estimator over positive samples using geometric
/// buckets with ~1% width, which bounds the relative error of any reported
/// quantile by half a bucket (< 0.5%). Mergeable and serializable.
class QuantileEstimator {
public:
  explicit QuantileEstimator(double growth = 1.01, double min_value = 1e-9);

  void record(double value);
  std::uint64_t count() const { return count_; }

  /// Inverse CDF at q in [0,1]; 0 when empty. Returns the geometric midpoint
  /// of the bucket containing the q-th sample.
  double quantile(double q) const;
  double p99() const { return quantile(0.99); }

  void merge(const QuantileEstimator& other);

  nlohmann::json to_json() const;
  static QuantileEstimator from_json(const nlohmann::json& j);

private:
  std::int64_t bucket_of(double value) const;
  double bucket_midpoint(std::int64_t b) const;

  double growth_;
  double log_growth_;
  double min_value_;
  std::uint64_t count_ = 0;
  std::uint64_t underflow_ = 0;  // samples <= min_value
  std::map<std::int64_t, std::uint64_t> buckets_;
};

/// Exponentially weighted moving average of one-way latency derived from
/// round-trip probes (RTT / 2).
class EwmaLatency {
public:
  explicit EwmaLatency(double alpha = 0.2);

  void record_rtt_ms(double rtt_ms);
  bool has_value() const { return samples_ > 0; }
  double one_way_ms() const { return value_ms_; }
  std::uint64_t samples() const { return samples_; }

  nlohmann::json to_json() const;
  static EwmaLatency from_json(const nlohmann::json& j);

private:
  double alpha_;
  double value_ms_ = 0.0;
  std::uint64_t samples_ = 0;
};

}  // namespace fogmq::broker
