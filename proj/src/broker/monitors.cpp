#include "fogmq/broker/monitors.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace fogmq::broker {

RateWindow::RateWindow(double window_s, double bucket_s)
    : window_s_(window_s), bucket_s_(bucket_s) {
  if (!(window_s > 0.0) || !(bucket_s > 0.0) || bucket_s > window_s) {
    throw std::invalid_argument("window and bucket must satisfy 0 < bucket <= window");
  }
}

void RateWindow::evict(double now_s) {
  std::int64_t oldest =
      static_cast<std::int64_t>(std::floor((now_s - window_s_) / bucket_s_));
  while (!buckets_.empty() && buckets_.front().first <= oldest) {
    buckets_.pop_front();
  }
}

void RateWindow::record(double now_s, std::uint64_t count) {
  if (start_s_ < 0.0) start_s_ = now_s;
  evict(now_s);
  std::int64_t b = static_cast<std::int64_t>(std::floor(now_s / bucket_s_));
  if (!buckets_.empty() && buckets_.back().first == b) {
    buckets_.back().second += count;
  } else {
    buckets_.emplace_back(b, count);
  }
}

double RateWindow::rate(double now_s) const {
  if (start_s_ < 0.0) return 0.0;
  double horizon = std::min(window_s_, now_s - start_s_);
  if (horizon < bucket_s_) horizon = bucket_s_;
  std::int64_t oldest =
      static_cast<std::int64_t>(std::floor((now_s - window_s_) / bucket_s_));
  std::uint64_t total = 0;
  for (const auto& [bucket, count] : buckets_) {
    if (bucket > oldest) total += count;
  }
  return static_cast<double>(total) / horizon;
}

nlohmann::json RateWindow::to_json() const {
  nlohmann::json jb = nlohmann::json::array();
  for (const auto& [bucket, count] : buckets_) jb.push_back({bucket, count});
  return {{"window_s", window_s_},
          {"bucket_s", bucket_s_},
          {"start_s", start_s_},
          {"buckets", std::move(jb)}};
}

RateWindow RateWindow::from_json(const nlohmann::json& j) {
  RateWindow w(j.at("window_s").get<double>(), j.at("bucket_s").get<double>());
  w.start_s_ = j.at("start_s").get<double>();
  for (const auto& pair : j.at("buckets")) {
    w.buckets_.emplace_back(pair.at(0).get<std::int64_t>(),
                            pair.at(1).get<std::uint64_t>());
  }
  return w;
}

DemandMonitor::DemandMonitor(double window_s, double bucket_s)
    : window_s_(window_s), bucket_s_(bucket_s) {}

void DemandMonitor::record_sent(const std::string& peer, double now_s,
                                std::uint64_t count) {
  auto [it, inserted] = peers_.try_emplace(
      peer, Pair{RateWindow(window_s_, bucket_s_), RateWindow(window_s_, bucket_s_)});
  it->second.sent.record(now_s, count);
}

void DemandMonitor::record_received(const std::string& peer, double now_s,
                                    std::uint64_t count) {
  auto [it, inserted] = peers_.try_emplace(
      peer, Pair{RateWindow(window_s_, bucket_s_), RateWindow(window_s_, bucket_s_)});
  it->second.received.record(now_s, count);
}

double DemandMonitor::demand(const std::string& peer, double now_s) const {
  auto it = peers_.find(peer);
  if (it == peers_.end()) return 0.0;
  return (it->second.sent.rate(now_s) + it->second.received.rate(now_s)) / 2.0;
}

std::map<std::string, double> DemandMonitor::demands(double now_s) const {
  std::map<std::string, double> out;
  for (const auto& [peer, pair] : peers_) {
    out[peer] = (pair.sent.rate(now_s) + pair.received.rate(now_s)) / 2.0;
  }
  return out;
}

nlohmann::json DemandMonitor::to_json() const {
  nlohmann::json jp = nlohmann::json::object();
  for (const auto& [peer, pair] : peers_) {
    jp[peer] = {{"sent", pair.sent.to_json()},
                {"received", pair.received.to_json()}};
  }
  return {{"window_s", window_s_}, {"bucket_s", bucket_s_}, {"peers", std::move(jp)}};
}

DemandMonitor DemandMonitor::from_json(const nlohmann::json& j) {
  DemandMonitor m(j.at("window_s").get<double>(), j.at("bucket_s").get<double>());
  for (const auto& [peer, pj] : j.at("peers").items()) {
    m.peers_.emplace(peer, Pair{RateWindow::from_json(pj.at("sent")),
                                RateWindow::from_json(pj.at("received"))});
  }
  return m;
}

QuantileEstimator::QuantileEstimator(double growth, double min_value)
    : growth_(growth), log_growth_(std::log(growth)), min_value_(min_value) {
  if (!(growth > 1.0) || !(min_value > 0.0)) {
    throw std::invalid_argument("growth must exceed 1 and min_value be positive");
  }
}

std::int64_t QuantileEstimator::bucket_of(double value) const {
  return static_cast<std::int64_t>(
      std::floor(std::log(value / min_value_) / log_growth_));
}

double QuantileEstimator::bucket_midpoint(std::int64_t b) const {
  double lo = min_value_ * std::exp(log_growth_ * static_cast<double>(b));
  return lo * std::sqrt(growth_);  // geometric midpoint
}

void QuantileEstimator::record(double value) {
  ++count_;
  if (!(value > min_value_)) {
    ++underflow_;
    return;
  }
  ++buckets_[bucket_of(value)];
}

double QuantileEstimator::quantile(double q) const {
  if (count_ == 0) return 0.0;
  q = std::clamp(q, 0.0, 1.0);
  // Rank of the q-th order statistic, 1-based ceil so q=1 is the maximum.
  std::uint64_t rank = static_cast<std::uint64_t>(
      std::ceil(q * static_cast<double>(count_)));
  if (rank == 0) rank = 1;
  if (rank <= underflow_) return min_value_;
  std::uint64_t seen = underflow_;
  for (const auto& [bucket, n] : buckets_) {
    seen += n;
    if (seen >= rank) return bucket_midpoint(bucket);
  }
  return bucket_midpoint(buckets_.rbegin()->first);
}

void QuantileEstimator::merge(const QuantileEstimator& other) {
  if (other.growth_ != growth_ || other.min_value_ != min_value_) {
    throw std::invalid_argument("cannot merge estimators with different shapes");
  }
  count_ += other.count_;
  underflow_ += other.underflow_;
  for (const auto& [bucket, n] : other.buckets_) buckets_[bucket] += n;
}

nlohmann::json QuantileEstimator::to_json() const {
  nlohmann::json jb = nlohmann::json::array();
  for (const auto& [bucket, n] : buckets_) jb.push_back({bucket, n});
  return {{"growth", growth_},
          {"min_value", min_value_},
          {"count", count_},
          {"underflow", underflow_},
          {"buckets", std::move(jb)}};
}

QuantileEstimator QuantileEstimator::from_json(const nlohmann::json& j) {
  QuantileEstimator e(j.at("growth").get<double>(),
                      j.at("min_value").get<double>());
  e.count_ = j.at("count").get<std::uint64_t>();
  e.underflow_ = j.at("underflow").get<std::uint64_t>();
  for (const auto& pair : j.at("buckets")) {
    e.buckets_[pair.at(0).get<std::int64_t>()] = pair.at(1).get<std::uint64_t>();
  }
  return e;
}

EwmaLatency::EwmaLatency(double alpha) : alpha_(alpha) {
  if (!(alpha > 0.0) || alpha > 1.0) {
    throw std::invalid_argument("alpha must be in (0, 1]");
  }
}

void EwmaLatency::record_rtt_ms(double rtt_ms) {
  double one_way = rtt_ms / 2.0;
  if (samples_ == 0) {
    value_ms_ = one_way;
  } else {
    value_ms_ = alpha_ * one_way + (1.0 - alpha_) * value_ms_;
  }
  ++samples_;
}

nlohmann::json EwmaLatency::to_json() const {
  return {{"alpha", alpha_}, {"value_ms", value_ms_}, {"samples", samples_}};
}

EwmaLatency EwmaLatency::from_json(const nlohmann::json& j) {
  EwmaLatency e(j.at("alpha").get<double>());
  e.value_ms_ = j.at("value_ms").get<double>();
  e.samples_ = j.at("samples").get<std::uint64_t>();
  return e;
}

}  // namespace fogmq::broker
