#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <nlohmann/json.hpp>

#include "fogmq/broker/monitors.hpp"

using namespace fogmq::broker;
using doctest::Approx;

TEST_CASE("rate window basics on a virtual clock") {
  RateWindow w(60.0, 1.0);
  CHECK(w.rate(0.0) == 0.0);
  // 10 events in one second -> 10/s while the horizon is that second.
  for (int i = 0; i < 10; ++i) w.record(0.05 * i);
  CHECK(w.rate(1.0) == Approx(10.0));
  // After the window passes with no traffic the rate decays to zero.
  CHECK(w.rate(100.0) == Approx(0.0));
}

TEST_CASE("rate window tracks a steady source within 15%") {
  // Poisson arrivals at rate r for 5 virtual minutes.
  std::mt19937_64 rng(11);
  for (double r : {2.0, 10.0, 40.0}) {
    RateWindow w(60.0, 1.0);
    std::exponential_distribution<double> gap(r);
    double t = 0.0;
    while (t < 300.0) {
      t += gap(rng);
      w.record(t);
    }
    double estimate = w.rate(300.0);
    CHECK(std::abs(estimate - r) / r < 0.15);
  }
}

TEST_CASE("demand monitor symmetrizes directions") {
  DemandMonitor m(60.0, 1.0);
  SUBCASE("idle pair reports zero") {
    CHECK(m.demand("peer", 100.0) == 0.0);
  }
  SUBCASE("one-directional traffic at rate r reports r/2") {
    // 60 messages over 60 s, received only.
    for (int i = 0; i < 60; ++i) m.record_received("peer", i + 0.5);
    CHECK(m.demand("peer", 60.0) == Approx(0.5).epsilon(0.05));
  }
  SUBCASE("symmetric traffic reports the common rate") {
    for (int i = 0; i < 60; ++i) {
      m.record_sent("peer", i + 0.25);
      m.record_received("peer", i + 0.75);
    }
    CHECK(m.demand("peer", 60.0) == Approx(1.0).epsilon(0.05));
    auto all = m.demands(60.0);
    REQUIRE(all.size() == 1);
    CHECK(all.at("peer") == Approx(1.0).epsilon(0.05));
  }
}

TEST_CASE("demand monitor serialization preserves estimates") {
  DemandMonitor m(60.0, 1.0);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> t(0.0, 120.0);
  for (int i = 0; i < 500; ++i) m.record_sent("a", t(rng));
  for (int i = 0; i < 200; ++i) m.record_received("b", t(rng));
  DemandMonitor copy = DemandMonitor::from_json(m.to_json());
  for (double now : {100.0, 130.0, 200.0}) {
    CHECK(copy.demand("a", now) == Approx(m.demand("a", now)));
    CHECK(copy.demand("b", now) == Approx(m.demand("b", now)));
  }
}

TEST_CASE("streaming p99 stays within 5% of the exact offline quantile") {
  std::mt19937_64 rng(17);
  SUBCASE("lognormal latencies") {
    std::lognormal_distribution<double> dist(2.0, 1.0);
    QuantileEstimator est;
    std::vector<double> all;
    for (int i = 0; i < 100'000; ++i) {
      double x = dist(rng);
      est.record(x);
      all.push_back(x);
    }
    std::sort(all.begin(), all.end());
    double exact = all[static_cast<std::size_t>(0.99 * all.size()) - 1];
    CHECK(std::abs(est.p99() - exact) / exact < 0.05);
  }
  SUBCASE("heavy uniform mix") {
    std::uniform_real_distribution<double> base(1.0, 10.0);
    std::uniform_real_distribution<double> tail(100.0, 1000.0);
    std::bernoulli_distribution is_tail(0.02);
    QuantileEstimator est;
    std::vector<double> all;
    for (int i = 0; i < 100'000; ++i) {
      double x = is_tail(rng) ? tail(rng) : base(rng);
      est.record(x);
      all.push_back(x);
    }
    std::sort(all.begin(), all.end());
    double exact = all[static_cast<std::size_t>(0.99 * all.size()) - 1];
    CHECK(std::abs(est.p99() - exact) / exact < 0.05);
  }
}

TEST_CASE("quantile estimator edge cases") {
  QuantileEstimator est;
  CHECK(est.quantile(0.5) == 0.0);  // empty
  est.record(5.0);
  CHECK(est.quantile(0.0) == Approx(5.0).epsilon(0.01));
  CHECK(est.quantile(1.0) == Approx(5.0).epsilon(0.01));
  CHECK_THROWS(QuantileEstimator(1.0));
  CHECK_THROWS(QuantileEstimator(1.01, 0.0));
}

TEST_CASE("quantile estimator merge and serialization are lossless") {
  std::mt19937_64 rng(23);
  std::lognormal_distribution<double> dist(1.0, 0.8);
  QuantileEstimator a, b, whole;
  for (int i = 0; i < 20'000; ++i) {
    double x = dist(rng);
    (i % 2 ? a : b).record(x);
    whole.record(x);
  }
  a.merge(b);
  CHECK(a.count() == whole.count());
  CHECK(a.p99() == Approx(whole.p99()));
  QuantileEstimator restored = QuantileEstimator::from_json(a.to_json());
  CHECK(restored.count() == a.count());
  for (double q : {0.5, 0.9, 0.99, 0.999}) {
    CHECK(restored.quantile(q) == Approx(a.quantile(q)));
  }
  QuantileEstimator other(1.05);
  CHECK_THROWS(other.merge(a));
}

TEST_CASE("ewma latency halves round trips and converges") {
  EwmaLatency e(0.2);
  CHECK(!e.has_value());
  e.record_rtt_ms(10.0);
  CHECK(e.one_way_ms() == Approx(5.0));
  for (int i = 0; i < 100; ++i) e.record_rtt_ms(20.0);
  CHECK(e.one_way_ms() == Approx(10.0).epsilon(0.01));
  EwmaLatency restored = EwmaLatency::from_json(e.to_json());
  CHECK(restored.one_way_ms() == Approx(e.one_way_ms()));
  CHECK(restored.samples() == e.samples());
  CHECK_THROWS(EwmaLatency(0.0));
}
