#include "fogmq/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace fogmq {

namespace {

std::uint64_t checked_space_size(const Instance& inst, std::uint64_t cap) {
  std::uint64_t m = inst.num_clouds();
  std::uint64_t total = 1;
  for (std::size_t i = 0; i < inst.num_clones(); ++i) {
    if (total > cap / (m == 0 ? 1 : m)) {
      throw CapExceeded("assignment space m^n exceeds enumeration cap " +
                        std::to_string(cap));
    }
    total *= m;
  }
  if (total > cap) {
    throw CapExceeded("assignment space m^n exceeds enumeration cap " +
                      std::to_string(cap));
  }
  return total;
}

// Mixed-radix odometer over clone indices; clone 0 is the most significant
// digit so enumeration order matches lexicographic assignment order.
bool advance(std::vector<std::size_t>& host, std::size_t m) {
  for (std::size_t i = host.size(); i-- > 0;) {
    if (++host[i] < m) return true;
    host[i] = 0;
  }
  return false;
}

}  // namespace

Assignment random_unsaturated_assignment(const Instance& inst,
                                         std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, inst.num_clouds() - 1);
  for (int attempt = 0; attempt < 100; ++attempt) {
    std::vector<std::size_t> host(inst.num_clones());
    for (auto& h : host) h = pick(rng);
    Assignment sigma(std::move(host));
    bool saturated = false;
    for (std::size_t x = 0; x < inst.num_clouds() && !saturated; ++x) {
      saturated = cloud_load(inst, sigma, x) >= inst.capacity(x);
    }
    if (!saturated) return sigma;
  }
  // Tightly loaded instance: uniform draws keep overloading some cloud.
  // Fall back to an exact packing search: clones in descending demand order,
  // backtracking over clouds with enough strict headroom. Tight instances are
  // small in practice, and a node budget bounds the worst case.
  const std::size_t n = inst.num_clones();
  const std::size_t m = inst.num_clouds();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return inst.clone_demand(a) > inst.clone_demand(b);
  });
  std::vector<double> headroom(m);
  for (std::size_t x = 0; x < m; ++x) headroom[x] = inst.capacity(x);
  std::vector<double> suffix_demand(n + 1, 0.0);
  for (std::size_t k = n; k-- > 0;) {
    suffix_demand[k] = suffix_demand[k + 1] + inst.clone_demand(order[k]);
  }
  std::vector<std::size_t> host(n, 0);
  std::uint64_t budget = 5'000'000;
  auto place = [&](auto&& self, std::size_t k) -> bool {
    if (k == n) return true;
    if (budget-- == 0) return false;
    double total_headroom = 0.0;
    for (double h : headroom) total_headroom += h;
    if (suffix_demand[k] >= total_headroom) return false;
    double d = inst.clone_demand(order[k]);
    std::vector<std::size_t> clouds(m);
    std::iota(clouds.begin(), clouds.end(), 0);
    std::sort(clouds.begin(), clouds.end(), [&](std::size_t a, std::size_t b) {
      return headroom[a] > headroom[b];
    });
    for (std::size_t y : clouds) {
      if (headroom[y] <= d) continue;  // strict: load must stay below capacity
      headroom[y] -= d;
      host[order[k]] = y;
      if (self(self, k + 1)) return true;
      headroom[y] += d;
    }
    return false;
  };
  if (!place(place, 0)) {
    throw std::runtime_error(
        "could not construct an unsaturated initial assignment");
  }
  return Assignment(std::move(host));
}

double raw_latency_cost(const Instance& inst, const Assignment& sigma) {
  double total = 0.0;
  for (std::size_t i = 0; i < inst.num_clones(); ++i) {
    double u = clone_cost(inst, sigma, i, sigma.host(i));
    if (is_saturated(u)) return kSaturated;
    total += u;
  }
  return total;
}

std::pair<Assignment, double> brute_force_optimum(
    const Instance& inst, const RegularizationParams& params,
    std::uint64_t cap) {
  checked_space_size(inst, cap);
  std::vector<std::size_t> host(inst.num_clones(), 0);
  std::vector<std::size_t> best = host;
  std::vector<double> loads, rho, weight;
  double best_cost = detail::social_cost_fast(inst, host, params, loads, rho,
                                              weight);
  while (advance(host, inst.num_clouds())) {
    double c = detail::social_cost_fast(inst, host, params, loads, rho, weight);
    if (c < best_cost) {
      best_cost = c;
      best = host;
    }
  }
  return {Assignment(std::move(best)), best_cost};
}

std::vector<Assignment> enumerate_equilibria(const Instance& inst,
                                             const RegularizationParams& params,
                                             double eta, std::uint64_t cap) {
  checked_space_size(inst, cap);
  std::vector<Assignment> result;
  std::vector<std::size_t> host(inst.num_clones(), 0);
  do {
    Assignment sigma{std::vector<std::size_t>(host)};
    if (is_nash_equilibrium(inst, sigma, params, eta)) {
      result.push_back(std::move(sigma));
    }
  } while (advance(host, inst.num_clouds()));
  return result;
}

PoaReport price_of_anarchy(const Instance& inst,
                           const RegularizationParams& params,
                           const FlockConfig& flock_config, int trials,
                           std::uint64_t cap) {
  auto [opt, opt_cost] = brute_force_optimum(inst, params, cap);
  double opt_raw = raw_latency_cost(inst, opt);

  PoaReport report;
  report.optimal_cost = opt_cost;
  report.optimal_assignment = opt;
  report.trials = trials;
  report.poa = 0.0;

  for (int t = 0; t < trials; ++t) {
    // Per-trial RNG stream so results do not depend on trial scheduling.
    std::mt19937_64 init_rng(flock_config.seed * 0x9E3779B97F4A7C15ULL +
                             static_cast<std::uint64_t>(t) + 1);
    Assignment initial = random_unsaturated_assignment(inst, init_rng);
    FlockConfig cfg = flock_config;
    cfg.seed = init_rng();
    FlockResult run = run_to_equilibrium(inst, initial, cfg);
    double cost = social_cost(inst, run.final_assignment, params);
    double ratio = cost / opt_cost;
    if (ratio > report.poa) {
      report.poa = ratio;
      report.flock_cost = cost;
      report.worst_assignment = run.final_assignment;
      report.worst_trial = t;
      double raw = raw_latency_cost(inst, run.final_assignment);
      report.raw_poa = raw / opt_raw;
    }
  }
  return report;
}

}  // namespace fogmq
