#include "fogmq/flock.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace fogmq {

void FlockConfig::check() const {
  params.check();
  if (!(eta > 0.0) || !(eta <= 1.0)) {
    throw std::invalid_argument("eta must be in (0, 1]");
  }
  if (max_rounds <= 0) {
    throw std::invalid_argument("max_rounds must be positive");
  }
}

std::vector<std::size_t> strategy_set(const Instance& inst,
                                      const Assignment& sigma,
                                      std::size_t clone_i,
                                      const FlockConfig& config) {
  if (config.provider == StrategyProvider::kFull) {
    std::vector<std::size_t> all(inst.num_clouds());
    std::iota(all.begin(), all.end(), 0);
    return all;
  }
  std::vector<std::size_t> view = config.gossip_view;
  std::size_t host = sigma.host(clone_i);
  if (std::find(view.begin(), view.end(), host) == view.end()) {
    view.push_back(host);
  }
  return view;
}

bool accept_migration_terms(const RegularizationParams& params, double eta,
                            double u_current, double w_current,
                            double u_target, double w_target) {
  if (is_saturated(u_target)) return false;
  if (is_saturated(u_current)) return true;
  double lhs = u_target * regularize(params, w_target + u_target);
  double rhs = eta * u_current * regularize(params, w_current - u_current);
  // Strict improvement: an exactly equal regularized cost (notably the
  // zero-demand clone, 0 vs 0) does not trigger a migration.
  return lhs < rhs;
}

namespace {

struct MoveTerms {
  double u_current, w_current, u_target, w_target;
};

// u_i and cloud weights for a candidate move, in one pass over the instance.
// Weights are the current ones (the clone subtracts/adds its own term per the
// rule); u_target is hypothetical, with i's load already shifted.
MoveTerms evaluate_move(const Instance& inst, const Assignment& sigma,
                        std::size_t clone_i, std::size_t target_y) {
  const std::size_t m = inst.num_clouds();
  const std::size_t x = sigma.host(clone_i);

  std::vector<double> loads;
  detail::compute_loads(inst, sigma.hosts(), loads);
  std::vector<double> rho(m);
  for (std::size_t c = 0; c < m; ++c) {
    double L = loads[c];
    double g = inst.capacity(c);
    rho[c] = (L >= g) ? kSaturated : (L == 0.0 ? 0.0 : inst.delta() * L / (g - L));
  }

  std::vector<double> weight(m, 0.0);
  double u_x = 0.0;
  for (const auto& e : inst.demands().edges()) {
    std::size_t i = *inst.clone_index(e.a);
    std::size_t j = *inst.clone_index(e.b);
    std::size_t xi = sigma.host(i), xj = sigma.host(j);
    double l = inst.tau(xi, xj) + rho[xi] + rho[xj];
    weight[xi] += e.demand * l;
    weight[xj] += e.demand * l;
    if (i == clone_i || j == clone_i) u_x += e.demand * l;
  }

  // Hypothetical cost at the target with i's load shifted off x onto y.
  double shifted_x = loads[x] - inst.clone_demand(clone_i);
  double shifted_y = loads[target_y] +
                     (target_y == x ? 0.0 : inst.clone_demand(clone_i));
  auto rho_of = [&](std::size_t c) {
    double L = loads[c];
    if (c == x) L = shifted_x;
    if (c == target_y) L = (target_y == x) ? loads[x] : shifted_y;
    double g = inst.capacity(c);
    return (L >= g) ? kSaturated : (L == 0.0 ? 0.0 : inst.delta() * L / (g - L));
  };
  double rho_y = rho_of(target_y);
  double u_y = 0.0;
  if (is_saturated(rho_y)) {
    u_y = kSaturated;
  } else {
    for (const auto& [peer, demand] : inst.peers(clone_i)) {
      double rho_j = rho_of(sigma.host(peer));
      if (is_saturated(rho_j)) {
        u_y = kSaturated;
        break;
      }
      u_y += demand * (inst.tau(target_y, sigma.host(peer)) + rho_y + rho_j);
    }
  }
  return {u_x, weight[x], u_y, weight[target_y]};
}

}  // namespace

bool migration_accepted(const Instance& inst, const Assignment& sigma,
                        const RegularizationParams& params, double eta,
                        std::size_t clone_i, std::size_t target_y) {
  if (target_y == sigma.host(clone_i)) return false;
  MoveTerms t = evaluate_move(inst, sigma, clone_i, target_y);
  return accept_migration_terms(params, eta, t.u_current, t.w_current,
                                t.u_target, t.w_target);
}

RoundLog run_round(const Instance& inst, Assignment& sigma,
                   const FlockConfig& config, std::mt19937_64& rng,
                   int round_index) {
  RoundLog log;
  log.round = round_index;

  auto sample_target = [&](const std::vector<std::size_t>& set) {
    return set[std::uniform_int_distribution<std::size_t>(0, set.size() - 1)(rng)];
  };

  if (config.mode == FlockMode::kSequential) {
    std::vector<std::size_t> order(inst.num_clones());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i : order) {
      auto set = strategy_set(inst, sigma, i, config);
      std::size_t y = sample_target(set);
      if (migration_accepted(inst, sigma, config.params, config.eta, i, y)) {
        log.migrations.push_back({i, sigma.host(i), y});
        sigma.set_host(i, y);
      }
    }
  } else {
    // Paper-literal parallel round: every clone decides against the
    // round-start snapshot, then all accepted moves land together.
    Assignment snapshot = sigma;
    std::vector<Migration> accepted;
    for (std::size_t i = 0; i < inst.num_clones(); ++i) {
      auto set = strategy_set(inst, snapshot, i, config);
      std::size_t y = sample_target(set);
      if (migration_accepted(inst, snapshot, config.params, config.eta, i, y)) {
        accepted.push_back({i, snapshot.host(i), y});
      }
    }
    for (const auto& mv : accepted) {
      sigma.set_host(mv.clone, mv.to_cloud);
    }
    log.migrations = std::move(accepted);
  }
  log.social_cost_after = social_cost(inst, sigma, config.params);
  return log;
}

FlockResult run_to_equilibrium(const Instance& inst, const Assignment& initial,
                               const FlockConfig& config) {
  config.check();
  FlockResult result;
  result.final_assignment = initial;
  std::mt19937_64 rng(config.seed);

  // Convergence sweep at the run's own threshold: the terminal states of
  // the thresholded protocol are its fixed points, not the eta=1 equilibria
  // (any residual deviation improves by a factor in (eta, 1)).
  if (is_nash_equilibrium(inst, result.final_assignment, config.params,
                          config.eta)) {
    result.converged = true;
    result.rounds = 0;
    return result;
  }
  for (int round = 1; round <= config.max_rounds; ++round) {
    result.log.push_back(
        run_round(inst, result.final_assignment, config, rng, round));
    result.rounds = round;
    if (is_nash_equilibrium(inst, result.final_assignment, config.params,
                            config.eta)) {
      result.converged = true;
      return result;
    }
  }
  result.converged = false;
  return result;
}

std::optional<DeviationWitness> find_improving_deviation(
    const Instance& inst, const Assignment& sigma,
    const RegularizationParams& params, double eta) {
  const std::size_t n = inst.num_clones();
  const std::size_t m = inst.num_clouds();
  if (n == 0 || m <= 1) return std::nullopt;

  std::vector<double> loads;
  detail::compute_loads(inst, sigma.hosts(), loads);
  std::vector<double> rho(m);
  for (std::size_t c = 0; c < m; ++c) {
    double L = loads[c], g = inst.capacity(c);
    rho[c] = (L >= g) ? kSaturated : (L == 0.0 ? 0.0 : inst.delta() * L / (g - L));
  }
  std::vector<double> weight(m, 0.0), u(n, 0.0);
  bool any_saturated = false;
  for (const auto& e : inst.demands().edges()) {
    std::size_t i = *inst.clone_index(e.a);
    std::size_t j = *inst.clone_index(e.b);
    std::size_t xi = sigma.host(i), xj = sigma.host(j);
    double l = inst.tau(xi, xj) + rho[xi] + rho[xj];
    if (is_saturated(l)) any_saturated = true;
    weight[xi] += e.demand * l;
    weight[xj] += e.demand * l;
    u[i] += e.demand * l;
    u[j] += e.demand * l;
  }

  for (std::size_t i = 0; i < n; ++i) {
    std::size_t x = sigma.host(i);
    double rhs;
    if (is_saturated(u[i])) {
      rhs = kSaturated;  // any finite deviation improves
    } else {
      if (u[i] == 0.0) continue;  // cannot strictly improve on zero
      rhs = eta * u[i] * regularize(params, weight[x] - u[i]);
    }
    double shifted_x = loads[x] - inst.clone_demand(i);
    for (std::size_t y = 0; y < m; ++y) {
      if (y == x) continue;
      double shifted_y = loads[y] + inst.clone_demand(i);
      auto rho_h = [&](std::size_t c) {
        double L = loads[c];
        if (c == x) L = shifted_x;
        if (c == y) L = shifted_y;
        double g = inst.capacity(c);
        return (L >= g) ? kSaturated
                        : (L == 0.0 ? 0.0 : inst.delta() * L / (g - L));
      };
      double rho_y = rho_h(y);
      if (is_saturated(rho_y)) continue;
      double u_y = 0.0;
      bool sat = false;
      for (const auto& [peer, demand] : inst.peers(i)) {
        double rho_j = rho_h(sigma.host(peer));
        if (is_saturated(rho_j)) {
          sat = true;
          break;
        }
        u_y += demand * (inst.tau(y, sigma.host(peer)) + rho_y + rho_j);
      }
      if (sat) continue;
      double lhs = u_y * regularize(params, weight[y] + u_y);
      if (is_saturated(rhs) || lhs < rhs) {
        double cur = is_saturated(rhs) ? kSaturated : rhs;
        return DeviationWitness{i, y, cur, lhs};
      }
    }
  }
  (void)any_saturated;
  return std::nullopt;
}

nlohmann::json FlockResult::to_json(const Instance& inst) const {
  nlohmann::json j;
  j["converged"] = converged;
  j["rounds"] = rounds;
  j["final"] = nlohmann::json::object();
  for (const auto& [clone, cloud] : final_assignment.to_map(inst)) {
    j["final"][clone] = cloud;
  }
  j["log"] = nlohmann::json::array();
  for (const auto& r : log) {
    nlohmann::json jr = {{"round", r.round},
                         {"social_cost_after", r.social_cost_after},
                         {"migrations", nlohmann::json::array()}};
    for (const auto& mv : r.migrations) {
      jr["migrations"].push_back({{"clone", inst.clone(mv.clone).id},
                                  {"from", inst.cloud(mv.from_cloud).id},
                                  {"to", inst.cloud(mv.to_cloud).id}});
    }
    j["log"].push_back(std::move(jr));
  }
  return j;
}

}  // namespace fogmq
