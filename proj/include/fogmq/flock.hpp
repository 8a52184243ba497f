#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "fogmq/latency.hpp"

namespace fogmq {

enum class FlockMode { kSequential, kParallel };
enum class StrategyProvider { kFull, kGossip };

struct FlockConfig {
  RegularizationParams params;
  double eta = 0.9;
  FlockMode mode = FlockMode::kSequential;
  int max_rounds = 10000;
  std::uint64_t seed = 0;
  StrategyProvider provider = StrategyProvider::kFull;
  // Gossip-derived candidate clouds, by cloud index; only consulted when
  // provider is kGossip. The current host is always a candidate.
  std::vector<std::size_t> gossip_view;

  void check() const;
};

struct Migration {
  std::size_t clone;
  std::size_t from_cloud;
  std::size_t to_cloud;
};

struct RoundLog {
  int round = 0;
  std::vector<Migration> migrations;
  double social_cost_after = 0.0;
};

struct FlockResult {
  Assignment final_assignment;
  int rounds = 0;
  bool converged = false;
  std::vector<RoundLog> log;

  nlohmann::json to_json(const Instance& inst) const;
};

/// A_i: the clouds clone i may consider. Always contains the current host.
std::vector<std::size_t> strategy_set(const Instance& inst,
                                      const Assignment& sigma,
                                      std::size_t clone_i,
                                      const FlockConfig& config);

/// The migration rule on already-computed terms:
///   u_y * f(w_y + u_y) <= eta * u_x * f(w_x - u_x)
/// A saturated target is never accepted; a saturated current host accepts any
/// finite target. This is the single copy of the rule; the broker feeds it
/// measured values.
bool accept_migration_terms(const RegularizationParams& params, double eta,
                            double u_current, double w_current,
                            double u_target, double w_target);

/// Evaluates the rule for clone_i moving to target_y under the current
/// assignment. Self-moves are rejected without evaluating the condition.
bool migration_accepted(const Instance& inst, const Assignment& sigma,
                        const RegularizationParams& params, double eta,
                        std::size_t clone_i, std::size_t target_y);

/// One round of the protocol. kSequential visits clones in a seeded random
/// permutation and applies accepted moves immediately; kParallel evaluates
/// every clone against a round-start snapshot and applies all accepted moves
/// at the end.
RoundLog run_round(const Instance& inst, Assignment& sigma,
                   const FlockConfig& config, std::mt19937_64& rng,
                   int round_index);

FlockResult run_to_equilibrium(const Instance& inst, const Assignment& initial,
                               const FlockConfig& config);

struct DeviationWitness {
  std::size_t clone;
  std::size_t target_cloud;
  double current_term;   // u_i(x) f(w_x - u_i(x))
  double deviation_term; // u_i(y) f(w_y + u_i(y))
};

/// Returns a witness iff some clone has a unilateral deviation passing the
/// migration condition at the given threshold. eta = 1 is the exact Nash
/// check (strict improvement); eta < 1 characterizes the fixed points of the
/// thresholded protocol, a superset of the eta = 1 equilibria.
std::optional<DeviationWitness> find_improving_deviation(
    const Instance& inst, const Assignment& sigma,
    const RegularizationParams& params, double eta = 1.0);

inline bool is_nash_equilibrium(const Instance& inst, const Assignment& sigma,
                                const RegularizationParams& params,
                                double eta = 1.0) {
  return !find_improving_deviation(inst, sigma, params, eta).has_value();
}

}  // namespace fogmq
