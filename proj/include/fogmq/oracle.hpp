#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "fogmq/flock.hpp"

namespace fogmq {

/// Raised when m^n exceeds the enumeration cap.
class CapExceeded : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::uint64_t kDefaultEnumerationCap = 10'000'000;

/// Exhaustive minimum of the social cost over all m^n assignments.
/// Ties break toward the lexicographically smallest assignment (mixed-radix
/// order over clone indices), so the result is deterministic.
std::pair<Assignment, double> brute_force_optimum(
    const Instance& inst, const RegularizationParams& params,
    std::uint64_t cap = kDefaultEnumerationCap);

/// All assignments with no unilateral deviation passing the migration
/// condition at threshold eta, in mixed-radix enumeration order. eta = 1
/// gives the exact pure Nash equilibria; eta < 1 gives the fixed points of
/// the thresholded protocol (a superset).
std::vector<Assignment> enumerate_equilibria(
    const Instance& inst, const RegularizationParams& params, double eta = 1.0,
    std::uint64_t cap = kDefaultEnumerationCap);

struct PoaReport {
  double optimal_cost = 0.0;
  double flock_cost = 0.0;
  double poa = 1.0;               // flock_cost / optimal_cost, worst trial
  double raw_poa = 1.0;           // same ratio on unregularized sum of u_i
  Assignment optimal_assignment;
  Assignment worst_assignment;
  int worst_trial = -1;
  int trials = 0;
};

/// Runs Flock from `trials` seeded random initial assignments and reports the
/// worst equilibrium-to-optimum cost ratio.
PoaReport price_of_anarchy(const Instance& inst,
                           const RegularizationParams& params,
                           const FlockConfig& flock_config, int trials,
                           std::uint64_t cap = kDefaultEnumerationCap);

/// Unregularized objective sum_i u_i(x_i); used for the secondary PoA figure.
double raw_latency_cost(const Instance& inst, const Assignment& sigma);

/// Uniform random assignment, resampled while any cloud is overloaded.
/// Campaign entry points start from these so they measure convergence rather
/// than saturation deadlocks, which the strict migration rule cannot leave.
Assignment random_unsaturated_assignment(const Instance& inst,
                                         std::mt19937_64& rng);

}  // namespace fogmq
