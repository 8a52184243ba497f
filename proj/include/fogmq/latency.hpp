#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "fogmq/core.hpp"

namespace fogmq {

/// Overloaded clouds (load >= capacity) saturate: the value participates in
/// comparisons as +infinity, so the migration rule never selects one.
inline constexpr double kSaturated = std::numeric_limits<double>::infinity();

inline bool is_saturated(double v) { return std::isinf(v); }

/// Parameters of the regularization f(w) = exp(-1/(w+a)), bounded in
/// (alpha, 1) for any alpha <= exp(-1/a).
struct RegularizationParams {
  double a = 9.0;
  double alpha = 1e-3;

  void check() const;
};

double cloud_load(const Instance& inst, const Assignment& sigma,
                  std::size_t cloud);

/// rho(x) = delta * L / (gamma(x) - L); kSaturated when L >= gamma(x).
double processing_delay(const Instance& inst, const Assignment& sigma,
                        std::size_t cloud);

/// l(x_i, x_j) = tau(x_i, x_j) + rho(x_i) + rho(x_j).
double end_to_end_latency(const Instance& inst, const Assignment& sigma,
                          std::size_t clone_i, std::size_t clone_j);

/// u_i(y): clone i's demand-weighted latency to its peers as if it were
/// hosted at `candidate_cloud`, with every other clone fixed. The hypothetical
/// placement shifts i's load onto the candidate and off its current host
/// before any rho is evaluated.
double clone_cost(const Instance& inst, const Assignment& sigma,
                  std::size_t clone_i, std::size_t candidate_cloud);

/// w_x = sum of clone_cost of hosted clones at their current host.
double cloud_weight(const Instance& inst, const Assignment& sigma,
                    std::size_t cloud);

/// f(w) = exp(-1/(w+a)).
double regularize(const RegularizationParams& params, double w);

/// C(sigma) = sum_x w_x f(w_x); +infinity when any cloud is saturated.
double social_cost(const Instance& inst, const Assignment& sigma,
                   const RegularizationParams& params);

struct SmoothnessReport {
  bool pass = false;
  double lambda = 0.0;
  double epsilon = 0.0;
  double poa_bound = 0.0;          // lambda / (1 - epsilon)
  // Worst violating (w, w*) pair when pass is false.
  double worst_w = 0.0;
  double worst_w_star = 0.0;
  double worst_gap = 0.0;          // lhs - rhs at the worst pair
};

/// Checks w* f(w+w*) <= lambda w* f(w*) + eps w f(w) at every grid point.
SmoothnessReport check_smoothness(
    const RegularizationParams& params, double lambda, double epsilon,
    const std::vector<std::pair<double, double>>& grid);

/// Searches a (lambda, epsilon) pair minimizing lambda/(1-epsilon) over a
/// uniform grid w, w* in (0, w_max] with the given step.
SmoothnessReport find_smoothness_certificate(const RegularizationParams& params,
                                             double w_max, double step);

namespace detail {

/// Per-cloud loads for a full assignment; reusable scratch for hot loops.
void compute_loads(const Instance& inst, const std::vector<std::size_t>& host,
                   std::vector<double>& loads);

/// Social cost from precomputed loads; avoids re-walking the edge list per
/// cloud. Used by the brute-force oracle.
double social_cost_fast(const Instance& inst,
                        const std::vector<std::size_t>& host,
                        const RegularizationParams& params,
                        std::vector<double>& loads_scratch,
                        std::vector<double>& rho_scratch,
                        std::vector<double>& weight_scratch);

}  // namespace detail

}  // namespace fogmq
