#include "fogmq/latency.hpp"

#include <cmath>
#include <stdexcept>

namespace fogmq {

void RegularizationParams::check() const {
  if (!(a > 0.0) || !std::isfinite(a)) {
    throw std::invalid_argument("regularization constant a must be positive");
  }
  double bound = std::exp(-1.0 / a);
  if (!(alpha > 0.0) || !(alpha <= bound)) {
    throw std::invalid_argument(
        "alpha must satisfy 0 < alpha <= exp(-1/a)");
  }
}

namespace detail {

void compute_loads(const Instance& inst, const std::vector<std::size_t>& host,
                   std::vector<double>& loads) {
  loads.assign(inst.num_clouds(), 0.0);
  for (std::size_t i = 0; i < host.size(); ++i) {
    loads[host[i]] += inst.clone_demand(i);
  }
}

static double rho_of(double delta, double load, double gamma) {
  if (load >= gamma) return kSaturated;
  if (load == 0.0) return 0.0;
  return delta * load / (gamma - load);
}

double social_cost_fast(const Instance& inst,
                        const std::vector<std::size_t>& host,
                        const RegularizationParams& params,
                        std::vector<double>& loads,
                        std::vector<double>& rho,
                        std::vector<double>& weight) {
  compute_loads(inst, host, loads);
  rho.resize(inst.num_clouds());
  for (std::size_t x = 0; x < inst.num_clouds(); ++x) {
    rho[x] = rho_of(inst.delta(), loads[x], inst.capacity(x));
    if (is_saturated(rho[x])) return kSaturated;
  }
  weight.assign(inst.num_clouds(), 0.0);
  for (const auto& e : inst.demands().edges()) {
    std::size_t i = *inst.clone_index(e.a);
    std::size_t j = *inst.clone_index(e.b);
    std::size_t xi = host[i], xj = host[j];
    double l = inst.tau(xi, xj) + rho[xi] + rho[xj];
    weight[xi] += e.demand * l;
    weight[xj] += e.demand * l;
  }
  double cost = 0.0;
  for (std::size_t x = 0; x < inst.num_clouds(); ++x) {
    cost += weight[x] * regularize(params, weight[x]);
  }
  return cost;
}

}  // namespace detail

double cloud_load(const Instance& inst, const Assignment& sigma,
                  std::size_t cloud) {
  double load = 0.0;
  for (std::size_t i = 0; i < inst.num_clones(); ++i) {
    if (sigma.host(i) == cloud) load += inst.clone_demand(i);
  }
  return load;
}

double processing_delay(const Instance& inst, const Assignment& sigma,
                        std::size_t cloud) {
  return detail::rho_of(inst.delta(), cloud_load(inst, sigma, cloud),
                        inst.capacity(cloud));
}

double end_to_end_latency(const Instance& inst, const Assignment& sigma,
                          std::size_t clone_i, std::size_t clone_j) {
  std::size_t xi = sigma.host(clone_i), xj = sigma.host(clone_j);
  return inst.tau(xi, xj) + processing_delay(inst, sigma, xi) +
         processing_delay(inst, sigma, xj);
}

double clone_cost(const Instance& inst, const Assignment& sigma,
                  std::size_t clone_i, std::size_t candidate_cloud) {
  auto peers = inst.peers(clone_i);
  if (peers.empty()) return 0.0;

  std::vector<double> loads;
  detail::compute_loads(inst, sigma.hosts(), loads);
  // Hypothetical placement: i's load moves to the candidate first, so rho at
  // both the candidate and the vacated host reflect the move.
  std::size_t current = sigma.host(clone_i);
  if (candidate_cloud != current) {
    loads[current] -= inst.clone_demand(clone_i);
    loads[candidate_cloud] += inst.clone_demand(clone_i);
  }

  double rho_y = detail::rho_of(inst.delta(), loads[candidate_cloud],
                                inst.capacity(candidate_cloud));
  if (is_saturated(rho_y)) return kSaturated;

  double cost = 0.0;
  for (const auto& [peer, demand] : peers) {
    std::size_t xj = sigma.host(peer);
    double rho_j = detail::rho_of(inst.delta(), loads[xj], inst.capacity(xj));
    if (is_saturated(rho_j)) return kSaturated;
    cost += demand * (inst.tau(candidate_cloud, xj) + rho_y + rho_j);
  }
  return cost;
}

double cloud_weight(const Instance& inst, const Assignment& sigma,
                    std::size_t cloud) {
  double w = 0.0;
  for (std::size_t i = 0; i < inst.num_clones(); ++i) {
    if (sigma.host(i) == cloud) {
      w += clone_cost(inst, sigma, i, cloud);
    }
  }
  return w;
}

double regularize(const RegularizationParams& params, double w) {
  return std::exp(-1.0 / (w + params.a));
}

double social_cost(const Instance& inst, const Assignment& sigma,
                   const RegularizationParams& params) {
  std::vector<double> loads, rho, weight;
  return detail::social_cost_fast(inst, sigma.hosts(), params, loads, rho,
                                  weight);
}

SmoothnessReport check_smoothness(
    const RegularizationParams& params, double lambda, double epsilon,
    const std::vector<std::pair<double, double>>& grid) {
  if (!(epsilon < 1.0) || !(lambda > 1.0 - epsilon)) {
    throw std::invalid_argument("need epsilon < 1 and lambda > 1 - epsilon");
  }
  if (grid.empty()) {
    throw std::invalid_argument("smoothness grid must be nonempty");
  }
  SmoothnessReport report;
  report.lambda = lambda;
  report.epsilon = epsilon;
  report.poa_bound = lambda / (1.0 - epsilon);
  report.pass = true;
  for (const auto& [w, w_star] : grid) {
    double lhs = w_star * regularize(params, w + w_star);
    double rhs = lambda * w_star * regularize(params, w_star) +
                 epsilon * w * regularize(params, w);
    double gap = lhs - rhs;
    if (gap > 0.0 && (!report.pass ? gap > report.worst_gap : true)) {
      report.pass = false;
      report.worst_w = w;
      report.worst_w_star = w_star;
      report.worst_gap = gap;
    }
  }
  return report;
}

SmoothnessReport find_smoothness_certificate(const RegularizationParams& params,
                                             double w_max, double step) {
  std::size_t k = static_cast<std::size_t>(std::llround(w_max / step));
  std::vector<double> f_at(k + 1), f_sum(2 * k + 1);
  for (std::size_t i = 0; i <= k; ++i) {
    f_at[i] = regularize(params, step * static_cast<double>(i));
  }
  for (std::size_t i = 0; i <= 2 * k; ++i) {
    f_sum[i] = regularize(params, step * static_cast<double>(i));
  }

  double best_bound = kSaturated;
  double best_lambda = 0.0, best_eps = 0.0;
  for (double eps = 0.0; eps < 0.95; eps += 0.01) {
    // Smallest lambda making the inequality hold at every grid point; the
    // w=0 boundary forces lambda >= 1.
    double lambda = 1.0;
    for (std::size_t wi = 1; wi <= k; ++wi) {
      double w = step * static_cast<double>(wi);
      double wfw = w * f_at[wi];
      for (std::size_t si = 1; si <= k; ++si) {
        double w_star = step * static_cast<double>(si);
        double need = (w_star * f_sum[wi + si] - eps * wfw) /
                      (w_star * f_at[si]);
        if (need > lambda) lambda = need;
      }
    }
    double bound = lambda / (1.0 - eps);
    if (bound < best_bound) {
      best_bound = bound;
      best_lambda = lambda;
      best_eps = eps;
    }
  }

  std::vector<std::pair<double, double>> grid;
  grid.reserve(k * k);
  for (std::size_t wi = 1; wi <= k; ++wi) {
    for (std::size_t si = 1; si <= k; ++si) {
      grid.emplace_back(step * static_cast<double>(wi),
                        step * static_cast<double>(si));
    }
  }
  // Nudge lambda for float slack so the verification pass is self-consistent.
  return check_smoothness(params, best_lambda + 1e-12, best_eps, grid);
}

}  // namespace fogmq
