#include "fogmq/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace fogmq {

double GenSpec::effective_edge_prob() const {
  if (edge_prob > 0.0) return std::min(1.0, edge_prob);
  if (n_clones == 0) return 1.0;
  return std::min(1.0, 4.0 / static_cast<double>(n_clones));
}

void GenSpec::check() const {
  auto positive_range = [](std::pair<double, double> r) {
    return r.first > 0.0 && r.second >= r.first;
  };
  if (m_clouds == 0) throw std::invalid_argument("need at least one cloud");
  if (!positive_range(tau_range) || !positive_range(gamma_range) ||
      !positive_range(demand_range)) {
    throw std::invalid_argument("generation ranges must be positive");
  }
  if (edge_prob > 1.0) throw std::invalid_argument("edge_prob must be <= 1");
  if (!(delta > 0.0)) throw std::invalid_argument("delta must be positive");
}

namespace {

std::uint64_t mix(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Instance generate_once(const GenSpec& spec, std::uint64_t seed,
                       double& total_demand, double& total_capacity) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> tau_d(spec.tau_range.first,
                                               spec.tau_range.second);
  std::uniform_real_distribution<double> gamma_d(spec.gamma_range.first,
                                                 spec.gamma_range.second);
  std::uniform_real_distribution<double> demand_d(spec.demand_range.first,
                                                  spec.demand_range.second);
  std::uniform_real_distribution<double> coin(0.0, 1.0);

  std::vector<CloudNode> clouds;
  std::vector<std::string> cloud_ids;
  total_capacity = 0.0;
  for (std::size_t x = 0; x < spec.m_clouds; ++x) {
    CloudNode c;
    c.id = "x" + std::to_string(x);
    c.capacity = gamma_d(rng);
    total_capacity += c.capacity;
    cloud_ids.push_back(c.id);
    clouds.push_back(std::move(c));
  }
  // Complete cloud graph; unordered pairs sampled once, then mirrored.
  std::vector<double> tau(spec.m_clouds * spec.m_clouds, 0.0);
  for (std::size_t a = 0; a < spec.m_clouds; ++a) {
    for (std::size_t b = a + 1; b < spec.m_clouds; ++b) {
      double ms = tau_d(rng);
      tau[a * spec.m_clouds + b] = ms;
      tau[b * spec.m_clouds + a] = ms;
    }
  }
  std::vector<CloneNode> clones;
  for (std::size_t i = 0; i < spec.n_clones; ++i) {
    clones.push_back({"c" + std::to_string(i), ""});
  }
  DemandGraph demands;
  double p = spec.effective_edge_prob();
  total_demand = 0.0;
  for (std::size_t i = 0; i < spec.n_clones; ++i) {
    for (std::size_t j = i + 1; j < spec.n_clones; ++j) {
      if (coin(rng) < p) {
        double d = demand_d(rng);
        demands.add(clones[i].id, clones[j].id, d);
        total_demand += 2.0 * d;  // each edge loads both endpoints
      }
    }
  }
  return Instance(std::move(clouds),
                  LatencyMatrix(std::move(cloud_ids), std::move(tau)),
                  std::move(clones), std::move(demands), spec.delta);
}

}  // namespace

Instance generate(const GenSpec& spec) {
  spec.check();
  for (int attempt = 0; attempt < 100; ++attempt) {
    double total_demand = 0.0, total_capacity = 0.0;
    Instance inst = generate_once(spec, mix(spec.seed, attempt), total_demand,
                                  total_capacity);
    if (total_demand <= total_capacity) return inst;
  }
  throw std::runtime_error(
      "could not generate an unsaturated instance in 100 attempts; "
      "lower demand or raise capacity");
}

double student_t_critical_95(int nu) {
  static constexpr double table[] = {
      12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228,
      2.201,  2.179, 2.160, 2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086,
      2.080,  2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042};
  if (nu < 1) throw std::invalid_argument("degrees of freedom must be >= 1");
  if (nu <= 30) return table[nu - 1];
  return 1.96 + 2.4 / static_cast<double>(nu);
}

namespace {

std::pair<double, double> mean_and_halfwidth(const std::vector<double>& xs) {
  double mean = std::accumulate(xs.begin(), xs.end(), 0.0) /
                static_cast<double>(xs.size());
  if (xs.size() < 2) return {mean, kSaturated};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  double sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  double hw = student_t_critical_95(static_cast<int>(xs.size()) - 1) * sd /
              std::sqrt(static_cast<double>(xs.size()));
  return {mean, hw};
}

Assignment random_initial(const Instance& inst, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return random_unsaturated_assignment(inst, rng);
}

}  // namespace

CampaignResult convergence_campaign(const std::vector<std::size_t>& n_values,
                                    std::size_t m, const FlockConfig& config,
                                    const GenSpec& base_spec,
                                    double target_rel_error, double confidence,
                                    int min_trials, int max_trials) {
  if (confidence != 0.95) {
    throw std::invalid_argument("only 95% confidence is supported");
  }
  CampaignResult result;
  for (std::size_t n : n_values) {
    GenSpec spec = base_spec;
    spec.n_clones = n;
    spec.m_clouds = m;
    std::vector<double> rounds;
    ConvergencePoint point;
    point.n = n;
    for (int trial = 0; trial < max_trials; ++trial) {
      std::uint64_t trial_seed = mix(base_spec.seed, (n << 20) + trial);
      spec.seed = trial_seed;
      Instance inst = generate(spec);
      FlockConfig cfg = config;
      cfg.seed = mix(trial_seed, 1);
      FlockResult run =
          run_to_equilibrium(inst, random_initial(inst, mix(trial_seed, 2)), cfg);
      rounds.push_back(static_cast<double>(run.rounds));
      point.all_converged = point.all_converged && run.converged;
      result.records.push_back(
          {n, m, trial_seed, run.rounds, run.converged, 0.0});
      if (trial + 1 >= min_trials) {
        auto [mean, hw] = mean_and_halfwidth(rounds);
        if (mean == 0.0 || hw <= target_rel_error * mean) break;
      }
    }
    auto [mean, hw] = mean_and_halfwidth(rounds);
    point.trials = static_cast<int>(rounds.size());
    point.mean_rounds = mean;
    point.ci_halfwidth = std::isinf(hw) ? 0.0 : hw;
    result.points.push_back(point);
  }
  return result;
}

std::vector<PoaPoint> poa_campaign(const std::vector<double>& eta_values,
                                   int trials_per_eta, const GenSpec& spec,
                                   const FlockConfig& base_config,
                                   int initials_per_instance) {
  std::vector<PoaPoint> points;
  int instances = (trials_per_eta + initials_per_instance - 1) /
                  initials_per_instance;
  for (double eta : eta_values) {
    PoaPoint point;
    point.eta = eta;
    double sum = 0.0;
    int count = 0;
    for (int k = 0; k < instances; ++k) {
      GenSpec s = spec;
      s.seed = mix(spec.seed, 0x90A000 + k);
      Instance inst = generate(s);
      FlockConfig cfg = base_config;
      cfg.eta = eta;
      cfg.seed = mix(s.seed, 3);
      PoaReport report = price_of_anarchy(inst, cfg.params, cfg,
                                          initials_per_instance);
      point.max_poa = std::max(point.max_poa, report.poa);
      sum += report.poa;
      ++count;
    }
    point.trials = count * initials_per_instance;
    point.mean_poa = count > 0 ? sum / count : 0.0;
    points.push_back(point);
  }
  return points;
}

std::string convergence_csv(const CampaignResult& result) {
  std::ostringstream out;
  out << "n,trials,mean_k,ci_halfwidth\n";
  out.precision(6);
  out << std::fixed;
  for (const auto& p : result.points) {
    out << p.n << "," << p.trials << "," << p.mean_rounds << ","
        << p.ci_halfwidth << "\n";
  }
  return out.str();
}

std::string poa_csv(const std::vector<PoaPoint>& points) {
  std::ostringstream out;
  out << "eta,trials,max_poa,mean_poa\n";
  out.precision(6);
  out << std::fixed;
  for (const auto& p : points) {
    out << p.eta << "," << p.trials << "," << p.max_poa << "," << p.mean_poa
        << "\n";
  }
  return out.str();
}

}  // namespace fogmq
