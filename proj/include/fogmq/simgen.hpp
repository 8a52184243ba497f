#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fogmq/oracle.hpp"

namespace fogmq {

/// Random instance family used by the simulation experiments: complete cloud
/// graph with uniform tau and capacity, Erdos-Renyi clone peer graph with
/// uniform demands.
struct GenSpec {
  std::size_t n_clones = 8;
  std::size_t m_clouds = 5;
  std::pair<double, double> tau_range{10.0, 100.0};
  std::pair<double, double> gamma_range{50.0, 100.0};
  std::pair<double, double> demand_range{1.0, 10.0};
  double edge_prob = 0.0;  // <= 0 means the default min(1, 4/n)
  double delta = 1.0;
  std::uint64_t seed = 0;

  double effective_edge_prob() const;
  void check() const;
};

/// Deterministic under spec.seed. Instances whose total demand would exceed
/// total capacity are regenerated with a fresh sub-seed (up to 100 retries),
/// so campaign runs measure convergence rather than saturation handling.
Instance generate(const GenSpec& spec);

struct TrialRecord {
  std::size_t n = 0;
  std::size_t m = 0;
  std::uint64_t seed = 0;
  int rounds = 0;
  bool converged = false;
  double poa = 0.0;  // only set by PoA campaigns
};

struct ConvergencePoint {
  std::size_t n = 0;
  int trials = 0;
  double mean_rounds = 0.0;
  double ci_halfwidth = 0.0;
  bool all_converged = true;
};

struct CampaignResult {
  std::vector<TrialRecord> records;
  std::vector<ConvergencePoint> points;
};

/// Mean rounds-to-convergence per n, sampling trials until the 95% Student-t
/// confidence half-width drops below target_rel_error * mean (or the trial
/// cap is reached).
CampaignResult convergence_campaign(const std::vector<std::size_t>& n_values,
                                    std::size_t m, const FlockConfig& config,
                                    const GenSpec& base_spec,
                                    double target_rel_error = 0.1,
                                    double confidence = 0.95,
                                    int min_trials = 10, int max_trials = 1000);

struct PoaPoint {
  double eta = 0.0;
  int trials = 0;
  double max_poa = 0.0;
  double mean_poa = 0.0;
};

/// Worst and mean PoA per eta over seeded (instance, initial) pairs.
std::vector<PoaPoint> poa_campaign(const std::vector<double>& eta_values,
                                   int trials_per_eta, const GenSpec& spec,
                                   const FlockConfig& base_config,
                                   int initials_per_instance = 5);

/// Two-sided Student-t critical value at 95% confidence.
double student_t_critical_95(int degrees_of_freedom);

std::string convergence_csv(const CampaignResult& result);
std::string poa_csv(const std::vector<PoaPoint>& points);

}  // namespace fogmq
