// fogmq: simulation campaigns, oracle runs, broker nodes, device emulation.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include <nlohmann/json.hpp>

#include "fogmq/broker/device.hpp"
#include "fogmq/broker/server.hpp"
#include "fogmq/simgen.hpp"

namespace {

constexpr int kExitFlagError = 2;
constexpr int kExitRuntime = 3;
constexpr int kExitThreshold = 4;

std::vector<std::size_t> parse_size_list(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoull(item));
  return out;
}

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  return out;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

int run_simulate(const std::string& n_list, std::size_t m, double eta, double a,
                 std::uint64_t seed, const std::string& mode, int max_trials,
                 const std::string& out_path) {
  fogmq::FlockConfig cfg;
  cfg.params.a = a;
  cfg.eta = eta;
  cfg.mode = mode == "parallel" ? fogmq::FlockMode::kParallel
                                : fogmq::FlockMode::kSequential;
  fogmq::GenSpec spec;
  spec.seed = seed;
  auto result = fogmq::convergence_campaign(parse_size_list(n_list), m, cfg,
                                            spec, 0.1, 0.95, 10, max_trials);
  write_file(out_path, fogmq::convergence_csv(result));
  for (const auto& p : result.points) {
    std::cout << "n=" << p.n << " trials=" << p.trials
              << " mean_k=" << p.mean_rounds << " ci=" << p.ci_halfwidth
              << (p.all_converged ? "" : " [not all converged]") << "\n";
  }
  return 0;
}

int run_poa(const std::string& eta_list, int trials, std::uint64_t seed,
            std::size_t n, std::size_t m, double a,
            const std::string& out_path) {
  fogmq::GenSpec spec;
  spec.n_clones = n;
  spec.m_clouds = m;
  spec.seed = seed;
  fogmq::FlockConfig cfg;
  cfg.params.a = a;
  auto points =
      fogmq::poa_campaign(parse_double_list(eta_list), trials, spec, cfg);
  write_file(out_path, fogmq::poa_csv(points));
  for (const auto& p : points) {
    std::cout << "eta=" << p.eta << " trials=" << p.trials
              << " max_poa=" << p.max_poa << " mean_poa=" << p.mean_poa << "\n";
  }
  return 0;
}

int run_check_smoothness(double a, double grid_max, double lambda, double eps) {
  fogmq::RegularizationParams params;
  params.a = a;
  fogmq::SmoothnessReport report;
  if (lambda > 0.0) {
    std::vector<std::pair<double, double>> grid;
    for (double w = 0.1; w <= grid_max + 1e-9; w += 0.1) {
      for (double ws = 0.1; ws <= grid_max + 1e-9; ws += 0.1) {
        grid.emplace_back(w, ws);
      }
    }
    report = fogmq::check_smoothness(params, lambda, eps, grid);
  } else {
    report = fogmq::find_smoothness_certificate(params, grid_max, 0.1);
  }
  std::cout << (report.pass ? "PASS" : "FAIL") << " lambda=" << report.lambda
            << " eps=" << report.epsilon
            << " implied_poa_bound=" << report.poa_bound << "\n";
  if (!report.pass) {
    std::cout << "worst pair: w=" << report.worst_w
              << " w*=" << report.worst_w_star << " gap=" << report.worst_gap
              << "\n";
    return kExitThreshold;
  }
  return 0;
}

int run_report(const std::vector<std::string>& inputs,
               const std::string& out_path) {
  std::ostringstream out;
  out << "file,row\n";
  for (const auto& path : inputs) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
      if (header) {
        header = false;
        continue;
      }
      if (!line.empty()) out << path << "," << line << "\n";
    }
  }
  write_file(out_path, out.str());
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FogMQ: clone brokering with autonomous migration"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "convergence campaign -> CSV");
  std::string sim_n = "8,16,32,64", sim_mode = "sequential",
              sim_out = "convergence.csv";
  std::size_t sim_m = 37;
  double sim_eta = 0.9, sim_a = 9.0;
  std::uint64_t sim_seed = 0;
  int sim_trials = 1000;
  sim->add_option("--n", sim_n, "comma-separated clone counts");
  sim->add_option("--m", sim_m, "number of clouds");
  sim->add_option("--eta", sim_eta)->check(CLI::Range(0.0, 1.0));
  sim->add_option("--a", sim_a);
  sim->add_option("--seed", sim_seed);
  sim->add_option("--mode", sim_mode)
      ->check(CLI::IsMember({"sequential", "parallel"}));
  sim->add_option("--trials", sim_trials, "trial cap per point");
  sim->add_option("--out", sim_out);

  // poa
  auto* poa = app.add_subcommand("poa", "price-of-anarchy campaign -> CSV");
  std::string poa_eta = "0.5,0.6,0.7,0.8,0.9,0.99", poa_out = "poa.csv";
  int poa_trials = 300;
  std::uint64_t poa_seed = 0;
  std::size_t poa_n = 8, poa_m = 5;
  double poa_a = 9.0;
  poa->add_option("--eta-list", poa_eta);
  poa->add_option("--trials", poa_trials);
  poa->add_option("--seed", poa_seed);
  poa->add_option("--n", poa_n);
  poa->add_option("--m", poa_m);
  poa->add_option("--a", poa_a);
  poa->add_option("--out", poa_out);

  // check-smoothness
  auto* smooth = app.add_subcommand("check-smoothness",
                                    "verify the PoA smoothness inequality");
  double cs_a = 9.0, cs_grid = 100.0, cs_lambda = 0.0, cs_eps = 0.0;
  smooth->add_option("--a", cs_a);
  smooth->add_option("--grid-max", cs_grid);
  smooth->add_option("--lambda", cs_lambda,
                     "check this lambda (default: search)");
  smooth->add_option("--eps", cs_eps);

  // broker
  auto* broker = app.add_subcommand("broker", "run a FogMQ server");
  std::string broker_config;
  broker->add_option("--config", broker_config)->required();

  // device-sim
  auto* dev = app.add_subcommand("device-sim", "emulate publishing devices");
  std::string dev_registry, dev_graph = "binomial:0.3", dev_rates = "1:30";
  int dev_devices = 10;
  double dev_duration = 30.0;
  std::uint64_t dev_seed = 0;
  dev->add_option("--registry", dev_registry,
                  "server address host:port to register against")
      ->required();
  dev->add_option("--devices", dev_devices);
  dev->add_option("--graph", dev_graph, "binomial:p");
  dev->add_option("--rate-range", dev_rates,
                  "mean inter-arrival seconds, lo:hi");
  dev->add_option("--duration", dev_duration, "seconds");
  dev->add_option("--seed", dev_seed);

  // report
  auto* report = app.add_subcommand("report", "aggregate campaign CSVs");
  std::vector<std::string> report_in;
  std::string report_out = "report.csv";
  report->add_option("--in", report_in)->required();
  report->add_option("--out", report_out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kExitFlagError;
  }

  try {
    if (sim->parsed()) {
      return run_simulate(sim_n, sim_m, sim_eta, sim_a, sim_seed, sim_mode,
                          sim_trials, sim_out);
    }
    if (poa->parsed()) {
      return run_poa(poa_eta, poa_trials, poa_seed, poa_n, poa_m, poa_a,
                     poa_out);
    }
    if (smooth->parsed()) {
      return run_check_smoothness(cs_a, cs_grid, cs_lambda, cs_eps);
    }
    if (broker->parsed()) {
      return fogmq::broker::run_broker_from_config(broker_config);
    }
    if (dev->parsed()) {
      return fogmq::broker::run_device_sim(dev_registry, dev_devices, dev_graph,
                                           dev_rates, dev_duration, dev_seed);
    }
    if (report->parsed()) {
      return run_report(report_in, report_out);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
