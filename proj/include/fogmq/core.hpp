#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace fogmq {

/// Thrown when an Instance or one of its parts violates a structural
/// invariant at construction time.
class ModelError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct CloudNode {
  std::string id;
  double capacity = 0.0;          // gamma(x), traffic units
  std::string endpoint;           // broker mode only; empty in simulation
};

struct CloneNode {
  std::string id;
  std::string device_id;          // broker mode only; empty in simulation
};

/// Symmetric demand graph over clone ids. Demands are stored on unordered
/// pairs so lookup(i,j) == lookup(j,i) holds structurally.
class DemandGraph {
public:
  DemandGraph() = default;

  // Rejects self-edges, non-positive demand, and duplicate pairs.
  void add(const std::string& a, const std::string& b, double demand);

  std::optional<double> lookup(const std::string& a,
                               const std::string& b) const;

  struct Edge {
    std::string a, b;             // a < b lexicographically
    double demand;
  };
  const std::vector<Edge>& edges() const { return edges_; }
  std::size_t size() const { return edges_.size(); }

private:
  static std::pair<std::string, std::string> key(const std::string& a,
                                                 const std::string& b);
  std::vector<Edge> edges_;
  std::map<std::pair<std::string, std::string>, double> by_pair_;
};

/// Symmetric inter-cloud latency matrix tau, milliseconds.
/// Zero diagonal, finite nonnegative entries; asymmetric input is rejected.
class LatencyMatrix {
public:
  LatencyMatrix() = default;
  LatencyMatrix(std::vector<std::string> cloud_ids,
                std::vector<double> row_major);

  double at(std::size_t i, std::size_t j) const {
    return data_[i * dim_ + j];
  }
  std::size_t dim() const { return dim_; }
  const std::vector<std::string>& cloud_ids() const { return cloud_ids_; }

private:
  std::size_t dim_ = 0;
  std::vector<std::string> cloud_ids_;
  std::vector<double> data_;
};

/// A complete problem instance: cloud set A, latency matrix tau, clone set V,
/// demand graph P, and the processing-delay constant delta. Immutable after
/// construction; safe to share across threads.
class Instance {
public:
  Instance(std::vector<CloudNode> clouds, LatencyMatrix tau,
           std::vector<CloneNode> clones, DemandGraph demands, double delta);

  std::size_t num_clouds() const { return clouds_.size(); }
  std::size_t num_clones() const { return clones_.size(); }

  const CloudNode& cloud(std::size_t i) const { return clouds_[i]; }
  const CloneNode& clone(std::size_t i) const { return clones_[i]; }
  const std::vector<CloudNode>& clouds() const { return clouds_; }
  const std::vector<CloneNode>& clones() const { return clones_; }

  std::optional<std::size_t> cloud_index(const std::string& id) const;
  std::optional<std::size_t> clone_index(const std::string& id) const;

  double tau(std::size_t cloud_i, std::size_t cloud_j) const {
    return tau_.at(cloud_i, cloud_j);
  }
  double capacity(std::size_t cloud_i) const {
    return clouds_[cloud_i].capacity;
  }
  double delta() const { return delta_; }

  struct PeerEdge {
    std::size_t peer;             // clone index
    double demand;                // d_ij
  };
  /// Incident demand edges of a clone, by clone index.
  std::span<const PeerEdge> peers(std::size_t clone_i) const {
    return adjacency_[clone_i];
  }
  /// Sum of all incident demands of a clone (its load contribution).
  double clone_demand(std::size_t clone_i) const {
    return clone_demand_[clone_i];
  }

  const DemandGraph& demands() const { return demands_; }
  const LatencyMatrix& tau_matrix() const { return tau_; }

  nlohmann::json to_json() const;
  static Instance from_json(const nlohmann::json& j);

private:
  std::vector<CloudNode> clouds_;
  LatencyMatrix tau_;
  std::vector<CloneNode> clones_;
  DemandGraph demands_;
  double delta_ = 1.0;

  std::unordered_map<std::string, std::size_t> cloud_index_;
  std::unordered_map<std::string, std::size_t> clone_index_;
  std::vector<std::vector<PeerEdge>> adjacency_;
  std::vector<double> clone_demand_;
};

/// The game state sigma: clone index -> cloud index, total over the
/// instance's clone set.
class Assignment {
public:
  Assignment() = default;
  explicit Assignment(std::vector<std::size_t> host) : host_(std::move(host)) {}

  std::size_t host(std::size_t clone_i) const { return host_[clone_i]; }
  void set_host(std::size_t clone_i, std::size_t cloud_i) {
    host_[clone_i] = cloud_i;
  }
  std::size_t size() const { return host_.size(); }
  const std::vector<std::size_t>& hosts() const { return host_; }

  bool operator==(const Assignment&) const = default;

  static Assignment uniform(const Instance& inst, std::size_t cloud_i);
  static Assignment from_map(
      const Instance& inst,
      const std::map<std::string, std::string>& clone_to_cloud);
  std::map<std::string, std::string> to_map(const Instance& inst) const;

private:
  std::vector<std::size_t> host_;
};

/// Cross-checks an assignment against an instance. Violations are data, not
/// failures: an empty list means the pair is well formed.
std::vector<std::string> validate(const Instance& inst,
                                  const Assignment& assignment);

}  // namespace fogmq
