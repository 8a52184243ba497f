#include "fogmq/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

namespace fogmq {

std::pair<std::string, std::string> DemandGraph::key(const std::string& a,
                                                     const std::string& b) {
  return a < b ? std::make_pair(a, b) : std::make_pair(b, a);
}

void DemandGraph::add(const std::string& a, const std::string& b,
                      double demand) {
  if (a == b) {
    throw ModelError("demand self-edge on clone '" + a + "'");
  }
  if (!(demand > 0.0) || !std::isfinite(demand)) {
    throw ModelError("demand for (" + a + "," + b + ") must be positive");
  }
  auto k = key(a, b);
  if (!by_pair_.emplace(k, demand).second) {
    throw ModelError("duplicate demand edge (" + a + "," + b + ")");
  }
  edges_.push_back({k.first, k.second, demand});
}

std::optional<double> DemandGraph::lookup(const std::string& a,
                                          const std::string& b) const {
  auto it = by_pair_.find(key(a, b));
  if (it == by_pair_.end()) return std::nullopt;
  return it->second;
}

LatencyMatrix::LatencyMatrix(std::vector<std::string> cloud_ids,
                             std::vector<double> row_major)
    : dim_(cloud_ids.size()),
      cloud_ids_(std::move(cloud_ids)),
      data_(std::move(row_major)) {
  if (data_.size() != dim_ * dim_) {
    throw ModelError("latency matrix dimension mismatch");
  }
  for (std::size_t i = 0; i < dim_; ++i) {
    if (at(i, i) != 0.0) {
      throw ModelError("latency matrix diagonal must be zero");
    }
    for (std::size_t j = 0; j < dim_; ++j) {
      double v = at(i, j);
      if (!std::isfinite(v) || v < 0.0) {
        throw ModelError("latency matrix entries must be finite and >= 0");
      }
      if (at(i, j) != at(j, i)) {
        throw ModelError("latency matrix must be symmetric");
      }
    }
  }
}

Instance::Instance(std::vector<CloudNode> clouds, LatencyMatrix tau,
                   std::vector<CloneNode> clones, DemandGraph demands,
                   double delta)
    : clouds_(std::move(clouds)),
      tau_(std::move(tau)),
      clones_(std::move(clones)),
      demands_(std::move(demands)),
      delta_(delta) {
  if (!(delta_ > 0.0) || !std::isfinite(delta_)) {
    throw ModelError("delta must be positive");
  }
  if (tau_.dim() != clouds_.size()) {
    throw ModelError("tau dimension does not match number of clouds");
  }
  for (std::size_t i = 0; i < clouds_.size(); ++i) {
    const auto& c = clouds_[i];
    if (!(c.capacity > 0.0) || !std::isfinite(c.capacity)) {
      throw ModelError("cloud '" + c.id + "' capacity must be positive");
    }
    if (!cloud_index_.emplace(c.id, i).second) {
      throw ModelError("duplicate cloud id '" + c.id + "'");
    }
  }
  for (std::size_t i = 0; i < clones_.size(); ++i) {
    if (!clone_index_.emplace(clones_[i].id, i).second) {
      throw ModelError("duplicate clone id '" + clones_[i].id + "'");
    }
  }
  adjacency_.resize(clones_.size());
  clone_demand_.assign(clones_.size(), 0.0);
  for (const auto& e : demands_.edges()) {
    auto ia = clone_index_.find(e.a);
    auto ib = clone_index_.find(e.b);
    if (ia == clone_index_.end() || ib == clone_index_.end()) {
      throw ModelError("demand edge (" + e.a + "," + e.b +
                       ") references unknown clone");
    }
    adjacency_[ia->second].push_back({ib->second, e.demand});
    adjacency_[ib->second].push_back({ia->second, e.demand});
    clone_demand_[ia->second] += e.demand;
    clone_demand_[ib->second] += e.demand;
  }
}

std::optional<std::size_t> Instance::cloud_index(const std::string& id) const {
  auto it = cloud_index_.find(id);
  if (it == cloud_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> Instance::clone_index(const std::string& id) const {
  auto it = clone_index_.find(id);
  if (it == clone_index_.end()) return std::nullopt;
  return it->second;
}

nlohmann::json Instance::to_json() const {
  nlohmann::json j;
  j["clouds"] = nlohmann::json::array();
  for (const auto& c : clouds_) {
    nlohmann::json jc = {{"id", c.id}, {"capacity", c.capacity}};
    if (!c.endpoint.empty()) jc["endpoint"] = c.endpoint;
    j["clouds"].push_back(std::move(jc));
  }
  j["tau"] = nlohmann::json::array();
  for (std::size_t a = 0; a < clouds_.size(); ++a) {
    for (std::size_t b = a + 1; b < clouds_.size(); ++b) {
      j["tau"].push_back(
          {{"a", clouds_[a].id}, {"b", clouds_[b].id}, {"ms", tau_.at(a, b)}});
    }
  }
  j["clones"] = nlohmann::json::array();
  for (const auto& c : clones_) {
    nlohmann::json jc = {{"id", c.id}};
    if (!c.device_id.empty()) jc["device_id"] = c.device_id;
    j["clones"].push_back(std::move(jc));
  }
  j["demands"] = nlohmann::json::array();
  for (const auto& e : demands_.edges()) {
    j["demands"].push_back({{"a", e.a}, {"b", e.b}, {"d", e.demand}});
  }
  j["delta"] = delta_;
  return j;
}

Instance Instance::from_json(const nlohmann::json& j) {
  std::vector<CloudNode> clouds;
  for (const auto& jc : j.at("clouds")) {
    CloudNode c;
    c.id = jc.at("id").get<std::string>();
    c.capacity = jc.at("capacity").get<double>();
    c.endpoint = jc.value("endpoint", std::string{});
    clouds.push_back(std::move(c));
  }
  std::vector<std::string> ids;
  std::unordered_map<std::string, std::size_t> idx;
  for (std::size_t i = 0; i < clouds.size(); ++i) {
    ids.push_back(clouds[i].id);
    idx[clouds[i].id] = i;
  }
  std::vector<double> tau(clouds.size() * clouds.size(), 0.0);
  // Unordered pairs listed once; symmetrize on load.
  for (const auto& jt : j.at("tau")) {
    auto a = idx.find(jt.at("a").get<std::string>());
    auto b = idx.find(jt.at("b").get<std::string>());
    if (a == idx.end() || b == idx.end()) {
      throw ModelError("tau entry references unknown cloud");
    }
    double ms = jt.at("ms").get<double>();
    tau[a->second * clouds.size() + b->second] = ms;
    tau[b->second * clouds.size() + a->second] = ms;
  }
  std::vector<CloneNode> clones;
  for (const auto& jc : j.at("clones")) {
    CloneNode c;
    c.id = jc.at("id").get<std::string>();
    c.device_id = jc.value("device_id", std::string{});
    clones.push_back(std::move(c));
  }
  DemandGraph demands;
  for (const auto& jd : j.at("demands")) {
    demands.add(jd.at("a").get<std::string>(), jd.at("b").get<std::string>(),
                jd.at("d").get<double>());
  }
  return Instance(std::move(clouds), LatencyMatrix(std::move(ids), std::move(tau)),
                  std::move(clones), std::move(demands),
                  j.at("delta").get<double>());
}

Assignment Assignment::uniform(const Instance& inst, std::size_t cloud_i) {
  return Assignment(std::vector<std::size_t>(inst.num_clones(), cloud_i));
}

Assignment Assignment::from_map(
    const Instance& inst,
    const std::map<std::string, std::string>& clone_to_cloud) {
  std::vector<std::size_t> host(inst.num_clones(),
                                std::numeric_limits<std::size_t>::max());
  for (const auto& [clone_id, cloud_id] : clone_to_cloud) {
    auto ci = inst.clone_index(clone_id);
    auto xi = inst.cloud_index(cloud_id);
    if (!ci) throw ModelError("assignment references unknown clone '" + clone_id + "'");
    if (!xi) throw ModelError("assignment references unknown cloud '" + cloud_id + "'");
    host[*ci] = *xi;
  }
  for (std::size_t i = 0; i < host.size(); ++i) {
    if (host[i] == std::numeric_limits<std::size_t>::max()) {
      throw ModelError("clone '" + inst.clone(i).id + "' unassigned");
    }
  }
  return Assignment(std::move(host));
}

std::map<std::string, std::string> Assignment::to_map(
    const Instance& inst) const {
  std::map<std::string, std::string> m;
  for (std::size_t i = 0; i < host_.size(); ++i) {
    m[inst.clone(i).id] = inst.cloud(host_[i]).id;
  }
  return m;
}

std::vector<std::string> validate(const Instance& inst,
                                  const Assignment& assignment) {
  std::vector<std::string> violations;
  if (assignment.size() != inst.num_clones()) {
    if (assignment.size() < inst.num_clones()) {
      for (std::size_t i = assignment.size(); i < inst.num_clones(); ++i) {
        violations.push_back("clone " + inst.clone(i).id + " unassigned");
      }
    } else {
      violations.push_back("assignment has more entries than clones");
    }
  }
  std::size_t n = std::min(assignment.size(), inst.num_clones());
  for (std::size_t i = 0; i < n; ++i) {
    if (assignment.host(i) >= inst.num_clouds()) {
      violations.push_back("clone " + inst.clone(i).id +
                           " assigned to nonexistent cloud");
    }
  }
  return violations;
}

}  // namespace fogmq
