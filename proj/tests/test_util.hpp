#pragma once

// Shared hand-built instances for unit tests.

#include <string>
#include <vector>

#include "fogmq/core.hpp"

namespace fogmq::testutil {

inline LatencyMatrix tau_matrix(std::vector<std::string> ids,
                                std::vector<double> row_major) {
  return LatencyMatrix(std::move(ids), std::move(row_major));
}

struct Edge {
  std::string a, b;
  double d;
};

inline Instance make_instance(std::vector<std::pair<std::string, double>> clouds,
                              std::vector<double> tau_row_major,
                              std::vector<std::string> clone_ids,
                              std::vector<Edge> edges, double delta = 1.0) {
  std::vector<CloudNode> cs;
  std::vector<std::string> ids;
  for (auto& [id, cap] : clouds) {
    cs.push_back({id, cap, ""});
    ids.push_back(id);
  }
  std::vector<CloneNode> vs;
  for (auto& id : clone_ids) vs.push_back({id, ""});
  DemandGraph dg;
  for (auto& e : edges) dg.add(e.a, e.b, e.d);
  return Instance(std::move(cs),
                  LatencyMatrix(std::move(ids), std::move(tau_row_major)),
                  std::move(vs), std::move(dg), delta);
}

// Two clouds (x, y), three clones; c1-c2 demand 3, c1-c3 demand 2.
inline Instance small_instance(double tau_xy = 10.0, double cap = 50.0) {
  return make_instance({{"x", cap}, {"y", cap}},
                       {0.0, tau_xy, tau_xy, 0.0},
                       {"c1", "c2", "c3"},
                       {{"c1", "c2", 3.0}, {"c1", "c3", 2.0}});
}

}  // namespace fogmq::testutil
