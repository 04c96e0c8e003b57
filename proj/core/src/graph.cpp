#include "opcagent/graph.hpp"

#include <algorithm>
#include <ostream>

#include "opcagent/error.hpp"

namespace opcagent {

SegmentGraph::SegmentGraph(std::span<const Segment> segments, double threshold_nm) {
  const std::size_t n = segments.size();
  node_ids_.resize(n);
  neighbors_.resize(n);
  const double limit2 = threshold_nm * threshold_nm;
  for (std::size_t i = 0; i < n; ++i) {
    node_ids_[i] = segments[i].id;
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = segments[i].control_point.x - segments[j].control_point.x;
      const double dy = segments[i].control_point.y - segments[j].control_point.y;
      if (dx * dx + dy * dy < limit2) {
        neighbors_[i].push_back(static_cast<int>(j));
        neighbors_[j].push_back(static_cast<int>(i));
      }
    }
  }
  for (auto& nb : neighbors_) std::sort(nb.begin(), nb.end());
}

SegmentGraph::SegmentGraph(int node_count, std::span<const std::pair<int, int>> edges) {
  node_ids_.resize(static_cast<std::size_t>(node_count));
  neighbors_.resize(static_cast<std::size_t>(node_count));
  for (int i = 0; i < node_count; ++i) node_ids_[static_cast<std::size_t>(i)] = i;
  for (auto [u, v] : edges) {
    if (u == v || u < 0 || v < 0 || u >= node_count || v >= node_count) {
      throw GeometryError("graph edge (" + std::to_string(u) + "," + std::to_string(v) +
                          ") is invalid");
    }
    auto& nu = neighbors_[static_cast<std::size_t>(u)];
    if (std::find(nu.begin(), nu.end(), v) != nu.end()) continue;
    nu.push_back(v);
    neighbors_[static_cast<std::size_t>(v)].push_back(u);
  }
  for (auto& nb : neighbors_) std::sort(nb.begin(), nb.end());
}

bool SegmentGraph::connected(int u, int v) const {
  const auto& nb = neighbors(u);
  return std::binary_search(nb.begin(), nb.end(), v);
}

std::vector<std::pair<int, int>> SegmentGraph::edges() const {
  std::vector<std::pair<int, int>> out;
  for (int u = 0; u < node_count(); ++u) {
    for (int v : neighbors(u)) {
      if (u < v) out.emplace_back(u, v);
    }
  }
  return out;
}

std::size_t SegmentGraph::edge_count() const {
  std::size_t twice = 0;
  for (const auto& nb : neighbors_) twice += nb.size();
  return twice / 2;
}

void write_edge_list(const SegmentGraph& graph, std::ostream& out) {
  out << "nodes " << graph.node_count() << " edges " << graph.edge_count() << '\n';
  for (auto [u, v] : graph.edges()) {
    out << graph.node_ids()[static_cast<std::size_t>(u)] << ' '
        << graph.node_ids()[static_cast<std::size_t>(v)] << '\n';
  }
}

}  // namespace opcagent
