#pragma once

#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "opcagent/layout.hpp"

namespace opcagent {

inline constexpr double kGraphThresholdNm = 250.0;

// Undirected segment-proximity graph. Immutable after construction.
class SegmentGraph {
public:
  SegmentGraph() = default;
  // Edge (u, v) iff the control points are strictly closer than threshold_nm.
  SegmentGraph(std::span<const Segment> segments, double threshold_nm = kGraphThresholdNm);
  // Explicit adjacency, for tests and toy inputs. Pairs are node indices.
  SegmentGraph(int node_count, std::span<const std::pair<int, int>> edges);

  int node_count() const { return static_cast<int>(neighbors_.size()); }
  const std::vector<int>& node_ids() const { return node_ids_; }
  const std::vector<int>& neighbors(int node) const {
    return neighbors_[static_cast<std::size_t>(node)];
  }
  bool connected(int u, int v) const;
  // Sorted unordered pairs (u < v).
  std::vector<std::pair<int, int>> edges() const;
  std::size_t edge_count() const;

  friend bool operator==(const SegmentGraph&, const SegmentGraph&) = default;

private:
  std::vector<int> node_ids_;
  std::vector<std::vector<int>> neighbors_;  // sorted
};

// Debug dump: header line "nodes <n> edges <m>" then one "u v" pair per line.
void write_edge_list(const SegmentGraph& graph, std::ostream& out);

}  // namespace opcagent
