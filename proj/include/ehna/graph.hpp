#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace ehna {

using NodeId = std::uint32_t;
using Timestamp = std::int64_t;

struct TemporalEdge {
  NodeId src = 0;
  NodeId dst = 0;
  Timestamp t = 0;
  double w = 1.0;

  friend bool operator==(const TemporalEdge&, const TemporalEdge&) = default;
};

// One incident edge as seen from a fixed endpoint.
struct AdjEntry {
  NodeId nbr = 0;
  Timestamp t = 0;
  double w = 1.0;
};

// Undirected temporal multigraph.  Node ids are dense, assigned in order of
// first appearance in the input.  Per-node adjacency is sorted by timestamp;
// parallel edges are preserved; self-loops are dropped and counted.
class TemporalGraph {
 public:
  static TemporalGraph load_edge_list(const std::string& path);
  static TemporalGraph load_edge_list(std::istream& in);
  static TemporalGraph from_edges(std::vector<std::string> labels,
                                  const std::vector<TemporalEdge>& edges,
                                  double tau_override = 0.0);

  std::size_t n_nodes() const { return labels_.size(); }
  std::size_t n_edges() const { return edges_.size(); }

  // Edges sorted by (t, src, dst), input order breaking ties.
  const std::vector<TemporalEdge>& edges() const { return edges_; }

  const std::string& label(NodeId v) const { return labels_[v]; }
  std::optional<NodeId> find_node(const std::string& label) const;

  // All incident edges of v, time-ascending.
  std::span<const AdjEntry> adjacency(NodeId v) const;

  // Incident edges of v with t < t_ref, time-ascending.
  std::span<const AdjEntry> neighbors_before(NodeId v, Timestamp t_ref) const;

  // Sorted unique static neighbor ids (timestamps ignored).
  std::span<const NodeId> static_neighbors(NodeId v) const;

  bool has_static_edge(NodeId u, NodeId v) const;

  // Incident edge count (parallel edges counted separately).
  std::size_t degree(NodeId v) const;

  Timestamp t_min() const { return t_min_; }
  Timestamp t_max() const { return t_max_; }

  // Decay scale; defaults to max(1, (t_max - t_min) / 10) unless overridden.
  double tau() const { return tau_; }
  void set_tau(double tau);

  std::size_t self_loops_dropped() const { return self_loops_dropped_; }

  // d_v^alpha for every node, multigraph degrees.
  Eigen::VectorXd degree_powers(double alpha) const;

  std::string summary() const;

  // Writes edges in original input order with full-precision weights, so a
  // reload reproduces both the edge multiset and the id mapping.
  void serialize_edge_list(std::ostream& out) const;

 private:
  void build_indexes(const std::vector<TemporalEdge>& input_order_edges);

  std::vector<std::string> labels_;
  std::unordered_map<std::string, NodeId> label_to_id_;
  std::vector<TemporalEdge> edges_;        // sorted by (t, src, dst)
  std::vector<std::size_t> input_order_;   // edges_ indices in input order
  std::vector<std::size_t> adj_offsets_;   // n+1 offsets into adj_
  std::vector<AdjEntry> adj_;
  std::vector<std::size_t> static_offsets_;
  std::vector<NodeId> static_nbrs_;
  Timestamp t_min_ = 0;
  Timestamp t_max_ = 0;
  double tau_ = 1.0;
  std::size_t self_loops_dropped_ = 0;
};

// Splits off the most recent ceil(fraction * m) edges.  The first graph keeps
// the full node set, label mapping and tau of the input; the returned vector
// holds the withheld edges in time order.
std::pair<TemporalGraph, std::vector<TemporalEdge>> split_by_time(
    const TemporalGraph& g, double fraction);

}  // namespace ehna
