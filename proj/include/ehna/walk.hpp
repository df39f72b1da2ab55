#pragma once

#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ehna/graph.hpp"

namespace ehna {

// Parameters of the time-decayed, distance-biased step distribution.
struct WalkContext {
  Timestamp t_ref = 0;  // exclusive upper bound on edge times
  double p = 1.0;       // return penalty
  double q = 1.0;       // exploration penalty
  double tau = 1.0;     // decay scale for t_ref - t
};

struct StepCandidate {
  NodeId nbr = 0;
  Timestamp t = 0;
  double w = 1.0;
  double prob = 0.0;
};

struct TemporalWalk {
  std::vector<NodeId> nodes;          // v_0 .. v_L
  std::vector<Timestamp> edge_times;  // t_1 .. t_L, one per traversed edge
  // Per position: total time mass and traversal count into that node over the
  // whole walk.  Duplicate positions of one node share the same values; the
  // start position counts only traversals that re-enter it.
  std::vector<std::int64_t> tsum;
  std::vector<std::uint32_t> visits;
  Timestamp t_ref = 0;
  bool time_constrained = true;

  std::size_t length() const { return nodes.size(); }
};

// Normalized next-step distribution from `cur`, arrived at via edge time
// `t_in` from `prev` (nullopt on the first step, where t_in = t_ref).
// Candidates are incident edges with t <= t_in and t < t_ref; mass is
// beta * w * exp(-(t_ref - t) / tau) with beta = 1/p when the candidate is
// `prev`, 1 when it is statically adjacent to `prev`, 1/q otherwise (and 1 on
// the first step).  Returns an empty vector when no candidate has mass.
std::vector<StepCandidate> next_step_distribution(
    const TemporalGraph& g, std::optional<NodeId> prev, NodeId cur,
    Timestamp t_in, const WalkContext& ctx);

// Samples one walk of at most `len` edges; stops early when stuck.
TemporalWalk sample_walk(const TemporalGraph& g, NodeId start, std::size_t len,
                         const WalkContext& ctx, std::mt19937_64& rng);

std::vector<TemporalWalk> sample_walks(const TemporalGraph& g, NodeId start,
                                       std::size_t count, std::size_t len,
                                       const WalkContext& ctx,
                                       std::mt19937_64& rng);

// Time-unconstrained uniform walks restricted to the two-hop static
// neighborhood of `start`; used when a node has no history before t_ref.
std::vector<TemporalWalk> fallback_neighborhood(const TemporalGraph& g,
                                                NodeId start, std::size_t count,
                                                std::size_t len,
                                                std::mt19937_64& rng);

// Unrestricted uniform static walks (incident edges equiprobable).
std::vector<TemporalWalk> uniform_walks(const TemporalGraph& g, NodeId start,
                                        std::size_t count, std::size_t len,
                                        std::mt19937_64& rng);

// "label(t) label(t) ..."; the start position is annotated with t_ref.
std::string format_walk(const TemporalGraph& g, const TemporalWalk& walk);

}  // namespace ehna
