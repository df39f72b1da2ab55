#include "ehna/walk.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "ehna/rng.hpp"

namespace ehna {

namespace {

// Unnormalized candidate masses; returns the total mass.
double collect_candidates(const TemporalGraph& g, std::optional<NodeId> prev,
                          NodeId cur, Timestamp t_in, const WalkContext& ctx,
                          std::vector<StepCandidate>& out) {
  out.clear();
  auto cands = g.neighbors_before(cur, ctx.t_ref);
  if (prev) {
    auto it = std::upper_bound(
        cands.begin(), cands.end(), t_in,
        [](Timestamp t, const AdjEntry& a) { return t < a.t; });
    cands = cands.subspan(0, static_cast<std::size_t>(it - cands.begin()));
  }
  double total = 0.0;
  for (const AdjEntry& a : cands) {
    double beta = 1.0;
    if (prev) {
      if (a.nbr == *prev) {
        beta = 1.0 / ctx.p;
      } else if (!g.has_static_edge(*prev, a.nbr)) {
        beta = 1.0 / ctx.q;
      }
    }
    const double decay =
        std::exp(-static_cast<double>(ctx.t_ref - a.t) / ctx.tau);
    const double mass = beta * a.w * decay;
    out.push_back(StepCandidate{a.nbr, a.t, a.w, mass});
    total += mass;
  }
  return total;
}

void check_context(const WalkContext& ctx) {
  if (!(ctx.p > 0.0) || !(ctx.q > 0.0) || !(ctx.tau > 0.0)) {
    throw std::invalid_argument("walk context requires p, q, tau > 0");
  }
}

void finalize_time_mass(TemporalWalk& walk) {
  const std::size_t n = walk.nodes.size();
  walk.tsum.assign(n, 0);
  walk.visits.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 1; j < n; ++j) {
      if (walk.nodes[j] == walk.nodes[i]) {
        walk.tsum[i] += walk.edge_times[j - 1];
        ++walk.visits[i];
      }
    }
  }
}

// Uniform static walk; when `within` is non-null, steps are restricted to
// that sorted node set.
TemporalWalk static_walk(const TemporalGraph& g, NodeId start, std::size_t len,
                         const std::vector<NodeId>* within,
                         std::mt19937_64& rng) {
  TemporalWalk walk;
  walk.t_ref = g.t_max() + 1;
  walk.time_constrained = false;
  walk.nodes.push_back(start);
  std::vector<std::size_t> valid;
  NodeId cur = start;
  for (std::size_t step = 0; step < len; ++step) {
    auto adj = g.adjacency(cur);
    valid.clear();
    for (std::size_t i = 0; i < adj.size(); ++i) {
      if (within == nullptr ||
          std::binary_search(within->begin(), within->end(), adj[i].nbr)) {
        valid.push_back(i);
      }
    }
    if (valid.empty()) break;
    const AdjEntry& pick =
        adj[valid[uniform_below(rng, valid.size())]];
    walk.nodes.push_back(pick.nbr);
    walk.edge_times.push_back(pick.t);
    cur = pick.nbr;
  }
  finalize_time_mass(walk);
  return walk;
}

}  // namespace

std::vector<StepCandidate> next_step_distribution(
    const TemporalGraph& g, std::optional<NodeId> prev, NodeId cur,
    Timestamp t_in, const WalkContext& ctx) {
  check_context(ctx);
  std::vector<StepCandidate> out;
  const double total = collect_candidates(g, prev, cur, t_in, ctx, out);
  if (!(total > 0.0)) {
    out.clear();
    return out;
  }
  for (StepCandidate& c : out) c.prob /= total;
  return out;
}

TemporalWalk sample_walk(const TemporalGraph& g, NodeId start, std::size_t len,
                         const WalkContext& ctx, std::mt19937_64& rng) {
  check_context(ctx);
  TemporalWalk walk;
  walk.t_ref = ctx.t_ref;
  walk.time_constrained = true;
  walk.nodes.push_back(start);

  std::vector<StepCandidate> cands;
  std::optional<NodeId> prev;
  NodeId cur = start;
  Timestamp t_in = ctx.t_ref;
  for (std::size_t step = 0; step < len; ++step) {
    const double total = collect_candidates(g, prev, cur, t_in, ctx, cands);
    if (!(total > 0.0)) break;
    const double r = uniform01(rng) * total;
    double cum = 0.0;
    std::size_t pick = cands.size() - 1;
    for (std::size_t i = 0; i < cands.size(); ++i) {
      cum += cands[i].prob;  // prob holds the unnormalized mass here
      if (r < cum) {
        pick = i;
        break;
      }
    }
    walk.nodes.push_back(cands[pick].nbr);
    walk.edge_times.push_back(cands[pick].t);
    prev = cur;
    cur = cands[pick].nbr;
    t_in = cands[pick].t;
  }
  finalize_time_mass(walk);
  return walk;
}

std::vector<TemporalWalk> sample_walks(const TemporalGraph& g, NodeId start,
                                       std::size_t count, std::size_t len,
                                       const WalkContext& ctx,
                                       std::mt19937_64& rng) {
  std::vector<TemporalWalk> walks;
  walks.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    walks.push_back(sample_walk(g, start, len, ctx, rng));
  }
  return walks;
}

std::vector<TemporalWalk> fallback_neighborhood(const TemporalGraph& g,
                                                NodeId start, std::size_t count,
                                                std::size_t len,
                                                std::mt19937_64& rng) {
  std::vector<NodeId> within;
  within.push_back(start);
  for (NodeId u : g.static_neighbors(start)) {
    within.push_back(u);
    auto second = g.static_neighbors(u);
    within.insert(within.end(), second.begin(), second.end());
  }
  std::sort(within.begin(), within.end());
  within.erase(std::unique(within.begin(), within.end()), within.end());

  std::vector<TemporalWalk> walks;
  walks.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    walks.push_back(static_walk(g, start, len, &within, rng));
  }
  return walks;
}

std::vector<TemporalWalk> uniform_walks(const TemporalGraph& g, NodeId start,
                                        std::size_t count, std::size_t len,
                                        std::mt19937_64& rng) {
  std::vector<TemporalWalk> walks;
  walks.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    walks.push_back(static_walk(g, start, len, nullptr, rng));
  }
  return walks;
}

std::string format_walk(const TemporalGraph& g, const TemporalWalk& walk) {
  std::ostringstream os;
  for (std::size_t i = 0; i < walk.nodes.size(); ++i) {
    if (i > 0) os << ' ';
    os << g.label(walk.nodes[i]) << '('
       << (i == 0 ? walk.t_ref : walk.edge_times[i - 1]) << ')';
  }
  return os.str();
}

}  // namespace ehna
