#include "ehna/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace ehna {

namespace {

bool parse_timestamp(const std::string& tok, Timestamp& out) {
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

bool parse_weight(const std::string& tok, double& out) {
  try {
    std::size_t pos = 0;
    out = std::stod(tok, &pos);
    return pos == tok.size();
  } catch (const std::exception&) {
    return false;
  }
}

}  // namespace

TemporalGraph TemporalGraph::load_edge_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open edge list: " + path);
  return load_edge_list(in);
}

TemporalGraph TemporalGraph::load_edge_list(std::istream& in) {
  TemporalGraph g;
  std::vector<TemporalEdge> input_edges;
  std::string line;
  std::size_t line_no = 0;

  auto intern = [&g](const std::string& label) -> NodeId {
    auto it = g.label_to_id_.find(label);
    if (it != g.label_to_id_.end()) return it->second;
    NodeId id = static_cast<NodeId>(g.labels_.size());
    g.labels_.push_back(label);
    g.label_to_id_.emplace(label, id);
    return id;
  };

  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string src_tok, dst_tok, t_tok, w_tok, extra;
    if (!(ls >> src_tok)) continue;          // blank line
    if (src_tok.front() == '#') continue;    // comment
    if (!(ls >> dst_tok >> t_tok)) {
      throw std::runtime_error("edge list line " + std::to_string(line_no) +
                               ": expected 'src dst t [w]'");
    }
    TemporalEdge e;
    if (!parse_timestamp(t_tok, e.t)) {
      throw std::runtime_error("edge list line " + std::to_string(line_no) +
                               ": bad timestamp '" + t_tok + "'");
    }
    if (ls >> w_tok) {
      if (!parse_weight(w_tok, e.w) || e.w < 0.0 || !std::isfinite(e.w)) {
        throw std::runtime_error("edge list line " + std::to_string(line_no) +
                                 ": bad weight '" + w_tok + "'");
      }
      if (ls >> extra) {
        throw std::runtime_error("edge list line " + std::to_string(line_no) +
                                 ": trailing fields");
      }
    }
    e.src = intern(src_tok);
    e.dst = intern(dst_tok);
    if (e.src == e.dst) {
      ++g.self_loops_dropped_;
      continue;
    }
    input_edges.push_back(e);
  }
  if (input_edges.empty()) {
    throw std::runtime_error("edge list contains no usable edges");
  }
  if (g.self_loops_dropped_ > 0) {
    std::fprintf(stderr, "warning: dropped %zu self-loop(s)\n",
                 g.self_loops_dropped_);
  }
  g.build_indexes(input_edges);
  return g;
}

TemporalGraph TemporalGraph::from_edges(std::vector<std::string> labels,
                                        const std::vector<TemporalEdge>& edges,
                                        double tau_override) {
  TemporalGraph g;
  g.labels_ = std::move(labels);
  g.label_to_id_.reserve(g.labels_.size());
  for (NodeId v = 0; v < g.labels_.size(); ++v) {
    if (!g.label_to_id_.emplace(g.labels_[v], v).second) {
      throw std::invalid_argument("duplicate node label: " + g.labels_[v]);
    }
  }
  std::vector<TemporalEdge> input_edges;
  input_edges.reserve(edges.size());
  for (const TemporalEdge& e : edges) {
    if (e.src >= g.labels_.size() || e.dst >= g.labels_.size()) {
      throw std::invalid_argument("edge endpoint out of range");
    }
    if (e.w < 0.0 || !std::isfinite(e.w)) {
      throw std::invalid_argument("edge weight must be finite and >= 0");
    }
    if (e.src == e.dst) {
      ++g.self_loops_dropped_;
      continue;
    }
    input_edges.push_back(e);
  }
  g.build_indexes(input_edges);
  if (tau_override > 0.0) g.tau_ = tau_override;
  return g;
}

void TemporalGraph::build_indexes(
    const std::vector<TemporalEdge>& input_order_edges) {
  const std::size_t n = labels_.size();
  const std::size_t m = input_order_edges.size();

  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     const TemporalEdge& ea = input_order_edges[a];
                     const TemporalEdge& eb = input_order_edges[b];
                     if (ea.t != eb.t) return ea.t < eb.t;
                     if (ea.src != eb.src) return ea.src < eb.src;
                     return ea.dst < eb.dst;
                   });
  edges_.resize(m);
  input_order_.assign(m, 0);
  for (std::size_t rank = 0; rank < m; ++rank) {
    edges_[rank] = input_order_edges[order[rank]];
    input_order_[order[rank]] = rank;
  }

  if (m > 0) {
    t_min_ = edges_.front().t;
    t_max_ = edges_.back().t;
  }
  tau_ = std::max(1.0, static_cast<double>(t_max_ - t_min_) / 10.0);

  adj_offsets_.assign(n + 1, 0);
  for (const TemporalEdge& e : edges_) {
    ++adj_offsets_[e.src + 1];
    ++adj_offsets_[e.dst + 1];
  }
  std::partial_sum(adj_offsets_.begin(), adj_offsets_.end(),
                   adj_offsets_.begin());
  adj_.resize(2 * m);
  {
    std::vector<std::size_t> cursor(adj_offsets_.begin(),
                                    adj_offsets_.end() - 1);
    // edges_ is time-sorted, so per-node runs come out time-sorted too.
    for (const TemporalEdge& e : edges_) {
      adj_[cursor[e.src]++] = AdjEntry{e.dst, e.t, e.w};
      adj_[cursor[e.dst]++] = AdjEntry{e.src, e.t, e.w};
    }
  }

  static_offsets_.assign(n + 1, 0);
  static_nbrs_.clear();
  static_nbrs_.reserve(2 * m);
  std::vector<NodeId> scratch;
  for (NodeId v = 0; v < n; ++v) {
    scratch.clear();
    for (std::size_t i = adj_offsets_[v]; i < adj_offsets_[v + 1]; ++i) {
      scratch.push_back(adj_[i].nbr);
    }
    std::sort(scratch.begin(), scratch.end());
    scratch.erase(std::unique(scratch.begin(), scratch.end()), scratch.end());
    static_nbrs_.insert(static_nbrs_.end(), scratch.begin(), scratch.end());
    static_offsets_[v + 1] = static_nbrs_.size();
  }
}

std::optional<NodeId> TemporalGraph::find_node(const std::string& label) const {
  auto it = label_to_id_.find(label);
  if (it == label_to_id_.end()) return std::nullopt;
  return it->second;
}

std::span<const AdjEntry> TemporalGraph::adjacency(NodeId v) const {
  return {adj_.data() + adj_offsets_[v], adj_offsets_[v + 1] - adj_offsets_[v]};
}

std::span<const AdjEntry> TemporalGraph::neighbors_before(
    NodeId v, Timestamp t_ref) const {
  auto all = adjacency(v);
  auto it = std::lower_bound(
      all.begin(), all.end(), t_ref,
      [](const AdjEntry& a, Timestamp t) { return a.t < t; });
  return all.subspan(0, static_cast<std::size_t>(it - all.begin()));
}

std::span<const NodeId> TemporalGraph::static_neighbors(NodeId v) const {
  return {static_nbrs_.data() + static_offsets_[v],
          static_offsets_[v + 1] - static_offsets_[v]};
}

bool TemporalGraph::has_static_edge(NodeId u, NodeId v) const {
  auto nbrs = static_neighbors(u);
  return std::binary_search(nbrs.begin(), nbrs.end(), v);
}

std::size_t TemporalGraph::degree(NodeId v) const {
  return adj_offsets_[v + 1] - adj_offsets_[v];
}

void TemporalGraph::set_tau(double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw std::invalid_argument("tau must be positive and finite");
  }
  tau_ = tau;
}

Eigen::VectorXd TemporalGraph::degree_powers(double alpha) const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(n_nodes()));
  for (NodeId v = 0; v < n_nodes(); ++v) {
    out[v] = std::pow(static_cast<double>(degree(v)), alpha);
  }
  return out;
}

std::string TemporalGraph::summary() const {
  std::ostringstream os;
  os << "nodes=" << n_nodes() << " edges=" << n_edges() << " t=[" << t_min_
     << "," << t_max_ << "] tau=" << tau_;
  return os.str();
}

void TemporalGraph::serialize_edge_list(std::ostream& out) const {
  char wbuf[32];
  for (std::size_t rank : input_order_) {
    const TemporalEdge& e = edges_[rank];
    std::snprintf(wbuf, sizeof(wbuf), "%.17g", e.w);
    out << labels_[e.src] << ' ' << labels_[e.dst] << ' ' << e.t << ' ' << wbuf
        << '\n';
  }
}

std::pair<TemporalGraph, std::vector<TemporalEdge>> split_by_time(
    const TemporalGraph& g, double fraction) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw std::invalid_argument("split fraction must lie in (0, 1)");
  }
  const std::size_t m = g.n_edges();
  const std::size_t held =
      static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(m)));
  const std::size_t kept = m - held;

  std::vector<std::string> labels(g.n_nodes());
  for (NodeId v = 0; v < g.n_nodes(); ++v) labels[v] = g.label(v);

  std::vector<TemporalEdge> kept_edges(g.edges().begin(),
                                       g.edges().begin() + kept);
  std::vector<TemporalEdge> held_edges(g.edges().begin() + kept,
                                       g.edges().end());
  TemporalGraph train = TemporalGraph::from_edges(std::move(labels),
                                                  kept_edges, g.tau());
  return {std::move(train), std::move(held_edges)};
}

}  // namespace ehna
