// Acceptance gate: one check per release criterion, each printed as a single
// [PASS]/[FAIL] line with its runtime.  Exits with the number of failures.

#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "ehna/eval.hpp"
#include "ehna/graph.hpp"
#include "ehna/io.hpp"
#include "ehna/model.hpp"
#include "ehna/rng.hpp"
#include "ehna/train.hpp"
#include "ehna/walk.hpp"
#include "support/stats.hpp"
#include "support/synthetic.hpp"

using namespace ehna;
using Clock = std::chrono::steady_clock;

namespace {

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list args;
  va_start(args, f);
  std::vsnprintf(buf, sizeof(buf), f, args);
  va_end(args);
  return buf;
}

struct Criterion {
  int id = 0;
  std::string name;
  bool pass = true;
  double seconds = 0.0;
  std::vector<std::string> details;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      details.push_back("FAILED: " + what);
    }
  }
  void note(const std::string& what) { details.push_back(what); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  std::filesystem::path path;

  TempDir() {
    auto base = std::filesystem::temp_directory_path();
    std::mt19937_64 rng(
        static_cast<std::uint64_t>(Clock::now().time_since_epoch().count()));
    for (int i = 0; i < 1000; ++i) {
      auto candidate = base / fmt("ehna_acc_%llu",
                                  static_cast<unsigned long long>(rng()));
      std::error_code ec;
      if (std::filesystem::create_directory(candidate, ec)) {
        path = candidate;
        return;
      }
    }
    throw std::runtime_error("could not create temp dir");
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

int run_cli(const std::string& args, const std::string& out_path,
            const std::string& err_path) {
  const std::string cmd =
      std::string(EHNA_CLI_PATH) + " " + args + " >" + out_path + " 2>" +
      err_path;
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// ---------------------------------------------------------------------------
// Criterion 1: full-pipeline gradient exactness (d=4, k=2, len=3, batch=4)

// Walk sets are fixed up front and the aggregation feed order is replayed
// from a fixed per-participant seed, so the batch loss is a pure function of
// the parameters and central differences are valid.
struct PipelineInstance {
  struct Participant {
    NodeId node = 0;
    std::vector<TemporalWalk> walks;
    std::uint64_t perm_seed = 0;
  };
  struct EdgeCase {
    Participant x, y;
    std::vector<Participant> neg_x, neg_y;
  };
  std::vector<EdgeCase> edges;
  AttentionScale scale;
  double margin = 5.0;
};

// Duplicate walks in a k=2 batch make identical batch-norm columns, which
// parks the whitened activation exactly on the relu kink (zero variance).
// The gradient measurement needs distinct walks, so retry until the set has
// no exact duplicates.
std::vector<TemporalWalk> gather_walks(const TemporalGraph& g, NodeId v,
                                       Timestamp t_ref, std::size_t k,
                                       std::size_t len, bool force_fallback,
                                       std::mt19937_64& rng) {
  for (int attempt = 0; attempt < 200; ++attempt) {
    std::vector<TemporalWalk> walks;
    if (force_fallback || g.neighbors_before(v, t_ref).empty()) {
      walks = fallback_neighborhood(g, v, k, len, rng);
    } else {
      WalkContext ctx{t_ref, 1.0, 1.0, g.tau()};
      walks = sample_walks(g, v, k, len, ctx, rng);
    }
    bool distinct = true;
    for (std::size_t i = 0; i < walks.size() && distinct; ++i) {
      for (std::size_t j = i + 1; j < walks.size(); ++j) {
        if (walks[i].nodes == walks[j].nodes &&
            walks[i].edge_times == walks[j].edge_times) {
          distinct = false;
          break;
        }
      }
    }
    if (distinct) return walks;
  }
  throw std::runtime_error("gather_walks: node cannot yield distinct walks");
}

double pipeline_loss(const ModelParams& params, const PipelineInstance& inst,
                     std::vector<std::vector<AggregationTrace>>* traces) {
  AggregationOptions opts;  // full model, training mode
  double total = 0.0;
  if (traces) traces->assign(inst.edges.size(), {});
  for (std::size_t e = 0; e < inst.edges.size(); ++e) {
    const auto& ec = inst.edges[e];
    std::vector<const PipelineInstance::Participant*> parts{&ec.x, &ec.y};
    for (const auto& p : ec.neg_x) parts.push_back(&p);
    for (const auto& p : ec.neg_y) parts.push_back(&p);

    if (traces) (*traces)[e].resize(parts.size());
    std::vector<VectorXd> z(parts.size());
    for (std::size_t i = 0; i < parts.size(); ++i) {
      std::mt19937_64 rng(parts[i]->perm_seed);
      z[i] = aggregate(params, parts[i]->node, parts[i]->walks, inst.scale,
                       opts, rng, traces ? &(*traces)[e][i] : nullptr);
    }
    const std::size_t qx = ec.neg_x.size(), qy = ec.neg_y.size();
    MatrixXd neg_x(params.dim, static_cast<Eigen::Index>(qx));
    MatrixXd neg_y(params.dim, static_cast<Eigen::Index>(qy));
    for (std::size_t q = 0; q < qx; ++q) {
      neg_x.col(static_cast<Eigen::Index>(q)) = z[2 + q];
    }
    for (std::size_t q = 0; q < qy; ++q) {
      neg_y.col(static_cast<Eigen::Index>(q)) = z[2 + qx + q];
    }
    total += edge_loss(z[0], z[1], neg_x, neg_y, inst.margin, nullptr);
  }
  return total;
}

Criterion criterion_gradients() {
  Criterion c{1, "full-pipeline gradients match central finite differences"};
  std::mt19937_64 grng(2024);
  TemporalGraph g = testsupport::random_temporal_graph(10, 30, 100, grng);

  PipelineInstance inst;
  inst.scale = AttentionScale{g.t_min(), g.tau()};
  NoiseSampler noise(g);
  std::mt19937_64 srng(99);
  std::uint64_t next_seed = 1000;
  const std::size_t k = 2, len = 3, Q = 2;
  const auto& all = g.edges();
  for (std::size_t idx : {8u, 15u, 22u, 29u}) {
    const TemporalEdge& edge = all[idx];
    PipelineInstance::EdgeCase ec;
    ec.x = {edge.src,
            gather_walks(g, edge.src, edge.t, k, len, false, srng),
            next_seed++};
    ec.y = {edge.dst,
            gather_walks(g, edge.dst, edge.t, k, len, false, srng),
            next_seed++};
    for (std::size_t q = 0; q < 2 * Q; ++q) {
      NodeId n = noise.sample(srng);
      // degree >= 2 so the fallback can produce the distinct walks the
      // measurement needs
      while (n == edge.src || n == edge.dst || g.degree(n) < 2) {
        n = noise.sample(srng);
      }
      PipelineInstance::Participant p{
          n, gather_walks(g, n, edge.t, k, len, /*force_fallback=*/true, srng),
          next_seed++};
      (q < Q ? ec.neg_x : ec.neg_y).push_back(std::move(p));
    }
    inst.edges.push_back(std::move(ec));
  }

  // Central differences are invalid within h of a relu kink.  Pick the first
  // init seed whose forward traces keep every relu input far from zero, then
  // measure there.
  ModelParams params;
  std::vector<std::vector<AggregationTrace>> traces;
  bool found = false;
  double best_relu = -1.0, best_inv = -1.0;
  std::uint64_t best_seed = 0;
  std::uint64_t init_seed = 7;
  for (; init_seed < 7 + 100; ++init_seed) {
    std::mt19937_64 mrng(init_seed);
    params = init_model(static_cast<Eigen::Index>(g.n_nodes()), 4, 2, mrng);
    // inflate the fresh init: tiny-weight LSTMs give near-tied batch rows
    // (degenerate whitening) at d=4, and the measurement point must be
    // generic, not degenerate
    for (LstmStack* stack : {&params.lstm1, &params.lstm2}) {
      for (LstmLayer& layer : stack->layers) {
        layer.wx *= 3.0;
        layer.wh *= 3.0;
      }
    }
    params.embeddings *= 2.0;
    pipeline_loss(params, inst, &traces);
    double min_relu = 1e300, max_inv_std = 0.0;
    for (const auto& edge_traces : traces) {
      for (const AggregationTrace& t : edge_traces) {
        min_relu = std::min(min_relu, t.bn1_out.cwiseAbs().minCoeff());
        if (t.bn1.batch_mode) {
          max_inv_std = std::max(max_inv_std, t.bn1.inv_std.maxCoeff());
        }
      }
    }
    if (min_relu > best_relu) {
      best_relu = min_relu;
      best_inv = max_inv_std;
      best_seed = init_seed;
    }
    if (min_relu > 0.05) {
      c.note(fmt("init seed %llu: relu margin %.2e, max batch inv-std %.1f",
                 static_cast<unsigned long long>(init_seed), min_relu,
                 max_inv_std));
      found = true;
      break;
    }
  }
  c.require(found,
            fmt("no kink-safe seed; best seed %llu margin %.2e inv-std %.1f",
                static_cast<unsigned long long>(best_seed), best_relu,
                best_inv));
  if (!found) return c;

  const double base = pipeline_loss(params, inst, &traces);
  c.require(std::isfinite(base) && base > 0.0,
            "base loss must be finite and active");

  ModelParams grads = zeros_like(params);
  for (std::size_t e = 0; e < inst.edges.size(); ++e) {
    const auto& ec = inst.edges[e];
    const auto& tr = traces[e];
    const std::size_t qx = ec.neg_x.size(), qy = ec.neg_y.size();
    MatrixXd neg_x(params.dim, static_cast<Eigen::Index>(qx));
    MatrixXd neg_y(params.dim, static_cast<Eigen::Index>(qy));
    for (std::size_t q = 0; q < qx; ++q) {
      neg_x.col(static_cast<Eigen::Index>(q)) = tr[2 + q].z;
    }
    for (std::size_t q = 0; q < qy; ++q) {
      neg_y.col(static_cast<Eigen::Index>(q)) = tr[2 + qx + q].z;
    }
    EdgeLossGrads lg;
    edge_loss(tr[0].z, tr[1].z, neg_x, neg_y, inst.margin, &lg);
    aggregate_backward(params, tr[0], lg.d_zx, grads);
    aggregate_backward(params, tr[1], lg.d_zy, grads);
    for (std::size_t q = 0; q < qx; ++q) {
      aggregate_backward(params, tr[2 + q],
                         lg.d_neg_x.col(static_cast<Eigen::Index>(q)), grads);
    }
    for (std::size_t q = 0; q < qy; ++q) {
      aggregate_backward(params, tr[2 + qx + q],
                         lg.d_neg_y.col(static_cast<Eigen::Index>(q)), grads);
    }
  }

  const double h = 1e-4, rel_tol = 1e-4, abs_floor = 1e-8;
  auto tensors = trainable_tensors(params);
  auto gtensors = trainable_tensors(grads);
  long checked = 0, failures = 0;
  double max_rel = 0.0;
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    MatrixXd& m = *tensors[t].second;
    const MatrixXd& an = *gtensors[t].second;
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const double saved = m.data()[i];
      m.data()[i] = saved + h;
      const double up = pipeline_loss(params, inst, nullptr);
      m.data()[i] = saved - h;
      const double down = pipeline_loss(params, inst, nullptr);
      m.data()[i] = saved;
      const double fd = (up - down) / (2.0 * h);
      const double a = an.data()[i];
      const double err = std::abs(fd - a);
      const double scale = std::max(std::abs(fd), std::abs(a));
      ++checked;
      if (scale > 0.0 && err > abs_floor) {
        max_rel = std::max(max_rel, err / scale);
      }
      if (err > std::max(rel_tol * scale, abs_floor)) {
        ++failures;
        if (failures <= 3) {
          c.note(fmt("mismatch %s[%lld]: fd=%.8g analytic=%.8g",
                     tensors[t].first.c_str(), static_cast<long long>(i), fd,
                     a));
        }
      }
    }
  }
  c.note(fmt("batch=4 d=4 k=2 len=3 Q=2; %ld coefficients checked", checked));
  c.note(fmt("max relative error %.3g (above the %.0e absolute floor)",
             max_rel, abs_floor));
  c.require(failures == 0,
            fmt("%ld coefficients exceeded tolerance", failures));
  return c;
}

// ---------------------------------------------------------------------------
// Criterion 2: temporal walk validity on a random multigraph

Criterion criterion_walk_validity() {
  Criterion c{2, "10k temporal walks respect time constraints"};
  std::mt19937_64 grng(77);
  TemporalGraph g = testsupport::random_temporal_graph(100, 500, 10000, grng);

  std::set<std::tuple<NodeId, NodeId, Timestamp>> edge_set;
  for (const TemporalEdge& e : g.edges()) {
    edge_set.emplace(e.src, e.dst, e.t);
    edge_set.emplace(e.dst, e.src, e.t);
  }

  std::mt19937_64 rng(123);
  const Timestamp span = g.t_max() - g.t_min();
  std::size_t violations = 0, singletons = 0, steps = 0;
  for (std::size_t i = 0; i < 10000; ++i) {
    const NodeId start = static_cast<NodeId>(i % g.n_nodes());
    const Timestamp t_ref =
        g.t_min() + static_cast<Timestamp>(uniform_below(
                        rng, static_cast<std::uint64_t>(span) + 2));
    WalkContext ctx{t_ref, 1.0, 1.0, g.tau()};
    TemporalWalk w = sample_walk(g, start, 10, ctx, rng);
    if (w.edge_times.empty()) ++singletons;
    steps += w.edge_times.size();
    for (std::size_t s = 0; s < w.edge_times.size(); ++s) {
      if (!(w.edge_times[s] < t_ref)) ++violations;
      if (s > 0 && w.edge_times[s] > w.edge_times[s - 1]) ++violations;
      if (!edge_set.count({w.nodes[s], w.nodes[s + 1], w.edge_times[s]})) {
        ++violations;
      }
    }
  }
  c.note(fmt("10000 walks, %zu steps, %zu empty-history singletons", steps,
             singletons));
  c.require(steps > 0, "walks must take steps");
  c.require(violations == 0, fmt("%zu time violations", violations));
  return c;
}

// ---------------------------------------------------------------------------
// Criterion 3: next-step distribution against hand-computed probabilities

Criterion criterion_walk_oracle() {
  Criterion c{3, "walk distribution matches the hand-computed oracle"};
  // a: b@10 w1, b@5 w1, c@9 w2, d@8 w1; b: c@9 w1, d@7 w2, e@6 w1; e: f@3 w1
  std::vector<TemporalEdge> edges{
      {0, 1, 10, 1.0}, {1, 0, 5, 1.0}, {0, 2, 9, 2.0}, {0, 3, 8, 1.0},
      {1, 2, 9, 1.0},  {1, 3, 7, 2.0}, {1, 4, 6, 1.0}, {4, 5, 3, 1.0}};
  TemporalGraph g = TemporalGraph::from_edges(
      {"a", "b", "c", "d", "e", "f"}, std::move(edges), /*tau=*/1.0);

  // tau=1, p=2, q=0.5, t_ref=11; hand-computed step masses
  const double E = std::exp(1.0);
  auto dec = [&](double dt) { return std::exp(-dt); };
  (void)E;

  // first step from a
  std::map<std::pair<NodeId, Timestamp>, double> first;
  {
    const double mb10 = 1.0 * dec(1.0);
    const double mc9 = 2.0 * dec(2.0);
    const double md8 = 1.0 * dec(3.0);
    const double mb5 = 1.0 * dec(6.0);
    const double z = mb10 + mc9 + md8 + mb5;
    first[{1, 10}] = mb10 / z;
    first[{2, 9}] = mc9 / z;
    first[{3, 8}] = md8 / z;
    first[{1, 5}] = mb5 / z;
  }

  // second step, keyed by (first node, first time)
  std::map<std::pair<NodeId, Timestamp>,
           std::map<std::pair<NodeId, Timestamp>, double>>
      second;
  {
    // from b arrived at t=10: return a (1/p), adjacent c and d (a-c, a-d
    // exist), exploratory e (1/q)
    const double ma10 = 0.5 * 1.0 * dec(1.0);
    const double mc9 = 1.0 * 1.0 * dec(2.0);
    const double md7 = 1.0 * 2.0 * dec(4.0);
    const double me6 = 2.0 * 1.0 * dec(5.0);
    const double ma5 = 0.5 * 1.0 * dec(6.0);
    const double z = ma10 + mc9 + md7 + me6 + ma5;
    second[{1, 10}] = {{{0, 10}, ma10 / z},
                       {{2, 9}, mc9 / z},
                       {{3, 7}, md7 / z},
                       {{4, 6}, me6 / z},
                       {{0, 5}, ma5 / z}};
  }
  {
    // from b arrived at t=5: only the t<=5 return edge remains
    second[{1, 5}] = {{{0, 5}, 1.0}};
  }
  {
    // from c arrived at t=9: return a (0.5 * w2) ties adjacent b (1 * w1)
    const double ma9 = 0.5 * 2.0 * dec(2.0);
    const double mb9 = 1.0 * 1.0 * dec(2.0);
    const double z = ma9 + mb9;
    second[{2, 9}] = {{{0, 9}, ma9 / z}, {{1, 9}, mb9 / z}};
  }
  {
    // from d arrived at t=8: return a, adjacent b via the w=2 edge
    const double ma8 = 0.5 * 1.0 * dec(3.0);
    const double mb7 = 1.0 * 2.0 * dec(4.0);
    const double z = ma8 + mb7;
    second[{3, 8}] = {{{0, 8}, ma8 / z}, {{1, 7}, mb7 / z}};
  }

  WalkContext ctx{11, 2.0, 0.5, 1.0};
  std::mt19937_64 rng(4242);
  const std::size_t n_draws = 100000;
  std::map<std::pair<NodeId, Timestamp>, std::size_t> first_counts;
  std::map<std::array<long long, 4>, std::size_t> chain_counts;
  for (std::size_t i = 0; i < n_draws; ++i) {
    TemporalWalk w = sample_walk(g, 0, 2, ctx, rng);
    if (w.edge_times.size() != 2) {
      c.require(false, "every two-step walk must complete on this graph");
      return c;
    }
    first_counts[{w.nodes[1], w.edge_times[0]}]++;
    chain_counts[{w.nodes[1], w.edge_times[0], w.nodes[2],
                  w.edge_times[1]}]++;
  }

  double linf_first = 0.0;
  for (const auto& [key, prob] : first) {
    const double emp =
        static_cast<double>(first_counts[key]) / static_cast<double>(n_draws);
    linf_first = std::max(linf_first, std::abs(emp - prob));
  }
  // no unexpected first steps
  for (const auto& [key, count] : first_counts) {
    c.require(first.count(key) == 1,
              fmt("unexpected first step to node %u at t=%lld", key.first,
                  static_cast<long long>(key.second)));
  }

  double linf_chain = 0.0;
  double total_prob = 0.0;
  for (const auto& [k1, p1] : first) {
    for (const auto& [k2, p2] : second[k1]) {
      const std::array<long long, 4> key{
          static_cast<long long>(k1.first), k1.second,
          static_cast<long long>(k2.first), k2.second};
      const double expect = p1 * p2;
      total_prob += expect;
      const double emp = static_cast<double>(chain_counts[key]) /
                         static_cast<double>(n_draws);
      linf_chain = std::max(linf_chain, std::abs(emp - expect));
    }
  }
  c.require(std::abs(total_prob - 1.0) < 1e-12,
            "hand-computed chain must cover all outcomes");
  for (const auto& [key, count] : chain_counts) {
    const std::pair<NodeId, Timestamp> k1{static_cast<NodeId>(key[0]),
                                          key[1]};
    const std::pair<NodeId, Timestamp> k2{static_cast<NodeId>(key[2]),
                                          key[3]};
    c.require(second[k1].count(k2) == 1, "unexpected second step observed");
  }

  c.note(fmt("first-step Linf %.4f, two-step chain Linf %.4f over %zu walks",
             linf_first, linf_chain, n_draws));
  c.require(linf_first <= 0.01, fmt("first-step Linf %.4f > 0.01", linf_first));
  c.require(linf_chain <= 0.01, fmt("chain Linf %.4f > 0.01", linf_chain));
  return c;
}

// ---------------------------------------------------------------------------
// Criterion 4: noise sampler distribution fidelity

Criterion criterion_noise_sampler() {
  Criterion c{4, "degree^0.75 noise sampler passes distribution checks"};
  // realizable multigraph carrying degrees {2,3,5,7} (plus the degree-1
  // helper node the handshake parity forces)
  {
    std::vector<TemporalEdge> edges{{3, 2, 1}, {3, 2, 2}, {3, 2, 3},
                                    {3, 2, 4}, {3, 1, 5}, {3, 1, 6},
                                    {3, 0, 7}, {2, 0, 8}, {1, 4, 9}};
    TemporalGraph g = TemporalGraph::from_edges(
        testsupport::numbered_labels(5), std::move(edges));
    const std::vector<double> degrees{2, 3, 5, 7, 1};
    std::vector<double> expected(5);
    double z = 0.0;
    for (double d : degrees) z += std::pow(d, 0.75);
    for (std::size_t i = 0; i < 5; ++i) {
      expected[i] = std::pow(degrees[i], 0.75) / z;
    }

    NoiseSampler sampler(g);
    for (std::size_t i = 0; i < 5; ++i) {
      c.require(std::abs(sampler.probabilities()[static_cast<Eigen::Index>(
                    i)] - expected[i]) < 1e-12,
                fmt("alias table probability for degree %g", degrees[i]));
    }

    std::mt19937_64 rng(31337);
    std::vector<std::size_t> counts(5, 0);
    for (int i = 0; i < 100000; ++i) ++counts[sampler.sample(rng)];
    const double pval = testsupport::chi2_gof_pvalue(counts, expected);
    c.note(fmt("chi-square p-value %.4f over degrees {2,3,5,7,1} at 100k",
               pval));
    c.require(pval > 0.01, fmt("chi-square p-value %.4g <= 0.01", pval));
  }

  // degrees {1,16}: relative masses {1, 8}, conditional split {1/9, 8/9}
  {
    std::vector<TemporalEdge> edges;
    for (NodeId leaf = 1; leaf <= 16; ++leaf) {
      edges.push_back({0, leaf, static_cast<Timestamp>(leaf)});
    }
    TemporalGraph g = TemporalGraph::from_edges(
        testsupport::numbered_labels(17), std::move(edges));
    const VectorXd powers = g.degree_powers(0.75);
    c.require(powers[0] == 8.0, "16^0.75 must be exactly 8");
    c.require(powers[1] == 1.0, "1^0.75 must be exactly 1");

    NoiseSampler sampler(g);
    std::mt19937_64 rng(2718281);
    double hub = 0.0, leaves = 0.0;
    for (int i = 0; i < 1000000; ++i) {
      if (sampler.sample(rng) == 0) {
        hub += 1.0;
      } else {
        leaves += 1.0;
      }
    }
    // hub vs average leaf: expected 8/9 against 1/9
    const double r = hub / (hub + leaves / 16.0);
    c.note(fmt("hub share vs mean leaf %.6f (expected %.6f) at 1M draws", r,
               8.0 / 9.0));
    c.require(std::abs(r - 8.0 / 9.0) < 5e-4,
              fmt("conditional split %.4f differs from 0.889 in the third "
                  "decimal",
                  r));
  }
  return c;
}

// ---------------------------------------------------------------------------
// Criterion 5: training on the two-block temporal benchmark

Criterion criterion_training(const TemporalGraph& full,
                             const TemporalGraph& train_graph,
                             const std::vector<TemporalEdge>& held) {
  Criterion c{5, "training descends and embeddings carry structure"};
  c.note(full.summary());
  c.require(full.n_nodes() == 200, "benchmark must have 200 nodes");
  c.require(full.n_edges() >= 1600 && full.n_edges() <= 2400,
            fmt("benchmark edge count %zu outside ~2000", full.n_edges()));

  TrainConfig cfg;  // paper-style defaults
  cfg.dim = 32;
  cfg.epochs = 20;
  cfg.seed = 1;

  std::vector<double> losses;
  ModelParams params = fit(train_graph, cfg, [&](const EpochLog& e) {
    losses.push_back(e.mean_loss);
  });
  c.require(losses.size() == 20, "expected one loss per epoch");

  // (a) 3-epoch smoothed loss non-increasing
  std::vector<double> smoothed;
  for (std::size_t i = 0; i + 3 <= losses.size(); ++i) {
    smoothed.push_back((losses[i] + losses[i + 1] + losses[i + 2]) / 3.0);
  }
  bool non_increasing = true;
  for (std::size_t i = 1; i < smoothed.size(); ++i) {
    if (smoothed[i] > smoothed[i - 1] + 1e-9) non_increasing = false;
  }
  c.note(fmt("loss %.4f -> %.4f (smoothed %.4f -> %.4f)", losses.front(),
             losses.back(), smoothed.front(), smoothed.back()));
  c.require(non_increasing, "smoothed loss increased between epochs");

  MatrixXd emb = materialize_embeddings(train_graph, params, cfg);

  // (b) mean edge distance below mean non-edge distance
  std::set<std::pair<NodeId, NodeId>> train_pairs, full_pairs;
  for (const TemporalEdge& e : train_graph.edges()) {
    train_pairs.emplace(std::min(e.src, e.dst), std::max(e.src, e.dst));
  }
  for (const TemporalEdge& e : full.edges()) {
    full_pairs.emplace(std::min(e.src, e.dst), std::max(e.src, e.dst));
  }
  double edge_mean = 0.0;
  for (const auto& [u, v] : train_pairs) {
    edge_mean += (emb.col(u) - emb.col(v)).norm();
  }
  edge_mean /= static_cast<double>(train_pairs.size());

  std::mt19937_64 rng(555);
  std::set<std::pair<NodeId, NodeId>> non_edges;
  const std::size_t n = full.n_nodes();
  while (non_edges.size() < train_pairs.size()) {
    const NodeId u = static_cast<NodeId>(uniform_below(rng, n));
    const NodeId v = static_cast<NodeId>(uniform_below(rng, n));
    if (u == v) continue;
    const auto key = std::make_pair(std::min(u, v), std::max(u, v));
    if (full_pairs.count(key)) continue;
    non_edges.insert(key);
  }
  double non_mean = 0.0;
  for (const auto& [u, v] : non_edges) {
    non_mean += (emb.col(u) - emb.col(v)).norm();
  }
  non_mean /= static_cast<double>(non_edges.size());
  c.note(fmt("mean distance: edges %.4f vs non-edges %.4f", edge_mean,
             non_mean));
  c.require(edge_mean < non_mean, "edges are not closer than non-edges");

  // (c) reconstruction precision@1000 at least 3x density
  ReconstructionConfig rc;
  rc.precisions = {1000};
  EvalReport rec = reconstruction_eval(emb, train_graph, rc);
  const double precision = rec.rows[0].values[0];
  const double density = rec.rows[1].values[0];
  c.note(fmt("precision@1000 %.4f vs density %.4f (%.2fx)", precision,
             density, precision / density));
  c.require(precision >= 3.0 * density,
            fmt("precision@1000 %.4f below 3x density %.4f", precision,
                3.0 * density));

  // (d) link prediction with the squared-difference operator
  LinkPredConfig lc;
  lc.repeats = 10;
  lc.seed = 1;
  EvalReport lp =
      link_prediction_eval(emb, train_graph, held, EdgeOp::WeightedL2, lc);
  const double acc = lp.rows[1].mean();
  const double auc = lp.rows[2].mean();
  c.note(fmt("link prediction over 10 repeats: accuracy %.4f auc %.4f", acc,
             auc));
  c.require(acc >= 0.70, fmt("accuracy %.4f < 0.70", acc));
  c.require(auc >= 0.75, fmt("auc %.4f < 0.75", auc));
  return c;
}

// ---------------------------------------------------------------------------
// Criterion 6: full model vs ablations across seeds

Criterion criterion_ablations(const TemporalGraph& train_graph,
                              const std::vector<TemporalEdge>& held) {
  Criterion c{6, "full model beats NA and RW ablations across seeds"};
  // lighter-than-default budget so 30 trainings stay tractable; the data and
  // protocol are the criterion-5 benchmark
  TrainConfig base;
  base.dim = 16;
  base.walks_per_node = 4;
  base.walk_len = 4;
  base.negatives = 2;
  base.batch_size = 256;
  base.epochs = 8;
  base.lr = 1e-4;
  c.note("config: d=16 k=4 len=4 Q=2 batch=256 epochs=8 lr=1e-4");

  LinkPredConfig lc;
  lc.repeats = 5;
  lc.seed = 77;

  auto f1_of = [&](std::uint64_t seed, Ablation ablation) {
    TrainConfig cfg = base;
    cfg.seed = seed;
    cfg.ablation = ablation;
    ModelParams params = fit(train_graph, cfg);
    MatrixXd emb = materialize_embeddings(train_graph, params, cfg);
    EvalReport lp =
        link_prediction_eval(emb, train_graph, held, EdgeOp::WeightedL2, lc);
    return lp.rows[0].mean();  // mean F1
  };

  int wins_na = 0, wins_rw = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const double f_full = f1_of(seed, Ablation::None);
    const double f_na = f1_of(seed, Ablation::NoAttention);
    const double f_rw = f1_of(seed, Ablation::StaticWalks);
    if (f_full >= f_na) ++wins_na;
    if (f_full >= f_rw) ++wins_rw;
    c.note(fmt("seed %llu: full %.4f NA %.4f RW %.4f",
               static_cast<unsigned long long>(seed), f_full, f_na, f_rw));
  }
  c.note(fmt("full >= NA in %d/10, full >= RW in %d/10", wins_na, wins_rw));
  c.require(wins_na >= 7, fmt("full beat NA only %d/10 times", wins_na));
  c.require(wins_rw >= 7, fmt("full beat RW only %d/10 times", wins_rw));
  return c;
}

// ---------------------------------------------------------------------------
// Criterion 7: CLI determinism

Criterion criterion_determinism() {
  Criterion c{7, "repeated train+embed runs are byte-identical"};
  TempDir dir;
  const std::string edges = dir.file("edges.txt");
  {
    std::mt19937_64 rng(12);
    TemporalGraph g = testsupport::random_temporal_graph(100, 300, 5000, rng);
    std::ofstream out(edges);
    g.serialize_edge_list(out);
  }

  const std::string train_flags =
      " --dim 8 --walks 3 --walk-len 4 --epochs 2 --batch-size 64"
      " --negatives 2 --lr 1e-4 --seed 7 --threads 1";
  const std::string m1 = dir.file("m1.ckpt"), m2 = dir.file("m2.ckpt");
  int rc1 = run_cli("train --edges " + edges + " --out " + m1 + train_flags,
                    dir.file("o1"), dir.file("e1"));
  int rc2 = run_cli("train --edges " + edges + " --out " + m2 + train_flags,
                    dir.file("o2"), dir.file("e2"));
  c.require(rc1 == 0 && rc2 == 0,
            fmt("train exit codes %d, %d (stderr: %s)", rc1, rc2,
                slurp(dir.file("e1")).c_str()));
  if (rc1 == 0 && rc2 == 0) {
    const std::string b1 = slurp(m1), b2 = slurp(m2);
    c.note(fmt("checkpoint size %zu bytes", b1.size()));
    c.require(!b1.empty() && b1 == b2, "checkpoints differ between runs");
  }

  const std::string e1 = dir.file("emb1.txt"), e2 = dir.file("emb2.txt");
  int rc3 = run_cli("embed --checkpoint " + m1 + " --edges " + edges +
                        " --out " + e1,
                    dir.file("o3"), dir.file("e3"));
  int rc4 = run_cli("embed --checkpoint " + m2 + " --edges " + edges +
                        " --out " + e2,
                    dir.file("o4"), dir.file("e4"));
  c.require(rc3 == 0 && rc4 == 0,
            fmt("embed exit codes %d, %d (stderr: %s)", rc3, rc4,
                slurp(dir.file("e3")).c_str()));
  if (rc3 == 0 && rc4 == 0) {
    const std::string t1 = slurp(e1), t2 = slurp(e2);
    c.note(fmt("embedding file size %zu bytes", t1.size()));
    c.require(!t1.empty() && t1 == t2, "embedding files differ between runs");
  }
  return c;
}

// ---------------------------------------------------------------------------
// Criterion 8: evaluation protocol fidelity

Criterion criterion_protocol() {
  Criterion c{8, "split, reconstruction, and operator protocols are exact"};

  // time split: ceiling count, most recent edges, deterministic tie order
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t n = 4 + static_cast<std::size_t>(uniform_below(rng, 20));
    const std::size_t m = 2 + static_cast<std::size_t>(uniform_below(rng, 60));
    const Timestamp t_max =
        trial % 5 == 0 ? 1 : 100;  // every fifth graph is tie-heavy
    TemporalGraph g = testsupport::random_temporal_graph(n, m, t_max, rng);
    auto [train, heldout] = split_by_time(g, 0.2);
    const std::size_t expect =
        static_cast<std::size_t>(std::ceil(0.2 * static_cast<double>(m)));
    c.require(heldout.size() == expect,
              fmt("trial %d: held %zu, expected ceil(0.2*%zu)=%zu", trial,
                  heldout.size(), m, expect));
    const auto& sorted = g.edges();
    std::vector<TemporalEdge> expect_held(sorted.end() -
                                              static_cast<std::ptrdiff_t>(
                                                  expect),
                                          sorted.end());
    c.require(heldout == expect_held,
              fmt("trial %d: held set is not the exact sorted suffix", trial));
    std::vector<TemporalEdge> expect_train(
        sorted.begin(),
        sorted.end() - static_cast<std::ptrdiff_t>(expect));
    c.require(train.edges() == expect_train,
              fmt("trial %d: train set is not the exact sorted prefix",
                  trial));
    c.require(train.n_nodes() == g.n_nodes(),
              fmt("trial %d: split dropped nodes", trial));
    // held-out timestamps dominate every train timestamp
    for (const TemporalEdge& h : heldout) {
      c.require(train.edges().empty() || h.t >= train.edges().back().t,
                fmt("trial %d: held edge older than train edge", trial));
    }
  }
  {
    // all edges tied on one timestamp: exact half out, bit-for-bit stable
    std::vector<TemporalEdge> edges;
    for (NodeId i = 0; i < 10; ++i) {
      edges.push_back({i, static_cast<NodeId>((i + 1) % 12), 42});
    }
    TemporalGraph g = TemporalGraph::from_edges(
        testsupport::numbered_labels(12), std::move(edges));
    auto [train_a, held_a] = split_by_time(g, 0.5);
    auto [train_b, held_b] = split_by_time(g, 0.5);
    c.require(held_a.size() == 5, "tied timestamps: expected 5 held edges");
    c.require(held_a == held_b && train_a.edges() == train_b.edges(),
              "tied timestamps: split is not deterministic");
  }

  // perfect-ranking reconstruction: indicator embeddings on a matching
  {
    const std::size_t pairs = 10;
    std::vector<TemporalEdge> edges;
    for (NodeId i = 0; i < pairs; ++i) {
      edges.push_back({static_cast<NodeId>(2 * i),
                       static_cast<NodeId>(2 * i + 1),
                       static_cast<Timestamp>(i)});
    }
    TemporalGraph g = TemporalGraph::from_edges(
        testsupport::numbered_labels(2 * pairs), std::move(edges));
    MatrixXd emb = MatrixXd::Zero(static_cast<Eigen::Index>(pairs),
                                  static_cast<Eigen::Index>(2 * pairs));
    for (std::size_t i = 0; i < pairs; ++i) {
      emb(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(2 * i)) = 1.0;
      emb(static_cast<Eigen::Index>(i),
          static_cast<Eigen::Index>(2 * i + 1)) = 1.0;
    }
    ReconstructionConfig rc;
    rc.precisions = {1, 5, 10, 20};
    EvalReport rep = reconstruction_eval(emb, g, rc);
    c.require(rep.rows[0].values[0] == 1.0, "precision@1 must be exactly 1");
    c.require(rep.rows[1].values[0] == 1.0, "precision@5 must be exactly 1");
    c.require(rep.rows[2].values[0] == 1.0,
              "precision@|E| must be exactly 1");
    c.require(rep.rows[3].values[0] == 0.5,
              "precision@2|E| must be exactly 0.5");
  }

  // operator examples, exact in floating point
  {
    VectorXd a2(2), b2(2);
    a2 << 2.0, 0.0;
    b2 << 0.0, 2.0;
    const VectorXd mean = edge_features(EdgeOp::Mean, a2, b2);
    c.require(mean[0] == 1.0 && mean[1] == 1.0, "Mean([2,0],[0,2]) != [1,1]");

    a2 << 2.0, 3.0;
    b2 << 4.0, 5.0;
    const VectorXd had = edge_features(EdgeOp::Hadamard, a2, b2);
    c.require(had[0] == 8.0 && had[1] == 15.0,
              "Hadamard([2,3],[4,5]) != [8,15]");

    a2 << 1.0, 4.0;
    b2 << 3.0, 1.0;
    const VectorXd l1 = edge_features(EdgeOp::WeightedL1, a2, b2);
    c.require(l1[0] == 2.0 && l1[1] == 3.0,
              "WeightedL1([1,4],[3,1]) != [2,3]");
    const VectorXd l2 = edge_features(EdgeOp::WeightedL2, a2, b2);
    c.require(l2[0] == 4.0 && l2[1] == 9.0,
              "WeightedL2([1,4],[3,1]) != [4,9]");

    // symmetry holds bit-for-bit for every operator
    std::mt19937_64 vrng(3);
    VectorXd x(6), y(6);
    for (int i = 0; i < 6; ++i) {
      x[i] = 2.0 * uniform01(vrng) - 1.0;
      y[i] = 2.0 * uniform01(vrng) - 1.0;
    }
    for (EdgeOp op : all_edge_ops()) {
      c.require(edge_features(op, x, y) == edge_features(op, y, x),
                "operator " + edge_op_name(op) + " is not symmetric");
    }
  }
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  // optional args: criterion numbers to run (default: all)
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  std::printf("acceptance gate: 8 criteria\n");
  std::fflush(stdout);

  // shared two-block temporal benchmark (criteria 5 and 6)
  std::mt19937_64 sbm_rng(424242);
  const TemporalGraph benchmark =
      testsupport::temporal_sbm(testsupport::SbmSpec{}, sbm_rng);
  const auto split = split_by_time(benchmark, 0.2);
  const TemporalGraph& train_graph = split.first;
  const std::vector<TemporalEdge>& held = split.second;

  std::vector<std::pair<std::function<Criterion()>, double>> checks{
      {[] { return criterion_gradients(); }, 60.0},
      {[] { return criterion_walk_validity(); }, 10.0},
      {[] { return criterion_walk_oracle(); }, 10.0},
      {[] { return criterion_noise_sampler(); }, 0.0},
      {[&] { return criterion_training(benchmark, train_graph, held); },
       600.0},
      {[&] { return criterion_ablations(train_graph, held); }, 0.0},
      {[] { return criterion_determinism(); }, 0.0},
      {[] { return criterion_protocol(); }, 0.0},
  };

  int failures = 0, ran = 0;
  int next_id = 0;
  for (auto& [check, budget] : checks) {
    ++next_id;
    if (!only.empty() && !only.count(next_id)) continue;
    ++ran;
    const auto t0 = Clock::now();
    Criterion c = check();
    c.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    if (budget > 0.0 && c.seconds >= budget) {
      c.pass = false;
      c.details.push_back(fmt("FAILED: runtime %.1fs exceeded budget %.0fs",
                              c.seconds, budget));
    }
    std::printf("[%s] criterion %d: %s (%.1fs)\n", c.pass ? "PASS" : "FAIL",
                c.id, c.name.c_str(), c.seconds);
    for (const std::string& d : c.details) {
      std::printf("    %s\n", d.c_str());
    }
    std::fflush(stdout);
    if (!c.pass) ++failures;
  }

  if (failures == 0) {
    std::printf("all %d criteria passed\n", ran);
  } else {
    std::printf("%d of %d criteria failed\n", failures, ran);
  }
  return failures;
}
