#include "ehna/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "ehna/rng.hpp"

namespace ehna {

namespace {

constexpr std::uint64_t kInitSalt = 0x494e4954ull;
constexpr std::uint64_t kEdgeSalt = 0x45444745ull;
constexpr std::uint64_t kNodeSalt = 0x4d41545aull;
constexpr int kNegativeResampleLimit = 100;

void set_zero(ModelParams& p) {
  for (auto& [name, tensor] : trainable_tensors(p)) tensor->setZero();
}

void add_params(ModelParams& dst, ModelParams& src) {
  auto ds = trainable_tensors(dst);
  auto ss = trainable_tensors(src);
  for (std::size_t i = 0; i < ds.size(); ++i) *ds[i].second += *ss[i].second;
}

AggregationOptions options_for(Ablation ablation, bool training) {
  AggregationOptions opts;
  opts.node_attention = ablation != Ablation::NoAttention;
  opts.walk_attention = ablation != Ablation::NoAttention;
  opts.single_level = ablation == Ablation::SingleLevel;
  opts.training = training;
  return opts;
}

std::vector<TemporalWalk> gather_walks(const TemporalGraph& g, NodeId v,
                                       Timestamp t_ref, const TrainConfig& cfg,
                                       double tau, std::mt19937_64& rng) {
  const auto k = static_cast<std::size_t>(cfg.walks_per_node);
  const auto len = static_cast<std::size_t>(cfg.walk_len);
  if (cfg.ablation == Ablation::StaticWalks) {
    return uniform_walks(g, v, k, len, rng);
  }
  if (g.neighbors_before(v, t_ref).empty()) {
    return fallback_neighborhood(g, v, k, len, rng);
  }
  WalkContext ctx{t_ref, cfg.p, cfg.q, tau};
  return sample_walks(g, v, k, len, ctx, rng);
}

std::vector<TemporalWalk> gather_negative_walks(const TemporalGraph& g,
                                                NodeId v,
                                                const TrainConfig& cfg,
                                                std::mt19937_64& rng) {
  const auto k = static_cast<std::size_t>(cfg.walks_per_node);
  const auto len = static_cast<std::size_t>(cfg.walk_len);
  if (cfg.ablation == Ablation::StaticWalks) {
    return uniform_walks(g, v, k, len, rng);
  }
  return fallback_neighborhood(g, v, k, len, rng);
}

}  // namespace

NoiseSampler::NoiseSampler(const TemporalGraph& g, double alpha) {
  const std::size_t n = g.n_nodes();
  probs_ = VectorXd::Zero(static_cast<Eigen::Index>(n));
  std::vector<double> weights;
  for (NodeId v = 0; v < n; ++v) {
    if (g.degree(v) == 0) continue;
    ids_.push_back(v);
    weights.push_back(std::pow(static_cast<double>(g.degree(v)), alpha));
  }
  if (ids_.empty()) {
    throw std::invalid_argument("noise sampler: graph has no edges");
  }
  const double total =
      std::accumulate(weights.begin(), weights.end(), 0.0);
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    probs_[ids_[i]] = weights[i] / total;
  }

  // Vose alias construction.
  const std::size_t m = ids_.size();
  accept_.assign(m, 1.0);
  alias_.assign(m, 0);
  std::vector<double> scaled(m);
  for (std::size_t i = 0; i < m; ++i) {
    scaled[i] = weights[i] / total * static_cast<double>(m);
  }
  std::vector<std::size_t> small, large;
  for (std::size_t i = m; i-- > 0;) {
    (scaled[i] < 1.0 ? small : large).push_back(i);
  }
  while (!small.empty() && !large.empty()) {
    const std::size_t s = small.back();
    const std::size_t l = large.back();
    small.pop_back();
    large.pop_back();
    accept_[s] = scaled[s];
    alias_[s] = static_cast<std::uint32_t>(l);
    scaled[l] = scaled[l] + scaled[s] - 1.0;
    (scaled[l] < 1.0 ? small : large).push_back(l);
  }
  for (std::size_t i : large) accept_[i] = 1.0;
  for (std::size_t i : small) accept_[i] = 1.0;
}

NodeId NoiseSampler::sample(std::mt19937_64& rng) const {
  const std::size_t i =
      static_cast<std::size_t>(uniform_below(rng, ids_.size()));
  if (uniform01(rng) < accept_[i]) return ids_[i];
  return ids_[alias_[i]];
}

std::string ablation_name(Ablation a) {
  switch (a) {
    case Ablation::None: return "none";
    case Ablation::NoAttention: return "NA";
    case Ablation::StaticWalks: return "RW";
    case Ablation::SingleLevel: return "SL";
  }
  throw std::logic_error("unknown ablation");
}

Ablation parse_ablation(const std::string& name) {
  if (name == "none") return Ablation::None;
  if (name == "NA" || name == "na") return Ablation::NoAttention;
  if (name == "RW" || name == "rw") return Ablation::StaticWalks;
  if (name == "SL" || name == "sl") return Ablation::SingleLevel;
  throw std::invalid_argument("unknown ablation: " + name);
}

void validate_config(const TrainConfig& cfg) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("train config: ") + what);
  };
  require(cfg.dim > 0, "dim must be positive");
  require(cfg.walks_per_node >= 1, "walks_per_node must be >= 1");
  require(cfg.walk_len >= 1, "walk_len must be >= 1");
  require(cfg.layers == 2 || cfg.layers == 3, "layers must be 2 or 3");
  require(cfg.p > 0.0 && std::isfinite(cfg.p), "p must be positive");
  require(cfg.q > 0.0 && std::isfinite(cfg.q), "q must be positive");
  require(cfg.margin >= 0.0 && std::isfinite(cfg.margin),
          "margin must be non-negative");
  require(cfg.negatives >= 1, "negatives must be >= 1");
  require(cfg.lr > 0.0 && std::isfinite(cfg.lr), "lr must be positive");
  require(cfg.batch_size >= 1, "batch_size must be >= 1");
  require(cfg.epochs >= 0, "epochs must be >= 0");
  require(cfg.tau >= 0.0 && std::isfinite(cfg.tau), "tau must be >= 0");
  require(cfg.tau_t >= 0.0 && std::isfinite(cfg.tau_t), "tau_t must be >= 0");
  require(cfg.threads >= 1, "threads must be >= 1");
}

double resolve_tau(const TemporalGraph& g, const TrainConfig& cfg) {
  return cfg.tau > 0.0 ? cfg.tau : g.tau();
}

double resolve_tau_t(const TemporalGraph& g, const TrainConfig& cfg) {
  return cfg.tau_t > 0.0 ? cfg.tau_t : resolve_tau(g, cfg);
}

double edge_loss(const VectorXd& zx, const VectorXd& zy,
                 const MatrixXd& neg_x, const MatrixXd& neg_y, double margin,
                 EdgeLossGrads* grads) {
  const Eigen::Index d = zx.size();
  if (grads) {
    grads->d_zx = VectorXd::Zero(d);
    grads->d_zy = VectorXd::Zero(d);
    grads->d_neg_x = MatrixXd::Zero(d, neg_x.cols());
    grads->d_neg_y = MatrixXd::Zero(d, neg_y.cols());
  }
  const VectorXd diff_xy = zx - zy;
  const double positive = diff_xy.squaredNorm();
  double loss = 0.0;
  for (Eigen::Index q = 0; q < neg_x.cols(); ++q) {
    const VectorXd diff_neg = zx - neg_x.col(q);
    const double term = margin + positive - diff_neg.squaredNorm();
    if (term > 0.0) {
      loss += term;
      if (grads) {
        grads->d_zx += 2.0 * diff_xy - 2.0 * diff_neg;
        grads->d_zy -= 2.0 * diff_xy;
        grads->d_neg_x.col(q) += 2.0 * diff_neg;
      }
    }
  }
  for (Eigen::Index q = 0; q < neg_y.cols(); ++q) {
    const VectorXd diff_neg = zy - neg_y.col(q);
    const double term = margin + positive - diff_neg.squaredNorm();
    if (term > 0.0) {
      loss += term;
      if (grads) {
        grads->d_zx += 2.0 * diff_xy;
        grads->d_zy += -2.0 * diff_xy - 2.0 * diff_neg;
        grads->d_neg_y.col(q) += 2.0 * diff_neg;
      }
    }
  }
  return loss;
}

namespace {

// Holds the output of one edge's forward+backward pass destination.
struct WorkerState {
  ModelParams grads;
  std::vector<BnUpdate> bn_updates;
  double loss = 0.0;
};

struct FitContext {
  const TemporalGraph& g;
  const TrainConfig& cfg;
  double tau;
  AttentionScale scale;
  AggregationOptions opts;
  const NoiseSampler& noise;
};

void process_edge(const FitContext& fc, const ModelParams& params, int epoch,
                  std::size_t edge_idx, WorkerState& out) {
  const TemporalEdge& e = fc.g.edges()[edge_idx];
  std::mt19937_64 rng(mix_seed(fc.cfg.seed ^ kEdgeSalt,
                               static_cast<std::uint64_t>(epoch), edge_idx));

  auto embed_endpoint = [&](NodeId v, AggregationTrace& trace) {
    auto walks = gather_walks(fc.g, v, e.t, fc.cfg, fc.tau, rng);
    return aggregate(params, v, walks, fc.scale, fc.opts, rng, &trace);
  };
  AggregationTrace trace_x, trace_y;
  const VectorXd zx = embed_endpoint(e.src, trace_x);
  const VectorXd zy = embed_endpoint(e.dst, trace_y);

  const int Q = fc.cfg.negatives;
  std::vector<AggregationTrace> neg_traces;
  neg_traces.reserve(2 * static_cast<std::size_t>(Q));
  std::vector<VectorXd> neg_cols_x, neg_cols_y;
  for (int side = 0; side < 2; ++side) {
    for (int qi = 0; qi < Q; ++qi) {
      NodeId neg = 0;
      bool found = false;
      for (int attempt = 0; attempt < kNegativeResampleLimit; ++attempt) {
        neg = fc.noise.sample(rng);
        if (neg != e.src && neg != e.dst) {
          found = true;
          break;
        }
      }
      if (!found) continue;  // degenerate noise distribution; drop the slot
      auto walks = gather_negative_walks(fc.g, neg, fc.cfg, rng);
      AggregationTrace trace;
      VectorXd z = aggregate(params, neg, walks, fc.scale, fc.opts, rng,
                             &trace);
      neg_traces.push_back(std::move(trace));
      (side == 0 ? neg_cols_x : neg_cols_y).push_back(std::move(z));
    }
  }
  const Eigen::Index d = params.dim;
  MatrixXd neg_x(d, static_cast<Eigen::Index>(neg_cols_x.size()));
  MatrixXd neg_y(d, static_cast<Eigen::Index>(neg_cols_y.size()));
  for (std::size_t i = 0; i < neg_cols_x.size(); ++i) {
    neg_x.col(static_cast<Eigen::Index>(i)) = neg_cols_x[i];
  }
  for (std::size_t i = 0; i < neg_cols_y.size(); ++i) {
    neg_y.col(static_cast<Eigen::Index>(i)) = neg_cols_y[i];
  }

  EdgeLossGrads elg;
  out.loss += edge_loss(zx, zy, neg_x, neg_y, fc.cfg.margin, &elg);

  aggregate_backward(params, trace_x, elg.d_zx, out.grads);
  aggregate_backward(params, trace_y, elg.d_zy, out.grads);
  for (std::size_t i = 0; i < neg_cols_x.size(); ++i) {
    aggregate_backward(params, neg_traces[i],
                       elg.d_neg_x.col(static_cast<Eigen::Index>(i)),
                       out.grads);
  }
  for (std::size_t i = 0; i < neg_cols_y.size(); ++i) {
    aggregate_backward(params, neg_traces[neg_cols_x.size() + i],
                       elg.d_neg_y.col(static_cast<Eigen::Index>(i)),
                       out.grads);
  }

  auto collect_update = [&out](const AggregationTrace& t) {
    if (t.bn1_update) out.bn_updates.push_back(*t.bn1_update);
  };
  collect_update(trace_x);
  collect_update(trace_y);
  for (const AggregationTrace& t : neg_traces) collect_update(t);
}

}  // namespace

ModelParams fit(const TemporalGraph& g, const TrainConfig& cfg,
                const TrainLogger& logger) {
  validate_config(cfg);
  const double tau = resolve_tau(g, cfg);
  const double tau_t = resolve_tau_t(g, cfg);

  std::mt19937_64 init_rng(mix_seed(cfg.seed, kInitSalt));
  ModelParams params = init_model(static_cast<Eigen::Index>(g.n_nodes()),
                                  cfg.dim, static_cast<std::size_t>(cfg.layers),
                                  init_rng);
  if (cfg.epochs == 0) return params;

  const NoiseSampler noise(g);
  FitContext fc{g,
                cfg,
                tau,
                AttentionScale{g.t_min(), tau_t},
                options_for(cfg.ablation, /*training=*/true),
                noise};

  const std::size_t m = g.n_edges();
  const std::size_t n_threads =
      std::min<std::size_t>(static_cast<std::size_t>(cfg.threads),
                            std::max<std::size_t>(1, m));
  std::vector<WorkerState> workers(n_threads);
  for (WorkerState& w : workers) w.grads = zeros_like(params);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double epoch_loss = 0.0;
    for (std::size_t begin = 0; begin < m;
         begin += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end =
          std::min(m, begin + static_cast<std::size_t>(cfg.batch_size));
      for (WorkerState& w : workers) {
        set_zero(w.grads);
        w.bn_updates.clear();
        w.loss = 0.0;
      }

      const std::size_t count = end - begin;
      const std::size_t chunk = (count + n_threads - 1) / n_threads;
      auto run_chunk = [&](std::size_t wi) {
        const std::size_t lo = begin + wi * chunk;
        const std::size_t hi = std::min(end, lo + chunk);
        for (std::size_t idx = lo; idx < hi; ++idx) {
          process_edge(fc, params, epoch, idx, workers[wi]);
        }
      };
      if (n_threads == 1) {
        run_chunk(0);
      } else {
        std::vector<std::thread> pool;
        for (std::size_t wi = 0; wi < n_threads; ++wi) {
          pool.emplace_back(run_chunk, wi);
        }
        for (std::thread& t : pool) t.join();
      }

      for (std::size_t wi = 1; wi < n_threads; ++wi) {
        add_params(workers[0].grads, workers[wi].grads);
      }
      for (const WorkerState& w : workers) {
        for (const BnUpdate& u : w.bn_updates) {
          apply_bn_update(params.bn1, u);
        }
      }
      sgd_step(params, workers[0].grads, cfg.lr);
      for (const WorkerState& w : workers) epoch_loss += w.loss;
    }
    if (logger) {
      logger(EpochLog{epoch, epoch_loss / static_cast<double>(m), cfg.lr, m});
    }
  }
  return params;
}

MatrixXd materialize_embeddings(const TemporalGraph& g,
                                const ModelParams& params,
                                const TrainConfig& cfg) {
  validate_config(cfg);
  if (params.embeddings.cols() != static_cast<Eigen::Index>(g.n_nodes())) {
    throw std::invalid_argument(
        "materialize: model was trained on a different node count");
  }
  const double tau = resolve_tau(g, cfg);
  const double tau_t = resolve_tau_t(g, cfg);
  const AttentionScale scale{g.t_min(), tau_t};
  const AggregationOptions opts = options_for(cfg.ablation, /*training=*/false);
  const auto k = static_cast<std::size_t>(cfg.walks_per_node);
  const auto len = static_cast<std::size_t>(cfg.walk_len);

  MatrixXd out(params.dim, static_cast<Eigen::Index>(g.n_nodes()));
  for (NodeId v = 0; v < g.n_nodes(); ++v) {
    if (g.degree(v) == 0) {
      const VectorXd col = params.embeddings.col(v);
      out.col(v) = col / std::max(col.norm(), 1e-30);
      continue;
    }
    std::mt19937_64 rng(mix_seed(cfg.seed ^ kNodeSalt, v));
    std::vector<TemporalWalk> walks;
    if (cfg.ablation == Ablation::StaticWalks) {
      walks = uniform_walks(g, v, k, len, rng);
    } else {
      const Timestamp t_ref = g.adjacency(v).back().t + 1;
      WalkContext ctx{t_ref, cfg.p, cfg.q, tau};
      walks = sample_walks(g, v, k, len, ctx, rng);
    }
    out.col(v) = aggregate(params, v, walks, scale, opts, rng, nullptr);
  }
  return out;
}

}  // namespace ehna
