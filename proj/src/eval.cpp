#include "ehna/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "ehna/rng.hpp"

namespace ehna {

namespace {

std::uint64_t pair_key(NodeId u, NodeId v) {
  if (u > v) std::swap(u, v);
  return (static_cast<std::uint64_t>(u) << 32) | v;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// Reports

double MetricRow::mean() const {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) /
         static_cast<double>(values.size());
}

double MetricRow::stdev() const {
  if (values.size() < 2) return 0.0;
  const double m = mean();
  double acc = 0.0;
  for (double v : values) acc += (v - m) * (v - m);
  return std::sqrt(acc / static_cast<double>(values.size() - 1));
}

void EvalReport::write_csv(std::ostream& out) const {
  out << "task,metric,operator,P,mean,std,repeats,seed\n";
  for (const MetricRow& row : rows) {
    out << task << ',' << row.metric << ',' << row.op << ',';
    if (row.P >= 0) {
      out << row.P;
    } else {
      out << '-';
    }
    out << ',' << format_double(row.mean()) << ',' << format_double(row.stdev())
        << ',' << repeats << ',' << seed << '\n';
  }
}

std::string EvalReport::csv() const {
  std::ostringstream os;
  write_csv(os);
  return os.str();
}

// ---------------------------------------------------------------------------
// Edge operators

std::string edge_op_name(EdgeOp op) {
  switch (op) {
    case EdgeOp::Mean: return "Mean";
    case EdgeOp::Hadamard: return "Hadamard";
    case EdgeOp::WeightedL1: return "WeightedL1";
    case EdgeOp::WeightedL2: return "WeightedL2";
  }
  throw std::logic_error("unknown edge operator");
}

EdgeOp parse_edge_op(const std::string& name) {
  if (name == "mean" || name == "Mean") return EdgeOp::Mean;
  if (name == "hadamard" || name == "Hadamard") return EdgeOp::Hadamard;
  if (name == "l1" || name == "WeightedL1") return EdgeOp::WeightedL1;
  if (name == "l2" || name == "WeightedL2") return EdgeOp::WeightedL2;
  throw std::invalid_argument("unknown edge operator: " + name);
}

std::vector<EdgeOp> all_edge_ops() {
  return {EdgeOp::Mean, EdgeOp::Hadamard, EdgeOp::WeightedL1,
          EdgeOp::WeightedL2};
}

VectorXd edge_features(EdgeOp op, const VectorXd& ex, const VectorXd& ey) {
  switch (op) {
    case EdgeOp::Mean: return 0.5 * (ex + ey);
    case EdgeOp::Hadamard: return ex.cwiseProduct(ey);
    case EdgeOp::WeightedL1: return (ex - ey).cwiseAbs();
    case EdgeOp::WeightedL2: return (ex - ey).array().square();
  }
  throw std::logic_error("unknown edge operator");
}

// ---------------------------------------------------------------------------
// Network reconstruction

namespace {

struct ScoredPair {
  double score;
  std::size_t pair_idx;
  bool is_edge;
};

void reconstruction_repeat(const MatrixXd& emb, const TemporalGraph& g,
                           const std::vector<NodeId>& nodes, bool euclidean,
                           const std::vector<std::size_t>& precisions,
                           std::vector<double>& precision_out,
                           double& density_out) {
  std::vector<ScoredPair> pairs;
  pairs.reserve(nodes.size() * (nodes.size() - 1) / 2);
  std::size_t idx = 0;
  std::size_t edge_count = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    for (std::size_t j = i + 1; j < nodes.size(); ++j) {
      const NodeId u = nodes[i];
      const NodeId v = nodes[j];
      const double score = euclidean
                               ? -(emb.col(u) - emb.col(v)).squaredNorm()
                               : emb.col(u).dot(emb.col(v));
      const bool is_edge = g.has_static_edge(u, v);
      edge_count += is_edge ? 1 : 0;
      pairs.push_back(ScoredPair{score, idx++, is_edge});
    }
  }
  if (pairs.empty()) throw std::invalid_argument("reconstruction: < 2 nodes");
  std::sort(pairs.begin(), pairs.end(),
            [](const ScoredPair& a, const ScoredPair& b) {
              if (a.score != b.score) return a.score > b.score;
              return a.pair_idx < b.pair_idx;
            });
  density_out =
      static_cast<double>(edge_count) / static_cast<double>(pairs.size());
  precision_out.clear();
  for (std::size_t P : precisions) {
    const std::size_t eff = std::min(P, pairs.size());
    std::size_t hits = 0;
    for (std::size_t i = 0; i < eff; ++i) hits += pairs[i].is_edge ? 1 : 0;
    precision_out.push_back(static_cast<double>(hits) /
                            static_cast<double>(eff));
  }
}

}  // namespace

EvalReport reconstruction_eval(const MatrixXd& embeddings,
                               const TemporalGraph& g,
                               const ReconstructionConfig& cfg) {
  const std::size_t n = g.n_nodes();
  if (embeddings.cols() != static_cast<Eigen::Index>(n)) {
    throw std::invalid_argument("reconstruction: embedding/node count mismatch");
  }
  const bool full = cfg.sample_nodes == 0 || cfg.sample_nodes >= n;
  const int repeats = full ? 1 : std::max(1, cfg.repeats);

  EvalReport report;
  report.task = "reconstruction";
  report.repeats = repeats;
  report.seed = cfg.seed;
  std::vector<MetricRow> prec_rows(cfg.precisions.size());
  for (std::size_t i = 0; i < cfg.precisions.size(); ++i) {
    prec_rows[i].metric = "precision";
    prec_rows[i].P = static_cast<long long>(cfg.precisions[i]);
  }
  MetricRow density_row;
  density_row.metric = "density";

  for (int rep = 0; rep < repeats; ++rep) {
    std::vector<NodeId> nodes;
    if (full) {
      nodes.resize(n);
      std::iota(nodes.begin(), nodes.end(), NodeId{0});
    } else {
      std::mt19937_64 rng(mix_seed(cfg.seed, 0x5245434full,
                                   static_cast<std::uint64_t>(rep)));
      std::vector<NodeId> all(n);
      std::iota(all.begin(), all.end(), NodeId{0});
      for (std::size_t i = 0; i < cfg.sample_nodes; ++i) {
        const std::size_t j =
            i + static_cast<std::size_t>(uniform_below(rng, n - i));
        std::swap(all[i], all[j]);
      }
      nodes.assign(all.begin(), all.begin() + cfg.sample_nodes);
      std::sort(nodes.begin(), nodes.end());
    }
    std::vector<double> precisions;
    double density = 0.0;
    reconstruction_repeat(embeddings, g, nodes, cfg.euclidean, cfg.precisions,
                          precisions, density);
    for (std::size_t i = 0; i < precisions.size(); ++i) {
      prec_rows[i].values.push_back(precisions[i]);
    }
    density_row.values.push_back(density);
  }
  for (MetricRow& row : prec_rows) report.rows.push_back(std::move(row));
  report.rows.push_back(std::move(density_row));
  return report;
}

// ---------------------------------------------------------------------------
// Logistic regression and ranking metrics

LogisticModel logistic_fit(const MatrixXd& features,
                           const std::vector<int>& labels, double l2,
                           int max_iters) {
  const Eigen::Index d = features.rows();
  const Eigen::Index n = features.cols();
  if (n != static_cast<Eigen::Index>(labels.size()) || n == 0) {
    throw std::invalid_argument("logistic_fit: feature/label size mismatch");
  }
  const int pos = static_cast<int>(
      std::count(labels.begin(), labels.end(), 1));
  if (pos == 0 || pos == static_cast<int>(labels.size())) {
    throw std::invalid_argument("logistic_fit: need both classes");
  }

  VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y[i] = labels[static_cast<std::size_t>(i)];

  auto loss_of = [&](const VectorXd& w, double b) {
    const VectorXd s = (features.transpose() * w).array() + b;
    // log(1 + exp(s)) - y * s, numerically stable
    const double data =
        ((s.array().abs() * -1.0).exp().log1p() + s.array().max(0.0) -
         y.array() * s.array())
            .mean();
    return data + 0.5 * l2 * w.squaredNorm();
  };

  VectorXd w = VectorXd::Zero(d);
  double b = 0.0;
  double lr = 1.0;
  double cur_loss = loss_of(w, b);
  for (int iter = 0; iter < max_iters; ++iter) {
    const VectorXd s = (features.transpose() * w).array() + b;
    const VectorXd p = 1.0 / (1.0 + (-s.array()).exp());
    const VectorXd resid = p - y;
    VectorXd gw = features * resid / static_cast<double>(n) + l2 * w;
    const double gb = resid.mean();
    if (gw.norm() + std::abs(gb) < 1e-12) break;

    bool accepted = false;
    for (int halving = 0; halving < 60; ++halving) {
      const VectorXd w_try = w - lr * gw;
      const double b_try = b - lr * gb;
      const double next = loss_of(w_try, b_try);
      if (next <= cur_loss) {
        w = w_try;
        b = b_try;
        cur_loss = next;
        accepted = true;
        break;
      }
      lr *= 0.5;
    }
    if (!accepted) break;
    lr *= 1.2;
  }
  return LogisticModel{std::move(w), b};
}

double auc_score(const std::vector<double>& scores,
                 const std::vector<int>& labels) {
  const std::size_t n = scores.size();
  if (n != labels.size() || n == 0) {
    throw std::invalid_argument("auc_score: size mismatch");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;  // 1-based
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  double rank_pos = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (labels[k] == 1) {
      rank_pos += ranks[k];
      ++n_pos;
    }
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw std::invalid_argument("auc_score: need both classes");
  }
  return (rank_pos - 0.5 * static_cast<double>(n_pos) *
                         static_cast<double>(n_pos + 1)) /
         (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double f1_score(const std::vector<double>& scores,
                const std::vector<int>& labels) {
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] >= 0.0;
    if (pred && labels[i] == 1) ++tp;
    if (pred && labels[i] == 0) ++fp;
    if (!pred && labels[i] == 1) ++fn;
  }
  const double denom = static_cast<double>(2 * tp + fp + fn);
  return denom > 0.0 ? 2.0 * static_cast<double>(tp) / denom : 0.0;
}

double accuracy_score(const std::vector<double>& scores,
                      const std::vector<int>& labels) {
  if (scores.empty()) return 0.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    hit += ((scores[i] >= 0.0) == (labels[i] == 1)) ? 1 : 0;
  }
  return static_cast<double>(hit) / static_cast<double>(scores.size());
}

// ---------------------------------------------------------------------------
// Link prediction

EvalReport link_prediction_eval(const MatrixXd& embeddings,
                                const TemporalGraph& train_graph,
                                const std::vector<TemporalEdge>& held_out,
                                EdgeOp op, const LinkPredConfig& cfg) {
  const std::size_t n = train_graph.n_nodes();
  if (embeddings.cols() != static_cast<Eigen::Index>(n)) {
    throw std::invalid_argument("link prediction: embedding/node mismatch");
  }
  if (held_out.empty()) {
    throw std::invalid_argument("link prediction: no held-out edges");
  }
  if (!(cfg.train_ratio > 0.0 && cfg.train_ratio < 1.0)) {
    throw std::invalid_argument("link prediction: train_ratio must be in (0,1)");
  }

  // Distinct held-out pairs are the positives.
  std::unordered_set<std::uint64_t> held_set;
  std::vector<std::pair<NodeId, NodeId>> positives;
  for (const TemporalEdge& e : held_out) {
    if (e.src == e.dst) continue;
    if (held_set.insert(pair_key(e.src, e.dst)).second) {
      positives.emplace_back(std::min(e.src, e.dst), std::max(e.src, e.dst));
    }
  }
  const std::size_t n_pos = positives.size();
  if (n_pos == 0) {
    throw std::invalid_argument("link prediction: no usable held-out pairs");
  }

  EvalReport report;
  report.task = "linkpred";
  report.repeats = std::max(1, cfg.repeats);
  report.seed = cfg.seed;
  MetricRow f1_row{"f1", edge_op_name(op), -1, {}};
  MetricRow acc_row{"accuracy", edge_op_name(op), -1, {}};
  MetricRow auc_row{"auc", edge_op_name(op), -1, {}};

  for (int rep = 0; rep < report.repeats; ++rep) {
    std::mt19937_64 rng(mix_seed(cfg.seed, 0x4c504544ull,
                                 static_cast<std::uint64_t>(rep)));
    // Negatives: distinct uniformly drawn pairs absent from train and
    // held-out edge sets.
    std::unordered_set<std::uint64_t> chosen;
    std::vector<std::pair<NodeId, NodeId>> negatives;
    std::size_t attempts = 0;
    const std::size_t max_attempts = 1000 * n_pos + 1000;
    while (negatives.size() < n_pos && attempts < max_attempts) {
      ++attempts;
      const NodeId u = static_cast<NodeId>(uniform_below(rng, n));
      const NodeId v = static_cast<NodeId>(uniform_below(rng, n));
      if (u == v) continue;
      const std::uint64_t key = pair_key(u, v);
      if (held_set.count(key) || chosen.count(key)) continue;
      if (train_graph.has_static_edge(u, v)) continue;
      chosen.insert(key);
      negatives.emplace_back(std::min(u, v), std::max(u, v));
    }
    if (negatives.size() < n_pos) {
      throw std::runtime_error(
          "link prediction: could not sample enough negative pairs");
    }

    const std::size_t total = 2 * n_pos;
    MatrixXd feats(embeddings.rows(), static_cast<Eigen::Index>(total));
    std::vector<int> labels(total);
    for (std::size_t i = 0; i < n_pos; ++i) {
      feats.col(static_cast<Eigen::Index>(i)) = edge_features(
          op, embeddings.col(positives[i].first),
          embeddings.col(positives[i].second));
      labels[i] = 1;
      feats.col(static_cast<Eigen::Index>(n_pos + i)) = edge_features(
          op, embeddings.col(negatives[i].first),
          embeddings.col(negatives[i].second));
      labels[n_pos + i] = 0;
    }

    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = total; i-- > 1;) {
      const std::size_t j = static_cast<std::size_t>(uniform_below(rng, i + 1));
      std::swap(order[i], order[j]);
    }
    std::size_t n_train = static_cast<std::size_t>(
        std::llround(cfg.train_ratio * static_cast<double>(total)));
    n_train = std::min(std::max<std::size_t>(n_train, 1), total - 1);

    MatrixXd train_feats(feats.rows(), static_cast<Eigen::Index>(n_train));
    std::vector<int> train_labels(n_train);
    for (std::size_t i = 0; i < n_train; ++i) {
      train_feats.col(static_cast<Eigen::Index>(i)) =
          feats.col(static_cast<Eigen::Index>(order[i]));
      train_labels[i] = labels[order[i]];
    }
    const LogisticModel model =
        logistic_fit(train_feats, train_labels, cfg.l2, cfg.max_iters);

    std::vector<double> test_scores;
    std::vector<int> test_labels;
    test_scores.reserve(total - n_train);
    for (std::size_t i = n_train; i < total; ++i) {
      test_scores.push_back(
          model.score(feats.col(static_cast<Eigen::Index>(order[i]))));
      test_labels.push_back(labels[order[i]]);
    }
    f1_row.values.push_back(f1_score(test_scores, test_labels));
    acc_row.values.push_back(accuracy_score(test_scores, test_labels));
    auc_row.values.push_back(auc_score(test_scores, test_labels));
  }

  report.rows.push_back(std::move(f1_row));
  report.rows.push_back(std::move(acc_row));
  report.rows.push_back(std::move(auc_row));
  return report;
}

}  // namespace ehna
