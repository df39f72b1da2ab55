#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ehna/graph.hpp"
#include "ehna/model.hpp"

namespace ehna {

// ---------------------------------------------------------------------------
// Reports

struct MetricRow {
  std::string metric;
  std::string op = "-";
  long long P = -1;  // -1: not applicable
  std::vector<double> values;

  double mean() const;
  double stdev() const;  // sample standard deviation, 0 for a single value
};

struct EvalReport {
  std::string task;
  int repeats = 1;
  std::uint64_t seed = 0;
  std::vector<MetricRow> rows;

  // One line per row: task,metric,operator,P,mean,std,repeats,seed
  void write_csv(std::ostream& out) const;
  std::string csv() const;
};

// ---------------------------------------------------------------------------
// Binary edge operators over endpoint embeddings

enum class EdgeOp { Mean, Hadamard, WeightedL1, WeightedL2 };

std::string edge_op_name(EdgeOp op);
EdgeOp parse_edge_op(const std::string& name);
std::vector<EdgeOp> all_edge_ops();

VectorXd edge_features(EdgeOp op, const VectorXd& ex, const VectorXd& ey);

// ---------------------------------------------------------------------------
// Network reconstruction

struct ReconstructionConfig {
  std::vector<std::size_t> precisions{100, 1000, 10000};
  std::size_t sample_nodes = 0;  // 0: score all pairs, single deterministic run
  int repeats = 10;
  std::uint64_t seed = 1;
  bool euclidean = false;  // default: dot-product scores
};

// Ranks node pairs by embedding score and measures the fraction of true
// (static) edges among the top P, plus the edge density of the scored pairs.
// Ties rank by pair index.
EvalReport reconstruction_eval(const MatrixXd& embeddings,
                               const TemporalGraph& g,
                               const ReconstructionConfig& cfg);

// ---------------------------------------------------------------------------
// Link prediction

struct LinkPredConfig {
  double train_ratio = 0.5;
  int repeats = 10;
  std::uint64_t seed = 1;
  double l2 = 1e-4;
  int max_iters = 300;
};

// Binary classifier over operator features: held-out edges against an equal
// number of uniformly drawn non-edges (disjoint from train and held-out
// edges).  Reports f1, accuracy and auc per repeat.
EvalReport link_prediction_eval(const MatrixXd& embeddings,
                                const TemporalGraph& train_graph,
                                const std::vector<TemporalEdge>& held_out,
                                EdgeOp op, const LinkPredConfig& cfg);

// ---------------------------------------------------------------------------
// Pieces exposed for reuse and testing

struct LogisticModel {
  VectorXd w;
  double b = 0.0;

  double score(const VectorXd& x) const { return w.dot(x) + b; }
};

// Deterministic full-batch gradient descent with a halving line search; the
// bias is excluded from the L2 penalty.  Throws if only one class is present.
LogisticModel logistic_fit(const MatrixXd& features,  // d x N
                           const std::vector<int>& labels, double l2,
                           int max_iters);

// Mann-Whitney AUC with average ranks for ties.
double auc_score(const std::vector<double>& scores,
                 const std::vector<int>& labels);

// Threshold-0 classification metrics (score >= 0 predicts the positive class).
double f1_score(const std::vector<double>& scores,
                const std::vector<int>& labels);
double accuracy_score(const std::vector<double>& scores,
                      const std::vector<int>& labels);

}  // namespace ehna
