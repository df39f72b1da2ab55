#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "ehna/graph.hpp"
#include "ehna/model.hpp"

namespace ehna {

// O(1) draws from P(v) proportional to degree(v)^alpha; zero-degree nodes are
// never drawn.
class NoiseSampler {
 public:
  explicit NoiseSampler(const TemporalGraph& g, double alpha = 0.75);

  NodeId sample(std::mt19937_64& rng) const;

  // Normalized probability per node (zero for isolated nodes).
  const VectorXd& probabilities() const { return probs_; }

 private:
  std::vector<NodeId> ids_;
  std::vector<double> accept_;
  std::vector<std::uint32_t> alias_;
  VectorXd probs_;
};

enum class Ablation {
  None,         // full model
  NoAttention,  // uniform node and walk weights
  StaticWalks,  // unrestricted uniform walks instead of temporal walks
  SingleLevel,  // mean over walk encodings, no across-walk stack
};

std::string ablation_name(Ablation a);
Ablation parse_ablation(const std::string& name);

struct TrainConfig {
  int dim = 128;
  int walks_per_node = 10;
  int walk_len = 10;
  int layers = 2;
  double p = 1.0;
  double q = 1.0;
  double margin = 5.0;
  int negatives = 5;
  double lr = 2e-5;
  int batch_size = 512;
  int epochs = 0;      // must be set explicitly
  std::uint64_t seed = 1;
  double tau = 0.0;    // <= 0: use the graph's tau
  double tau_t = 0.0;  // <= 0: use the resolved tau
  Ablation ablation = Ablation::None;
  int threads = 1;
};

void validate_config(const TrainConfig& cfg);

double resolve_tau(const TemporalGraph& g, const TrainConfig& cfg);
double resolve_tau_t(const TemporalGraph& g, const TrainConfig& cfg);

// Bidirectional margin loss over one edge (x, y) with per-side negatives.
// All inputs are unit vectors; neg_x / neg_y hold one column per negative.
// When grads is non-null, gradients are written into its columns:
// d_zx, d_zy (d x 1) and d_neg_x, d_neg_y (d x Q).
struct EdgeLossGrads {
  VectorXd d_zx;
  VectorXd d_zy;
  MatrixXd d_neg_x;
  MatrixXd d_neg_y;
};

double edge_loss(const VectorXd& zx, const VectorXd& zy,
                 const MatrixXd& neg_x, const MatrixXd& neg_y, double margin,
                 EdgeLossGrads* grads);

struct EpochLog {
  int epoch = 0;
  double mean_loss = 0.0;
  double lr = 0.0;
  std::size_t edges = 0;
};

using TrainLogger = std::function<void(const EpochLog&)>;

// Mini-batch gradient descent over edges in time order.  Each edge
// contributes the bidirectional margin loss of its endpoint encodings against
// noise-sampled negatives; endpoints use their pre-edge history (fallback
// neighborhoods when empty), negatives always use fallback neighborhoods.
// Deterministic for a fixed (seed, threads) pair.
ModelParams fit(const TemporalGraph& g, const TrainConfig& cfg,
                const TrainLogger& logger = {});

// One inference-mode aggregation per node, anchored just after its most
// recent edge.  Isolated nodes fall back to their normalized embedding
// column.  Returns dim x n_nodes.
MatrixXd materialize_embeddings(const TemporalGraph& g,
                                const ModelParams& params,
                                const TrainConfig& cfg);

}  // namespace ehna
