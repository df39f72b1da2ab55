#pragma once

#include <Eigen/Core>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ehna/walk.hpp"

namespace ehna {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr double kBnEps = 1e-5;
inline constexpr double kBnMomentum = 0.9;

// Fused gate parameters; rows are the four d-blocks [input, forget, cell,
// output] of the 4d x d gate transform.
struct LstmLayer {
  MatrixXd wx;  // 4d x d
  MatrixXd wh;  // 4d x d
  MatrixXd b;   // 4d x 1
};

struct LstmStack {
  std::vector<LstmLayer> layers;
};

struct BatchNorm {
  MatrixXd gamma;         // d x 1
  MatrixXd beta;          // d x 1
  MatrixXd running_mean;  // d x 1
  MatrixXd running_var;   // d x 1
};

struct ModelParams {
  Eigen::Index dim = 0;
  MatrixXd embeddings;  // dim x n_nodes, one column per node
  LstmStack lstm1;      // per-walk encoder
  LstmStack lstm2;      // across-walk encoder
  BatchNorm bn1;
  BatchNorm bn2;
  MatrixXd proj;  // dim x 2*dim

  Eigen::Index n_nodes() const { return embeddings.cols(); }
  std::size_t n_layers() const { return lstm1.layers.size(); }
};

// Embeddings and LSTM weights uniform in [-1/sqrt(dim), +1/sqrt(dim)] with
// forget-gate biases at 1; projection uniform in [-1/sqrt(2*dim),
// +1/sqrt(2*dim)]; batch-norm at identity with (0, 1) running statistics.
ModelParams init_model(Eigen::Index n_nodes, Eigen::Index dim,
                       std::size_t layers, std::mt19937_64& rng);

ModelParams zeros_like(const ModelParams& p);

// Trainable tensors in a fixed order; running statistics are excluded.
std::vector<std::pair<std::string, MatrixXd*>> trainable_tensors(
    ModelParams& p);
// All tensors, including running statistics (checkpoint granularity).
std::vector<std::pair<std::string, MatrixXd*>> state_tensors(ModelParams& p);

void sgd_step(ModelParams& params, const ModelParams& grads, double lr);

// ---------------------------------------------------------------------------
// LSTM

struct LstmStepCache {
  VectorXd gates;  // post-activation [i; f; g; o], 4d
  VectorXd c;
  VectorXd h;
};

struct LstmTrace {
  MatrixXd inputs;                               // d x T, layer-0 inputs
  std::vector<std::vector<LstmStepCache>> steps;  // [layer][t]
};

// Runs the stack over `inputs` columns left to right from zero initial state
// and returns the top layer's final hidden state.
VectorXd encode_sequence(const LstmStack& stack, const MatrixXd& inputs,
                         LstmTrace* trace);

// Backpropagates d(final hidden); accumulates parameter gradients into
// `grads` and returns gradients w.r.t. the input columns.
MatrixXd lstm_backward(const LstmStack& stack, const LstmTrace& trace,
                       const VectorXd& d_h_final, LstmStack& grads);

// ---------------------------------------------------------------------------
// Batch normalization

struct BnTrace {
  bool batch_mode = false;
  MatrixXd xhat;
  VectorXd inv_std;
  VectorXd batch_mean;
  VectorXd batch_var;
};

struct BnUpdate {
  VectorXd mean;
  VectorXd var;
};

// Normalizes columns feature-wise.  Batch statistics (biased variance) are
// used when training with at least two columns; running statistics otherwise.
MatrixXd batch_norm_forward(const BatchNorm& bn, const MatrixXd& x,
                            bool training, BnTrace* trace);

MatrixXd batch_norm_backward(const BatchNorm& bn, const BnTrace& trace,
                             const MatrixXd& dy, BatchNorm& grads);

// running <- momentum * running + (1 - momentum) * batch
void apply_bn_update(BatchNorm& bn, const BnUpdate& update);

// ---------------------------------------------------------------------------
// Attention

VectorXd softmax(const VectorXd& logits);
VectorXd softmax_backward(const VectorXd& probs, const VectorXd& d_probs);

// Affine rescaling of accumulated walk timestamps into a positive scale.
struct AttentionScale {
  Timestamp t_origin = 0;
  double tau_t = 1.0;
};

// ((tsum - visits * t_origin) / tau_t) + 1; >= 1 whenever all edge times are
// >= t_origin.
double time_scale(const AttentionScale& scale, std::int64_t tsum,
                  std::uint32_t visits);

// Per-position weights over the walk, softmax of -|e_x - e_v|^2 / scale_v.
// Positions of the same node share tsum, so they receive equal weight.
VectorXd node_attention(const MatrixXd& embeddings, NodeId x,
                        const TemporalWalk& walk, const AttentionScale& scale);

// (1/len) * sum over positions of 1/scale_v; multiplies the squared distance
// in the walk-level attention logit.
double walk_time_coefficient(const TemporalWalk& walk,
                             const AttentionScale& scale);

// ---------------------------------------------------------------------------
// Aggregation

struct AggregationOptions {
  bool node_attention = true;
  bool walk_attention = true;
  bool single_level = false;  // mean of walk encodings, no second stack
  bool training = true;
};

struct WalkTrace {
  std::vector<NodeId> fed_nodes;  // oldest-first
  VectorXd alpha;                 // aligned with fed_nodes
  VectorXd inv_scale;             // 1/scale per fed position
  double coef = 0.0;
  LstmTrace lstm;
};

struct AggregationTrace {
  NodeId x = 0;
  AggregationOptions opts;
  std::vector<WalkTrace> walks;
  MatrixXd h_raw;  // d x k, walk encodings before normalization
  BnTrace bn1;
  MatrixXd bn1_out;  // d x k, pre-activation
  MatrixXd h_act;    // d x k, rectified walk encodings
  VectorXd beta;     // per original walk index
  std::vector<std::size_t> perm;  // feed order of the across-walk stack
  LstmTrace lstm2;
  VectorXd h_top;  // across-walk encoding before bn2 (or the mean)
  BnTrace bn2;
  VectorXd h_final;
  VectorXd z_raw;
  double z_norm = 0.0;
  VectorXd z;
  std::optional<BnUpdate> bn1_update;
};

// Encodes the walk set of node x into a unit-norm vector.  `rng` drives the
// random feed order of walk encodings; walks must start at x.
VectorXd aggregate(const ModelParams& params, NodeId x,
                   const std::vector<TemporalWalk>& walks,
                   const AttentionScale& scale, const AggregationOptions& opts,
                   std::mt19937_64& rng, AggregationTrace* trace);

// Accumulates gradients of all parameters and touched embedding columns.
void aggregate_backward(const ModelParams& params, const AggregationTrace& trace,
                        const VectorXd& dz, ModelParams& grads);

}  // namespace ehna
