#include "ehna/model.hpp"

#include <cmath>
#include <stdexcept>

#include "ehna/rng.hpp"

namespace ehna {

namespace {

void fill_uniform(MatrixXd& m, double lo, double hi, std::mt19937_64& rng) {
  double* p = m.data();
  const double span = hi - lo;
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    p[i] = lo + span * uniform01(rng);
  }
}

LstmStack init_stack(Eigen::Index dim, std::size_t layers, double scale,
                     std::mt19937_64& rng) {
  LstmStack stack;
  stack.layers.resize(layers);
  for (LstmLayer& layer : stack.layers) {
    layer.wx.resize(4 * dim, dim);
    layer.wh.resize(4 * dim, dim);
    layer.b = MatrixXd::Zero(4 * dim, 1);
    fill_uniform(layer.wx, -scale, scale, rng);
    fill_uniform(layer.wh, -scale, scale, rng);
    layer.b.block(dim, 0, dim, 1).setOnes();  // forget gate open at init
  }
  return stack;
}

BatchNorm init_bn(Eigen::Index dim) {
  BatchNorm bn;
  bn.gamma = MatrixXd::Ones(dim, 1);
  bn.beta = MatrixXd::Zero(dim, 1);
  bn.running_mean = MatrixXd::Zero(dim, 1);
  bn.running_var = MatrixXd::Ones(dim, 1);
  return bn;
}

inline Eigen::ArrayXd sigmoid(const Eigen::ArrayXd& x) {
  return 1.0 / (1.0 + (-x).exp());
}

void collect_stack(const std::string& prefix, LstmStack& stack,
                   std::vector<std::pair<std::string, MatrixXd*>>& out) {
  for (std::size_t l = 0; l < stack.layers.size(); ++l) {
    const std::string base = prefix + "." + std::to_string(l) + ".";
    out.emplace_back(base + "wx", &stack.layers[l].wx);
    out.emplace_back(base + "wh", &stack.layers[l].wh);
    out.emplace_back(base + "b", &stack.layers[l].b);
  }
}

void collect_bn(const std::string& prefix, BatchNorm& bn, bool with_running,
                std::vector<std::pair<std::string, MatrixXd*>>& out) {
  out.emplace_back(prefix + ".gamma", &bn.gamma);
  out.emplace_back(prefix + ".beta", &bn.beta);
  if (with_running) {
    out.emplace_back(prefix + ".running_mean", &bn.running_mean);
    out.emplace_back(prefix + ".running_var", &bn.running_var);
  }
}

std::vector<std::pair<std::string, MatrixXd*>> collect_tensors(
    ModelParams& p, bool with_running) {
  std::vector<std::pair<std::string, MatrixXd*>> out;
  out.emplace_back("embeddings", &p.embeddings);
  collect_stack("lstm1", p.lstm1, out);
  collect_bn("bn1", p.bn1, with_running, out);
  collect_stack("lstm2", p.lstm2, out);
  collect_bn("bn2", p.bn2, with_running, out);
  out.emplace_back("proj", &p.proj);
  return out;
}

}  // namespace

ModelParams init_model(Eigen::Index n_nodes, Eigen::Index dim,
                       std::size_t layers, std::mt19937_64& rng) {
  if (n_nodes <= 0 || dim <= 0 || layers == 0) {
    throw std::invalid_argument("init_model: positive sizes required");
  }
  ModelParams p;
  p.dim = dim;
  const double s = 1.0 / std::sqrt(static_cast<double>(dim));
  p.embeddings.resize(dim, n_nodes);
  fill_uniform(p.embeddings, -s, s, rng);
  p.lstm1 = init_stack(dim, layers, s, rng);
  p.lstm2 = init_stack(dim, layers, s, rng);
  p.bn1 = init_bn(dim);
  p.bn2 = init_bn(dim);
  p.proj.resize(dim, 2 * dim);
  const double sp = 1.0 / std::sqrt(static_cast<double>(2 * dim));
  fill_uniform(p.proj, -sp, sp, rng);
  return p;
}

ModelParams zeros_like(const ModelParams& p) {
  ModelParams z;
  z.dim = p.dim;
  z.embeddings = MatrixXd::Zero(p.embeddings.rows(), p.embeddings.cols());
  auto zero_stack = [](const LstmStack& src) {
    LstmStack out;
    out.layers.resize(src.layers.size());
    for (std::size_t l = 0; l < src.layers.size(); ++l) {
      out.layers[l].wx = MatrixXd::Zero(src.layers[l].wx.rows(),
                                        src.layers[l].wx.cols());
      out.layers[l].wh = MatrixXd::Zero(src.layers[l].wh.rows(),
                                        src.layers[l].wh.cols());
      out.layers[l].b = MatrixXd::Zero(src.layers[l].b.rows(), 1);
    }
    return out;
  };
  auto zero_bn = [](const BatchNorm& src) {
    BatchNorm out;
    out.gamma = MatrixXd::Zero(src.gamma.rows(), 1);
    out.beta = MatrixXd::Zero(src.beta.rows(), 1);
    out.running_mean = MatrixXd::Zero(src.running_mean.rows(), 1);
    out.running_var = MatrixXd::Zero(src.running_var.rows(), 1);
    return out;
  };
  z.lstm1 = zero_stack(p.lstm1);
  z.lstm2 = zero_stack(p.lstm2);
  z.bn1 = zero_bn(p.bn1);
  z.bn2 = zero_bn(p.bn2);
  z.proj = MatrixXd::Zero(p.proj.rows(), p.proj.cols());
  return z;
}

std::vector<std::pair<std::string, MatrixXd*>> trainable_tensors(
    ModelParams& p) {
  return collect_tensors(p, /*with_running=*/false);
}

std::vector<std::pair<std::string, MatrixXd*>> state_tensors(ModelParams& p) {
  return collect_tensors(p, /*with_running=*/true);
}

void sgd_step(ModelParams& params, const ModelParams& grads, double lr) {
  auto ps = trainable_tensors(params);
  auto gs = trainable_tensors(const_cast<ModelParams&>(grads));
  for (std::size_t i = 0; i < ps.size(); ++i) {
    *ps[i].second -= lr * (*gs[i].second);
  }
}

// ---------------------------------------------------------------------------
// LSTM

VectorXd encode_sequence(const LstmStack& stack, const MatrixXd& inputs,
                         LstmTrace* trace) {
  const std::size_t n_layers = stack.layers.size();
  if (n_layers == 0 || inputs.cols() == 0) {
    throw std::invalid_argument("encode_sequence: empty stack or sequence");
  }
  const Eigen::Index d = stack.layers[0].wh.cols();
  const Eigen::Index T = inputs.cols();

  if (trace) {
    trace->inputs = inputs;
    trace->steps.assign(n_layers, {});
    for (auto& s : trace->steps) s.resize(static_cast<std::size_t>(T));
  }

  std::vector<VectorXd> h(n_layers, VectorXd::Zero(d));
  std::vector<VectorXd> c(n_layers, VectorXd::Zero(d));
  VectorXd x(d), z(4 * d), gates(4 * d);
  for (Eigen::Index t = 0; t < T; ++t) {
    x = inputs.col(t);
    for (std::size_t l = 0; l < n_layers; ++l) {
      const LstmLayer& layer = stack.layers[l];
      z.noalias() = layer.wx * x;
      z.noalias() += layer.wh * h[l];
      z += layer.b.col(0);
      gates.segment(0, d) = sigmoid(z.segment(0, d).array());
      gates.segment(d, d) = sigmoid(z.segment(d, d).array());
      gates.segment(2 * d, d) = z.segment(2 * d, d).array().tanh();
      gates.segment(3 * d, d) = sigmoid(z.segment(3 * d, d).array());
      c[l] = gates.segment(d, d).cwiseProduct(c[l]) +
             gates.segment(0, d).cwiseProduct(gates.segment(2 * d, d));
      h[l] = gates.segment(3 * d, d).cwiseProduct(c[l].array().tanh().matrix());
      if (trace) {
        LstmStepCache& cache = trace->steps[l][static_cast<std::size_t>(t)];
        cache.gates = gates;
        cache.c = c[l];
        cache.h = h[l];
      }
      x = h[l];
    }
  }
  return h[n_layers - 1];
}

MatrixXd lstm_backward(const LstmStack& stack, const LstmTrace& trace,
                       const VectorXd& d_h_final, LstmStack& grads) {
  const std::size_t n_layers = stack.layers.size();
  const Eigen::Index d = stack.layers[0].wh.cols();
  const Eigen::Index T = trace.inputs.cols();

  std::vector<VectorXd> dh(n_layers, VectorXd::Zero(d));
  std::vector<VectorXd> dc(n_layers, VectorXd::Zero(d));
  MatrixXd d_inputs(d, T);
  VectorXd da(4 * d), from_above(d), dh_t(d), dc_t(d), tc(d);

  for (Eigen::Index t = T - 1; t >= 0; --t) {
    for (std::size_t li = n_layers; li-- > 0;) {
      const LstmLayer& layer = stack.layers[li];
      const LstmStepCache& cache = trace.steps[li][static_cast<std::size_t>(t)];

      dh_t = dh[li];
      if (li == n_layers - 1) {
        if (t == T - 1) dh_t += d_h_final;
      } else {
        dh_t += from_above;
      }

      const auto i = cache.gates.segment(0, d).array();
      const auto f = cache.gates.segment(d, d).array();
      const auto g = cache.gates.segment(2 * d, d).array();
      const auto o = cache.gates.segment(3 * d, d).array();
      tc = cache.c.array().tanh();

      dc_t = dc[li];
      dc_t.array() += dh_t.array() * o * (1.0 - tc.array().square());

      const VectorXd* c_prev =
          t > 0 ? &trace.steps[li][static_cast<std::size_t>(t - 1)].c : nullptr;
      const VectorXd* h_prev =
          t > 0 ? &trace.steps[li][static_cast<std::size_t>(t - 1)].h : nullptr;

      // Pre-activation gate gradients, fused in gate order.
      da.segment(0, d).array() = dc_t.array() * g * i * (1.0 - i);
      if (c_prev) {
        da.segment(d, d).array() = dc_t.array() * c_prev->array() * f * (1.0 - f);
      } else {
        da.segment(d, d).setZero();
      }
      da.segment(2 * d, d).array() = dc_t.array() * i * (1.0 - g.square());
      da.segment(3 * d, d).array() = dh_t.array() * tc.array() * o * (1.0 - o);

      LstmLayer& glayer = grads.layers[li];
      if (li == 0) {
        glayer.wx.noalias() += da * trace.inputs.col(t).transpose();
      } else {
        glayer.wx.noalias() +=
            da *
            trace.steps[li - 1][static_cast<std::size_t>(t)].h.transpose();
      }
      if (h_prev) {
        glayer.wh.noalias() += da * h_prev->transpose();
      }
      glayer.b.col(0) += da;

      if (li == 0) {
        d_inputs.col(t).noalias() = layer.wx.transpose() * da;
      } else {
        from_above.noalias() = layer.wx.transpose() * da;
      }
      dh[li].noalias() = layer.wh.transpose() * da;
      dc[li] = f.matrix().cwiseProduct(dc_t);
    }
  }
  return d_inputs;
}

// ---------------------------------------------------------------------------
// Batch normalization

MatrixXd batch_norm_forward(const BatchNorm& bn, const MatrixXd& x,
                            bool training, BnTrace* trace) {
  const Eigen::Index B = x.cols();
  const bool batch_mode = training && B >= 2;

  VectorXd mean, var;
  if (batch_mode) {
    mean = x.rowwise().mean();
    var = (x.colwise() - mean).array().square().rowwise().mean();
  } else {
    mean = bn.running_mean.col(0);
    var = bn.running_var.col(0);
  }
  const VectorXd inv_std = (var.array() + kBnEps).sqrt().inverse();
  MatrixXd xhat = (x.colwise() - mean).array().colwise() * inv_std.array();
  MatrixXd y = (xhat.array().colwise() * bn.gamma.col(0).array()).colwise() +
               bn.beta.col(0).array();
  if (trace) {
    trace->batch_mode = batch_mode;
    trace->xhat = std::move(xhat);
    trace->inv_std = inv_std;
    if (batch_mode) {
      trace->batch_mean = mean;
      trace->batch_var = var;
    }
  }
  return y;
}

MatrixXd batch_norm_backward(const BatchNorm& bn, const BnTrace& trace,
                             const MatrixXd& dy, BatchNorm& grads) {
  grads.gamma.col(0) += (dy.array() * trace.xhat.array()).rowwise().sum().matrix();
  grads.beta.col(0) += dy.rowwise().sum();

  MatrixXd dxhat = dy.array().colwise() * bn.gamma.col(0).array();
  if (!trace.batch_mode) {
    return dxhat.array().colwise() * trace.inv_std.array();
  }
  const double B = static_cast<double>(dy.cols());
  const VectorXd sum_dxhat = dxhat.rowwise().sum();
  const VectorXd sum_dxhat_xhat =
      (dxhat.array() * trace.xhat.array()).rowwise().sum();
  MatrixXd dx =
      (B * dxhat.array() -
       (MatrixXd::Zero(dy.rows(), dy.cols()).array().colwise() +
        sum_dxhat.array()) -
       trace.xhat.array().colwise() * sum_dxhat_xhat.array())
          .colwise() *
      (trace.inv_std.array() / B);
  return dx;
}

void apply_bn_update(BatchNorm& bn, const BnUpdate& update) {
  bn.running_mean.col(0) =
      kBnMomentum * bn.running_mean.col(0) + (1.0 - kBnMomentum) * update.mean;
  bn.running_var.col(0) =
      kBnMomentum * bn.running_var.col(0) + (1.0 - kBnMomentum) * update.var;
}

// ---------------------------------------------------------------------------
// Attention

VectorXd softmax(const VectorXd& logits) {
  if (logits.size() == 0) return logits;
  const double m = logits.maxCoeff();
  Eigen::ArrayXd e = (logits.array() - m).exp();
  return e / e.sum();
}

VectorXd softmax_backward(const VectorXd& probs, const VectorXd& d_probs) {
  const double dot = probs.dot(d_probs);
  return probs.array() * (d_probs.array() - dot);
}

double time_scale(const AttentionScale& scale, std::int64_t tsum,
                  std::uint32_t visits) {
  const double shifted = static_cast<double>(
      tsum - static_cast<std::int64_t>(visits) * scale.t_origin);
  const double s = shifted / scale.tau_t + 1.0;
  if (!(s > 0.0)) {
    throw std::invalid_argument(
        "time_scale: non-positive scale; t_origin must lower-bound edge times");
  }
  return s;
}

VectorXd node_attention(const MatrixXd& embeddings, NodeId x,
                        const TemporalWalk& walk, const AttentionScale& scale) {
  const std::size_t n = walk.nodes.size();
  VectorXd logits(static_cast<Eigen::Index>(n));
  const auto ex = embeddings.col(x);
  for (std::size_t i = 0; i < n; ++i) {
    const double s = time_scale(scale, walk.tsum[i], walk.visits[i]);
    const double dist = (ex - embeddings.col(walk.nodes[i])).squaredNorm();
    logits[static_cast<Eigen::Index>(i)] = -dist / s;
  }
  return softmax(logits);
}

double walk_time_coefficient(const TemporalWalk& walk,
                             const AttentionScale& scale) {
  double acc = 0.0;
  for (std::size_t i = 0; i < walk.nodes.size(); ++i) {
    acc += 1.0 / time_scale(scale, walk.tsum[i], walk.visits[i]);
  }
  return acc / static_cast<double>(walk.nodes.size());
}

// ---------------------------------------------------------------------------
// Aggregation

VectorXd aggregate(const ModelParams& params, NodeId x,
                   const std::vector<TemporalWalk>& walks,
                   const AttentionScale& scale, const AggregationOptions& opts,
                   std::mt19937_64& rng, AggregationTrace* trace) {
  const Eigen::Index d = params.dim;
  if (walks.empty()) throw std::invalid_argument("aggregate: no walks");
  if (static_cast<Eigen::Index>(x) >= params.embeddings.cols()) {
    throw std::invalid_argument("aggregate: node out of range");
  }
  for (const TemporalWalk& w : walks) {
    if (w.nodes.empty() || w.nodes.front() != x) {
      throw std::invalid_argument("aggregate: walks must start at x");
    }
  }
  const std::size_t k = walks.size();

  if (trace) {
    *trace = AggregationTrace{};
    trace->x = x;
    trace->opts = opts;
    trace->walks.resize(k);
  }

  // Per-walk encodings, oldest node first.
  MatrixXd h_raw(d, static_cast<Eigen::Index>(k));
  std::vector<double> coefs(k, 0.0);
  for (std::size_t r = 0; r < k; ++r) {
    const TemporalWalk& walk = walks[r];
    const std::size_t L = walk.nodes.size();
    VectorXd alpha;
    if (opts.node_attention) {
      alpha = node_attention(params.embeddings, x, walk, scale);
    } else {
      alpha = VectorXd::Constant(static_cast<Eigen::Index>(L),
                                 1.0 / static_cast<double>(L));
    }
    MatrixXd inputs(d, static_cast<Eigen::Index>(L));
    std::vector<NodeId> fed(L);
    VectorXd alpha_fed(static_cast<Eigen::Index>(L));
    VectorXd inv_scale(static_cast<Eigen::Index>(L));
    for (std::size_t j = 0; j < L; ++j) {
      const std::size_t pos = L - 1 - j;
      fed[j] = walk.nodes[pos];
      alpha_fed[static_cast<Eigen::Index>(j)] =
          alpha[static_cast<Eigen::Index>(pos)];
      inv_scale[static_cast<Eigen::Index>(j)] =
          1.0 / time_scale(scale, walk.tsum[pos], walk.visits[pos]);
      inputs.col(static_cast<Eigen::Index>(j)) =
          alpha[static_cast<Eigen::Index>(pos)] * params.embeddings.col(fed[j]);
    }
    coefs[r] = walk_time_coefficient(walk, scale);

    LstmTrace* lt = trace ? &trace->walks[r].lstm : nullptr;
    h_raw.col(static_cast<Eigen::Index>(r)) =
        encode_sequence(params.lstm1, inputs, lt);
    if (trace) {
      WalkTrace& wt = trace->walks[r];
      wt.fed_nodes = std::move(fed);
      wt.alpha = std::move(alpha_fed);
      wt.inv_scale = std::move(inv_scale);
      wt.coef = coefs[r];
    }
  }

  BnTrace bn1_trace;
  MatrixXd bn1_out = batch_norm_forward(params.bn1, h_raw, opts.training,
                                        &bn1_trace);
  MatrixXd h_act = bn1_out.cwiseMax(0.0);

  std::optional<BnUpdate> bn1_update;
  if (bn1_trace.batch_mode) {
    bn1_update = BnUpdate{bn1_trace.batch_mean, bn1_trace.batch_var};
  }

  VectorXd h_final(d);
  VectorXd h_top;
  VectorXd beta;
  std::vector<std::size_t> perm;
  LstmTrace lstm2_trace;
  BnTrace bn2_trace;
  if (opts.single_level) {
    h_final = h_act.rowwise().mean();
    h_top = h_final;
  } else {
    if (opts.walk_attention) {
      VectorXd logits(static_cast<Eigen::Index>(k));
      const auto ex = params.embeddings.col(x);
      for (std::size_t r = 0; r < k; ++r) {
        const double dist =
            (ex - h_act.col(static_cast<Eigen::Index>(r))).squaredNorm();
        logits[static_cast<Eigen::Index>(r)] = -coefs[r] * dist;
      }
      beta = softmax(logits);
    } else {
      beta = VectorXd::Constant(static_cast<Eigen::Index>(k),
                                1.0 / static_cast<double>(k));
    }

    perm.resize(k);
    for (std::size_t i = 0; i < k; ++i) perm[i] = i;
    for (std::size_t i = k; i-- > 1;) {
      const std::size_t j =
          static_cast<std::size_t>(uniform_below(rng, i + 1));
      std::swap(perm[i], perm[j]);
    }

    MatrixXd seq(d, static_cast<Eigen::Index>(k));
    for (std::size_t j = 0; j < k; ++j) {
      const std::size_t r = perm[j];
      seq.col(static_cast<Eigen::Index>(j)) =
          beta[static_cast<Eigen::Index>(r)] *
          h_act.col(static_cast<Eigen::Index>(r));
    }
    h_top = encode_sequence(params.lstm2, seq, trace ? &lstm2_trace : nullptr);
    // Single-column input: always normalized by running statistics.
    h_final = batch_norm_forward(params.bn2, h_top, opts.training, &bn2_trace)
                  .col(0);
  }

  VectorXd u(2 * d);
  u.head(d) = h_final;
  u.tail(d) = params.embeddings.col(x);
  VectorXd z_raw = params.proj * u;
  const double norm = std::max(z_raw.norm(), 1e-30);
  VectorXd z = z_raw / norm;

  if (trace) {
    trace->h_raw = std::move(h_raw);
    trace->bn1 = std::move(bn1_trace);
    trace->bn1_out = std::move(bn1_out);
    trace->h_act = std::move(h_act);
    trace->beta = std::move(beta);
    trace->perm = std::move(perm);
    trace->lstm2 = std::move(lstm2_trace);
    trace->h_top = std::move(h_top);
    trace->bn2 = std::move(bn2_trace);
    trace->h_final = std::move(h_final);
    trace->z_raw = std::move(z_raw);
    trace->z_norm = norm;
    trace->z = z;
    trace->bn1_update = std::move(bn1_update);
  }
  return z;
}

void aggregate_backward(const ModelParams& params,
                        const AggregationTrace& trace, const VectorXd& dz,
                        ModelParams& grads) {
  const Eigen::Index d = params.dim;
  const std::size_t k = trace.walks.size();
  const AggregationOptions& opts = trace.opts;

  // z = z_raw / |z_raw|
  VectorXd dz_raw = (dz - trace.z * trace.z.dot(dz)) / trace.z_norm;

  VectorXd u(2 * d);
  u.head(d) = trace.h_final;
  u.tail(d) = params.embeddings.col(trace.x);
  grads.proj.noalias() += dz_raw * u.transpose();
  VectorXd du = params.proj.transpose() * dz_raw;
  VectorXd dh_final = du.head(d);
  grads.embeddings.col(trace.x) += du.tail(d);

  MatrixXd dh_act = MatrixXd::Zero(d, static_cast<Eigen::Index>(k));
  if (opts.single_level) {
    const double inv_k = 1.0 / static_cast<double>(k);
    dh_act.colwise() += (inv_k * dh_final).eval();
  } else {
    MatrixXd dh_top = batch_norm_backward(params.bn2, trace.bn2, dh_final,
                                          grads.bn2);
    MatrixXd d_seq = lstm_backward(params.lstm2, trace.lstm2, dh_top.col(0),
                                   grads.lstm2);
    VectorXd d_beta = VectorXd::Zero(static_cast<Eigen::Index>(k));
    for (std::size_t j = 0; j < k; ++j) {
      const std::size_t r = trace.perm[j];
      const auto col = d_seq.col(static_cast<Eigen::Index>(j));
      d_beta[static_cast<Eigen::Index>(r)] =
          trace.h_act.col(static_cast<Eigen::Index>(r)).dot(col);
      dh_act.col(static_cast<Eigen::Index>(r)) +=
          trace.beta[static_cast<Eigen::Index>(r)] * col;
    }
    if (opts.walk_attention) {
      VectorXd d_logits = softmax_backward(trace.beta, d_beta);
      const auto ex = params.embeddings.col(trace.x);
      for (std::size_t r = 0; r < k; ++r) {
        const Eigen::Index ri = static_cast<Eigen::Index>(r);
        const VectorXd diff = ex - trace.h_act.col(ri);
        const double scale = 2.0 * trace.walks[r].coef * d_logits[ri];
        grads.embeddings.col(trace.x) -= scale * diff;
        dh_act.col(ri) += scale * diff;
      }
    }
  }

  MatrixXd d_bn1_out =
      (trace.bn1_out.array() > 0.0).select(dh_act, MatrixXd::Zero(
                                                        d, dh_act.cols()));
  MatrixXd dh_raw = batch_norm_backward(params.bn1, trace.bn1, d_bn1_out,
                                        grads.bn1);

  for (std::size_t r = 0; r < k; ++r) {
    const WalkTrace& wt = trace.walks[r];
    MatrixXd d_inputs = lstm_backward(
        params.lstm1, wt.lstm, dh_raw.col(static_cast<Eigen::Index>(r)),
        grads.lstm1);
    const std::size_t L = wt.fed_nodes.size();
    VectorXd d_alpha(static_cast<Eigen::Index>(L));
    for (std::size_t j = 0; j < L; ++j) {
      const Eigen::Index ji = static_cast<Eigen::Index>(j);
      const NodeId v = wt.fed_nodes[j];
      d_alpha[ji] = params.embeddings.col(v).dot(d_inputs.col(ji));
      grads.embeddings.col(v) += wt.alpha[ji] * d_inputs.col(ji);
    }
    if (opts.node_attention) {
      VectorXd d_logits = softmax_backward(wt.alpha, d_alpha);
      const auto ex = params.embeddings.col(trace.x);
      for (std::size_t j = 0; j < L; ++j) {
        const Eigen::Index ji = static_cast<Eigen::Index>(j);
        const NodeId v = wt.fed_nodes[j];
        const VectorXd diff = ex - params.embeddings.col(v);
        const double scale = 2.0 * wt.inv_scale[ji] * d_logits[ji];
        grads.embeddings.col(trace.x) -= scale * diff;
        grads.embeddings.col(v) += scale * diff;
      }
    }
  }
}

}  // namespace ehna
