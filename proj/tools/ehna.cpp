#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ehna/eval.hpp"
#include "ehna/graph.hpp"
#include "ehna/io.hpp"
#include "ehna/model.hpp"
#include "ehna/train.hpp"
#include "ehna/walk.hpp"

namespace {

using namespace ehna;

using Manifest = std::vector<std::pair<std::string, std::string>>;

std::string format_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

void print_manifest(std::ostream& out, const Manifest& m) {
  for (const auto& [k, v] : m) out << "# " << k << '=' << v << '\n';
}

Manifest config_manifest(const TrainConfig& cfg) {
  Manifest m;
  m.emplace_back("dim", std::to_string(cfg.dim));
  m.emplace_back("walks_per_node", std::to_string(cfg.walks_per_node));
  m.emplace_back("walk_len", std::to_string(cfg.walk_len));
  m.emplace_back("layers", std::to_string(cfg.layers));
  m.emplace_back("p", format_g(cfg.p));
  m.emplace_back("q", format_g(cfg.q));
  m.emplace_back("margin", format_g(cfg.margin));
  m.emplace_back("negatives", std::to_string(cfg.negatives));
  m.emplace_back("lr", format_g(cfg.lr));
  m.emplace_back("batch_size", std::to_string(cfg.batch_size));
  m.emplace_back("epochs", std::to_string(cfg.epochs));
  m.emplace_back("seed", std::to_string(cfg.seed));
  m.emplace_back("ablation", ablation_name(cfg.ablation));
  m.emplace_back("threads", std::to_string(cfg.threads));
  return m;
}

struct TeeStream {
  std::ostream& primary;
  std::ofstream file;

  explicit TeeStream(std::ostream& out, const std::string& path)
      : primary(out) {
    if (!path.empty()) {
      file.open(path);
      if (!file) throw std::runtime_error("cannot open log file: " + path);
    }
  }
  template <class T>
  TeeStream& operator<<(const T& v) {
    primary << v;
    if (file.is_open()) file << v;
    return *this;
  }
};

// Maps an embedding table onto graph node ids; every node must be covered.
MatrixXd align_embeddings(const EmbeddingTable& table,
                          const TemporalGraph& g) {
  MatrixXd out(table.embeddings.rows(),
               static_cast<Eigen::Index>(g.n_nodes()));
  std::vector<bool> seen(g.n_nodes(), false);
  for (std::size_t i = 0; i < table.labels.size(); ++i) {
    const auto id = g.find_node(table.labels[i]);
    if (!id) continue;  // extra rows are allowed
    out.col(*id) = table.embeddings.col(static_cast<Eigen::Index>(i));
    seen[*id] = true;
  }
  for (NodeId v = 0; v < g.n_nodes(); ++v) {
    if (!seen[v]) {
      throw std::runtime_error("embeddings missing node: " + g.label(v));
    }
  }
  return out;
}

struct TrainArgs {
  std::string edges;
  std::string out = "model.ckpt";
  std::string log;
  double holdout_fraction = 0.0;
  TrainConfig cfg;
  std::string ablation = "none";
};

void add_config_flags(CLI::App* cmd, TrainArgs& a, bool epochs_required) {
  cmd->add_option("--dim", a.cfg.dim, "Embedding dimension");
  cmd->add_option("--walks", a.cfg.walks_per_node, "Walks per node");
  cmd->add_option("--walk-len", a.cfg.walk_len, "Maximum edges per walk");
  cmd->add_option("--layers", a.cfg.layers, "Recurrent layers (2 or 3)");
  cmd->add_option("--p", a.cfg.p, "Return penalty");
  cmd->add_option("--q", a.cfg.q, "Exploration penalty");
  cmd->add_option("--margin", a.cfg.margin, "Hinge margin");
  cmd->add_option("--negatives", a.cfg.negatives, "Negatives per side");
  cmd->add_option("--lr", a.cfg.lr, "Learning rate");
  cmd->add_option("--batch-size", a.cfg.batch_size, "Edges per batch");
  auto* ep = cmd->add_option("--epochs", a.cfg.epochs, "Training epochs");
  if (epochs_required) ep->required();
  cmd->add_option("--seed", a.cfg.seed, "Random seed");
  cmd->add_option("--tau", a.cfg.tau, "Decay scale (0: derive from graph)");
  cmd->add_option("--tau-t", a.cfg.tau_t,
                  "Attention time scale (0: same as tau)");
  cmd->add_option("--ablation", a.ablation, "Model variant")
      ->check(CLI::IsMember({"none", "NA", "RW", "SL"}));
  cmd->add_option("--threads", a.cfg.threads, "Worker threads");
}

int run_train(const TrainArgs& a) {
  TrainConfig cfg = a.cfg;
  cfg.ablation = parse_ablation(a.ablation);
  validate_config(cfg);
  if (a.holdout_fraction < 0.0 || a.holdout_fraction >= 1.0) {
    throw std::invalid_argument("holdout fraction must lie in [0, 1)");
  }

  TemporalGraph full = TemporalGraph::load_edge_list(a.edges);
  TemporalGraph train_graph = full;
  if (a.holdout_fraction > 0.0) {
    auto [tg, held] = split_by_time(full, a.holdout_fraction);
    train_graph = std::move(tg);
    std::cerr << "holding out " << held.size() << " most recent edges\n";
  }

  TeeStream log(std::cout, a.log);
  Manifest manifest;
  manifest.emplace_back("command", "train");
  manifest.emplace_back("edges", a.edges);
  manifest.emplace_back("edges_digest", file_digest(a.edges));
  manifest.emplace_back("holdout_fraction", format_g(a.holdout_fraction));
  manifest.emplace_back("graph", train_graph.summary());
  manifest.emplace_back("tau_resolved", format_g(resolve_tau(train_graph, cfg)));
  manifest.emplace_back("tau_t_resolved",
                        format_g(resolve_tau_t(train_graph, cfg)));
  for (auto& kv : config_manifest(cfg)) manifest.push_back(kv);
  manifest.emplace_back("checkpoint", a.out);
  print_manifest(log.primary, manifest);
  if (log.file.is_open()) print_manifest(log.file, manifest);
  log << train_graph.summary() << "\n";

  ModelParams params = fit(train_graph, cfg, [&log](const EpochLog& e) {
    log << "epoch=" << e.epoch << " loss=" << format_g(e.mean_loss)
        << " lr=" << format_g(e.lr) << " edges=" << e.edges << "\n";
  });

  CheckpointMeta meta = config_to_meta(cfg);
  meta["edges_digest"] = file_digest(a.edges);
  meta["holdout_fraction"] = format_g(a.holdout_fraction);
  save_checkpoint(a.out, params, meta);
  std::cerr << "wrote checkpoint " << a.out << "\n";
  return 0;
}

int run_embed(const std::string& ckpt_path, const std::string& edges,
              const std::string& out_path) {
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  TrainConfig cfg = config_from_meta(ckpt.meta);

  TemporalGraph g = TemporalGraph::load_edge_list(edges);
  double holdout = 0.0;
  if (auto it = ckpt.meta.find("holdout_fraction"); it != ckpt.meta.end()) {
    holdout = std::stod(it->second);
  }
  if (holdout > 0.0) {
    auto [tg, held] = split_by_time(g, holdout);
    g = std::move(tg);
  }
  if (auto it = ckpt.meta.find("edges_digest"); it != ckpt.meta.end()) {
    if (it->second != file_digest(edges)) {
      std::cerr << "warning: edge list differs from the one used in training\n";
    }
  }

  MatrixXd emb = materialize_embeddings(g, ckpt.params, cfg);
  std::vector<std::string> labels(g.n_nodes());
  for (NodeId v = 0; v < g.n_nodes(); ++v) labels[v] = g.label(v);
  write_embeddings(out_path, labels, emb);

  Manifest manifest;
  manifest.emplace_back("command", "embed");
  manifest.emplace_back("checkpoint", ckpt_path);
  manifest.emplace_back("edges", edges);
  manifest.emplace_back("edges_digest", file_digest(edges));
  manifest.emplace_back("holdout_fraction", format_g(holdout));
  manifest.emplace_back("graph", g.summary());
  manifest.emplace_back("output", out_path);
  print_manifest(std::cout, manifest);
  std::cerr << "wrote embeddings " << out_path << "\n";
  return 0;
}

struct EvalArgs {
  std::string embeddings;
  std::string edges;
  std::string out;
};

std::ostream& open_report(const EvalArgs& a, std::ofstream& file) {
  if (a.out.empty()) return std::cout;
  file.open(a.out);
  if (!file) throw std::runtime_error("cannot open report file: " + a.out);
  return file;
}

int run_reconstruct(const EvalArgs& a, const ReconstructionConfig& rcfg,
                    const std::string& metric) {
  TemporalGraph g = TemporalGraph::load_edge_list(a.edges);
  EmbeddingTable table = read_embeddings(a.embeddings);
  MatrixXd emb = align_embeddings(table, g);

  ReconstructionConfig cfg = rcfg;
  cfg.euclidean = metric == "euclidean";
  EvalReport report = reconstruction_eval(emb, g, cfg);

  std::ofstream file;
  std::ostream& out = open_report(a, file);
  Manifest manifest;
  manifest.emplace_back("command", "reconstruct");
  manifest.emplace_back("edges", a.edges);
  manifest.emplace_back("edges_digest", file_digest(a.edges));
  manifest.emplace_back("embeddings", a.embeddings);
  manifest.emplace_back("graph", g.summary());
  manifest.emplace_back("metric", metric);
  manifest.emplace_back("sample_nodes", std::to_string(cfg.sample_nodes));
  manifest.emplace_back("repeats", std::to_string(report.repeats));
  manifest.emplace_back("seed", std::to_string(cfg.seed));
  print_manifest(out, manifest);
  report.write_csv(out);
  return 0;
}

int run_linkpred(const EvalArgs& a, double holdout, const std::string& op_name,
                 const LinkPredConfig& lcfg) {
  TemporalGraph full = TemporalGraph::load_edge_list(a.edges);
  auto [train_graph, held_out] = split_by_time(full, holdout);
  EmbeddingTable table = read_embeddings(a.embeddings);
  MatrixXd emb = align_embeddings(table, train_graph);

  std::vector<EdgeOp> ops = op_name == "all"
                                ? all_edge_ops()
                                : std::vector<EdgeOp>{parse_edge_op(op_name)};

  std::ofstream file;
  std::ostream& out = open_report(a, file);
  Manifest manifest;
  manifest.emplace_back("command", "linkpred");
  manifest.emplace_back("edges", a.edges);
  manifest.emplace_back("edges_digest", file_digest(a.edges));
  manifest.emplace_back("embeddings", a.embeddings);
  manifest.emplace_back("holdout_fraction", format_g(holdout));
  manifest.emplace_back("graph", train_graph.summary());
  manifest.emplace_back("held_out_edges", std::to_string(held_out.size()));
  manifest.emplace_back("train_ratio", format_g(lcfg.train_ratio));
  manifest.emplace_back("repeats", std::to_string(lcfg.repeats));
  manifest.emplace_back("seed", std::to_string(lcfg.seed));
  print_manifest(out, manifest);
  bool first = true;
  for (EdgeOp op : ops) {
    EvalReport report =
        link_prediction_eval(emb, train_graph, held_out, op, lcfg);
    if (!first) {
      // keep a single header line per file
      std::string csv = report.csv();
      out << csv.substr(csv.find('\n') + 1);
    } else {
      report.write_csv(out);
    }
    first = false;
  }
  return 0;
}

struct WalkArgs {
  std::string edges;
  std::string node;
  std::size_t count = 5;
  std::size_t len = 10;
  double p = 1.0;
  double q = 1.0;
  double tau = 0.0;
  Timestamp t_ref = 0;
  bool has_t_ref = false;
  std::uint64_t seed = 1;
  std::string mode = "temporal";
};

int run_walks(const WalkArgs& a) {
  TemporalGraph g = TemporalGraph::load_edge_list(a.edges);
  const auto id = g.find_node(a.node);
  if (!id) throw std::runtime_error("unknown node label: " + a.node);
  std::mt19937_64 rng(a.seed);
  std::vector<TemporalWalk> walks;
  if (a.mode == "temporal") {
    WalkContext ctx;
    ctx.t_ref = a.has_t_ref ? a.t_ref : g.t_max() + 1;
    ctx.p = a.p;
    ctx.q = a.q;
    ctx.tau = a.tau > 0.0 ? a.tau : g.tau();
    walks = sample_walks(g, *id, a.count, a.len, ctx, rng);
  } else if (a.mode == "fallback") {
    walks = fallback_neighborhood(g, *id, a.count, a.len, rng);
  } else {
    walks = uniform_walks(g, *id, a.count, a.len, rng);
  }
  for (const TemporalWalk& w : walks) {
    std::cout << format_walk(g, w) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Temporal network embeddings via neighborhood aggregation"};
  app.require_subcommand(1);
  app.set_config("--config")->configurable(false);

  TrainArgs train_args;
  CLI::App* train_cmd =
      app.add_subcommand("train", "Train a model on a temporal edge list");
  train_cmd->add_option("--edges", train_args.edges, "Edge list path")
      ->required()
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--out", train_args.out, "Checkpoint output path");
  train_cmd->add_option("--log", train_args.log, "Also write the log here");
  train_cmd->add_option("--holdout-fraction", train_args.holdout_fraction,
                        "Withhold this fraction of most recent edges");
  add_config_flags(train_cmd, train_args, /*epochs_required=*/true);

  std::string embed_ckpt, embed_edges, embed_out = "embeddings.txt";
  CLI::App* embed_cmd = app.add_subcommand(
      "embed", "Materialize node embeddings from a checkpoint");
  embed_cmd->add_option("--checkpoint", embed_ckpt, "Checkpoint path")
      ->required()
      ->check(CLI::ExistingFile);
  embed_cmd->add_option("--edges", embed_edges, "Edge list path")
      ->required()
      ->check(CLI::ExistingFile);
  embed_cmd->add_option("--out", embed_out, "Embedding output path");

  EvalArgs rec_args;
  ReconstructionConfig rec_cfg;
  std::string rec_metric = "dot";
  CLI::App* rec_cmd = app.add_subcommand(
      "reconstruct", "Rank node pairs and report precision at P");
  rec_cmd->add_option("--embeddings", rec_args.embeddings, "Embedding file")
      ->required()
      ->check(CLI::ExistingFile);
  rec_cmd->add_option("--edges", rec_args.edges, "Edge list path")
      ->required()
      ->check(CLI::ExistingFile);
  rec_cmd->add_option("--out", rec_args.out, "Report path (default stdout)");
  rec_cmd->add_option("--precision", rec_cfg.precisions, "P values")
      ->delimiter(',');
  rec_cmd->add_option("--sample-nodes", rec_cfg.sample_nodes,
                      "Score pairs among this many sampled nodes (0: all)");
  rec_cmd->add_option("--repeats", rec_cfg.repeats, "Sampling repeats");
  rec_cmd->add_option("--seed", rec_cfg.seed, "Sampling seed");
  rec_cmd->add_option("--metric", rec_metric, "Pair score")
      ->check(CLI::IsMember({"dot", "euclidean"}));

  EvalArgs lp_args;
  LinkPredConfig lp_cfg;
  double lp_holdout = 0.2;
  std::string lp_op = "all";
  CLI::App* lp_cmd = app.add_subcommand(
      "linkpred", "Classify held-out edges against sampled non-edges");
  lp_cmd->add_option("--embeddings", lp_args.embeddings, "Embedding file")
      ->required()
      ->check(CLI::ExistingFile);
  lp_cmd->add_option("--edges", lp_args.edges, "Edge list path")
      ->required()
      ->check(CLI::ExistingFile);
  lp_cmd->add_option("--out", lp_args.out, "Report path (default stdout)");
  lp_cmd->add_option("--holdout-fraction", lp_holdout,
                     "Fraction of most recent edges treated as positives");
  lp_cmd->add_option("--operator", lp_op, "Feature operator")
      ->check(CLI::IsMember({"mean", "hadamard", "l1", "l2", "all"}));
  lp_cmd->add_option("--train-ratio", lp_cfg.train_ratio,
                     "Classifier train fraction");
  lp_cmd->add_option("--repeats", lp_cfg.repeats, "Evaluation repeats");
  lp_cmd->add_option("--seed", lp_cfg.seed, "Evaluation seed");
  lp_cmd->add_option("--l2", lp_cfg.l2, "Classifier L2 penalty");
  lp_cmd->add_option("--iters", lp_cfg.max_iters, "Classifier iterations");

  WalkArgs walk_args;
  CLI::App* walk_cmd =
      app.add_subcommand("walks", "Dump sampled walks for inspection");
  walk_cmd->add_option("--edges", walk_args.edges, "Edge list path")
      ->required()
      ->check(CLI::ExistingFile);
  walk_cmd->add_option("--node", walk_args.node, "Start node label")
      ->required();
  walk_cmd->add_option("--count", walk_args.count, "Walks to sample");
  walk_cmd->add_option("--len", walk_args.len, "Maximum edges per walk");
  walk_cmd->add_option("--p", walk_args.p, "Return penalty");
  walk_cmd->add_option("--q", walk_args.q, "Exploration penalty");
  walk_cmd->add_option("--tau", walk_args.tau, "Decay scale (0: graph tau)");
  auto* tref_opt =
      walk_cmd->add_option("--t-ref", walk_args.t_ref,
                           "Reference time (default: after the last edge)");
  walk_cmd->add_option("--seed", walk_args.seed, "Sampling seed");
  walk_cmd->add_option("--mode", walk_args.mode, "Walk kind")
      ->check(CLI::IsMember({"temporal", "fallback", "uniform"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (train_cmd->parsed()) return run_train(train_args);
    if (embed_cmd->parsed()) return run_embed(embed_ckpt, embed_edges, embed_out);
    if (rec_cmd->parsed()) return run_reconstruct(rec_args, rec_cfg, rec_metric);
    if (lp_cmd->parsed()) {
      return run_linkpred(lp_args, lp_holdout, lp_op, lp_cfg);
    }
    if (walk_cmd->parsed()) {
      walk_args.has_t_ref = tref_opt->count() > 0;
      return run_walks(walk_args);
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
