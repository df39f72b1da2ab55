#include "ehna/io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ehna {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'E', 'H', 'N', 'A', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
void read_pod(std::istream& in, T& v) {
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("checkpoint: truncated file");
}

std::string serialize_meta(const CheckpointMeta& meta) {
  std::ostringstream os;
  for (const auto& [k, v] : meta) os << k << '=' << v << '\n';
  return os.str();
}

CheckpointMeta parse_meta(const std::string& text) {
  CheckpointMeta meta;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("checkpoint: malformed metadata line: " + line);
    }
    meta[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return meta;
}

const std::string& meta_at(const CheckpointMeta& meta, const std::string& key) {
  auto it = meta.find(key);
  if (it == meta.end()) {
    throw std::runtime_error("checkpoint: missing metadata key: " + key);
  }
  return it->second;
}

std::string format_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

CheckpointMeta config_to_meta(const TrainConfig& cfg) {
  CheckpointMeta meta;
  meta["dim"] = std::to_string(cfg.dim);
  meta["walks_per_node"] = std::to_string(cfg.walks_per_node);
  meta["walk_len"] = std::to_string(cfg.walk_len);
  meta["layers"] = std::to_string(cfg.layers);
  meta["p"] = format_full(cfg.p);
  meta["q"] = format_full(cfg.q);
  meta["margin"] = format_full(cfg.margin);
  meta["negatives"] = std::to_string(cfg.negatives);
  meta["lr"] = format_full(cfg.lr);
  meta["batch_size"] = std::to_string(cfg.batch_size);
  meta["epochs"] = std::to_string(cfg.epochs);
  meta["seed"] = std::to_string(cfg.seed);
  meta["tau"] = format_full(cfg.tau);
  meta["tau_t"] = format_full(cfg.tau_t);
  meta["ablation"] = ablation_name(cfg.ablation);
  meta["threads"] = std::to_string(cfg.threads);
  return meta;
}

TrainConfig config_from_meta(const CheckpointMeta& meta) {
  TrainConfig cfg;
  cfg.dim = std::stoi(meta_at(meta, "dim"));
  cfg.walks_per_node = std::stoi(meta_at(meta, "walks_per_node"));
  cfg.walk_len = std::stoi(meta_at(meta, "walk_len"));
  cfg.layers = std::stoi(meta_at(meta, "layers"));
  cfg.p = std::stod(meta_at(meta, "p"));
  cfg.q = std::stod(meta_at(meta, "q"));
  cfg.margin = std::stod(meta_at(meta, "margin"));
  cfg.negatives = std::stoi(meta_at(meta, "negatives"));
  cfg.lr = std::stod(meta_at(meta, "lr"));
  cfg.batch_size = std::stoi(meta_at(meta, "batch_size"));
  cfg.epochs = std::stoi(meta_at(meta, "epochs"));
  cfg.seed = std::stoull(meta_at(meta, "seed"));
  cfg.tau = std::stod(meta_at(meta, "tau"));
  cfg.tau_t = std::stod(meta_at(meta, "tau_t"));
  cfg.ablation = parse_ablation(meta_at(meta, "ablation"));
  cfg.threads = std::stoi(meta_at(meta, "threads"));
  return cfg;
}

void save_checkpoint(const std::string& path, const ModelParams& params,
                     const CheckpointMeta& meta) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open checkpoint for write: " + path);

  out.write(kMagic, sizeof(kMagic));
  write_pod(out, kVersion);

  CheckpointMeta full = meta;
  full["dim"] = std::to_string(params.dim);
  full["layers"] = std::to_string(params.n_layers());
  full["n_nodes"] = std::to_string(params.n_nodes());
  const std::string meta_text = serialize_meta(full);
  write_pod(out, static_cast<std::uint64_t>(meta_text.size()));
  out.write(meta_text.data(),
            static_cast<std::streamsize>(meta_text.size()));

  auto tensors = state_tensors(const_cast<ModelParams&>(params));
  write_pod(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, tensor] : tensors) {
    write_pod(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod(out, static_cast<std::uint64_t>(tensor->rows()));
    write_pod(out, static_cast<std::uint64_t>(tensor->cols()));
    out.write(reinterpret_cast<const char*>(tensor->data()),
              static_cast<std::streamsize>(sizeof(double) * tensor->size()));
  }
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);

  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("not a checkpoint file: " + path);
  }
  std::uint32_t version = 0;
  read_pod(in, version);
  if (version != kVersion) {
    throw std::runtime_error("unsupported checkpoint version");
  }
  std::uint64_t meta_len = 0;
  read_pod(in, meta_len);
  std::string meta_text(meta_len, '\0');
  in.read(meta_text.data(), static_cast<std::streamsize>(meta_len));
  if (!in) throw std::runtime_error("checkpoint: truncated metadata");
  CheckpointMeta meta = parse_meta(meta_text);

  const Eigen::Index dim = std::stoll(meta_at(meta, "dim"));
  const Eigen::Index n_nodes = std::stoll(meta_at(meta, "n_nodes"));
  const std::size_t layers = std::stoul(meta_at(meta, "layers"));

  Checkpoint ckpt;
  ckpt.meta = meta;
  std::mt19937_64 dummy(0);
  ckpt.params = init_model(n_nodes, dim, layers, dummy);

  std::uint32_t n_tensors = 0;
  read_pod(in, n_tensors);
  auto tensors = state_tensors(ckpt.params);
  if (n_tensors != tensors.size()) {
    throw std::runtime_error("checkpoint: tensor count mismatch");
  }
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    std::uint32_t name_len = 0;
    read_pod(in, name_len);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    std::uint64_t rows = 0, cols = 0;
    read_pod(in, rows);
    read_pod(in, cols);
    if (!in) throw std::runtime_error("checkpoint: truncated tensor header");
    if (name != tensors[i].first ||
        rows != static_cast<std::uint64_t>(tensors[i].second->rows()) ||
        cols != static_cast<std::uint64_t>(tensors[i].second->cols())) {
      throw std::runtime_error("checkpoint: unexpected tensor " + name);
    }
    in.read(reinterpret_cast<char*>(tensors[i].second->data()),
            static_cast<std::streamsize>(sizeof(double) * rows * cols));
    if (!in) throw std::runtime_error("checkpoint: truncated tensor data");
  }
  return ckpt;
}

void write_embeddings(std::ostream& out, const std::vector<std::string>& labels,
                      const MatrixXd& embeddings) {
  if (static_cast<Eigen::Index>(labels.size()) != embeddings.cols()) {
    throw std::invalid_argument("write_embeddings: label/column mismatch");
  }
  out << embeddings.cols() << ' ' << embeddings.rows() << '\n';
  char buf[40];
  for (Eigen::Index i = 0; i < embeddings.cols(); ++i) {
    out << labels[static_cast<std::size_t>(i)];
    for (Eigen::Index r = 0; r < embeddings.rows(); ++r) {
      std::snprintf(buf, sizeof(buf), "%.17g", embeddings(r, i));
      out << ' ' << buf;
    }
    out << '\n';
  }
}

void write_embeddings(const std::string& path,
                      const std::vector<std::string>& labels,
                      const MatrixXd& embeddings) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open embeddings for write: " + path);
  write_embeddings(out, labels, embeddings);
  if (!out) throw std::runtime_error("embedding write failed: " + path);
}

EmbeddingTable read_embeddings(std::istream& in) {
  std::size_t n = 0, d = 0;
  if (!(in >> n >> d)) {
    throw std::runtime_error("embeddings: malformed header");
  }
  EmbeddingTable table;
  table.labels.resize(n);
  table.embeddings.resize(static_cast<Eigen::Index>(d),
                          static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    if (!(in >> table.labels[i])) {
      throw std::runtime_error("embeddings: truncated at row " +
                               std::to_string(i));
    }
    for (std::size_t r = 0; r < d; ++r) {
      if (!(in >> table.embeddings(static_cast<Eigen::Index>(r),
                                   static_cast<Eigen::Index>(i)))) {
        throw std::runtime_error("embeddings: truncated values at row " +
                                 std::to_string(i));
      }
    }
  }
  std::string extra;
  if (in >> extra) {
    throw std::runtime_error("embeddings: trailing content after " +
                             std::to_string(n) + " rows");
  }
  return table;
}

EmbeddingTable read_embeddings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open embeddings: " + path);
  return read_embeddings(in);
}

std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file for digest: " + path);
  std::uint64_t h = 0xcbf29ce484222325ull;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    const std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ull;
    }
  }
  char out[17];
  std::snprintf(out, sizeof(out), "%016llx",
                static_cast<unsigned long long>(h));
  return out;
}

}  // namespace ehna
