#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "ehna/model.hpp"
#include "ehna/train.hpp"

namespace ehna {

// Key-value metadata stored alongside tensors in a checkpoint.
using CheckpointMeta = std::map<std::string, std::string>;

CheckpointMeta config_to_meta(const TrainConfig& cfg);
TrainConfig config_from_meta(const CheckpointMeta& meta);

// Binary checkpoint: magic, version, metadata block, then named tensors as
// little-endian doubles.  Round trips are bit-exact.
void save_checkpoint(const std::string& path, const ModelParams& params,
                     const CheckpointMeta& meta);

struct Checkpoint {
  ModelParams params;
  CheckpointMeta meta;
};

Checkpoint load_checkpoint(const std::string& path);

// Text embeddings: "<n_nodes> <dim>" header, then one "label v1 .. vd" row
// per node with 17 significant digits.
void write_embeddings(std::ostream& out, const std::vector<std::string>& labels,
                      const MatrixXd& embeddings);
void write_embeddings(const std::string& path,
                      const std::vector<std::string>& labels,
                      const MatrixXd& embeddings);

struct EmbeddingTable {
  std::vector<std::string> labels;
  MatrixXd embeddings;  // dim x n
};

EmbeddingTable read_embeddings(std::istream& in);
EmbeddingTable read_embeddings(const std::string& path);

// FNV-1a 64-bit digest of a file's bytes, as 16 hex characters.
std::string file_digest(const std::string& path);

}  // namespace ehna
