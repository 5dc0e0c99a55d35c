#pragma once

#include <cstdint>
#include <vector>

#include "mcvd/cfg.hpp"
#include "mcvd/tokenizer.hpp"

namespace mcvd {

/// Fixed shapes for the two tensor representations. The graph representation
/// keeps instructions-per-block equal to blocks-per-function (n_blk serves as
/// both), so each function is one square feature matrix plus one square
/// adjacency matrix.
struct RepresentationConfig {
  int n_seq = 256;  // instructions per function (sequential)
  int m_seq = 16;   // functions per program (sequential)
  int n_blk = 16;   // instructions per block == blocks per function (graph)
  int p = 16;       // functions per program (graph)
};

/// Token-id matrix of shape n_seq x m_seq, column j = function j. Stored
/// row-major: entry (i, j) at data[i * m_seq + j]. PAD = 0.
struct SeqTensor {
  int n_seq = 0;
  int m_seq = 0;
  std::vector<std::int32_t> data;

  std::int32_t at(int i, int j) const { return data[static_cast<std::size_t>(i) * m_seq + j]; }
};

/// Per program: p (F_i, A_i) pairs. F_i is n_blk x n_blk, column b = block
/// b's instruction ids, row-major; A_i is the n_blk x n_blk binary adjacency.
/// Wholly padded functions have all-PAD F and zero A.
struct GraphTensor {
  int n_blk = 0;
  int p = 0;
  std::vector<std::vector<std::int32_t>> features;   // p matrices, each n_blk*n_blk
  std::vector<std::vector<std::int32_t>> adjacency;  // p matrices, each n_blk*n_blk

  std::int32_t feature_at(int func, int i, int b) const {
    return features[static_cast<std::size_t>(func)][static_cast<std::size_t>(i) * n_blk + b];
  }
  std::int32_t adj_at(int func, int i, int j) const {
    return adjacency[static_cast<std::size_t>(func)][static_cast<std::size_t>(i) * n_blk + j];
  }
};

/// One function ready for the graph representation: its CFG plus the
/// vocabulary id of every instruction, in instruction order.
struct TokenizedFunction {
  FunctionCFG cfg;
  std::vector<std::int32_t> token_ids;
};

/// Pad/truncate per-function id lists into the sequential matrix. Head
/// truncation: the first n_seq instructions and the first m_seq functions
/// are kept.
SeqTensor build_sequential(const std::vector<std::vector<std::int32_t>>& functions,
                           const RepresentationConfig& cfg);

/// Assemble the graph tensor: per function, block b's column holds its first
/// n_blk ids PAD-filled, A_i comes from adjacency_matrix with budget n_blk,
/// and the function budget p truncates at the tail like the sequential form.
GraphTensor build_graph(const std::vector<TokenizedFunction>& functions,
                        const RepresentationConfig& cfg);

}  // namespace mcvd
