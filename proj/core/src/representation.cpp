#include "mcvd/representation.hpp"

#include <algorithm>

namespace mcvd {

SeqTensor build_sequential(const std::vector<std::vector<std::int32_t>>& functions,
                           const RepresentationConfig& cfg) {
  SeqTensor t;
  t.n_seq = cfg.n_seq;
  t.m_seq = cfg.m_seq;
  t.data.assign(static_cast<std::size_t>(cfg.n_seq) * cfg.m_seq, kPadId);
  const int cols = std::min<int>(cfg.m_seq, static_cast<int>(functions.size()));
  for (int j = 0; j < cols; ++j) {
    const auto& ids = functions[static_cast<std::size_t>(j)];
    const int rows = std::min<int>(cfg.n_seq, static_cast<int>(ids.size()));
    for (int i = 0; i < rows; ++i)
      t.data[static_cast<std::size_t>(i) * cfg.m_seq + j] = ids[static_cast<std::size_t>(i)];
  }
  return t;
}

GraphTensor build_graph(const std::vector<TokenizedFunction>& functions,
                        const RepresentationConfig& cfg) {
  GraphTensor t;
  t.n_blk = cfg.n_blk;
  t.p = cfg.p;
  const std::size_t cells = static_cast<std::size_t>(cfg.n_blk) * cfg.n_blk;
  t.features.assign(static_cast<std::size_t>(cfg.p), std::vector<std::int32_t>(cells, kPadId));
  t.adjacency.assign(static_cast<std::size_t>(cfg.p), std::vector<std::int32_t>(cells, 0));

  const int count = std::min<int>(cfg.p, static_cast<int>(functions.size()));
  for (int f = 0; f < count; ++f) {
    const TokenizedFunction& fn = functions[static_cast<std::size_t>(f)];
    auto& feat = t.features[static_cast<std::size_t>(f)];
    const int blocks = std::min<int>(cfg.n_blk, static_cast<int>(fn.cfg.blocks.size()));
    for (int b = 0; b < blocks; ++b) {
      const BasicBlock& block = fn.cfg.blocks[static_cast<std::size_t>(b)];
      const int rows = std::min<int>(cfg.n_blk, static_cast<int>(block.instr_count));
      for (int i = 0; i < rows; ++i) {
        const std::size_t instr_index = block.first_instr + static_cast<std::size_t>(i);
        feat[static_cast<std::size_t>(i) * cfg.n_blk + b] = fn.token_ids[instr_index];
      }
    }
    t.adjacency[static_cast<std::size_t>(f)] = adjacency_matrix(fn.cfg, cfg.n_blk);
  }
  return t;
}

}  // namespace mcvd
