#pragma once

#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mcvd/decoder.hpp"

namespace mcvd {

/// Half-open instruction range [first_instr, first_instr + instr_count)
/// within the owning FunctionCFG's instruction list.
struct BasicBlock {
  int index = 0;
  std::size_t first_instr = 0;
  std::size_t instr_count = 0;
  std::uint64_t start_offset = 0;
  std::uint64_t end_offset = 0;
};

/// Per-function control-flow graph. Blocks partition the instruction list;
/// edges stay inside the function (tail calls and indirect flow drop out).
struct FunctionCFG {
  std::vector<DecodedInstruction> instructions;
  std::vector<BasicBlock> blocks;                 // indexed by ascending start offset
  std::vector<std::pair<int, int>> edges;         // sorted, unique (source, target)

  std::span<const DecodedInstruction> block_instructions(int block_index) const {
    const BasicBlock& b = blocks[static_cast<std::size_t>(block_index)];
    return {instructions.data() + b.first_instr, b.instr_count};
  }
};

/// Block leader offsets: function entry, every resolved in-range branch
/// target, and the offset following every branch/call/ret.
std::set<std::uint64_t> find_leaders(std::span<const DecodedInstruction> instrs);

/// Split at leaders and connect blocks:
///   conditional branch -> {target, fall-through}
///   unconditional jump -> {target}
///   call               -> {fall-through}
///   ret / indirect     -> no outgoing edges
///   plain block end    -> {fall-through}
FunctionCFG build_cfg(std::vector<DecodedInstruction> instrs);

/// Dense m-by-m row-major {0,1} matrix; entry (i,j) = 1 iff edge (i,j) with
/// both endpoints below the block budget m.
std::vector<std::int32_t> adjacency_matrix(const FunctionCFG& cfg, int m);

/// Graph-description dump (DOT) for visual inspection.
std::string cfg_to_dot(const FunctionCFG& cfg, const std::string& name);

}  // namespace mcvd
