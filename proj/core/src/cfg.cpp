#include "mcvd/cfg.hpp"

#include <algorithm>
#include <map>
#include <sstream>

namespace mcvd {

std::set<std::uint64_t> find_leaders(std::span<const DecodedInstruction> instrs) {
  std::set<std::uint64_t> leaders;
  if (instrs.empty()) return leaders;

  const std::uint64_t begin = instrs.front().offset;
  const std::uint64_t end = instrs.back().offset + instrs.back().total_len;
  leaders.insert(begin);
  for (const DecodedInstruction& ins : instrs) {
    if (!ins.is_branch()) continue;
    if (ins.rel_target && *ins.rel_target >= static_cast<std::int64_t>(begin) &&
        *ins.rel_target < static_cast<std::int64_t>(end)) {
      leaders.insert(static_cast<std::uint64_t>(*ins.rel_target));
    }
    const std::uint64_t after = ins.offset + ins.total_len;
    if (after < end) leaders.insert(after);
  }
  return leaders;
}

FunctionCFG build_cfg(std::vector<DecodedInstruction> instrs) {
  FunctionCFG cfg;
  cfg.instructions = std::move(instrs);
  if (cfg.instructions.empty()) return cfg;

  const std::set<std::uint64_t> leaders = find_leaders(cfg.instructions);
  const std::uint64_t begin = cfg.instructions.front().offset;
  const std::uint64_t end = cfg.instructions.back().offset +
                            cfg.instructions.back().total_len;

  // Split at leader offsets. Leaders always fall on instruction starts
  // because they come from decoded targets and post-branch offsets; a target
  // that lands mid-instruction simply never matches and starts no block.
  std::map<std::uint64_t, int> block_of_offset;
  std::size_t i = 0;
  while (i < cfg.instructions.size()) {
    BasicBlock block;
    block.index = static_cast<int>(cfg.blocks.size());
    block.first_instr = i;
    block.start_offset = cfg.instructions[i].offset;
    block_of_offset[block.start_offset] = block.index;
    for (;;) {
      const DecodedInstruction& ins = cfg.instructions[i];
      ++i;
      block.instr_count++;
      block.end_offset = ins.offset + ins.total_len;
      if (ins.is_branch()) break;
      if (i < cfg.instructions.size() && leaders.count(cfg.instructions[i].offset)) break;
      if (i == cfg.instructions.size()) break;
    }
    cfg.blocks.push_back(block);
  }

  auto target_block = [&](std::int64_t target) -> int {
    if (target < static_cast<std::int64_t>(begin) ||
        target >= static_cast<std::int64_t>(end))
      return -1;  // out of the function: no edge
    auto it = block_of_offset.find(static_cast<std::uint64_t>(target));
    return it == block_of_offset.end() ? -1 : it->second;
  };

  std::set<std::pair<int, int>> edges;
  for (const BasicBlock& block : cfg.blocks) {
    const DecodedInstruction& last =
        cfg.instructions[block.first_instr + block.instr_count - 1];
    const int fall = block.index + 1 < static_cast<int>(cfg.blocks.size())
                         ? block.index + 1
                         : -1;
    switch (last.branch_kind) {
      case BranchKind::None:
      case BranchKind::Call:
        if (fall >= 0) edges.insert({block.index, fall});
        break;
      case BranchKind::JumpUnconditional:
        if (last.rel_target) {
          const int t = target_block(*last.rel_target);
          if (t >= 0) edges.insert({block.index, t});
        }
        break;
      case BranchKind::JumpConditional: {
        if (last.rel_target) {
          const int t = target_block(*last.rel_target);
          if (t >= 0) edges.insert({block.index, t});
        }
        if (fall >= 0) edges.insert({block.index, fall});
        break;
      }
      case BranchKind::Ret:
      case BranchKind::Indirect:
        break;
    }
  }
  cfg.edges.assign(edges.begin(), edges.end());
  return cfg;
}

std::vector<std::int32_t> adjacency_matrix(const FunctionCFG& cfg, int m) {
  std::vector<std::int32_t> a(static_cast<std::size_t>(m) * m, 0);
  for (const auto& [src, dst] : cfg.edges) {
    if (src < m && dst < m)
      a[static_cast<std::size_t>(src) * m + dst] = 1;
  }
  return a;
}

std::string cfg_to_dot(const FunctionCFG& cfg, const std::string& name) {
  std::ostringstream out;
  out << "digraph \"" << name << "\" {\n";
  for (const BasicBlock& b : cfg.blocks) {
    out << "  b" << b.index << " [label=\"[" << b.start_offset << ", "
        << b.end_offset << ") x" << b.instr_count << "\"];\n";
  }
  for (const auto& [src, dst] : cfg.edges)
    out << "  b" << src << " -> b" << dst << ";\n";
  out << "}\n";
  return out.str();
}

}  // namespace mcvd
