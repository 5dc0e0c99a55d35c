#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mcvd/errors.hpp"

namespace mcvd {

enum class BranchKind : std::uint8_t {
  None,
  JumpUnconditional,
  JumpConditional,
  Call,
  Ret,
  Indirect,
};

const char* to_string(BranchKind kind);

/// One x86-64 instruction split into its encoding fields. The decoder never
/// lifts to mnemonics; it only recovers field boundaries and branch shape.
///
/// VEX/EVEX (AVX) encodings are length-decoded but not classified further:
/// `opcode` holds the escape byte (C4/C5/62), `vex_tail_len` counts the
/// payload bytes between that escape and the ModR/M byte (including the
/// actual opcode byte), and `vex` is set. Everything downstream treats such
/// instructions as one opaque family.
struct DecodedInstruction {
  std::uint64_t offset = 0;  // byte offset within the decoded range

  std::array<std::uint8_t, 4> prefix_bytes{};  // legacy prefixes, encoding order
  std::uint8_t prefix_count = 0;
  std::optional<std::uint8_t> rex;  // 0x40-0x4F, kept separate from legacy prefixes

  std::array<std::uint8_t, 3> opcode_raw{};  // includes 0x0F escape bytes
  std::uint8_t opcode_len = 0;
  std::uint8_t vex_tail_len = 0;  // VEX/EVEX payload + opcode byte, 0 otherwise

  std::optional<std::uint8_t> modrm;
  std::optional<std::uint8_t> sib;
  std::uint8_t disp_len = 0;  // {0,1,2,4}; content discarded
  std::uint8_t imm_len = 0;   // {0,1,2,4,8}; content discarded
  std::uint8_t total_len = 0;

  BranchKind branch_kind = BranchKind::None;
  std::optional<std::int64_t> rel_target;  // resolved relative jump/call target

  bool vex = false;      // VEX/EVEX-encoded (opaque family)
  bool invalid = false;  // synthetic one-byte recovery pseudo-instruction

  bool is_branch() const { return branch_kind != BranchKind::None; }

  std::span<const std::uint8_t> legacy_prefixes() const {
    return {prefix_bytes.data(), prefix_count};
  }
  std::span<const std::uint8_t> opcode() const {
    return {opcode_raw.data(), opcode_len};
  }

  /// Field arithmetic the decoder guarantees:
  ///   total_len = |prefixes| + rex + |opcode| + vex_tail + modrm + sib + disp + imm
  std::size_t field_length_sum() const {
    return std::size_t{prefix_count} + (rex ? 1 : 0) + opcode_len + vex_tail_len +
           (modrm ? 1 : 0) + (sib ? 1 : 0) + disp_len + imm_len;
  }
};

/// Decode a single instruction starting at `offset`.
///
/// Throws UnknownOpcode when the byte sequence has no entry in the opcode
/// tables and TruncatedInstruction when the instruction would extend past the
/// end of `bytes`. Callers decide the recovery policy.
DecodedInstruction decode_instruction(std::span<const std::uint8_t> bytes,
                                      std::uint64_t offset);

/// Linear sweep over [start, end). Never throws: an undecodable byte becomes
/// a synthetic INVALID instruction of length 1 and the sweep continues, so
/// the output always tiles the range exactly.
std::vector<DecodedInstruction> decode_linear(std::span<const std::uint8_t> bytes,
                                              std::uint64_t start, std::uint64_t end);

}  // namespace mcvd
