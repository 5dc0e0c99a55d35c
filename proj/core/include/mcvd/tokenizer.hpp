#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "mcvd/decoder.hpp"

namespace mcvd {

/// Reserved vocabulary ids. Real tokens start at 3.
inline constexpr std::int32_t kPadId = 0;
inline constexpr std::int32_t kUnkId = 1;
inline constexpr std::int32_t kInvalidId = 2;
inline constexpr std::int32_t kFirstTokenId = 3;

/// The reduced instruction token: legacy prefixes + REX + opcode + ModR/M +
/// SIB, with displacement and immediate bytes dropped. At most 10 bytes.
struct Token {
  std::vector<std::uint8_t> bytes;

  std::string text() const;  // uppercase hex
  bool operator==(const Token& other) const = default;
};

/// Reduce a decoded instruction to its token. The INVALID pseudo-instruction
/// has no token; callers map it straight to kInvalidId.
Token tokenize(const DecodedInstruction& instr);

/// Token -> id mapping with reserved PAD/UNK/INVALID entries. Ids are
/// assigned in first-seen order, so a vocabulary is deterministic given the
/// token stream order.
class Vocabulary {
 public:
  Vocabulary() = default;

  /// Returns the id, adding the token when unseen.
  std::int32_t add(const Token& token);

  /// Returns the mapped id or kUnkId.
  std::int32_t encode(const Token& token) const;

  /// Number of ids including the three reserved ones.
  std::int32_t size() const { return kFirstTokenId + static_cast<std::int32_t>(tokens_.size()); }

  /// Hex text of a non-reserved id.
  const std::string& token_text(std::int32_t id) const;

  /// Non-reserved token texts in id order (id = index + kFirstTokenId).
  const std::vector<std::string>& texts() const { return tokens_; }

  /// Line-oriented persistence: "<hex-token>\t<id>", reserved ids implicit.
  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

  /// Rebuild from token texts in id order (used by checkpoints).
  static Vocabulary from_texts(const std::vector<std::string>& texts);

 private:
  std::unordered_map<std::string, std::int32_t> ids_;
  std::vector<std::string> tokens_;
};

/// Fold a token stream (training split only) into a vocabulary.
template <typename Iterable>
Vocabulary build_vocabulary(const Iterable& tokens) {
  Vocabulary vocab;
  for (const Token& t : tokens) vocab.add(t);
  return vocab;
}

/// Convenience: id for one instruction, INVALID pseudo-instructions included.
std::int32_t encode_instruction(const DecodedInstruction& instr, const Vocabulary& vocab);

}  // namespace mcvd
