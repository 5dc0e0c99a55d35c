#include "mcvd/tokenizer.hpp"

#include <cstdio>
#include <fstream>

#include "mcvd/errors.hpp"

namespace mcvd {

std::string Token::text() const {
  std::string out;
  out.reserve(bytes.size() * 2);
  char buf[3];
  for (std::uint8_t b : bytes) {
    std::snprintf(buf, sizeof(buf), "%02X", b);
    out += buf;
  }
  return out;
}

Token tokenize(const DecodedInstruction& instr) {
  Token t;
  t.bytes.reserve(instr.prefix_count + 2 + instr.opcode_len);
  for (std::uint8_t b : instr.legacy_prefixes()) t.bytes.push_back(b);
  if (instr.rex) t.bytes.push_back(*instr.rex);
  if (instr.vex) {
    // All VEX/EVEX encodings collapse to one opaque token.
    t.bytes.assign(1, 0xC4);
    return t;
  }
  for (std::uint8_t b : instr.opcode()) t.bytes.push_back(b);
  if (instr.modrm) t.bytes.push_back(*instr.modrm);
  if (instr.sib) t.bytes.push_back(*instr.sib);
  return t;
}

std::int32_t Vocabulary::add(const Token& token) {
  const std::string text = token.text();
  auto it = ids_.find(text);
  if (it != ids_.end()) return it->second;
  const std::int32_t id = kFirstTokenId + static_cast<std::int32_t>(tokens_.size());
  tokens_.push_back(text);
  ids_.emplace(std::move(text), id);
  return id;
}

std::int32_t Vocabulary::encode(const Token& token) const {
  auto it = ids_.find(token.text());
  return it == ids_.end() ? kUnkId : it->second;
}

const std::string& Vocabulary::token_text(std::int32_t id) const {
  if (id < kFirstTokenId || id >= size())
    throw Error("token id " + std::to_string(id) + " has no text form");
  return tokens_[static_cast<std::size_t>(id - kFirstTokenId)];
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write vocabulary: " + path);
  for (std::size_t i = 0; i < tokens_.size(); ++i)
    out << tokens_[i] << '\t' << (kFirstTokenId + static_cast<std::int32_t>(i)) << '\n';
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read vocabulary: " + path);
  Vocabulary vocab;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw InputError("malformed vocabulary line: " + line);
    const std::string text = line.substr(0, tab);
    const std::int32_t id = std::stoi(line.substr(tab + 1));
    const std::int32_t expected = kFirstTokenId + static_cast<std::int32_t>(vocab.tokens_.size());
    if (id != expected)
      throw InputError("vocabulary ids out of order at: " + line);
    vocab.tokens_.push_back(text);
    vocab.ids_.emplace(text, id);
  }
  return vocab;
}

Vocabulary Vocabulary::from_texts(const std::vector<std::string>& texts) {
  Vocabulary vocab;
  for (const std::string& t : texts) {
    const std::int32_t id = kFirstTokenId + static_cast<std::int32_t>(vocab.tokens_.size());
    vocab.tokens_.push_back(t);
    vocab.ids_.emplace(t, id);
  }
  return vocab;
}

std::int32_t encode_instruction(const DecodedInstruction& instr, const Vocabulary& vocab) {
  if (instr.invalid) return kInvalidId;
  return vocab.encode(tokenize(instr));
}

}  // namespace mcvd
