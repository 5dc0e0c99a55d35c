#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mcvd/errors.hpp"

namespace mcvd {

struct CodeSection {
  std::string name;
  std::uint64_t address = 0;  // virtual address
  std::vector<std::uint8_t> bytes;
};

enum class SymbolKind : std::uint8_t { Function, Object, Other };

struct Symbol {
  std::string name;
  std::uint64_t address = 0;
  std::uint64_t size = 0;
  SymbolKind kind = SymbolKind::Other;
  std::uint16_t section_index = 0;
};

/// A loaded 64-bit little-endian x86-64 ELF: its executable sections and the
/// full static symbol table.
struct BinaryImage {
  std::string path;
  std::vector<CodeSection> code_sections;  // sorted by address, non-overlapping
  std::vector<Symbol> symbols;
  bool has_symtab = false;
};

/// One function body carved out of a code section.
struct FunctionBytes {
  std::string name;
  std::uint64_t address = 0;
  std::vector<std::uint8_t> bytes;
};

/// Parse an ELF file from disk.
/// Throws NotElf, WrongArchitecture or MalformedElf.
BinaryImage load_binary(const std::string& path);

/// One entry per nonzero-size FUNC symbol inside an executable section,
/// sorted by address, with compiler runtime scaffolding (_start, crt stubs,
/// .plt thunks, ...) filtered out. Throws StrippedBinary when the image has
/// no usable FUNC symbols.
std::vector<FunctionBytes> extract_functions(const BinaryImage& image);

}  // namespace mcvd
