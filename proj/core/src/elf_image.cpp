#include "mcvd/elf_image.hpp"

#include <algorithm>
#include <array>
#include <cstring>
#include <fstream>
#include <unordered_set>

namespace mcvd {
namespace {

constexpr std::uint16_t kMachineX86_64 = 62;
constexpr std::uint32_t kShtSymtab = 2;
constexpr std::uint32_t kShtStrtab = 3;
constexpr std::uint32_t kShtNobits = 8;
constexpr std::uint64_t kShfExecinstr = 0x4;
constexpr std::uint8_t kSttFunc = 2;
constexpr std::uint8_t kSttObject = 1;

struct Reader {
  const std::vector<std::uint8_t>& data;

  std::uint64_t u(std::uint64_t off, int width) const {
    if (off + width > data.size())
      throw MalformedElf("read past end of file at offset " + std::to_string(off));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v |= std::uint64_t{data[off + i]} << (8 * i);
    return v;
  }
  std::uint16_t u16(std::uint64_t off) const { return static_cast<std::uint16_t>(u(off, 2)); }
  std::uint32_t u32(std::uint64_t off) const { return static_cast<std::uint32_t>(u(off, 4)); }
  std::uint64_t u64(std::uint64_t off) const { return u(off, 8); }

  std::string cstr(std::uint64_t off) const {
    std::string s;
    while (off < data.size() && data[off] != 0) s.push_back(static_cast<char>(data[off++]));
    if (off >= data.size()) throw MalformedElf("unterminated string table entry");
    return s;
  }
};

// Runtime scaffolding that appears identically in every GCC-linked binary.
const std::unordered_set<std::string>& scaffolding_names() {
  static const std::unordered_set<std::string> names = {
      "_start",
      "_init",
      "_fini",
      "_dl_relocate_static_pie",
      "deregister_tm_clones",
      "register_tm_clones",
      "__do_global_dtors_aux",
      "frame_dummy",
      "__libc_csu_init",
      "__libc_csu_fini",
  };
  return names;
}

bool is_scaffolding_section(const std::string& name) {
  return name == ".init" || name == ".fini" || name == ".plt" ||
         name == ".plt.got" || name == ".plt.sec";
}

}  // namespace

BinaryImage load_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open file: " + path);
  std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());

  if (data.size() < 64 || data[0] != 0x7F || data[1] != 'E' || data[2] != 'L' ||
      data[3] != 'F')
    throw NotElf(path + ": not an ELF file");
  if (data[4] != 2 || data[5] != 1)
    throw WrongArchitecture(path + ": not a 64-bit little-endian ELF");

  Reader r{data};
  if (r.u16(18) != kMachineX86_64)
    throw WrongArchitecture(path + ": machine type is not x86-64");

  const std::uint64_t shoff = r.u64(40);
  const std::uint16_t shentsize = r.u16(58);
  const std::uint16_t shnum = r.u16(60);
  const std::uint16_t shstrndx = r.u16(62);
  if (shoff == 0 || shnum == 0) throw MalformedElf(path + ": no section headers");
  if (shentsize < 64) throw MalformedElf(path + ": bad section header size");
  if (shstrndx >= shnum) throw MalformedElf(path + ": bad section string table index");

  struct RawSection {
    std::uint32_t name_off, type;
    std::uint64_t flags, addr, offset, size;
    std::uint32_t link;
    std::uint64_t entsize;
  };
  std::vector<RawSection> sections(shnum);
  for (std::uint16_t i = 0; i < shnum; ++i) {
    const std::uint64_t base = shoff + std::uint64_t{i} * shentsize;
    sections[i] = {r.u32(base + 0),  r.u32(base + 4),  r.u64(base + 8),
                   r.u64(base + 16), r.u64(base + 24), r.u64(base + 32),
                   r.u32(base + 40), r.u64(base + 56)};
  }

  const RawSection& shstr = sections[shstrndx];
  auto section_name = [&](const RawSection& s) {
    return r.cstr(shstr.offset + s.name_off);
  };

  BinaryImage image;
  image.path = path;

  std::vector<std::string> names(shnum);
  for (std::uint16_t i = 0; i < shnum; ++i) names[i] = section_name(sections[i]);

  for (std::uint16_t i = 0; i < shnum; ++i) {
    const RawSection& s = sections[i];
    if (!(s.flags & kShfExecinstr) || s.type == kShtNobits || s.size == 0) continue;
    if (s.offset + s.size > data.size())
      throw MalformedElf(path + ": section " + names[i] + " exceeds file size");
    CodeSection cs;
    cs.name = names[i];
    cs.address = s.addr;
    cs.bytes.assign(data.begin() + static_cast<std::ptrdiff_t>(s.offset),
                    data.begin() + static_cast<std::ptrdiff_t>(s.offset + s.size));
    image.code_sections.push_back(std::move(cs));
  }
  std::sort(image.code_sections.begin(), image.code_sections.end(),
            [](const CodeSection& a, const CodeSection& b) { return a.address < b.address; });
  for (std::size_t i = 1; i < image.code_sections.size(); ++i) {
    const auto& prev = image.code_sections[i - 1];
    if (prev.address + prev.bytes.size() > image.code_sections[i].address)
      throw MalformedElf(path + ": overlapping executable sections");
  }

  // Static symbol table (SHT_SYMTAB) with its linked string table.
  for (std::uint16_t i = 0; i < shnum; ++i) {
    const RawSection& s = sections[i];
    if (s.type != kShtSymtab) continue;
    if (s.link >= shnum || sections[s.link].type != kShtStrtab)
      throw MalformedElf(path + ": symtab has no string table");
    const RawSection& str = sections[s.link];
    const std::uint64_t entsize = s.entsize ? s.entsize : 24;
    const std::uint64_t count = s.size / entsize;
    image.has_symtab = true;
    for (std::uint64_t k = 0; k < count; ++k) {
      const std::uint64_t base = s.offset + k * entsize;
      Symbol sym;
      const std::uint32_t name_off = r.u32(base + 0);
      const std::uint8_t info = static_cast<std::uint8_t>(r.u(base + 4, 1));
      sym.section_index = r.u16(base + 6);
      sym.address = r.u64(base + 8);
      sym.size = r.u64(base + 16);
      const std::uint8_t type = info & 0xF;
      sym.kind = type == kSttFunc    ? SymbolKind::Function
                 : type == kSttObject ? SymbolKind::Object
                                      : SymbolKind::Other;
      sym.name = name_off ? r.cstr(str.offset + name_off) : std::string{};
      image.symbols.push_back(std::move(sym));
    }
    break;
  }

  return image;
}

std::vector<FunctionBytes> extract_functions(const BinaryImage& image) {
  if (!image.has_symtab)
    throw StrippedBinary(image.path + ": no symbol table");

  struct Candidate {
    const Symbol* sym;
    const CodeSection* section;
  };
  std::vector<Candidate> candidates;
  for (const Symbol& sym : image.symbols) {
    if (sym.kind != SymbolKind::Function || sym.size == 0) continue;
    if (scaffolding_names().count(sym.name)) continue;
    const CodeSection* home = nullptr;
    for (const CodeSection& cs : image.code_sections) {
      if (sym.address >= cs.address &&
          sym.address + sym.size <= cs.address + cs.bytes.size()) {
        home = &cs;
        break;
      }
    }
    if (!home || is_scaffolding_section(home->name)) continue;
    candidates.push_back({&sym, home});
  }
  if (candidates.empty())
    throw StrippedBinary(image.path + ": no FUNC symbols in executable sections");

  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.sym->address != b.sym->address) return a.sym->address < b.sym->address;
    return a.sym->name < b.sym->name;
  });

  // Keep disjoint ranges: aliases and symbols nested in an earlier range are dropped.
  std::vector<FunctionBytes> out;
  std::uint64_t covered_end = 0;
  for (const Candidate& c : candidates) {
    if (!out.empty() && c.sym->address < covered_end) continue;
    FunctionBytes fn;
    fn.name = c.sym->name;
    fn.address = c.sym->address;
    const std::uint64_t begin = c.sym->address - c.section->address;
    fn.bytes.assign(c.section->bytes.begin() + static_cast<std::ptrdiff_t>(begin),
                    c.section->bytes.begin() + static_cast<std::ptrdiff_t>(begin + c.sym->size));
    covered_end = c.sym->address + c.sym->size;
    out.push_back(std::move(fn));
  }
  return out;
}

}  // namespace mcvd
