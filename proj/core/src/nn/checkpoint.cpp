#include "mcvd/nn/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "mcvd/errors.hpp"

namespace mcvd::nn {
namespace {

constexpr char kMagic[8] = {'M', 'C', 'V', 'D', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ofstream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b, 4);
}

void put_u64(std::ofstream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b, 8);
}

std::uint32_t get_u32(std::ifstream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t{b[i]} << (8 * i);
  return v;
}

std::uint64_t get_u64(std::ifstream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t{b[i]} << (8 * i);
  return v;
}

std::ifstream open_checked(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    throw InputError("not a checkpoint file: " + path);
  const std::uint32_t version = get_u32(in);
  if (version != kVersion)
    throw InputError("unsupported checkpoint version " + std::to_string(version));
  return in;
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamStore& params,
                     const nlohmann::json& meta) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write checkpoint: " + path);
  out.write(kMagic, 8);
  put_u32(out, kVersion);
  const std::string meta_str = meta.dump();
  put_u64(out, meta_str.size());
  out.write(meta_str.data(), static_cast<std::streamsize>(meta_str.size()));
  put_u32(out, static_cast<std::uint32_t>(params.all().size()));
  for (const Param& p : params.all()) {
    put_u32(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    put_u32(out, static_cast<std::uint32_t>(p.value.rows()));
    put_u32(out, static_cast<std::uint32_t>(p.value.cols()));
    for (Eigen::Index i = 0; i < p.value.rows(); ++i) {
      for (Eigen::Index j = 0; j < p.value.cols(); ++j) {
        const float f = static_cast<float>(p.value(i, j));
        std::uint32_t u;
        std::memcpy(&u, &f, 4);
        put_u32(out, u);
      }
    }
  }
}

nlohmann::json read_checkpoint_meta(const std::string& path) {
  std::ifstream in = open_checked(path);
  const std::uint64_t len = get_u64(in);
  std::string meta(len, '\0');
  in.read(meta.data(), static_cast<std::streamsize>(len));
  if (!in) throw InputError("truncated checkpoint: " + path);
  return nlohmann::json::parse(meta);
}

void load_checkpoint_params(const std::string& path, ParamStore& params) {
  std::ifstream in = open_checked(path);
  const std::uint64_t len = get_u64(in);
  in.seekg(static_cast<std::streamoff>(len), std::ios::cur);
  const std::uint32_t count = get_u32(in);
  for (std::uint32_t a = 0; a < count; ++a) {
    const std::uint32_t name_len = get_u32(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const std::uint32_t rows = get_u32(in);
    const std::uint32_t cols = get_u32(in);
    Param* p = params.find(name);
    if (!p) throw InputError("checkpoint array " + name + " has no matching parameter");
    if (p->value.rows() != static_cast<Eigen::Index>(rows) ||
        p->value.cols() != static_cast<Eigen::Index>(cols))
      throw InputError("checkpoint array " + name + " has mismatched shape");
    for (std::uint32_t i = 0; i < rows; ++i) {
      for (std::uint32_t j = 0; j < cols; ++j) {
        const std::uint32_t u = get_u32(in);
        float f;
        std::memcpy(&f, &u, 4);
        p->value(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = f;
      }
    }
  }
  if (!in) throw InputError("truncated checkpoint: " + path);
}

}  // namespace mcvd::nn
