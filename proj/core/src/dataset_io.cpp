#include "mcvd/dataset_io.hpp"

#include <json.hpp>

#include "mcvd/errors.hpp"

namespace mcvd {
namespace {

using nlohmann::json;

void write_i32_le(std::ofstream& out, const std::vector<std::int32_t>& values) {
  for (std::int32_t v : values) {
    const std::uint32_t u = static_cast<std::uint32_t>(v);
    const char bytes[4] = {
        static_cast<char>(u & 0xFF), static_cast<char>((u >> 8) & 0xFF),
        static_cast<char>((u >> 16) & 0xFF), static_cast<char>((u >> 24) & 0xFF)};
    out.write(bytes, 4);
  }
}

std::vector<std::int32_t> read_i32_le(std::ifstream& in, std::uint64_t offset,
                                      std::size_t count) {
  in.seekg(static_cast<std::streamoff>(offset));
  std::vector<std::int32_t> out(count);
  std::vector<char> raw(count * 4);
  in.read(raw.data(), static_cast<std::streamsize>(raw.size()));
  if (!in) throw InputError("dataset sidecar read failed");
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t u = 0;
    for (int k = 0; k < 4; ++k)
      u |= std::uint32_t{static_cast<std::uint8_t>(raw[i * 4 + k])} << (8 * k);
    out[i] = static_cast<std::int32_t>(u);
  }
  return out;
}

json shape_to_json(const RepresentationConfig& c) {
  return json{{"n_seq", c.n_seq}, {"m_seq", c.m_seq}, {"n_blk", c.n_blk}, {"p", c.p}};
}

RepresentationConfig shape_from_json(const json& j) {
  RepresentationConfig c;
  c.n_seq = j.at("n_seq").get<int>();
  c.m_seq = j.at("m_seq").get<int>();
  c.n_blk = j.at("n_blk").get<int>();
  c.p = j.at("p").get<int>();
  return c;
}

}  // namespace

DatasetWriter::DatasetWriter(const std::string& stem)
    : stem_(stem),
      jsonl_(stem + ".jsonl", std::ios::trunc),
      bin_(stem + ".bin", std::ios::binary | std::ios::trunc) {
  if (!jsonl_ || !bin_) throw Error("cannot create dataset files at " + stem);
}

DatasetWriter::~DatasetWriter() { close(); }

void DatasetWriter::append(SampleRecord record, const SeqTensor& seq,
                           const GraphTensor& graph) {
  record.seq_offset = bin_pos_;
  write_i32_le(bin_, seq.data);
  bin_pos_ += seq.data.size() * 4;

  record.graph_offset = bin_pos_;
  for (const auto& f : graph.features) {
    write_i32_le(bin_, f);
    bin_pos_ += f.size() * 4;
  }
  for (const auto& a : graph.adjacency) {
    write_i32_le(bin_, a);
    bin_pos_ += a.size() * 4;
  }

  json j{{"id", record.id},
         {"source_id", record.source_id},
         {"label", record.label},
         {"class", record.vuln_class},
         {"split", record.split},
         {"opt_flag", record.opt_flag},
         {"shape", shape_to_json(record.shape)},
         {"seq_offset", record.seq_offset},
         {"graph_offset", record.graph_offset}};
  jsonl_ << j.dump() << '\n';
}

void DatasetWriter::close() {
  if (jsonl_.is_open()) jsonl_.close();
  if (bin_.is_open()) bin_.close();
}

DatasetReader::DatasetReader(const std::string& stem) : bin_path_(stem + ".bin") {
  std::ifstream in(stem + ".jsonl");
  if (!in) throw InputError("cannot open dataset index: " + stem + ".jsonl");
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    SampleRecord r;
    r.id = j.at("id").get<std::string>();
    r.source_id = j.at("source_id").get<std::string>();
    r.label = j.at("label").get<int>();
    r.vuln_class = j.at("class").get<std::string>();
    r.split = j.at("split").get<std::string>();
    r.opt_flag = j.at("opt_flag").get<std::string>();
    r.shape = shape_from_json(j.at("shape"));
    r.seq_offset = j.at("seq_offset").get<std::uint64_t>();
    r.graph_offset = j.at("graph_offset").get<std::uint64_t>();
    records_.push_back(std::move(r));
  }
}

SeqTensor DatasetReader::read_seq(const SampleRecord& record) const {
  std::ifstream in(bin_path_, std::ios::binary);
  if (!in) throw InputError("cannot open dataset sidecar: " + bin_path_);
  SeqTensor t;
  t.n_seq = record.shape.n_seq;
  t.m_seq = record.shape.m_seq;
  t.data = read_i32_le(in, record.seq_offset,
                       static_cast<std::size_t>(t.n_seq) * t.m_seq);
  return t;
}

GraphTensor DatasetReader::read_graph(const SampleRecord& record) const {
  std::ifstream in(bin_path_, std::ios::binary);
  if (!in) throw InputError("cannot open dataset sidecar: " + bin_path_);
  GraphTensor t;
  t.n_blk = record.shape.n_blk;
  t.p = record.shape.p;
  const std::size_t cells = static_cast<std::size_t>(t.n_blk) * t.n_blk;
  std::uint64_t pos = record.graph_offset;
  t.features.resize(static_cast<std::size_t>(t.p));
  for (auto& f : t.features) {
    f = read_i32_le(in, pos, cells);
    pos += cells * 4;
  }
  t.adjacency.resize(static_cast<std::size_t>(t.p));
  for (auto& a : t.adjacency) {
    a = read_i32_le(in, pos, cells);
    pos += cells * 4;
  }
  return t;
}

}  // namespace mcvd
