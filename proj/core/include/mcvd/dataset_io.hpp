#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "mcvd/representation.hpp"

namespace mcvd {

/// One serialized program sample. The JSONL record carries the metadata and
/// byte offsets; the tensors live as flat little-endian 32-bit integers in a
/// sidecar .bin file:
///
///   seq_offset   -> n_seq*m_seq ints, SeqTensor row-major
///   graph_offset -> p*n_blk*n_blk ints for F_0..F_{p-1} (each row-major),
///                   then p*n_blk*n_blk ints for A_0..A_{p-1}
struct SampleRecord {
  std::string id;
  std::string source_id;
  int label = 0;  // 1 = vulnerable
  std::string vuln_class;
  std::string split;
  std::string opt_flag;
  RepresentationConfig shape;
  std::uint64_t seq_offset = 0;
  std::uint64_t graph_offset = 0;
};

/// Streaming writer for a dataset: "<stem>.jsonl" + "<stem>.bin".
class DatasetWriter {
 public:
  explicit DatasetWriter(const std::string& stem);
  ~DatasetWriter();

  void append(SampleRecord record, const SeqTensor& seq, const GraphTensor& graph);
  void close();

  const std::string& stem() const { return stem_; }

 private:
  std::string stem_;
  std::ofstream jsonl_;
  std::ofstream bin_;
  std::uint64_t bin_pos_ = 0;
};

/// Loads the full record index; tensors are fetched on demand.
class DatasetReader {
 public:
  explicit DatasetReader(const std::string& stem);

  const std::vector<SampleRecord>& records() const { return records_; }

  SeqTensor read_seq(const SampleRecord& record) const;
  GraphTensor read_graph(const SampleRecord& record) const;

 private:
  std::string bin_path_;
  std::vector<SampleRecord> records_;
};

}  // namespace mcvd
