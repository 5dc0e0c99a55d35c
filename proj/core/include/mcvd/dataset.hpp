#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mcvd/errors.hpp"

namespace mcvd {

enum class VulnClass : std::uint8_t { NullDeref, ArrayBound, IntOverflow };
enum class Split : std::uint8_t { Train, Val, Test };

const char* to_string(VulnClass c);
const char* to_string(Split s);
VulnClass vuln_class_from_string(const std::string& name);
Split split_from_string(const std::string& name);

/// A labeled C source before splitting.
struct LabeledSource {
  std::string id;
  std::string path;
  VulnClass cls = VulnClass::NullDeref;
  int label = 0;  // 1 = vulnerable
};

struct SourceEntry {
  LabeledSource source;
  Split split = Split::Train;
};

struct SourceManifest {
  std::vector<SourceEntry> entries;

  void save_jsonl(const std::string& path) const;
  static SourceManifest load_jsonl(const std::string& path);
};

struct BinaryEntry {
  std::string path;
  std::string source_id;
  std::string opt_flag;
  VulnClass cls = VulnClass::NullDeref;
  int label = 0;
  Split split = Split::Train;
  std::string compile_cmd;  // recorded verbatim
};

struct BinaryManifest {
  std::vector<BinaryEntry> entries;

  void save_jsonl(const std::string& path) const;
  static BinaryManifest load_jsonl(const std::string& path);

  std::size_t count_for_source(const std::string& source_id) const;
};

/// The six optimization levels used for corpus augmentation, in pool order.
const std::vector<std::string>& optimization_flags();

/// Maps a verifier violation string onto one of the three vulnerability
/// classes; unknown strings are rejected with a reason.
std::optional<VulnClass> group_violations(const std::string& raw_violation,
                                          std::string* reject_reason = nullptr);

/// Balances labels 50/50 by seeded downsampling of the majority label, then
/// shuffles and splits 80/10/10 (val and test each floor(n/10)). All sources
/// must belong to `cls`.
SourceManifest make_splits(const std::vector<LabeledSource>& sources, VulnClass cls,
                           std::uint64_t seed);

struct CompileOptions {
  std::string compiler = "cc";
  std::string output_dir;
  int times_compiled = 1;  // 1..6
  std::uint64_t seed = 1;
  int jobs = 2;
};

/// Compiles every source `times_compiled` times, each with a distinct flag
/// drawn seeded-without-replacement from the six-flag pool. Sources that
/// fail to compile under any drawn flag are dropped entirely (all splits)
/// and reported through `failed_sources`.
BinaryManifest compile_corpus(const SourceManifest& manifest, const CompileOptions& options,
                              std::vector<std::string>* failed_sources = nullptr);

/// Seeded uniform subsample at source granularity down to at most `target`
/// binaries; a dropped source contributes zero binaries.
BinaryManifest downsample(const BinaryManifest& manifest, std::size_t target,
                          std::uint64_t seed);

/// Reduces every class manifest to the minimum class size.
void downsample_to_min(std::vector<BinaryManifest*> per_class, std::uint64_t seed);

/// Runs a command (no shell) with stdout/stderr discarded; returns the exit
/// code, or -1 when the process could not be spawned.
int run_command(const std::vector<std::string>& argv);

}  // namespace mcvd
