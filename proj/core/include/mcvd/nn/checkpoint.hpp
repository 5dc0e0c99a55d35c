#pragma once

#include <json.hpp>
#include <string>

#include "mcvd/nn/common.hpp"

namespace mcvd::nn {

/// Parameter checkpoint container, all little-endian:
///
///   magic "MCVDCKPT" | u32 version | u64 meta_len | meta (UTF-8 JSON)
///   | u32 array_count | per array: u32 name_len, name, u32 rows, u32 cols,
///     rows*cols float32 row-major
///
/// `meta` carries the model/representation configs and the vocabulary so a
/// checkpoint is self-contained for inference on raw binaries.
void save_checkpoint(const std::string& path, const ParamStore& params,
                     const nlohmann::json& meta);

nlohmann::json read_checkpoint_meta(const std::string& path);

/// Loads values by name into an already-constructed store; shapes must match.
void load_checkpoint_params(const std::string& path, ParamStore& params);

}  // namespace mcvd::nn
