#pragma once

#include "accdoa/model.hpp"

#include <cstdint>
#include <filesystem>

namespace accdoa {

/// Checkpoint layout, all integers little-endian:
///
///   "ACDOACKP"            8-byte magic
///   u32 version           currently 1
///   u64 config_hash       hash of the serialized run config
///   u32 tensor_count
///   per tensor:
///     u32 name_length, name bytes (UTF-8, no terminator)
///     u32 rows, u32 cols
///     rows * cols float32 values, row-major
constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    std::uint64_t config_hash = 0;
    Parameters<float> params;
};

void write_checkpoint(const std::filesystem::path& path, const Parameters<float>& params, std::uint64_t config_hash);

/// Reads a checkpoint into `layout`; tensor names and shapes must match it.
Checkpoint read_checkpoint(const std::filesystem::path& path, std::shared_ptr<const ParameterLayout> layout);

} // namespace accdoa
