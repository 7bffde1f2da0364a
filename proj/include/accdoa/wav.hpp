#pragma once

#include "accdoa/geometry.hpp"

#include <filesystem>

namespace accdoa {

/// Writes a 4-channel 32-bit float WAV (WAVE_FORMAT_EXTENSIBLE, IEEE float
/// subformat) in ACN channel order.
void write_foa_wav(const std::filesystem::path& path, const FoaClip& clip);

/// Reads a 4-channel WAV. Accepts 32-bit float and 16-bit PCM data in either
/// the plain or the extensible format chunk.
FoaClip read_foa_wav(const std::filesystem::path& path);

} // namespace accdoa
