#pragma once

// Portable tensor file:
//   bytes 0..3   magic "JXP1"
//   bytes 4..7   u32 format version (1)
//   bytes 8..11  u32 dtype code (0 = float32)
//   bytes 12..15 u32 ndim
//   ndim x u32   extents
//   payload      row-major float32
// All integers and floats little-endian.

#include <cstdint>
#include <filesystem>

#include "jexpand/tensor.hpp"

namespace jexpand::io {

inline constexpr std::uint32_t kTensorFormatVersion = 1;
inline constexpr std::size_t kTensorHeaderBytes = 16;

/// Throws IoError when the file cannot be written.
void save_tensor(const std::filesystem::path& path, const Tensor& tensor);

/// Throws BadMagicError, VersionMismatchError or TruncatedFileError for
/// malformed files and IoError when the file cannot be opened.
Tensor load_tensor(const std::filesystem::path& path);

}  // namespace jexpand::io
