#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "mcu/param_vector.hpp"

// Binary checkpoint, all integers little-endian:
//   "MCU1" | u8 version (1) | u64 parameter count
//   u32 slot count, then per slot: u32 name length, name bytes, u32 rank, rank x u64 dims
//   count x f32 payload | u64 FNV-1a of the payload bytes
namespace mcu {

inline constexpr std::uint8_t kCheckpointVersion = 1;

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);

/// FNV-1a of the little-endian float payload; the value stored in the trailer.
std::uint64_t payload_hash(const ParamVector& params);

/// 16 lowercase hex digits.
std::string hash_hex(std::uint64_t h);

/// Writes to a temporary sibling and renames into place. A vector without a layout is
/// saved with a single slot named "theta".
void save_checkpoint(const ParamVector& params, const std::string& path);

/// Throws MagicMismatchError, HashMismatchError, TruncatedFileError or FormatError.
ParamVector load_checkpoint(const std::string& path);

/// Stored payload hash of a checkpoint, after a full validating load.
std::uint64_t checkpoint_hash(const std::string& path);

}  // namespace mcu
