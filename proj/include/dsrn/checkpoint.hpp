#pragma once

#include "dsrn/training.hpp"

#include <filesystem>

namespace dsrn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary archive: magic, version, JSON metadata, named little-endian fp32 tensors and a
/// trailing FNV-1a checksum over everything before it.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);
/// Loads weights into an existing model; a different architecture is a config error.
Checkpoint load_checkpoint(const std::filesystem::path& path, const ArchConfig& expected);

}  // namespace dsrn
