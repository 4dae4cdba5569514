#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fedaudit/nn.hpp"

namespace fedaudit {

/// Parameter file layout, all integers u32 little-endian:
///   "FLPD" | version (1) | tensor count | per tensor: rank, dims..., f64 values
/// Values are little-endian IEEE doubles in row-major order.
inline constexpr std::uint32_t kFlpdVersion = 1;

std::vector<std::uint8_t> serialize_params(const ModelParams& params);
/// Throws std::runtime_error on bad magic, unknown version, truncation or
/// trailing bytes. Never returns partial parameters.
ModelParams deserialize_params(const std::vector<std::uint8_t>& bytes);

void save_params(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_params(const std::filesystem::path& path);

}  // namespace fedaudit
