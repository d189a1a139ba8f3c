#pragma once

// JSON conversions for the configuration types. Missing keys keep their defaults;
// unknown keys are rejected so typos in config files do not pass silently.

#include "dsrn/data.hpp"
#include "dsrn/losses.hpp"
#include "dsrn/network.hpp"

#include <json.hpp>

#include <string_view>

namespace dsrn {

struct TrainConfig;

void to_json(nlohmann::json& j, const ArchConfig& a);
void from_json(const nlohmann::json& j, ArchConfig& a);
void to_json(nlohmann::json& j, const LossWeights& w);
void from_json(const nlohmann::json& j, LossWeights& w);
void to_json(nlohmann::json& j, const IlluminationSetting& s);
void from_json(const nlohmann::json& j, IlluminationSetting& s);
void to_json(nlohmann::json& j, const Task& t);
void from_json(const nlohmann::json& j, Task& t);
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

/// Parses JSON text, mapping syntax errors to ErrorCode::format.
nlohmann::json parse_json(std::string_view text, std::string_view what);
nlohmann::json read_json_file(const std::filesystem::path& path);

/// 64-bit FNV-1a, used for config hashes and checkpoint checksums.
std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ull);
inline std::uint64_t fnv1a64(std::string_view s) { return fnv1a64(s.data(), s.size()); }

}  // namespace dsrn
