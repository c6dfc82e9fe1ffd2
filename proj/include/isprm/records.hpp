// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace isprm::records {

inline constexpr int kSchemaVersion = 1;

namespace schema {
inline constexpr std::string_view trajectories = "isprm.trajectories";
inline constexpr std::string_view tasks = "isprm.tasks";
inline constexpr std::string_view worlds = "isprm.worlds";
inline constexpr std::string_view pairs = "isprm.pairs";
inline constexpr std::string_view rewards = "isprm.rewards";
inline constexpr std::string_view sft = "isprm.sft";
inline constexpr std::string_view episodes = "isprm.episodes";
inline constexpr std::string_view summaries = "isprm.summaries";
inline constexpr std::string_view generations = "isprm.generations";
inline constexpr std::string_view report = "isprm.report";
inline constexpr std::string_view manifest = "isprm.manifest";
} // namespace schema

nlohmann::json header(std::string_view schema_name);

/// Header line followed by one compact JSON document per line.
std::string to_jsonl(std::string_view schema_name, const std::vector<nlohmann::json>& rows);

/// Parses a line-delimited file body; the first line must be the header of
/// `schema_name`. Throws SchemaViolation naming the line.
std::vector<nlohmann::json> from_jsonl(std::string_view schema_name, std::string_view body);

void write_file(const std::filesystem::path& path, std::string_view body);
std::string read_file(const std::filesystem::path& path);

void write_jsonl(const std::filesystem::path& path, std::string_view schema_name,
                 const std::vector<nlohmann::json>& rows);
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path, std::string_view schema_name);

// Field accessors that raise SchemaViolation with the full path.
const nlohmann::json& require(const nlohmann::json& obj, std::string_view key, const std::string& path);
std::string require_string(const nlohmann::json& obj, std::string_view key, const std::string& path);
double require_number(const nlohmann::json& obj, std::string_view key, const std::string& path);
long long require_integer(const nlohmann::json& obj, std::string_view key, const std::string& path);
bool require_bool(const nlohmann::json& obj, std::string_view key, const std::string& path);

} // namespace isprm::records
