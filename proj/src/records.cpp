// SPDX-License-Identifier: Apache-2.0
#include "isprm/records.hpp"

#include <fstream>
#include <sstream>

#include "isprm/error.hpp"
#include "isprm/text.hpp"

namespace isprm::records {

using nlohmann::json;

json header(std::string_view schema_name)
{
    return json{{"schema", std::string(schema_name)}, {"version", kSchemaVersion}};
}

std::string to_jsonl(std::string_view schema_name, const std::vector<json>& rows)
{
    std::string out = header(schema_name).dump();
    out.push_back('\n');
    for (const auto& row : rows) {
        out += row.dump();
        out.push_back('\n');
    }
    return out;
}

std::vector<json> from_jsonl(std::string_view schema_name, std::string_view body)
{
    auto lines = text::split_lines(body);
    if (lines.empty())
        throw SchemaViolation("header", "empty file");
    json head;
    try {
        head = json::parse(lines.front());
    } catch (const json::parse_error& e) {
        throw SchemaViolation("header", e.what());
    }
    if (!head.is_object() || head.value("schema", "") != schema_name)
        throw SchemaViolation("header.schema", "expected " + std::string(schema_name));
    if (!head.contains("version") || head["version"] != kSchemaVersion)
        throw SchemaViolation("header.version", "unsupported version");

    std::vector<json> rows;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (text::trim(lines[i]).empty())
            continue;
        try {
            rows.push_back(json::parse(lines[i]));
        } catch (const json::parse_error& e) {
            throw SchemaViolation("line " + std::to_string(i + 1), e.what());
        }
    }
    return rows;
}

void write_file(const std::filesystem::path& path, std::string_view body)
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error(Errc::InvalidArgument, "cannot write " + path.string());
    out.write(body.data(), static_cast<std::streamsize>(body.size()));
}

std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(Errc::InvalidArgument, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_jsonl(const std::filesystem::path& path, std::string_view schema_name, const std::vector<json>& rows)
{
    write_file(path, to_jsonl(schema_name, rows));
}

std::vector<json> read_jsonl(const std::filesystem::path& path, std::string_view schema_name)
{
    return from_jsonl(schema_name, read_file(path));
}

const json& require(const json& obj, std::string_view key, const std::string& path)
{
    std::string full = path.empty() ? std::string(key) : path + "." + std::string(key);
    if (!obj.is_object())
        throw SchemaViolation(path.empty() ? "<root>" : path, "expected object");
    auto it = obj.find(key);
    if (it == obj.end())
        throw SchemaViolation(full, "missing");
    return *it;
}

namespace {
std::string join(const std::string& path, std::string_view key)
{
    return path.empty() ? std::string(key) : path + "." + std::string(key);
}
} // namespace

std::string require_string(const json& obj, std::string_view key, const std::string& path)
{
    const auto& v = require(obj, key, path);
    if (!v.is_string())
        throw SchemaViolation(join(path, key), "expected string");
    return v.get<std::string>();
}

double require_number(const json& obj, std::string_view key, const std::string& path)
{
    const auto& v = require(obj, key, path);
    if (!v.is_number())
        throw SchemaViolation(join(path, key), "expected number");
    return v.get<double>();
}

long long require_integer(const json& obj, std::string_view key, const std::string& path)
{
    const auto& v = require(obj, key, path);
    if (!v.is_number_integer())
        throw SchemaViolation(join(path, key), "expected integer");
    return v.get<long long>();
}

bool require_bool(const json& obj, std::string_view key, const std::string& path)
{
    const auto& v = require(obj, key, path);
    if (!v.is_boolean())
        throw SchemaViolation(join(path, key), "expected boolean");
    return v.get<bool>();
}

} // namespace isprm::records
