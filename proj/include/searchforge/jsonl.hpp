#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "searchforge/errors.hpp"

namespace searchforge {

// ordered_json everywhere: field order is part of the serialized contract,
// so identical inputs produce byte-identical files.
using Json = nlohmann::ordered_json;

SEARCHFORGE_ERROR(IoError);
SEARCHFORGE_ERROR(SchemaViolation);

std::vector<Json> read_jsonl(const std::filesystem::path& path);

// All writers go through a temp file + rename so a failure never leaves a
// partially written artifact behind.
void write_jsonl(const std::filesystem::path& path, const std::vector<Json>& rows);
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

// Throws SchemaViolation when a required key is absent or not a string /
// number / array as requested.
const Json& require_field(const Json& row, const std::string& key);
std::string require_string(const Json& row, const std::string& key);

}  // namespace searchforge
