#include "searchforge/jsonl.hpp"

#include <fstream>
#include <sstream>

#include "searchforge/util.hpp"

namespace searchforge {

namespace fs = std::filesystem;

std::vector<Json> read_jsonl(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<Json> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      rows.push_back(Json::parse(line));
    } catch (const nlohmann::json::parse_error& e) {
      throw SchemaViolation(path.string() + ":" + std::to_string(lineno) + " " + e.what());
    }
  }
  return rows;
}

static void atomic_write(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string());
    out << content;
    if (!out) throw IoError("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

void write_jsonl(const fs::path& path, const std::vector<Json>& rows) {
  std::string buf;
  for (const auto& row : rows) {
    buf += row.dump();
    buf += '\n';
  }
  atomic_write(path, buf);
}

void write_text_file(const fs::path& path, const std::string& text) {
  atomic_write(path, text);
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const Json& require_field(const Json& row, const std::string& key) {
  auto it = row.find(key);
  if (it == row.end()) throw SchemaViolation("missing field '" + key + "'");
  return *it;
}

std::string require_string(const Json& row, const std::string& key) {
  const Json& v = require_field(row, key);
  if (!v.is_string()) throw SchemaViolation("field '" + key + "' must be a string");
  return v.get<std::string>();
}

}  // namespace searchforge
