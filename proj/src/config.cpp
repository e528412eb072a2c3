#include "searchforge/config.hpp"

#include <algorithm>
#include <cstdlib>

#include "searchforge/jsonl.hpp"
#include "searchforge/util.hpp"

namespace searchforge::config {

namespace {

std::string parse_basic_string(const std::string& line, std::size_t& pos) {
  // pos sits on the opening quote
  std::string out;
  ++pos;
  while (pos < line.size() && line[pos] != '"') {
    if (line[pos] == '\\' && pos + 1 < line.size()) {
      ++pos;
      switch (line[pos]) {
        case 'n':
          out += '\n';
          break;
        case 't':
          out += '\t';
          break;
        case '"':
          out += '"';
          break;
        case '\\':
          out += '\\';
          break;
        default:
          out += line[pos];
      }
    } else {
      out += line[pos];
    }
    ++pos;
  }
  if (pos >= line.size()) throw ConfigError("unterminated string: " + line);
  ++pos;  // closing quote
  return out;
}

}  // namespace

Toml Toml::parse(const std::string& text) {
  Toml out;
  std::string table;
  std::size_t line_start = 0;
  int lineno = 0;
  while (line_start <= text.size()) {
    std::size_t line_end = text.find('\n', line_start);
    if (line_end == std::string::npos) line_end = text.size();
    std::string line = trim(text.substr(line_start, line_end - line_start));
    line_start = line_end + 1;
    ++lineno;
    if (line.empty() || line[0] == '#') {
      if (line_end == text.size()) break;
      continue;
    }

    if (line.front() == '[') {
      const std::size_t close = line.find(']');
      if (close == std::string::npos) throw ConfigError("bad table header: " + line);
      table = trim(line.substr(1, close - 1));
      if (table.empty()) throw ConfigError("empty table header at line " + std::to_string(lineno));
      if (line_end == text.size()) break;
      continue;
    }

    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key = value: " + line);
    const std::string key = trim(line.substr(0, eq));
    std::string raw = trim(line.substr(eq + 1));
    if (key.empty() || raw.empty()) throw ConfigError("empty key or value: " + line);
    const std::string full_key = table.empty() ? key : table + "." + key;

    Value v{};
    if (raw.front() == '"') {
      std::size_t pos = 0;
      v.kind = Value::Kind::String;
      v.str = parse_basic_string(raw, pos);
    } else if (raw.front() == '[') {
      v.kind = Value::Kind::StringArray;
      std::size_t pos = 1;
      while (pos < raw.size()) {
        while (pos < raw.size() && (std::isspace(static_cast<unsigned char>(raw[pos])) || raw[pos] == ','))
          ++pos;
        if (pos < raw.size() && raw[pos] == ']') break;
        if (pos >= raw.size() || raw[pos] != '"')
          throw ConfigError("only arrays of strings are supported: " + line);
        v.array.push_back(parse_basic_string(raw, pos));
      }
    } else if (raw == "true" || raw == "false") {
      v.kind = Value::Kind::Bool;
      v.boolean = raw == "true";
    } else {
      // strip trailing comment
      const std::size_t hash = raw.find('#');
      if (hash != std::string::npos) raw = trim(raw.substr(0, hash));
      if (raw.find('.') != std::string::npos || raw.find('e') != std::string::npos ||
          raw.find('E') != std::string::npos) {
        v.kind = Value::Kind::Double;
        try {
          v.real = std::stod(raw);
        } catch (...) {
          throw ConfigError("bad number: " + line);
        }
      } else {
        v.kind = Value::Kind::Int;
        try {
          v.integer = std::stoll(raw);
        } catch (...) {
          throw ConfigError("bad integer: " + line);
        }
      }
    }
    out.values_[full_key] = std::move(v);
    if (line_end == text.size()) break;
  }
  return out;
}

Toml Toml::parse_file(const std::filesystem::path& path) {
  return parse(read_text_file(path));
}

bool Toml::has(const std::string& key) const { return values_.count(key) > 0; }

std::optional<std::string> Toml::get_string(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  if (it->second.kind != Value::Kind::String) throw ConfigError(key + " is not a string");
  return it->second.str;
}

std::optional<long long> Toml::get_int(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  if (it->second.kind != Value::Kind::Int) throw ConfigError(key + " is not an integer");
  return it->second.integer;
}

std::optional<double> Toml::get_double(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  if (it->second.kind == Value::Kind::Double) return it->second.real;
  if (it->second.kind == Value::Kind::Int) return static_cast<double>(it->second.integer);
  throw ConfigError(key + " is not a number");
}

std::optional<bool> Toml::get_bool(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  if (it->second.kind != Value::Kind::Bool) throw ConfigError(key + " is not a boolean");
  return it->second.boolean;
}

std::optional<std::vector<std::string>> Toml::get_string_array(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  if (it->second.kind != Value::Kind::StringArray) throw ConfigError(key + " is not an array");
  return it->second.array;
}

std::vector<std::string> Toml::children(const std::string& prefix) const {
  std::vector<std::string> out;
  const std::string p = prefix + ".";
  for (const auto& [key, _] : values_) {
    if (!starts_with(key, p)) continue;
    const std::string rest = key.substr(p.size());
    const std::string child = rest.substr(0, rest.find('.'));
    if (std::find(out.begin(), out.end(), child) == out.end()) out.push_back(child);
  }
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

modelclient::Endpoint endpoint_from(const Toml& toml, const std::string& table) {
  modelclient::Endpoint ep;
  ep.base_url = toml.get_string(table + ".base_url").value_or("");
  ep.model = toml.get_string(table + ".model").value_or("");
  ep.timeout_ms = static_cast<int>(toml.get_int(table + ".timeout_ms").value_or(30000));
  ep.max_retries = static_cast<int>(toml.get_int(table + ".max_retries").value_or(2));
  ep.auth_env = toml.get_string(table + ".auth_env").value_or("");
  if (ep.timeout_ms <= 0) throw ConfigError(table + ".timeout_ms must be > 0");
  if (ep.max_retries < 0) throw ConfigError(table + ".max_retries must be >= 0");
  return ep;
}

}  // namespace

EndpointSet load_endpoints(const std::filesystem::path& path) {
  const Toml toml = Toml::parse_file(path);
  EndpointSet out;
  for (const char* name : {"generator", "judge", "summarizer", "embedder", "classifier"}) {
    if (toml.has(std::string(name) + ".base_url"))
      out.endpoints[name] = endpoint_from(toml, name);
  }
  for (const std::string& child : toml.children("experts")) {
    const std::string table = "experts." + child;
    const auto label = toml.get_string(table + ".label");
    if (!label) throw ConfigError(table + " needs a label");
    out.experts.emplace_back(*label, endpoint_from(toml, table));
  }
  return out;
}

PipelineConfig load_pipeline_config(const std::optional<std::filesystem::path>& file) {
  PipelineConfig cfg;
  if (file) {
    const Toml toml = Toml::parse_file(*file);
    auto path_of = [&](const std::string& key, std::filesystem::path& target) {
      if (auto v = toml.get_string(key)) target = *v;
    };
    path_of("paths.corpus", cfg.corpus);
    path_of("paths.images", cfg.images);
    path_of("paths.seeds", cfg.seeds);
    path_of("paths.index_dir", cfg.index_dir);
    path_of("paths.out_dir", cfg.out_dir);
    if (auto v = toml.get_string("paths.endpoints")) cfg.endpoints_file = *v;

    if (auto v = toml.get_int("graph.fanout")) cfg.fanout = static_cast<int>(*v);
    if (auto v = toml.get_int("graph.max_depth")) cfg.graph_depth = static_cast<int>(*v);

    if (auto v = toml.get_string("retrieval.mode"))
      cfg.retrieval = toolserver::RetrievalConfig::for_mode(toolserver::mode_from_string(*v));
    if (auto v = toml.get_int("retrieval.text_top_k")) {
      cfg.retrieval.text_top_k = static_cast<int>(*v);
      cfg.text_top_k_overridden = true;
    }
    if (auto v = toml.get_int("retrieval.image_top_k")) {
      cfg.retrieval.image_top_k = static_cast<int>(*v);
      cfg.image_top_k_overridden = true;
    }
    if (auto v = toml.get_double("retrieval.image_sim_threshold"))
      cfg.retrieval.image_sim_threshold = *v;

    if (auto v = toml.get_int("search.max_depth")) cfg.max_depth = static_cast<int>(*v);
    if (auto v = toml.get_int("search.node_budget")) cfg.node_budget = static_cast<int>(*v);
    if (auto v = toml.get_int("search.context_token_budget"))
      cfg.context_token_budget = static_cast<std::size_t>(*v);

    if (auto v = toml.get_double("reward.alpha")) cfg.alpha = *v;
    if (auto v = toml.get_double("reward.clip_eps")) cfg.clip_eps = *v;
    if (auto v = toml.get_double("reward.kl_beta")) cfg.kl_beta = *v;
    if (auto v = toml.get_int("reward.group_size")) cfg.group_size = static_cast<int>(*v);

    if (auto v = toml.get_int("seed")) cfg.seed = static_cast<std::uint64_t>(*v);
    if (auto v = toml.get_bool("offline")) cfg.offline = *v;
  }
  apply_env_overrides(cfg);
  return cfg;
}

void apply_env_overrides(PipelineConfig& cfg) {
  if (const char* v = std::getenv("SEARCHFORGE_MODE")) {
    const int top_k = cfg.retrieval.text_top_k;
    const int img_k = cfg.retrieval.image_top_k;
    const double thr = cfg.retrieval.image_sim_threshold;
    cfg.retrieval = toolserver::RetrievalConfig::for_mode(toolserver::mode_from_string(v));
    if (cfg.text_top_k_overridden) cfg.retrieval.text_top_k = top_k;
    if (cfg.image_top_k_overridden) cfg.retrieval.image_top_k = img_k;
    cfg.retrieval.image_sim_threshold = thr;
  }
  if (const char* v = std::getenv("SEARCHFORGE_SEED"))
    cfg.seed = static_cast<std::uint64_t>(std::strtoull(v, nullptr, 10));
  if (const char* v = std::getenv("SEARCHFORGE_TEXT_TOP_K")) {
    cfg.retrieval.text_top_k = std::atoi(v);
    cfg.text_top_k_overridden = true;
  }
  if (const char* v = std::getenv("SEARCHFORGE_IMAGE_THRESHOLD"))
    cfg.retrieval.image_sim_threshold = std::atof(v);
}

}  // namespace searchforge::config
