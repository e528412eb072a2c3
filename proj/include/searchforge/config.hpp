#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "searchforge/errors.hpp"
#include "searchforge/modelclient.hpp"
#include "searchforge/toolserver.hpp"

namespace searchforge::config {

SEARCHFORGE_ERROR(ConfigError);

// Minimal TOML subset: [table] / [table.sub] headers, key = value with
// strings, integers, floats, booleans, and arrays of strings; # comments.
// Keys flatten to dotted paths ("experts.1.url").
class Toml {
 public:
  static Toml parse(const std::string& text);
  static Toml parse_file(const std::filesystem::path& path);

  bool has(const std::string& key) const;
  std::optional<std::string> get_string(const std::string& key) const;
  std::optional<long long> get_int(const std::string& key) const;
  std::optional<double> get_double(const std::string& key) const;
  std::optional<bool> get_bool(const std::string& key) const;
  std::optional<std::vector<std::string>> get_string_array(const std::string& key) const;

  // Immediate child names of a dotted prefix, sorted ("experts" -> {"1","2"}).
  std::vector<std::string> children(const std::string& prefix) const;

 private:
  struct Value {
    enum class Kind { String, Int, Double, Bool, StringArray } kind;
    std::string str;
    long long integer = 0;
    double real = 0.0;
    bool boolean = false;
    std::vector<std::string> array;
  };
  std::map<std::string, Value> values_;
};

struct EndpointSet {
  std::map<std::string, modelclient::Endpoint> endpoints;  // generator, judge, ...
  // experts in numeric order with their tool labels
  std::vector<std::pair<std::string, modelclient::Endpoint>> experts;  // label -> endpoint
};

// [generator]/[judge]/[summarizer]/[embedder]/[classifier] plus [experts.N]
// tables with base_url / model / timeout_ms / max_retries / auth_env / label.
EndpointSet load_endpoints(const std::filesystem::path& path);

struct PipelineConfig {
  // paths
  std::filesystem::path corpus;
  std::filesystem::path images;
  std::filesystem::path seeds;
  std::filesystem::path index_dir = "out/index";
  std::filesystem::path out_dir = "out";
  std::optional<std::filesystem::path> endpoints_file;

  // graph construction
  int fanout = 3;
  int graph_depth = 2;

  // retrieval
  toolserver::RetrievalConfig retrieval = toolserver::RetrievalConfig::for_mode(toolserver::Mode::Train);
  bool text_top_k_overridden = false;
  bool image_top_k_overridden = false;

  // search
  int max_depth = 5;
  int node_budget = 64;
  std::size_t context_token_budget = 70000;

  // reward
  double alpha = 0.9;
  double clip_eps = 0.2;
  double kl_beta = 0.0;
  int group_size = 5;

  // global
  std::uint64_t seed = 0;
  bool offline = false;
};

// TOML file -> environment (SEARCHFORGE_MODE, SEARCHFORGE_SEED,
// SEARCHFORGE_TEXT_TOP_K, SEARCHFORGE_IMAGE_THRESHOLD) -> flags; flags win.
PipelineConfig load_pipeline_config(const std::optional<std::filesystem::path>& file);
void apply_env_overrides(PipelineConfig& cfg);

}  // namespace searchforge::config
