#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "searchforge/config.hpp"
#include "searchforge/hypergraph.hpp"
#include "searchforge/jsonl.hpp"
#include "searchforge/reward.hpp"
#include "searchforge/toolserver.hpp"
#include "searchforge/treesearch.hpp"

namespace searchforge::pipeline {

// ---- manifest loaders ----

std::vector<toolserver::DocInput> load_docs(const std::filesystem::path& path);
std::vector<toolserver::ImageEntry> load_images(const std::filesystem::path& path);

struct SeedEntry {
  std::string image_path;
  std::string category;
};
std::vector<SeedEntry> load_seeds(const std::filesystem::path& path);

// ---- deterministic fixtures for offline runs ----

void write_fixture_corpus(const std::filesystem::path& path, std::uint64_t seed, int doc_count);
void write_fixture_images(const std::filesystem::path& path, std::uint64_t seed, int image_count);
void write_fixture_seeds(const std::filesystem::path& path, std::uint64_t seed);

// ---- RL export ----

struct RlExport {
  std::vector<Json> records;  // {id, question, image_ref, golden, candidates}
  std::vector<std::string> rejects;  // "id: reason"
};

// Resolves query_image node ids to image refs through the graphs.
RlExport export_rl(const std::vector<hypergraph::QAPair>& pairs,
                   const std::vector<hypergraph::Hypergraph>& graphs);

// ---- rollout synthesis + scoring ----

// G rollout rows per record: intact, wrong-answer, missing-answer,
// corrupted-tool-call (or trailing garbage), intact again; token offsets tile
// the text, log-prob triples drawn from the forked rng stream.
std::vector<Json> synthesize_rollouts(const std::vector<treesearch::SftRecord>& records,
                                      int group_size, Rng rng);

// Scores consecutive rows sharing question_id as one group; tool-response
// tokens are excluded from the ratio/KL sums via the SFT mask.
std::vector<Json> score_rollouts(const std::vector<Json>& rows, const reward::RewardConfig& cfg,
                                 modelclient::ModelClient& judge);

// ---- smoke pipeline ----

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct SmokeReport {
  std::vector<CheckResult> checks;

  bool ok() const;
  std::string first_failure() const;
  Json to_json(std::uint64_t seed) const;
};

struct SmokeOptions {
  std::filesystem::path out_dir;
  std::uint64_t seed = 7;
  std::string inject_fault;  // "" or "edge-cardinality"
};

// ingest -> hypergraph build -> QA generation -> filtering -> RL export ->
// tree search -> SFT export -> rollout scoring, all on stubs, with every
// module invariant checked and a deterministic report written to
// <out_dir>/report.json.
SmokeReport run_pipeline_smoke(const SmokeOptions& options);

}  // namespace searchforge::pipeline
