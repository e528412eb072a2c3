#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "searchforge/errors.hpp"
#include "searchforge/jsonl.hpp"
#include "searchforge/modelclient.hpp"
#include "searchforge/protocol.hpp"

namespace searchforge::toolserver {

SEARCHFORGE_ERROR(IndexMissing);
SEARCHFORGE_ERROR(EmptyDocument);
SEARCHFORGE_ERROR(EmptyCorpus);
SEARCHFORGE_ERROR(EmbeddingFailure);
SEARCHFORGE_ERROR(ImageUnreadable);
SEARCHFORGE_ERROR(BackendUnparseable);

inline constexpr std::size_t kPassageWordLimit = 512;
inline constexpr std::size_t kSnippetWords = 50;

struct TextPassage {
  std::string doc_id;
  std::string passage_id;
  std::string title;
  std::string body;  // <= kPassageWordLimit words
  std::optional<std::string> source_url;
};

struct ImageEntry {
  std::string image_id;
  std::string uri;
  std::optional<std::string> caption;
};

enum class Mode { Train, Eval };

Mode mode_from_string(const std::string& s);
std::string_view to_string(Mode m);

struct RetrievalConfig {
  Mode mode = Mode::Train;
  int text_top_k = 3;
  double image_sim_threshold = 0.7;
  int image_top_k = 1;

  // Train: top-3 passages, single most similar image.
  // Eval: top-5 passages, up to three images per query.
  static RetrievalConfig for_mode(Mode m);
};

struct Hit {
  std::string id;
  double score = 0.0;
  // Text hits fill title+snippet, image hits caption+uri, model hits body.
  std::string title;
  std::string snippet;
  std::string uri;
  std::string caption;
  std::string body;
};

struct QueryHits {
  std::string query;
  std::vector<Hit> hits;
};

struct ToolResult {
  std::string tool;
  std::vector<QueryHits> per_query;

  Json to_json() const;
};

struct DocInput {
  std::string title;
  std::string body;
  std::optional<std::string> url;
};

struct IngestStats {
  std::size_t doc_count = 0;
  std::size_t passage_count = 0;
  std::size_t image_count = 0;
};

// In-memory dense index. All stored vectors are unit-norm float32; scores
// are dot products accumulated in double, so rankings are exactly
// reproducible by a plain brute-force scan.
class SearchIndex {
 public:
  const std::vector<TextPassage>& passages() const { return passages_; }
  const std::vector<ImageEntry>& images() const { return images_; }
  const std::vector<std::vector<float>>& passage_vectors() const { return passage_vectors_; }
  const std::vector<std::vector<float>>& image_vectors() const { return image_vectors_; }
  std::size_t dim() const { return dim_; }

  void add_passage(TextPassage p, std::vector<float> vec);
  void add_image(ImageEntry e, std::vector<float> vec);

 private:
  std::vector<TextPassage> passages_;
  std::vector<ImageEntry> images_;
  std::vector<std::vector<float>> passage_vectors_;
  std::vector<std::vector<float>> image_vectors_;
  std::size_t dim_ = 0;
};

// Consecutive non-overlapping chunks of <= kPassageWordLimit words.
std::vector<std::string> chunk_passages(const std::string& body);

IngestStats ingest_text(SearchIndex& index, const std::vector<DocInput>& docs,
                        modelclient::EmbeddingProvider& embedder);
std::size_t ingest_images(SearchIndex& index, const std::vector<ImageEntry>& entries,
                          modelclient::EmbeddingProvider& embedder);

void save_index(const SearchIndex& index, const std::filesystem::path& dir);
SearchIndex load_index(const std::filesystem::path& dir);

ToolResult search_text(const SearchIndex& index, const std::vector<std::string>& queries,
                       const RetrievalConfig& cfg, modelclient::EmbeddingProvider& embedder);

ToolResult search_image_by_text(const SearchIndex& index, const std::vector<std::string>& queries,
                                const RetrievalConfig& cfg,
                                modelclient::EmbeddingProvider& embedder);

// Refinement queries, when present, are embedded and averaged with the image
// vector (mean of unit vectors, re-normalized) before ranking.
ToolResult search_image_by_image(const SearchIndex& index, const std::string& image_ref,
                                 const std::vector<std::string>& refinement_queries,
                                 const RetrievalConfig& cfg,
                                 modelclient::EmbeddingProvider& embedder);

ToolResult model_search(const std::vector<std::string>& queries, modelclient::ModelClient& expert);

// Dispatch shared by the HTTP server and the in-process client.
class ToolService {
 public:
  ToolService(const SearchIndex& index, RetrievalConfig cfg,
              modelclient::EmbeddingProvider& embedder, modelclient::ModelClient* expert)
      : index_(index), cfg_(cfg), embedder_(embedder), expert_(expert) {}

  struct Reply {
    int status = 200;
    Json body;
  };

  // `request` carries {"query_list": [...]} plus {"image": ...} for lens.
  Reply handle(const std::string& tool_name, const Json& request) const;

  const RetrievalConfig& config() const { return cfg_; }

 private:
  const SearchIndex& index_;
  RetrievalConfig cfg_;
  modelclient::EmbeddingProvider& embedder_;
  modelclient::ModelClient* expert_;
};

// Executes a parsed tool call; the orchestrator supplies the question image
// for image_search_by_lens.
class ToolClient {
 public:
  virtual ~ToolClient() = default;
  virtual ToolResult call(const protocol::ToolCall& call,
                          const std::optional<std::string>& question_image) = 0;
};

class LocalToolClient : public ToolClient {
 public:
  explicit LocalToolClient(const ToolService& service) : service_(service) {}
  ToolResult call(const protocol::ToolCall& call,
                  const std::optional<std::string>& question_image) override;

 private:
  const ToolService& service_;
};

class HttpToolClient : public ToolClient {
 public:
  explicit HttpToolClient(std::string base_url) : base_url_(std::move(base_url)) {}
  ToolResult call(const protocol::ToolCall& call,
                  const std::optional<std::string>& question_image) override;

 private:
  std::string base_url_;
};

// HTTP facade: POST /tools/<name>, GET /healthz. Read-only over the index.
class ToolServer {
 public:
  explicit ToolServer(const ToolService& service);
  ~ToolServer();

  ToolServer(const ToolServer&) = delete;
  ToolServer& operator=(const ToolServer&) = delete;

  // Binds and serves on a background thread. port 0 picks a free port;
  // returns the bound port.
  int start(const std::string& host, int port);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace searchforge::toolserver
