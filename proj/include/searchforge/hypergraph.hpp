#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "searchforge/errors.hpp"
#include "searchforge/jsonl.hpp"
#include "searchforge/modelclient.hpp"
#include "searchforge/util.hpp"

namespace searchforge::hypergraph {

SEARCHFORGE_ERROR(AlreadyExpanded);
SEARCHFORGE_ERROR(DepthExceeded);
SEARCHFORGE_ERROR(ProviderFailure);
SEARCHFORGE_ERROR(ExtractionUnparseable);
SEARCHFORGE_ERROR(NoEligibleEdge);
SEARCHFORGE_ERROR(InsufficientLinkedEdges);
SEARCHFORGE_ERROR(GenerationUnparseable);
SEARCHFORGE_ERROR(EmptyField);

enum class Modality { Image, Text };

std::string_view to_string(Modality m);

struct HNode {
  std::string id;
  Modality modality = Modality::Image;
  int depth = 0;
  int index = 0;                      // k among the nodes created at this depth
  std::optional<std::string> parent;  // absent for the seed
  std::string payload;                // image reference, or full webpage text
  std::string url;                    // dedup key: page url / image ref
  std::string annotation;             // caption (image) or summary (text)
};

// One expansion = one hyperedge: the expanded parent plus everything it
// produced. Members reached through url dedup keep their original parent and
// depth; they are listed in `reused`.
struct Hyperedge {
  std::string id;
  std::string parent_node;
  std::vector<std::string> members;  // parent first, then image children, then text children
  std::vector<std::string> reused;
  bool partial = false;  // a provider returned fewer than K results

  std::size_t fresh_child_count() const { return members.size() - 1 - reused.size(); }
};

struct GraphConfig {
  int fanout = 3;     // K
  int max_depth = 2;  // D
};

struct WebPage {
  std::string url;
  std::string title;
  std::string content;
};

class SearchProvider {
 public:
  virtual ~SearchProvider() = default;
  // Image reverse search: webpages about the image.
  virtual std::vector<WebPage> image_reverse_search(const std::string& image_ref, int k) = 0;
  // Image visual search: visually similar image refs.
  virtual std::vector<std::string> image_visual_search(const std::string& image_ref, int k) = 0;
  virtual WebPage fetch_page(const std::string& url) = 0;
  virtual std::string fetch_image(const std::string& link) = 0;
};

class Hypergraph {
 public:
  GraphConfig config;

  const std::vector<HNode>& nodes() const { return nodes_; }
  const std::vector<Hyperedge>& edges() const { return edges_; }

  const HNode& node(const std::string& id) const;
  HNode& node_mut(const std::string& id);
  bool has_node(const std::string& id) const { return by_id_.count(id) > 0; }
  bool is_expanded(const std::string& id) const { return expanded_.count(id) > 0; }

  // Returns the existing node id when `url` was seen before, else creates a
  // node and returns its id.
  std::pair<std::string, bool> add_or_link_node(Modality modality, int depth,
                                                std::optional<std::string> parent,
                                                std::string payload, std::string url);

  Hyperedge& add_edge(Hyperedge e);
  void mark_expanded(const std::string& id) { expanded_.insert(id); }

  Json to_json() const;
  static Hypergraph from_json(const Json& j);

 private:
  std::vector<HNode> nodes_;
  std::vector<Hyperedge> edges_;
  std::map<std::string, std::size_t> by_id_;
  std::map<std::string, std::string> url_to_node_;
  std::set<std::string> expanded_;
  std::map<int, int> next_index_at_depth_;
};

Hypergraph make_graph(GraphConfig cfg, const std::string& seed_image_ref);

// Reverse + visual search on an image node; children land at depth+1 and are
// joined with the parent into one hyperedge.
Hyperedge& expand_image_node(Hypergraph& g, std::string node_id, SearchProvider& provider);

// Model-extracts up to K page urls and K image links from the node payload,
// fetches them, links duplicates instead of re-creating them.
Hyperedge& expand_text_node(Hypergraph& g, std::string node_id,
                            modelclient::ModelClient& extractor, SearchProvider& fetcher);

struct BuildClients {
  SearchProvider& provider;
  modelclient::ModelClient& extractor;
  modelclient::ModelClient& annotator;
};

struct BuildReport {
  int expansions = 0;
  std::vector<std::string> branch_failures;  // "node_id: error"
};

// Breadth-first build from a seed image in deterministic (depth, k) order.
// A provider failure kills only that branch and is recorded in the report.
Hypergraph build_hypergraph(const std::string& seed_image_ref, GraphConfig cfg,
                            BuildClients clients, BuildReport* report = nullptr);

enum class QALevel { Intra, Inter };

std::string_view to_string(QALevel level);
QALevel level_from_string(const std::string& s);

struct QAContext {
  QALevel level = QALevel::Intra;
  std::string query_image;
  std::vector<std::string> evidence;      // node ids, query image excluded
  std::vector<std::string> source_edges;  // Intra: 1, Inter: >= 2
};

// Intra: one complete edge with an image member. Inter: m edges connected by
// shared membership. Deterministic given the rng stream.
QAContext select_qa_context(const Hypergraph& g, QALevel level, int m, Rng& rng);

struct QAPair {
  std::string id;
  std::string question;
  std::string answer;
  std::string query_image;
  std::vector<std::string> evidence;
  QALevel level = QALevel::Intra;
  std::vector<std::string> source_edges;

  Json to_json() const;
  static QAPair from_json(const Json& j);
};

// Fills the QA generation template with evidence summaries/captions and
// parses the generator's {"question","answer"} object.
QAPair generate_qa(const Hypergraph& g, const QAContext& ctx,
                   modelclient::ModelClient& generator, const std::string& id);

struct FilterRejection {
  QAPair pair;
  std::string reason;  // Duplicate | VisuallyIrrelevant | SearchFree | Unverifiable
};

struct FilterOutcome {
  std::vector<QAPair> kept;
  std::vector<FilterRejection> rejected;
  std::vector<FilterRejection> quarantined;  // judge replies that were not Yes/No
};

// Duplicate removal by normalized question text, then every judge runs the
// three probes in order; one No rejects the pair.
FilterOutcome filter_qa(const std::vector<QAPair>& pairs,
                        const std::vector<modelclient::ModelClient*>& judges);

}  // namespace searchforge::hypergraph
