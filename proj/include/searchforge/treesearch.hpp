#pragma once

#include <optional>
#include <string>
#include <vector>

#include "searchforge/errors.hpp"
#include "searchforge/jsonl.hpp"
#include "searchforge/modelclient.hpp"
#include "searchforge/protocol.hpp"
#include "searchforge/toolserver.hpp"

namespace searchforge::treesearch {

SEARCHFORGE_ERROR(DepthExceeded);
SEARCHFORGE_ERROR(NotExpandable);

struct ExpertPool {
  struct Expert {
    std::string label;  // one of the four tool names
    modelclient::ModelClient* client = nullptr;
  };
  std::vector<Expert> experts;  // M >= 1, expansion order
};

enum class NodeStatus { Open, TerminalCorrect, TerminalIncorrect, Pruned, Exhausted };

std::string_view to_string(NodeStatus s);

struct TreeNode {
  int id = 0;
  int depth = 0;         // root = 0
  int expert_index = -1; // j; -1 for the root
  int parent = -1;
  std::string think;
  std::optional<std::string> call_body;  // raw tool_call segment body
  std::optional<protocol::ToolCall> call;
  std::optional<std::string> response;  // tool_response segment body
  std::optional<std::string> answer;
  NodeStatus status = NodeStatus::Open;
  std::string note;  // prune/gap cause, e.g. FormatInvalid
  std::string raw_output;
};

struct SearchConfig {
  int max_depth = protocol::kDefaultMaxToolCalls;
  int node_budget = 64;
  std::size_t context_token_budget = 70000;
};

struct SearchTree {
  protocol::MultimodalQuery question;
  SearchConfig config;
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  const TreeNode& node(int id) const { return nodes.at(static_cast<std::size_t>(id)); }
  std::vector<int> path_to_root(int id) const;  // root first, id last
};

SearchTree make_tree(protocol::MultimodalQuery question, SearchConfig cfg);

enum class ToolLabel {
  ImageSearchByTextQuery,
  ImageSearchByLens,
  TextSearch,
  ModelSearch,
  Unknown,
};

std::string_view to_string(ToolLabel label);
ToolLabel label_from_tool_name(std::string_view name);

struct ClassifyResult {
  ToolLabel label = ToolLabel::Unknown;
  std::string raw;
};

// Four-way task classification; anything outside the label set comes back
// Unknown rather than guessed.
ClassifyResult classify_task(const std::string& question_text,
                             const std::optional<std::string>& image,
                             modelclient::ModelClient& classifier);

struct JudgeVerdict {
  enum class State { Correct, Incorrect, Unparseable };
  State state = State::Unparseable;
  std::string raw;

  bool correct() const { return state == State::Correct; }
};

// Strict Yes/No protocol: the reply is trimmed and case-folded; anything
// else is Unparseable.
JudgeVerdict verify_answer(const std::string& question, const std::string& golden,
                           const std::vector<std::string>& candidates,
                           const std::string& model_response, modelclient::ModelClient& judge);

// Replay of the path as chat turns under the canonical system message.
std::vector<modelclient::ChatTurn> context_turns(const SearchTree& tree, int node_id);

// Segments contributed by the root->leaf path: think/call/response per tool
// node, think/answer at the leaf.
std::vector<protocol::Segment> collect_path_segments(const SearchTree& tree, int leaf_id);

// One BFS expansion: every expert in pool order continues the path. Tool
// calls are executed immediately; malformed outputs become Pruned children;
// expert failures leave a recorded gap. Returns new child ids.
std::vector<int> expand(SearchTree& tree, int node_id, const ExpertPool& pool,
                        toolserver::ToolClient& tools);

struct SearchStats {
  int expanded = 0;        // expansions performed
  int nodes_created = 0;
  int judged = 0;
  int pruned = 0;          // judged-incorrect leaves
  int format_invalid = 0;
  int expert_failures = 0;
  bool budget_exhausted = false;
};

struct VerifiedTrajectory {
  protocol::Trajectory trajectory;
  std::vector<int> path;  // root first
  JudgeVerdict verdict;
};

// Breadth-first search with immediate judging; the first verified answer
// terminates the whole search. Incorrect answers become terminal pruned
// leaves. Returns the winning trajectory, if any.
std::optional<VerifiedTrajectory> run_tree_search(
    const protocol::MultimodalQuery& question, const std::string& golden,
    const std::vector<std::string>& candidates, const ExpertPool& pool,
    toolserver::ToolClient& tools, modelclient::ModelClient& judge, const SearchConfig& cfg,
    SearchStats* stats = nullptr, SearchTree* tree_out = nullptr);

struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;  // half-open
};

struct SftRecord {
  std::string id;
  std::string question;
  std::optional<std::string> image_ref;
  std::string raw_text;
  std::vector<Span> supervised_spans;  // think / tool_call / answer extents + joins
  std::vector<Span> masked_spans;      // tool_response extents, tag-inclusive
  int tool_call_count = 0;

  Json to_json() const;
};

// Renders each verified trajectory and tiles it into supervised and masked
// character spans (masked = tool responses).
std::vector<SftRecord> extract_sft_dataset(const std::vector<VerifiedTrajectory>& results,
                                           const std::string& id_prefix = "sft");

// Same tiling over an already-rendered trajectory text; throws
// protocol::InvariantViolation unless the text parses Valid.
SftRecord sft_record_from_raw(const std::string& id, const std::string& question,
                              const std::optional<std::string>& image_ref,
                              const std::string& raw_text);

Json trajectory_export_row(const std::string& id, const VerifiedTrajectory& vt);

}  // namespace searchforge::treesearch
