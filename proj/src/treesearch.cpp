#include "searchforge/treesearch.hpp"

#include <algorithm>
#include <deque>

#include "searchforge/prompts.hpp"
#include "searchforge/util.hpp"

namespace searchforge::treesearch {

using modelclient::ChatTurn;
using modelclient::ModelClient;
using modelclient::Role;
using protocol::Segment;
using protocol::SegmentKind;

std::string_view to_string(NodeStatus s) {
  switch (s) {
    case NodeStatus::Open:
      return "open";
    case NodeStatus::TerminalCorrect:
      return "terminal_correct";
    case NodeStatus::TerminalIncorrect:
      return "terminal_incorrect";
    case NodeStatus::Pruned:
      return "pruned";
    case NodeStatus::Exhausted:
      return "exhausted";
  }
  return "";
}

std::string_view to_string(ToolLabel label) {
  switch (label) {
    case ToolLabel::ImageSearchByTextQuery:
      return "image_search_by_text_query";
    case ToolLabel::ImageSearchByLens:
      return "image_search_by_lens";
    case ToolLabel::TextSearch:
      return "text_search";
    case ToolLabel::ModelSearch:
      return "model_search";
    case ToolLabel::Unknown:
      return "unknown";
  }
  return "";
}

ToolLabel label_from_tool_name(std::string_view name) {
  if (name == "image_search_by_text_query") return ToolLabel::ImageSearchByTextQuery;
  if (name == "image_search_by_lens") return ToolLabel::ImageSearchByLens;
  if (name == "text_search") return ToolLabel::TextSearch;
  if (name == "model_search") return ToolLabel::ModelSearch;
  return ToolLabel::Unknown;
}

std::vector<int> SearchTree::path_to_root(int id) const {
  std::vector<int> path;
  for (int cur = id; cur >= 0; cur = node(cur).parent) path.push_back(cur);
  std::reverse(path.begin(), path.end());
  return path;
}

SearchTree make_tree(protocol::MultimodalQuery question, SearchConfig cfg) {
  SearchTree tree;
  tree.question = std::move(question);
  tree.config = cfg;
  TreeNode root;
  root.id = 0;
  root.depth = 0;
  tree.nodes.push_back(std::move(root));
  return tree;
}

ClassifyResult classify_task(const std::string& question_text,
                             const std::optional<std::string>& image,
                             ModelClient& classifier) {
  std::vector<ChatTurn> turns{
      {Role::System,
       "Classify the question by the single search tool best suited to solve it. Reply with "
       "exactly one of: image_search_by_text_query, image_search_by_lens, text_search, "
       "model_search. Reply with the tool name only.",
       std::nullopt},
      {Role::User, question_text, image},
  };
  ClassifyResult out;
  out.raw = classifier.complete(turns);
  out.label = label_from_tool_name(lower(trim(out.raw)));
  return out;
}

JudgeVerdict verify_answer(const std::string& question, const std::string& golden,
                           const std::vector<std::string>& candidates,
                           const std::string& model_response, ModelClient& judge) {
  std::vector<ChatTurn> turns{
      {Role::System, prompts::kJudgeSystemMessage, std::nullopt},
      {Role::User, prompts::render_judge_prompt(question, golden, candidates, model_response),
       std::nullopt},
  };
  JudgeVerdict verdict;
  verdict.raw = judge.complete(turns);
  const std::string reply = lower(trim(verdict.raw));
  if (reply == "yes")
    verdict.state = JudgeVerdict::State::Correct;
  else if (reply == "no")
    verdict.state = JudgeVerdict::State::Incorrect;
  else
    verdict.state = JudgeVerdict::State::Unparseable;
  return verdict;
}

namespace {

// Segments contributed by one completed node: think + (call, response) or
// think + answer.
std::vector<Segment> node_segments(const TreeNode& n) {
  std::vector<Segment> out;
  out.push_back(protocol::make_segment(SegmentKind::Think, n.think));
  if (n.call_body) {
    out.push_back(protocol::make_segment(SegmentKind::ToolCall, *n.call_body));
    out.push_back(
        protocol::make_segment(SegmentKind::ToolResponse, n.response.value_or("")));
  } else if (n.answer) {
    out.push_back(protocol::make_segment(SegmentKind::Answer, *n.answer));
  }
  return out;
}

}  // namespace

std::vector<Segment> collect_path_segments(const SearchTree& tree, int leaf_id) {
  std::vector<Segment> out;
  for (int id : tree.path_to_root(leaf_id)) {
    if (id == 0) continue;  // root carries no content
    for (Segment& s : node_segments(tree.node(id))) out.push_back(std::move(s));
  }
  return out;
}

std::vector<ChatTurn> context_turns(const SearchTree& tree, int node_id) {
  std::vector<ChatTurn> turns;
  turns.push_back({Role::System, prompts::kSystemMessage, std::nullopt});
  turns.push_back(
      {Role::User, prompts::render_user_question(tree.question.text), tree.question.image});
  for (int id : tree.path_to_root(node_id)) {
    if (id == 0) continue;
    const TreeNode& n = tree.node(id);
    std::vector<Segment> segs = node_segments(n);
    if (n.call_body) {
      // assistant think+call, then the tool response as a tool turn
      turns.push_back(
          {Role::Assistant, protocol::render_fragment({segs.begin(), segs.begin() + 2}),
           std::nullopt});
      turns.push_back(
          {Role::Tool, protocol::render_fragment({segs.begin() + 2, segs.end()}), std::nullopt});
    } else {
      turns.push_back({Role::Assistant, protocol::render_fragment(segs), std::nullopt});
    }
  }
  return turns;
}

namespace {

std::size_t turns_token_estimate(const std::vector<ChatTurn>& turns) {
  std::size_t total = 0;
  for (const ChatTurn& t : turns) total += estimate_tokens(t.content);
  return total;
}

}  // namespace

std::vector<int> expand(SearchTree& tree, int node_id, const ExpertPool& pool,
                        toolserver::ToolClient& tools) {
  TreeNode& parent = tree.nodes.at(static_cast<std::size_t>(node_id));
  if (parent.status != NodeStatus::Open)
    throw NotExpandable("node " + std::to_string(node_id) + " is " +
                        std::string(to_string(parent.status)));
  if (parent.depth >= tree.config.max_depth) {
    parent.status = NodeStatus::Exhausted;
    parent.note = "DepthExceeded";
    throw DepthExceeded("node " + std::to_string(node_id) + " at depth " +
                        std::to_string(parent.depth));
  }

  const std::vector<ChatTurn> base_turns = context_turns(tree, node_id);
  if (turns_token_estimate(base_turns) > tree.config.context_token_budget) {
    parent.status = NodeStatus::Exhausted;
    parent.note = "ContextOverflow";
    return {};
  }

  // push_back below reallocates; never touch `parent` past this point
  const int parent_depth = parent.depth;

  std::vector<int> children;
  for (std::size_t j = 0; j < pool.experts.size(); ++j) {
    TreeNode child;
    child.id = static_cast<int>(tree.nodes.size());
    child.depth = parent_depth + 1;
    child.expert_index = static_cast<int>(j);
    child.parent = node_id;

    std::string output;
    try {
      output = pool.experts[j].client->complete(base_turns);
    } catch (const Error& e) {
      // A failed expert is a recorded gap, not an aborted expansion.
      child.status = NodeStatus::Pruned;
      child.note = std::string("ExpertFailure: ") + e.what();
      tree.nodes.push_back(std::move(child));
      children.push_back(tree.nodes.back().id);
      continue;
    }
    child.raw_output = output;

    const protocol::ParseResult parsed = protocol::parse_trajectory(output);
    const auto& segs = parsed.segments;
    const bool is_answer = parsed.verdict == protocol::Verdict::Valid && segs.size() == 2 &&
                           segs[0].kind == SegmentKind::Think &&
                           segs[1].kind == SegmentKind::Answer;
    const bool is_call = parsed.verdict == protocol::Verdict::ValidIncomplete &&
                         segs.size() == 2 && segs[0].kind == SegmentKind::Think &&
                         segs[1].kind == SegmentKind::ToolCall && segs[1].parsed_call.has_value();

    if (is_answer) {
      child.think = segs[0].body;
      child.answer = segs[1].body;
    } else if (is_call) {
      child.think = segs[0].body;
      child.call_body = segs[1].body;
      child.call = segs[1].parsed_call;
      try {
        toolserver::ToolResult result = tools.call(*child.call, tree.question.image);
        child.response = protocol::sanitize_body(result.to_json().dump());
      } catch (const Error& e) {
        child.response = protocol::sanitize_body(
            Json{{"error", "ToolFailure"}, {"detail", e.what()}}.dump());
      }
    } else {
      child.status = NodeStatus::Pruned;
      child.note = "FormatInvalid";
    }
    tree.nodes.push_back(std::move(child));
    children.push_back(tree.nodes.back().id);
  }
  return children;
}

std::optional<VerifiedTrajectory> run_tree_search(
    const protocol::MultimodalQuery& question, const std::string& golden,
    const std::vector<std::string>& candidates, const ExpertPool& pool,
    toolserver::ToolClient& tools, ModelClient& judge, const SearchConfig& cfg,
    SearchStats* stats_out, SearchTree* tree_out) {
  SearchStats local;
  SearchStats& stats = stats_out ? *stats_out : local;
  SearchTree scratch = make_tree(question, cfg);
  SearchTree& tree = tree_out ? *tree_out : scratch;
  if (tree_out) *tree_out = std::move(scratch);

  std::optional<VerifiedTrajectory> found;
  std::deque<int> frontier{0};

  while (!frontier.empty() && !found) {
    const int id = frontier.front();
    frontier.pop_front();
    TreeNode& n = tree.nodes.at(static_cast<std::size_t>(id));
    if (n.status != NodeStatus::Open) continue;

    if (n.depth >= cfg.max_depth) {
      n.status = NodeStatus::Exhausted;
      n.note = "DepthExceeded";
      continue;
    }
    if (static_cast<int>(tree.nodes.size()) >= cfg.node_budget) {
      stats.budget_exhausted = true;
      break;
    }

    std::vector<int> children = expand(tree, id, pool, tools);
    ++stats.expanded;

    for (int child_id : children) {
      TreeNode& child = tree.nodes.at(static_cast<std::size_t>(child_id));
      ++stats.nodes_created;
      if (child.status == NodeStatus::Pruned) {
        if (child.note == "FormatInvalid")
          ++stats.format_invalid;
        else
          ++stats.expert_failures;
        continue;
      }
      if (child.answer) {
        // Judged at creation; incorrect answers are terminal and pruned.
        JudgeVerdict verdict = verify_answer(question.text, golden, candidates, *child.answer, judge);
        ++stats.judged;
        if (verdict.correct()) {
          child.status = NodeStatus::TerminalCorrect;
          VerifiedTrajectory vt;
          vt.path = tree.path_to_root(child_id);
          vt.verdict = verdict;
          vt.trajectory.question = question;
          vt.trajectory.steps = collect_path_segments(tree, child_id);
          found = std::move(vt);
          break;
        }
        child.status = NodeStatus::TerminalIncorrect;
        child.note = verdict.state == JudgeVerdict::State::Unparseable ? "JudgeUnparseable"
                                                                       : "JudgedIncorrect";
        ++stats.pruned;
        continue;
      }
      if (static_cast<int>(tree.nodes.size()) > cfg.node_budget) {
        stats.budget_exhausted = true;
        continue;
      }
      frontier.push_back(child_id);
    }
  }
  return found;
}

Json SftRecord::to_json() const {
  Json j;
  j["id"] = id;
  j["question"] = question;
  j["image_ref"] = image_ref ? Json(*image_ref) : Json(nullptr);
  j["raw_text"] = raw_text;
  auto spans_json = [](const std::vector<Span>& spans) {
    Json arr = Json::array();
    for (const Span& s : spans) arr.push_back(Json::array({s.begin, s.end}));
    return arr;
  };
  j["supervised_spans"] = spans_json(supervised_spans);
  j["masked_spans"] = spans_json(masked_spans);
  j["tool_call_count"] = tool_call_count;
  return j;
}

namespace {

// Masked spans are exactly the tool_response extents; supervised spans are
// the complementary gaps, so together they tile the text.
void tile_spans(SftRecord& rec, const std::vector<protocol::SegmentSpan>& spans) {
  std::size_t cursor = 0;
  for (const protocol::SegmentSpan& span : spans) {
    if (span.kind != SegmentKind::ToolResponse) continue;
    if (span.begin > cursor) rec.supervised_spans.push_back({cursor, span.begin});
    rec.masked_spans.push_back({span.begin, span.end});
    cursor = span.end;
  }
  if (cursor < rec.raw_text.size())
    rec.supervised_spans.push_back({cursor, rec.raw_text.size()});
}

}  // namespace

std::vector<SftRecord> extract_sft_dataset(const std::vector<VerifiedTrajectory>& results,
                                           const std::string& id_prefix) {
  std::vector<SftRecord> out;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const VerifiedTrajectory& vt = results[i];
    const protocol::RenderedText rendered =
        protocol::render_segments(vt.trajectory.steps, /*require_complete=*/true);

    SftRecord rec;
    rec.id = id_prefix + "-" + std::to_string(i);
    rec.question = vt.trajectory.question.text;
    rec.image_ref = vt.trajectory.question.image;
    rec.raw_text = rendered.text;
    rec.tool_call_count = vt.trajectory.tool_call_count();
    tile_spans(rec, rendered.spans);
    out.push_back(std::move(rec));
  }
  return out;
}

SftRecord sft_record_from_raw(const std::string& id, const std::string& question,
                              const std::optional<std::string>& image_ref,
                              const std::string& raw_text) {
  const protocol::ParseResult parsed = protocol::parse_trajectory(raw_text);
  if (parsed.verdict != protocol::Verdict::Valid)
    throw protocol::InvariantViolation(id + ": trajectory text is not a complete valid "
                                            "trajectory");

  SftRecord rec;
  rec.id = id;
  rec.question = question;
  rec.image_ref = image_ref;
  rec.raw_text = raw_text;
  rec.tool_call_count = static_cast<int>(
      std::count_if(parsed.segments.begin(), parsed.segments.end(),
                    [](const Segment& s) { return s.kind == SegmentKind::ToolCall; }));

  // Extents recovered by direct scan so non-canonical inter-tag whitespace
  // still tiles exactly.
  std::vector<protocol::SegmentSpan> spans;
  const std::string open = "<tool_response>";
  const std::string close = "</tool_response>";
  std::size_t pos = 0;
  while ((pos = raw_text.find(open, pos)) != std::string::npos) {
    const std::size_t end = raw_text.find(close, pos);
    if (end == std::string::npos) break;
    spans.push_back({SegmentKind::ToolResponse, pos, end + close.size()});
    pos = end + close.size();
  }
  tile_spans(rec, spans);
  return rec;
}

Json trajectory_export_row(const std::string& id, const VerifiedTrajectory& vt) {
  Json j;
  j["id"] = id;
  j["question_text"] = vt.trajectory.question.text;
  j["image_ref"] = vt.trajectory.question.image ? Json(*vt.trajectory.question.image) : Json(nullptr);
  j["raw_text"] = protocol::render_segments(vt.trajectory.steps, true).text;
  j["tool_call_count"] = vt.trajectory.tool_call_count();
  j["answer"] = vt.trajectory.answer().value_or("");
  return j;
}

}  // namespace searchforge::treesearch
