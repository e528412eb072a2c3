#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "searchforge/errors.hpp"

namespace searchforge::protocol {

SEARCHFORGE_ERROR(InvariantViolation);

inline constexpr int kDefaultMaxToolCalls = 5;

inline constexpr std::array<std::string_view, 4> kToolNames = {
    "image_search_by_text_query",
    "image_search_by_lens",
    "text_search",
    "model_search",
};

bool is_tool_name(std::string_view name);

enum class SegmentKind { Think, ToolCall, ToolResponse, Answer };

std::string_view tag_name(SegmentKind kind);

struct ToolCall {
  std::string name;
  std::vector<std::string> query_list;

  bool operator==(const ToolCall&) const = default;
};

enum class ToolCallError {
  None,
  MalformedJson,
  UnknownTool,
  MissingArguments,
  EmptyQueryList,
};

std::string_view to_string(ToolCallError e);

struct ToolCallParse {
  std::optional<ToolCall> call;
  ToolCallError error = ToolCallError::None;
  std::string detail;

  bool ok() const { return call.has_value(); }
};

// Accepts exactly {"name": <one of the four tools>,
// "arguments": {"query_list": [<non-blank strings>...]}}.
ToolCallParse validate_tool_call(const std::string& body);

struct Segment {
  SegmentKind kind;
  std::string body;  // delimiters excluded; bytes inside preserved verbatim
  std::optional<ToolCall> parsed_call;  // set iff kind == ToolCall and body validates

  bool operator==(const Segment& other) const {
    return kind == other.kind && body == other.body;
  }
};

Segment make_segment(SegmentKind kind, std::string body);

enum class Verdict { Valid, ValidIncomplete, Malformed };

enum class MalformedCause {
  None,
  EmptyOutput,
  StrayText,
  UnknownTag,
  UnclosedTag,
  NestedTag,
  UnexpectedSegment,
  TrailingContent,
};

std::string_view to_string(Verdict v);
std::string_view to_string(MalformedCause c);

struct ParseResult {
  Verdict verdict = Verdict::Malformed;
  std::vector<Segment> segments;  // maximal well-formed prefix
  std::size_t error_pos = 0;
  MalformedCause cause = MalformedCause::None;
  std::string detail;

  bool valid() const { return verdict == Verdict::Valid; }
};

// Strict scan of model output against the grammar
//   (Think ToolCall ToolResponse)* Think Answer.
// Whitespace between tags is ignored; unknown, interleaved, nested, or
// unclosed tags are Malformed. A grammatical prefix that stops before the
// final Answer is ValidIncomplete.
ParseResult parse_trajectory(const std::string& raw);

struct MultimodalQuery {
  std::string text;
  std::optional<std::string> image;  // path or corpus id
};

struct Trajectory {
  MultimodalQuery question;
  std::vector<Segment> steps;

  std::optional<std::string> answer() const;
  int tool_call_count() const;
};

// True when `steps` is a prefix of the grammar; with require_complete the
// sequence must end Think, Answer.
bool is_grammatical(const std::vector<Segment>& steps, bool require_complete);

struct SegmentSpan {
  SegmentKind kind;
  std::size_t begin;  // of the opening tag
  std::size_t end;    // one past the closing tag
};

struct RenderedText {
  std::string text;
  std::vector<SegmentSpan> spans;  // one per segment, tag-inclusive
};

// Inverse of parse: segments joined by single newlines. Throws
// InvariantViolation for non-grammatical sequences or bodies that contain a
// reserved tag literal.
RenderedText render_segments(const std::vector<Segment>& steps, bool require_complete);
std::string render_trajectory(const Trajectory& t);

// Tag-joins an arbitrary segment run without grammar checks; for assembling
// chat turns out of partial path content.
std::string render_fragment(const std::vector<Segment>& steps);

// Replaces embedded tag literals ("<think>" -> "[think]" etc.) so arbitrary
// tool output can sit inside a segment body without breaking the grammar.
std::string sanitize_body(std::string body);

}  // namespace searchforge::protocol
