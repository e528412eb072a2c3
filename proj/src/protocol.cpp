#include "searchforge/protocol.hpp"

#include <algorithm>
#include <cctype>

#include <nlohmann/json.hpp>

#include "searchforge/util.hpp"

namespace searchforge::protocol {

namespace {

constexpr std::array<SegmentKind, 4> kKinds = {
    SegmentKind::Think, SegmentKind::ToolCall, SegmentKind::ToolResponse, SegmentKind::Answer};

std::string open_tag(SegmentKind k) { return "<" + std::string(tag_name(k)) + ">"; }
std::string close_tag(SegmentKind k) { return "</" + std::string(tag_name(k)) + ">"; }

// Grammar states over (Think ToolCall ToolResponse)* Think Answer.
enum class State { ExpectThink, AfterThink, AfterToolCall, AfterToolResponse, AfterAnswer };

bool allowed(State s, SegmentKind k) {
  switch (s) {
    case State::ExpectThink:
      return k == SegmentKind::Think;
    case State::AfterThink:
      return k == SegmentKind::ToolCall || k == SegmentKind::Answer;
    case State::AfterToolCall:
      return k == SegmentKind::ToolResponse;
    case State::AfterToolResponse:
      return k == SegmentKind::Think;
    case State::AfterAnswer:
      return false;
  }
  return false;
}

State advance(State, SegmentKind k) {
  switch (k) {
    case SegmentKind::Think:
      return State::AfterThink;
    case SegmentKind::ToolCall:
      return State::AfterToolCall;
    case SegmentKind::ToolResponse:
      return State::AfterToolResponse;
    case SegmentKind::Answer:
      return State::AfterAnswer;
  }
  return State::ExpectThink;
}

std::size_t skip_ws(const std::string& s, std::size_t pos) {
  while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
  return pos;
}

// Position of the first reserved tag literal inside `body`, npos if none.
std::size_t find_tag_literal(std::string_view body) {
  std::size_t best = std::string_view::npos;
  for (SegmentKind k : kKinds) {
    for (const std::string& tag : {open_tag(k), close_tag(k)}) {
      std::size_t p = body.find(tag);
      if (p != std::string_view::npos) best = std::min(best, p);
    }
  }
  return best;
}

}  // namespace

bool is_tool_name(std::string_view name) {
  return std::find(kToolNames.begin(), kToolNames.end(), name) != kToolNames.end();
}

std::string_view tag_name(SegmentKind kind) {
  switch (kind) {
    case SegmentKind::Think:
      return "think";
    case SegmentKind::ToolCall:
      return "tool_call";
    case SegmentKind::ToolResponse:
      return "tool_response";
    case SegmentKind::Answer:
      return "answer";
  }
  return "";
}

std::string_view to_string(ToolCallError e) {
  switch (e) {
    case ToolCallError::None:
      return "None";
    case ToolCallError::MalformedJson:
      return "MalformedJson";
    case ToolCallError::UnknownTool:
      return "UnknownTool";
    case ToolCallError::MissingArguments:
      return "MissingArguments";
    case ToolCallError::EmptyQueryList:
      return "EmptyQueryList";
  }
  return "";
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Valid:
      return "Valid";
    case Verdict::ValidIncomplete:
      return "ValidIncomplete";
    case Verdict::Malformed:
      return "Malformed";
  }
  return "";
}

std::string_view to_string(MalformedCause c) {
  switch (c) {
    case MalformedCause::None:
      return "None";
    case MalformedCause::EmptyOutput:
      return "EmptyOutput";
    case MalformedCause::StrayText:
      return "StrayText";
    case MalformedCause::UnknownTag:
      return "UnknownTag";
    case MalformedCause::UnclosedTag:
      return "UnclosedTag";
    case MalformedCause::NestedTag:
      return "NestedTag";
    case MalformedCause::UnexpectedSegment:
      return "UnexpectedSegment";
    case MalformedCause::TrailingContent:
      return "TrailingContent";
  }
  return "";
}

ToolCallParse validate_tool_call(const std::string& body) {
  ToolCallParse out;
  nlohmann::json parsed = nlohmann::json::parse(body, nullptr, false);
  if (parsed.is_discarded() || !parsed.is_object()) {
    out.error = ToolCallError::MalformedJson;
    out.detail = "tool call body is not a JSON object";
    return out;
  }
  auto name_it = parsed.find("name");
  if (name_it == parsed.end() || !name_it->is_string()) {
    out.error = ToolCallError::MalformedJson;
    out.detail = "missing string field 'name'";
    return out;
  }
  const std::string name = name_it->get<std::string>();
  if (!is_tool_name(name)) {
    out.error = ToolCallError::UnknownTool;
    out.detail = name;
    return out;
  }
  auto args_it = parsed.find("arguments");
  if (args_it == parsed.end() || !args_it->is_object()) {
    out.error = ToolCallError::MissingArguments;
    out.detail = "missing object field 'arguments'";
    return out;
  }
  auto ql_it = args_it->find("query_list");
  if (ql_it == args_it->end() || !ql_it->is_array()) {
    out.error = ToolCallError::MissingArguments;
    out.detail = "missing array field 'arguments.query_list'";
    return out;
  }
  ToolCall call;
  call.name = name;
  for (const auto& q : *ql_it) {
    if (!q.is_string()) {
      out.error = ToolCallError::MalformedJson;
      out.detail = "query_list entries must be strings";
      return out;
    }
    call.query_list.push_back(q.get<std::string>());
  }
  if (call.query_list.empty()) {
    out.error = ToolCallError::EmptyQueryList;
    out.detail = "query_list is empty";
    return out;
  }
  for (const auto& q : call.query_list) {
    if (trim(q).empty()) {
      out.error = ToolCallError::EmptyQueryList;
      out.detail = "query_list entry is blank";
      return out;
    }
  }
  out.call = std::move(call);
  return out;
}

Segment make_segment(SegmentKind kind, std::string body) {
  Segment s{kind, std::move(body), std::nullopt};
  if (kind == SegmentKind::ToolCall) {
    auto parsed = validate_tool_call(s.body);
    if (parsed.ok()) s.parsed_call = std::move(*parsed.call);
  }
  return s;
}

ParseResult parse_trajectory(const std::string& raw) {
  ParseResult out;
  State state = State::ExpectThink;
  std::size_t pos = skip_ws(raw, 0);

  if (pos >= raw.size()) {
    out.verdict = Verdict::Malformed;
    out.cause = MalformedCause::EmptyOutput;
    out.error_pos = 0;
    out.detail = "no segments found";
    return out;
  }

  auto fail = [&](MalformedCause cause, std::size_t at, std::string detail) {
    out.verdict = Verdict::Malformed;
    out.cause = cause;
    out.error_pos = at;
    out.detail = std::move(detail);
    return out;
  };

  while (true) {
    pos = skip_ws(raw, pos);
    if (pos >= raw.size()) break;

    if (state == State::AfterAnswer)
      return fail(MalformedCause::TrailingContent, pos, "content after </answer>");
    if (raw[pos] != '<')
      return fail(MalformedCause::StrayText, pos, "text outside of tags");

    std::optional<SegmentKind> kind;
    for (SegmentKind k : kKinds) {
      if (starts_with(std::string_view(raw).substr(pos), open_tag(k))) {
        kind = k;
        break;
      }
    }
    if (!kind)
      return fail(MalformedCause::UnknownTag, pos, "not one of the declared tags");

    const std::string open = open_tag(*kind);
    const std::string close = close_tag(*kind);
    const std::size_t body_begin = pos + open.size();
    const std::size_t close_pos = raw.find(close, body_begin);
    if (close_pos == std::string::npos)
      return fail(MalformedCause::UnclosedTag, pos, "missing " + close);

    const std::string body = raw.substr(body_begin, close_pos - body_begin);
    if (std::size_t nested = find_tag_literal(body); nested != std::string::npos)
      return fail(MalformedCause::NestedTag, body_begin + nested, "tag inside " + open + " body");

    if (!allowed(state, *kind))
      return fail(MalformedCause::UnexpectedSegment, pos,
                  open + " not allowed here by the grammar");

    out.segments.push_back(make_segment(*kind, body));
    state = advance(state, *kind);
    pos = close_pos + close.size();
  }

  out.verdict = state == State::AfterAnswer ? Verdict::Valid : Verdict::ValidIncomplete;
  out.cause = MalformedCause::None;
  return out;
}

std::optional<std::string> Trajectory::answer() const {
  if (!steps.empty() && steps.back().kind == SegmentKind::Answer) return steps.back().body;
  return std::nullopt;
}

int Trajectory::tool_call_count() const {
  return static_cast<int>(std::count_if(steps.begin(), steps.end(), [](const Segment& s) {
    return s.kind == SegmentKind::ToolCall;
  }));
}

bool is_grammatical(const std::vector<Segment>& steps, bool require_complete) {
  State state = State::ExpectThink;
  for (const Segment& s : steps) {
    if (!allowed(state, s.kind)) return false;
    state = advance(state, s.kind);
  }
  return require_complete ? state == State::AfterAnswer : true;
}

namespace {

RenderedText render_unchecked(const std::vector<Segment>& steps) {
  RenderedText out;
  for (const Segment& s : steps) {
    if (find_tag_literal(s.body) != std::string::npos)
      throw InvariantViolation("segment body contains a reserved tag literal");
    if (!out.text.empty()) out.text += '\n';
    SegmentSpan span;
    span.kind = s.kind;
    span.begin = out.text.size();
    out.text += open_tag(s.kind);
    out.text += s.body;
    out.text += close_tag(s.kind);
    span.end = out.text.size();
    out.spans.push_back(span);
  }
  return out;
}

}  // namespace

RenderedText render_segments(const std::vector<Segment>& steps, bool require_complete) {
  if (steps.empty()) throw InvariantViolation("cannot render an empty trajectory");
  if (!is_grammatical(steps, require_complete))
    throw InvariantViolation("segment sequence violates the trajectory grammar");
  return render_unchecked(steps);
}

std::string render_trajectory(const Trajectory& t) {
  return render_segments(t.steps, /*require_complete=*/true).text;
}

std::string render_fragment(const std::vector<Segment>& steps) {
  return render_unchecked(steps).text;
}

std::string sanitize_body(std::string body) {
  for (SegmentKind k : kKinds) {
    for (const std::string& tag : {open_tag(k), close_tag(k)}) {
      std::string replacement = tag;
      replacement.front() = '[';
      replacement.back() = ']';
      std::size_t pos = 0;
      while ((pos = body.find(tag, pos)) != std::string::npos) {
        body.replace(pos, tag.size(), replacement);
        pos += replacement.size();
      }
    }
  }
  return body;
}

}  // namespace searchforge::protocol
