#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "searchforge/errors.hpp"

namespace searchforge::modelclient {

SEARCHFORGE_ERROR(BackendUnavailable);
SEARCHFORGE_ERROR(Timeout);
SEARCHFORGE_ERROR(AuthMissing);
SEARCHFORGE_ERROR(TransientFailure);
SEARCHFORGE_ERROR(DimensionMismatch);
SEARCHFORGE_ERROR(EmptyAnnotation);

enum class Role { System, User, Assistant, Tool };

std::string_view role_name(Role r);

struct ChatTurn {
  Role role;
  std::string content;
  std::optional<std::string> image;  // reference only; never inlined
};

struct Endpoint {
  std::string base_url;
  std::string model;
  int timeout_ms = 30000;
  int max_retries = 2;
  std::string auth_env;  // name of the env var holding the bearer token
};

// Canonical single-string form of a turn list; fingerprints hash this, so
// scripted tests are stable under JSON field reordering.
std::string render_turns(const std::vector<ChatTurn>& turns);
std::uint64_t fingerprint(const std::vector<ChatTurn>& turns);

struct CompleteOptions {
  // When set, the response is truncated just after the first occurrence of
  // any stop string (the stop string itself is kept; closing tags matter).
  std::vector<std::string> stop;
};

class ModelClient {
 public:
  virtual ~ModelClient() = default;
  virtual std::string complete(const std::vector<ChatTurn>& turns,
                               const CompleteOptions& opts = {}) = 0;
};

// Deterministic canned backend keyed by request fingerprint. Responses for a
// fingerprint are consumed in order (the last one repeats). In strict mode an
// unscripted request raises BackendUnavailable.
class ScriptedBackend : public ModelClient {
 public:
  explicit ScriptedBackend(bool strict = true) : strict_(strict) {}

  void script(const std::vector<ChatTurn>& turns, std::string response);
  void script_fingerprint(std::uint64_t fp, std::string response);
  void set_fallback(std::string response) { fallback_ = std::move(response); }

  std::string complete(const std::vector<ChatTurn>& turns,
                       const CompleteOptions& opts = {}) override;

  int calls() const { return calls_; }

 private:
  std::map<std::uint64_t, std::deque<std::string>> script_;
  bool strict_;
  std::string fallback_;
  int calls_ = 0;
};

// Wraps an arbitrary function; the workhorse for offline and test backends.
class FunctionBackend : public ModelClient {
 public:
  using Fn = std::function<std::string(const std::vector<ChatTurn>&)>;
  explicit FunctionBackend(Fn fn) : fn_(std::move(fn)) {}

  std::string complete(const std::vector<ChatTurn>& turns,
                       const CompleteOptions& opts = {}) override;

 private:
  Fn fn_;
};

// Minimal chat-completion wire shape: POST {model, messages:[{role,content}]}
// to <base_url>/v1/chat/completions, read choices[0].message.content.
class HttpBackend : public ModelClient {
 public:
  explicit HttpBackend(Endpoint ep) : endpoint_(std::move(ep)) {}

  std::string complete(const std::vector<ChatTurn>& turns,
                       const CompleteOptions& opts = {}) override;

 private:
  Endpoint endpoint_;
};

// Retries `attempt` on TransientFailure up to max_retries extra tries with
// exponential backoff. Turns are sent verbatim; responses returned verbatim.
std::string complete_with_retry(ModelClient& client, const std::vector<ChatTurn>& turns,
                                int max_retries, int base_backoff_ms = 50,
                                const CompleteOptions& opts = {}, int* attempts_out = nullptr);

// Compresses `raw` under `budget_words` via the summarizer; falls back to
// plain head truncation when the backend fails. Never throws.
std::string summarize_tool_response(ModelClient* summarizer, const std::string& raw,
                                    std::size_t budget_words);

// Annotation for graph nodes: caption (image) or summary (text).
std::string annotate(ModelClient& annotator, const std::string& payload, bool is_image);

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::vector<std::vector<float>> embed_texts(const std::vector<std::string>& texts) = 0;
  virtual std::vector<float> embed_image(const std::string& image_ref) = 0;
};

// Client-side contract on top of any provider: one vector per input, all the
// same width (else DimensionMismatch), L2-normalized here regardless of what
// the backend returned.
std::vector<std::vector<float>> embed(EmbeddingProvider& provider,
                                      const std::vector<std::string>& texts);
std::vector<float> embed_image(EmbeddingProvider& provider, const std::string& image_ref);

void l2_normalize(std::vector<float>& v);
double l2_norm(const std::vector<float>& v);

// Deterministic test embedder: whitespace tokens hashed into one of `dim`
// buckets with +/-1 signs, then normalized. Image refs are split on
// non-alphanumerics first so uri path components behave like tokens.
class HashEmbedder : public EmbeddingProvider {
 public:
  explicit HashEmbedder(std::size_t dim = 64) : dim_(dim) {}

  std::vector<std::vector<float>> embed_texts(const std::vector<std::string>& texts) override;
  std::vector<float> embed_image(const std::string& image_ref) override;

  std::vector<float> embed_tokens(const std::vector<std::string>& tokens) const;

 private:
  std::size_t dim_;
};

// POST {"texts":[...]} or {"image": ref} to <base_url>/embed, expects
// {"vectors": [[...], ...]}.
class HttpEmbedder : public EmbeddingProvider {
 public:
  explicit HttpEmbedder(Endpoint ep) : endpoint_(std::move(ep)) {}

  std::vector<std::vector<float>> embed_texts(const std::vector<std::string>& texts) override;
  std::vector<float> embed_image(const std::string& image_ref) override;

 private:
  Endpoint endpoint_;
};

}  // namespace searchforge::modelclient
