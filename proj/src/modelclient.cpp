#include "searchforge/modelclient.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "searchforge/util.hpp"

namespace searchforge::modelclient {

std::string_view role_name(Role r) {
  switch (r) {
    case Role::System:
      return "system";
    case Role::User:
      return "user";
    case Role::Assistant:
      return "assistant";
    case Role::Tool:
      return "tool";
  }
  return "";
}

std::string render_turns(const std::vector<ChatTurn>& turns) {
  std::string out;
  for (const ChatTurn& t : turns) {
    out += role_name(t.role);
    out += ": ";
    out += t.content;
    if (t.image) {
      out += "\n[image] ";
      out += *t.image;
    }
    out += '\n';
  }
  return out;
}

std::uint64_t fingerprint(const std::vector<ChatTurn>& turns) {
  return fnv1a64(render_turns(turns));
}

static std::string apply_stop(std::string text, const CompleteOptions& opts) {
  std::size_t cut = std::string::npos;
  for (const std::string& s : opts.stop) {
    std::size_t p = text.find(s);
    if (p != std::string::npos) cut = std::min(cut, p + s.size());
  }
  if (cut != std::string::npos) text.resize(cut);
  return text;
}

void ScriptedBackend::script(const std::vector<ChatTurn>& turns, std::string response) {
  script_fingerprint(fingerprint(turns), std::move(response));
}

void ScriptedBackend::script_fingerprint(std::uint64_t fp, std::string response) {
  script_[fp].push_back(std::move(response));
}

std::string ScriptedBackend::complete(const std::vector<ChatTurn>& turns,
                                      const CompleteOptions& opts) {
  ++calls_;
  auto it = script_.find(fingerprint(turns));
  if (it == script_.end() || it->second.empty()) {
    if (strict_)
      throw BackendUnavailable("Unscripted request, fingerprint " +
                               to_hex(fingerprint(turns)));
    return apply_stop(fallback_, opts);
  }
  std::string response = it->second.front();
  if (it->second.size() > 1) it->second.pop_front();
  return apply_stop(std::move(response), opts);
}

std::string FunctionBackend::complete(const std::vector<ChatTurn>& turns,
                                      const CompleteOptions& opts) {
  return apply_stop(fn_(turns), opts);
}

std::string HttpBackend::complete(const std::vector<ChatTurn>& turns,
                                  const CompleteOptions& opts) {
  const Endpoint& ep = endpoint_;
  std::string token;
  if (!ep.auth_env.empty()) {
    const char* value = std::getenv(ep.auth_env.c_str());
    if (!value || !*value) throw AuthMissing("environment variable " + ep.auth_env + " unset");
    token = value;
  }

  nlohmann::json payload;
  payload["model"] = ep.model;
  payload["messages"] = nlohmann::json::array();
  for (const ChatTurn& t : turns) {
    nlohmann::json msg;
    msg["role"] = std::string(role_name(t.role));
    msg["content"] = t.content;
    if (t.image) msg["image"] = *t.image;
    payload["messages"].push_back(std::move(msg));
  }
  if (!opts.stop.empty()) payload["stop"] = opts.stop;
  const std::string body = payload.dump();

  auto attempt = [&]() -> std::string {
    httplib::Client cli(ep.base_url);
    cli.set_connection_timeout(0, ep.timeout_ms * 1000);
    cli.set_read_timeout(ep.timeout_ms / 1000, (ep.timeout_ms % 1000) * 1000);
    if (!token.empty()) cli.set_bearer_token_auth(token);
    auto res = cli.Post("/v1/chat/completions", body, "application/json");
    if (!res) {
      if (res.error() == httplib::Error::ConnectionTimeout ||
          res.error() == httplib::Error::Read)
        throw Timeout(ep.base_url);
      throw TransientFailure("no response from " + ep.base_url);
    }
    if (res->status >= 500) throw TransientFailure("HTTP " + std::to_string(res->status));
    if (res->status != 200)
      throw BackendUnavailable("HTTP " + std::to_string(res->status) + " from " + ep.base_url);
    nlohmann::json reply = nlohmann::json::parse(res->body, nullptr, false);
    if (reply.is_discarded() || !reply.contains("choices") || reply["choices"].empty())
      throw BackendUnavailable("unparsable completion payload");
    return reply["choices"][0]["message"]["content"].get<std::string>();
  };

  FunctionBackend one_shot([&](const std::vector<ChatTurn>&) { return attempt(); });
  return complete_with_retry(one_shot, turns, ep.max_retries, 50, opts);
}

std::string complete_with_retry(ModelClient& client, const std::vector<ChatTurn>& turns,
                                int max_retries, int base_backoff_ms,
                                const CompleteOptions& opts, int* attempts_out) {
  int attempts = 0;
  for (;;) {
    ++attempts;
    try {
      std::string out = client.complete(turns, opts);
      if (attempts_out) *attempts_out = attempts;
      return out;
    } catch (const TransientFailure&) {
      if (attempts > max_retries) {
        if (attempts_out) *attempts_out = attempts;
        throw;
      }
      const auto backoff = std::chrono::milliseconds(
          static_cast<long long>(base_backoff_ms) << (attempts - 1));
      std::this_thread::sleep_for(backoff);
    }
  }
}

std::string summarize_tool_response(ModelClient* summarizer, const std::string& raw,
                                    std::size_t budget_words) {
  if (word_count(raw) <= budget_words) return raw;
  if (summarizer) {
    try {
      std::vector<ChatTurn> turns{
          {Role::System,
           "Summarize the tool output below in at most " + std::to_string(budget_words) +
               " words. Keep every fact needed to answer questions about it; drop boilerplate.",
           std::nullopt},
          {Role::User, raw, std::nullopt},
      };
      std::string summary = trim(summarizer->complete(turns));
      if (!summary.empty()) {
        if (word_count(summary) > budget_words) summary = first_words(summary, budget_words);
        return summary;
      }
    } catch (const Error&) {
      // fall through to truncation
    }
  }
  return first_words(raw, budget_words);
}

std::string annotate(ModelClient& annotator, const std::string& payload, bool is_image) {
  std::vector<ChatTurn> turns;
  if (is_image) {
    turns.push_back({Role::System,
                     "Write one concise caption describing the image. Reply with the caption only.",
                     std::nullopt});
    turns.push_back({Role::User, "Caption this image.", payload});
  } else {
    turns.push_back({Role::System,
                     "Write a concise factual summary of the webpage content below. Reply with the "
                     "summary only.",
                     std::nullopt});
    turns.push_back({Role::User, payload, std::nullopt});
  }
  std::string out = trim(annotator.complete(turns));
  if (out.empty()) throw EmptyAnnotation(is_image ? "caption" : "summary");
  return out;
}

double l2_norm(const std::vector<float>& v) {
  double sum = 0.0;
  for (float x : v) sum += static_cast<double>(x) * static_cast<double>(x);
  return std::sqrt(sum);
}

void l2_normalize(std::vector<float>& v) {
  double norm = l2_norm(v);
  if (norm == 0.0) {
    if (!v.empty()) v[0] = 1.0f;
    return;
  }
  for (float& x : v) x = static_cast<float>(static_cast<double>(x) / norm);
}

static std::vector<std::vector<float>> normalize_rows(std::vector<std::vector<float>> rows,
                                                      std::size_t expected_count) {
  if (rows.size() != expected_count)
    throw DimensionMismatch("backend returned " + std::to_string(rows.size()) + " rows, expected " +
                            std::to_string(expected_count));
  const std::size_t dim = rows.empty() ? 0 : rows.front().size();
  for (auto& row : rows) {
    if (row.size() != dim)
      throw DimensionMismatch("inconsistent vector widths: " + std::to_string(row.size()) +
                              " vs " + std::to_string(dim));
    l2_normalize(row);
  }
  return rows;
}

std::vector<std::vector<float>> embed(EmbeddingProvider& provider,
                                      const std::vector<std::string>& texts) {
  return normalize_rows(provider.embed_texts(texts), texts.size());
}

std::vector<float> embed_image(EmbeddingProvider& provider, const std::string& image_ref) {
  std::vector<float> v = provider.embed_image(image_ref);
  l2_normalize(v);
  return v;
}

std::vector<float> HashEmbedder::embed_tokens(const std::vector<std::string>& tokens) const {
  std::vector<float> v(dim_, 0.0f);
  for (const std::string& tok : tokens) {
    const std::uint64_t h = fnv1a64(tok);
    const std::size_t bucket = h % dim_;
    const float sign = ((h >> 7) & 1) ? 1.0f : -1.0f;
    v[bucket] += sign;
  }
  l2_normalize(v);
  return v;
}

std::vector<std::vector<float>> HashEmbedder::embed_texts(const std::vector<std::string>& texts) {
  std::vector<std::vector<float>> out;
  out.reserve(texts.size());
  for (const std::string& t : texts) out.push_back(embed_tokens(split_words(t)));
  return out;
}

std::vector<float> HashEmbedder::embed_image(const std::string& image_ref) {
  return embed_tokens(split_tokens(image_ref));
}

static std::vector<std::vector<float>> parse_vectors(const std::string& body) {
  nlohmann::json reply = nlohmann::json::parse(body, nullptr, false);
  if (reply.is_discarded() || !reply.contains("vectors") || !reply["vectors"].is_array())
    throw BackendUnavailable("unparsable embedding payload");
  std::vector<std::vector<float>> rows;
  for (const auto& row : reply["vectors"]) rows.push_back(row.get<std::vector<float>>());
  return rows;
}

static std::string post_embed(const Endpoint& ep, const nlohmann::json& payload) {
  httplib::Client cli(ep.base_url);
  cli.set_read_timeout(ep.timeout_ms / 1000, (ep.timeout_ms % 1000) * 1000);
  auto res = cli.Post("/embed", payload.dump(), "application/json");
  if (!res) throw BackendUnavailable("no response from " + ep.base_url);
  if (res->status != 200)
    throw BackendUnavailable("HTTP " + std::to_string(res->status) + " from " + ep.base_url);
  return res->body;
}

std::vector<std::vector<float>> HttpEmbedder::embed_texts(const std::vector<std::string>& texts) {
  nlohmann::json payload;
  payload["texts"] = texts;
  return parse_vectors(post_embed(endpoint_, payload));
}

std::vector<float> HttpEmbedder::embed_image(const std::string& image_ref) {
  nlohmann::json payload;
  payload["image"] = image_ref;
  auto rows = parse_vectors(post_embed(endpoint_, payload));
  if (rows.size() != 1) throw DimensionMismatch("expected 1 image vector");
  return rows.front();
}

}  // namespace searchforge::modelclient
