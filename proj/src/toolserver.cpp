#include "searchforge/toolserver.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <thread>

#include <httplib.h>

#include "searchforge/util.hpp"

static_assert(std::endian::native == std::endian::little,
              "vector files are little-endian float32 rows");

namespace searchforge::toolserver {

namespace fs = std::filesystem;
using modelclient::EmbeddingProvider;
using modelclient::ModelClient;

Mode mode_from_string(const std::string& s) {
  const std::string m = lower(trim(s));
  if (m == "train") return Mode::Train;
  if (m == "eval") return Mode::Eval;
  throw SchemaViolation("mode must be 'train' or 'eval', got '" + s + "'");
}

std::string_view to_string(Mode m) { return m == Mode::Train ? "train" : "eval"; }

RetrievalConfig RetrievalConfig::for_mode(Mode m) {
  RetrievalConfig cfg;
  cfg.mode = m;
  if (m == Mode::Train) {
    cfg.text_top_k = 3;
    cfg.image_top_k = 1;
  } else {
    cfg.text_top_k = 5;
    cfg.image_top_k = 3;
  }
  return cfg;
}

Json ToolResult::to_json() const {
  Json out;
  out["tool"] = tool;
  out["per_query"] = Json::array();
  for (const QueryHits& qh : per_query) {
    Json entry;
    entry["query"] = qh.query;
    entry["hits"] = Json::array();
    for (const Hit& h : qh.hits) {
      Json hit;
      hit["id"] = h.id;
      hit["score"] = h.score;
      if (tool == "text_search") {
        hit["title"] = h.title;
        hit["snippet"] = h.snippet;
      } else if (tool == "model_search") {
        hit["body"] = h.body;
      } else {
        hit["caption"] = h.caption;
        hit["image_uri"] = h.uri;
      }
      entry["hits"].push_back(std::move(hit));
    }
    out["per_query"].push_back(std::move(entry));
  }
  return out;
}

void SearchIndex::add_passage(TextPassage p, std::vector<float> vec) {
  if (dim_ == 0) dim_ = vec.size();
  if (vec.size() != dim_)
    throw modelclient::DimensionMismatch("passage vector width " + std::to_string(vec.size()));
  passages_.push_back(std::move(p));
  passage_vectors_.push_back(std::move(vec));
}

void SearchIndex::add_image(ImageEntry e, std::vector<float> vec) {
  if (dim_ == 0) dim_ = vec.size();
  if (vec.size() != dim_)
    throw modelclient::DimensionMismatch("image vector width " + std::to_string(vec.size()));
  images_.push_back(std::move(e));
  image_vectors_.push_back(std::move(vec));
}

std::vector<std::string> chunk_passages(const std::string& body) {
  const std::vector<std::string> words = split_words(body);
  std::vector<std::string> chunks;
  for (std::size_t i = 0; i < words.size(); i += kPassageWordLimit) {
    const std::size_t n = std::min(kPassageWordLimit, words.size() - i);
    std::vector<std::string> slice(words.begin() + static_cast<long>(i),
                                   words.begin() + static_cast<long>(i + n));
    chunks.push_back(join(slice, " "));
  }
  return chunks;
}

IngestStats ingest_text(SearchIndex& index, const std::vector<DocInput>& docs,
                        EmbeddingProvider& embedder) {
  if (docs.empty()) throw EmptyCorpus("no documents to ingest");
  IngestStats stats;
  std::size_t doc_seq = index.passages().empty()
                            ? 0
                            : index.passages().size();  // ids stay unique across calls
  for (const DocInput& doc : docs) {
    const std::string doc_id = "d" + to_hex(fnv1a64(doc.title + "\n" + (doc.url ? *doc.url : "")), 8) +
                               "-" + std::to_string(doc_seq);
    const std::vector<std::string> chunks = chunk_passages(doc.body);
    if (chunks.empty()) throw EmptyDocument(doc_id + " ('" + doc.title + "')");

    std::vector<TextPassage> passages;
    std::vector<std::string> indexed_texts;
    for (std::size_t i = 0; i < chunks.size(); ++i) {
      TextPassage p;
      p.doc_id = doc_id;
      char suffix[8];
      std::snprintf(suffix, sizeof(suffix), "%04zu", i);
      p.passage_id = doc_id + "#" + suffix;
      p.title = doc.title;
      p.body = chunks[i];
      p.source_url = doc.url;
      indexed_texts.push_back(doc.title.empty() ? p.body : doc.title + " " + p.body);
      passages.push_back(std::move(p));
    }

    std::vector<std::vector<float>> vecs;
    try {
      vecs = modelclient::embed(embedder, indexed_texts);
    } catch (const Error& e) {
      throw EmbeddingFailure(doc_id + ": " + e.what());
    }
    for (std::size_t i = 0; i < passages.size(); ++i)
      index.add_passage(std::move(passages[i]), std::move(vecs[i]));

    stats.doc_count += 1;
    stats.passage_count += chunks.size();
    ++doc_seq;
  }
  stats.image_count = index.images().size();
  return stats;
}

std::size_t ingest_images(SearchIndex& index, const std::vector<ImageEntry>& entries,
                          EmbeddingProvider& embedder) {
  std::size_t seq = index.images().size();
  for (ImageEntry entry : entries) {
    if (entry.uri.empty()) throw ImageUnreadable("image entry without uri");
    if (entry.image_id.empty()) {
      char buf[16];
      std::snprintf(buf, sizeof(buf), "i%06zu", seq);
      entry.image_id = buf;
    }
    std::vector<float> vec;
    try {
      vec = modelclient::embed_image(embedder, entry.uri);
    } catch (const Error& e) {
      throw EmbeddingFailure(entry.image_id + ": " + e.what());
    }
    index.add_image(std::move(entry), std::move(vec));
    ++seq;
  }
  return index.images().size();
}

namespace {

void write_vectors(const fs::path& path, const std::vector<std::vector<float>>& rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string());
  for (const auto& row : rows)
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(float)));
}

std::vector<std::vector<float>> read_vectors(const fs::path& path, std::size_t count,
                                             std::size_t dim) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::vector<float>> rows(count, std::vector<float>(dim));
  for (auto& row : rows) {
    in.read(reinterpret_cast<char*>(row.data()),
            static_cast<std::streamsize>(dim * sizeof(float)));
    if (!in) throw IoError("truncated vector file " + path.string());
  }
  return rows;
}

}  // namespace

void save_index(const SearchIndex& index, const fs::path& dir) {
  fs::create_directories(dir);

  Json manifest;
  manifest["format_version"] = 1;
  manifest["dim"] = index.dim();
  manifest["passage_count"] = index.passages().size();
  manifest["image_count"] = index.images().size();
  write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");

  std::vector<Json> passage_rows;
  for (const TextPassage& p : index.passages()) {
    Json row;
    row["passage_id"] = p.passage_id;
    row["doc_id"] = p.doc_id;
    row["title"] = p.title;
    row["body"] = p.body;
    if (p.source_url) row["source_url"] = *p.source_url;
    passage_rows.push_back(std::move(row));
  }
  write_jsonl(dir / "passages.jsonl", passage_rows);
  write_vectors(dir / "vectors.f32", index.passage_vectors());

  std::vector<Json> image_rows;
  for (const ImageEntry& e : index.images()) {
    Json row;
    row["image_id"] = e.image_id;
    row["uri"] = e.uri;
    if (e.caption) row["caption"] = *e.caption;
    image_rows.push_back(std::move(row));
  }
  write_jsonl(dir / "images.jsonl", image_rows);
  write_vectors(dir / "image_vectors.f32", index.image_vectors());
}

SearchIndex load_index(const fs::path& dir) {
  if (!fs::exists(dir / "manifest.json"))
    throw IndexMissing("no index at " + dir.string());
  const Json manifest = Json::parse(read_text_file(dir / "manifest.json"));
  const std::size_t dim = manifest.at("dim").get<std::size_t>();
  const std::size_t passage_count = manifest.at("passage_count").get<std::size_t>();
  const std::size_t image_count = manifest.at("image_count").get<std::size_t>();

  SearchIndex index;
  const auto passage_rows = read_jsonl(dir / "passages.jsonl");
  auto passage_vecs = read_vectors(dir / "vectors.f32", passage_count, dim);
  if (passage_rows.size() != passage_count) throw IoError("passage count mismatch");
  for (std::size_t i = 0; i < passage_rows.size(); ++i) {
    const Json& row = passage_rows[i];
    TextPassage p;
    p.passage_id = require_string(row, "passage_id");
    p.doc_id = require_string(row, "doc_id");
    p.title = require_string(row, "title");
    p.body = require_string(row, "body");
    if (row.contains("source_url")) p.source_url = row["source_url"].get<std::string>();
    index.add_passage(std::move(p), std::move(passage_vecs[i]));
  }

  const auto image_rows = read_jsonl(dir / "images.jsonl");
  auto image_vecs = read_vectors(dir / "image_vectors.f32", image_count, dim);
  if (image_rows.size() != image_count) throw IoError("image count mismatch");
  for (std::size_t i = 0; i < image_rows.size(); ++i) {
    const Json& row = image_rows[i];
    ImageEntry e;
    e.image_id = require_string(row, "image_id");
    e.uri = require_string(row, "uri");
    if (row.contains("caption")) e.caption = row["caption"].get<std::string>();
    index.add_image(std::move(e), std::move(image_vecs[i]));
  }
  return index;
}

namespace {

double dot(const std::vector<float>& a, const std::vector<float>& b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    sum += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return sum;
}

struct Scored {
  double score;
  std::size_t pos;
};

// Exact full scan: score everything, sort by score descending with ties
// broken by ascending id, keep top_k.
template <typename GetId>
std::vector<Scored> rank(const std::vector<std::vector<float>>& vectors,
                         const std::vector<float>& query, int top_k, GetId id_of,
                         std::optional<double> strict_threshold = std::nullopt) {
  std::vector<Scored> scored;
  scored.reserve(vectors.size());
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    const double s = dot(vectors[i], query);
    if (strict_threshold && !(s > *strict_threshold)) continue;
    scored.push_back({s, i});
  }
  std::sort(scored.begin(), scored.end(), [&](const Scored& a, const Scored& b) {
    if (a.score != b.score) return a.score > b.score;
    return id_of(a.pos) < id_of(b.pos);
  });
  if (top_k >= 0 && scored.size() > static_cast<std::size_t>(top_k))
    scored.resize(static_cast<std::size_t>(top_k));
  return scored;
}

Hit text_hit(const SearchIndex& index, const Scored& s) {
  const TextPassage& p = index.passages()[s.pos];
  Hit h;
  h.id = p.passage_id;
  h.score = s.score;
  h.title = p.title;
  h.snippet = first_words(p.body, kSnippetWords);
  return h;
}

Hit image_hit(const SearchIndex& index, const Scored& s) {
  const ImageEntry& e = index.images()[s.pos];
  Hit h;
  h.id = e.image_id;
  h.score = s.score;
  h.caption = e.caption.value_or("");
  h.uri = e.uri;
  return h;
}

std::vector<float> embed_query(const SearchIndex& index, EmbeddingProvider& embedder,
                               const std::string& query) {
  std::vector<std::vector<float>> rows;
  try {
    rows = modelclient::embed(embedder, {query});
  } catch (const Error& e) {
    throw EmbeddingFailure(std::string("query: ") + e.what());
  }
  if (index.dim() != 0 && rows.front().size() != index.dim())
    throw modelclient::DimensionMismatch("query vector width " +
                                         std::to_string(rows.front().size()));
  return std::move(rows.front());
}

}  // namespace

ToolResult search_text(const SearchIndex& index, const std::vector<std::string>& queries,
                       const RetrievalConfig& cfg, EmbeddingProvider& embedder) {
  if (index.passages().empty()) throw IndexMissing("text index is empty");
  ToolResult out;
  out.tool = "text_search";
  for (const std::string& q : queries) {
    const std::vector<float> qv = embed_query(index, embedder, q);
    auto ranked = rank(index.passage_vectors(), qv, cfg.text_top_k,
                       [&](std::size_t pos) { return index.passages()[pos].passage_id; });
    QueryHits qh;
    qh.query = q;
    for (const Scored& s : ranked) qh.hits.push_back(text_hit(index, s));
    out.per_query.push_back(std::move(qh));
  }
  return out;
}

ToolResult search_image_by_text(const SearchIndex& index, const std::vector<std::string>& queries,
                                const RetrievalConfig& cfg, EmbeddingProvider& embedder) {
  if (index.images().empty()) throw IndexMissing("image index is empty");
  ToolResult out;
  out.tool = "image_search_by_text_query";
  for (const std::string& q : queries) {
    const std::vector<float> qv = embed_query(index, embedder, q);
    auto ranked = rank(index.image_vectors(), qv, cfg.image_top_k,
                       [&](std::size_t pos) { return index.images()[pos].image_id; },
                       cfg.image_sim_threshold);
    QueryHits qh;
    qh.query = q;
    for (const Scored& s : ranked) qh.hits.push_back(image_hit(index, s));
    out.per_query.push_back(std::move(qh));
  }
  return out;
}

ToolResult search_image_by_image(const SearchIndex& index, const std::string& image_ref,
                                 const std::vector<std::string>& refinement_queries,
                                 const RetrievalConfig& cfg, EmbeddingProvider& embedder) {
  if (index.images().empty()) throw IndexMissing("image index is empty");
  if (trim(image_ref).empty()) throw ImageUnreadable("empty image reference");

  std::vector<float> qv;
  try {
    qv = modelclient::embed_image(embedder, image_ref);
  } catch (const Error& e) {
    throw ImageUnreadable(image_ref + ": " + e.what());
  }

  if (!refinement_queries.empty()) {
    // Fusion: mean of the unit image vector and unit query vectors.
    std::vector<std::vector<float>> qvecs;
    try {
      qvecs = modelclient::embed(embedder, refinement_queries);
    } catch (const Error& e) {
      throw EmbeddingFailure(std::string("refinement: ") + e.what());
    }
    std::vector<float> fused = qv;
    for (const auto& row : qvecs)
      for (std::size_t i = 0; i < fused.size(); ++i) fused[i] += row[i];
    const float inv = 1.0f / static_cast<float>(1 + qvecs.size());
    for (float& x : fused) x *= inv;
    modelclient::l2_normalize(fused);
    qv = std::move(fused);
  }

  auto ranked = rank(index.image_vectors(), qv, cfg.image_top_k,
                     [&](std::size_t pos) { return index.images()[pos].image_id; },
                     cfg.image_sim_threshold);

  ToolResult out;
  out.tool = "image_search_by_lens";
  QueryHits qh;
  qh.query = refinement_queries.empty() ? image_ref
                                        : image_ref + " | " + join(refinement_queries, "; ");
  for (const Scored& s : ranked) qh.hits.push_back(image_hit(index, s));
  out.per_query.push_back(std::move(qh));
  return out;
}

ToolResult model_search(const std::vector<std::string>& queries, ModelClient& expert) {
  ToolResult out;
  out.tool = "model_search";
  int seq = 0;
  for (const std::string& q : queries) {
    std::string reply;
    try {
      std::vector<modelclient::ChatTurn> turns{
          {modelclient::Role::System,
           "You are a knowledgeable expert. Answer the query concisely and factually.",
           std::nullopt},
          {modelclient::Role::User, q, std::nullopt},
      };
      reply = expert.complete(turns);
    } catch (const Error& e) {
      throw modelclient::BackendUnavailable("model_search('" + q + "'): " + e.what());
    }
    QueryHits qh;
    qh.query = q;
    Hit h;
    h.id = "expert:" + std::to_string(seq++);
    h.score = 1.0;
    h.body = reply;
    qh.hits.push_back(std::move(h));
    out.per_query.push_back(std::move(qh));
  }
  return out;
}

ToolService::Reply ToolService::handle(const std::string& tool_name, const Json& request) const {
  Reply reply;
  auto error = [&](int status, const std::string& code, const std::string& detail) {
    reply.status = status;
    reply.body = Json{{"error", code}, {"detail", detail}};
    return reply;
  };

  if (!protocol::is_tool_name(tool_name)) return error(404, "UnknownTool", tool_name);
  if (!request.is_object()) return error(400, "MalformedRequest", "body must be a JSON object");

  auto ql_it = request.find("query_list");
  if (ql_it == request.end() || !ql_it->is_array() || ql_it->empty())
    return error(400, "MissingArguments", "query_list must be a non-empty array");
  std::vector<std::string> queries;
  for (const auto& q : *ql_it) {
    if (!q.is_string()) return error(400, "MissingArguments", "query_list entries must be strings");
    queries.push_back(q.get<std::string>());
  }

  try {
    ToolResult result;
    if (tool_name == "text_search") {
      result = search_text(index_, queries, cfg_, embedder_);
    } else if (tool_name == "image_search_by_text_query") {
      result = search_image_by_text(index_, queries, cfg_, embedder_);
    } else if (tool_name == "image_search_by_lens") {
      auto img_it = request.find("image");
      if (img_it == request.end() || !img_it->is_string())
        return error(400, "MissingArguments", "image reference required for lens search");
      result = search_image_by_image(index_, img_it->get<std::string>(), queries, cfg_, embedder_);
    } else {  // model_search
      if (!expert_) return error(503, "BackendUnavailable", "no expert endpoint configured");
      result = model_search(queries, *expert_);
    }
    reply.status = 200;
    reply.body = result.to_json();
    return reply;
  } catch (const modelclient::BackendUnavailable& e) {
    return error(503, e.code(), e.what());
  } catch (const IndexMissing& e) {
    return error(503, e.code(), e.what());
  } catch (const ImageUnreadable& e) {
    return error(400, e.code(), e.what());
  } catch (const Error& e) {
    return error(500, e.code(), e.what());
  }
}

namespace {

ToolResult result_from_json(const Json& body) {
  ToolResult out;
  out.tool = require_string(body, "tool");
  for (const auto& entry : require_field(body, "per_query")) {
    QueryHits qh;
    qh.query = require_string(entry, "query");
    for (const auto& hit : require_field(entry, "hits")) {
      Hit h;
      h.id = require_string(hit, "id");
      h.score = hit.at("score").get<double>();
      if (hit.contains("title")) h.title = hit["title"].get<std::string>();
      if (hit.contains("snippet")) h.snippet = hit["snippet"].get<std::string>();
      if (hit.contains("caption")) h.caption = hit["caption"].get<std::string>();
      if (hit.contains("image_uri")) h.uri = hit["image_uri"].get<std::string>();
      if (hit.contains("body")) h.body = hit["body"].get<std::string>();
      qh.hits.push_back(std::move(h));
    }
    out.per_query.push_back(std::move(qh));
  }
  return out;
}

Json lens_request(const protocol::ToolCall& call, const std::optional<std::string>& image) {
  Json request;
  request["query_list"] = call.query_list;
  if (call.name == "image_search_by_lens" && image) request["image"] = *image;
  return request;
}

}  // namespace

ToolResult LocalToolClient::call(const protocol::ToolCall& call,
                                 const std::optional<std::string>& question_image) {
  auto reply = service_.handle(call.name, lens_request(call, question_image));
  if (reply.status != 200)
    throw BackendUnparseable("tool " + call.name + " -> HTTP " + std::to_string(reply.status) +
                             " " + reply.body.dump());
  return result_from_json(reply.body);
}

ToolResult HttpToolClient::call(const protocol::ToolCall& call,
                                const std::optional<std::string>& question_image) {
  httplib::Client cli(base_url_);
  auto res = cli.Post("/tools/" + call.name, lens_request(call, question_image).dump(),
                      "application/json");
  if (!res) throw modelclient::BackendUnavailable("tool server unreachable at " + base_url_);
  if (res->status != 200)
    throw BackendUnparseable("tool " + call.name + " -> HTTP " + std::to_string(res->status));
  return result_from_json(Json::parse(res->body));
}

struct ToolServer::Impl {
  const ToolService& service;
  httplib::Server server;
  std::thread thread;

  explicit Impl(const ToolService& svc) : service(svc) {}
};

ToolServer::ToolServer(const ToolService& service) : impl_(std::make_unique<Impl>(service)) {
  impl_->server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"status":"ok"})", "application/json");
  });
  impl_->server.Post(R"(/tools/([A-Za-z0-9_]+))", [this](const httplib::Request& req,
                                                         httplib::Response& res) {
    const std::string tool = req.matches[1];
    Json body = Json::parse(req.body, nullptr, false);
    if (body.is_discarded()) {
      res.status = 400;
      res.set_content(R"({"error":"MalformedRequest","detail":"invalid JSON"})",
                      "application/json");
      return;
    }
    auto reply = impl_->service.handle(tool, body);
    res.status = reply.status;
    res.set_content(reply.body.dump(), "application/json");
  });
}

ToolServer::~ToolServer() { stop(); }

int ToolServer::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw IoError("cannot bind tool server on " + host);
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  } else {
    if (!impl_->server.bind_to_port(host, port))
      throw IoError("cannot bind tool server on " + host + ":" + std::to_string(port));
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  }
  impl_->server.wait_until_ready();
  return bound;
}

void ToolServer::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
  if (impl_ && impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace searchforge::toolserver
