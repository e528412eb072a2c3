#include "searchforge/hypergraph.hpp"

#include <algorithm>
#include <deque>

#include "searchforge/prompts.hpp"

namespace searchforge::hypergraph {

using modelclient::ChatTurn;
using modelclient::ModelClient;
using modelclient::Role;

std::string_view to_string(Modality m) { return m == Modality::Image ? "image" : "text"; }

std::string_view to_string(QALevel level) { return level == QALevel::Intra ? "intra" : "inter"; }

QALevel level_from_string(const std::string& s) {
  const std::string v = lower(trim(s));
  if (v == "intra") return QALevel::Intra;
  if (v == "inter") return QALevel::Inter;
  throw SchemaViolation("level must be 'intra' or 'inter', got '" + s + "'");
}

const HNode& Hypergraph::node(const std::string& id) const {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) throw SchemaViolation("unknown node id " + id);
  return nodes_[it->second];
}

HNode& Hypergraph::node_mut(const std::string& id) {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) throw SchemaViolation("unknown node id " + id);
  return nodes_[it->second];
}

std::pair<std::string, bool> Hypergraph::add_or_link_node(Modality modality, int depth,
                                                          std::optional<std::string> parent,
                                                          std::string payload, std::string url) {
  if (!url.empty()) {
    auto it = url_to_node_.find(url);
    if (it != url_to_node_.end()) return {it->second, false};
  }
  HNode n;
  n.modality = modality;
  n.depth = depth;
  n.index = next_index_at_depth_[depth]++;
  n.parent = std::move(parent);
  n.payload = std::move(payload);
  n.url = url;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%c%04zu", modality == Modality::Image ? 'i' : 't',
                nodes_.size());
  n.id = buf;
  if (!url.empty()) url_to_node_[url] = n.id;
  by_id_[n.id] = nodes_.size();
  nodes_.push_back(std::move(n));
  return {nodes_.back().id, true};
}

Hyperedge& Hypergraph::add_edge(Hyperedge e) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "e%04zu", edges_.size());
  e.id = buf;
  edges_.push_back(std::move(e));
  return edges_.back();
}

Json Hypergraph::to_json() const {
  Json j;
  j["config"] = Json{{"fanout", config.fanout}, {"max_depth", config.max_depth}};
  j["nodes"] = Json::array();
  for (const HNode& n : nodes_) {
    Json row;
    row["id"] = n.id;
    row["modality"] = std::string(to_string(n.modality));
    row["depth"] = n.depth;
    row["index"] = n.index;
    if (n.parent) row["parent"] = *n.parent;
    row["payload"] = n.payload;
    row["url"] = n.url;
    row["annotation"] = n.annotation;
    row["expanded"] = is_expanded(n.id);
    j["nodes"].push_back(std::move(row));
  }
  j["edges"] = Json::array();
  for (const Hyperedge& e : edges_) {
    Json row;
    row["id"] = e.id;
    row["parent_node"] = e.parent_node;
    row["members"] = e.members;
    row["reused"] = e.reused;
    row["partial"] = e.partial;
    j["edges"].push_back(std::move(row));
  }
  return j;
}

Hypergraph Hypergraph::from_json(const Json& j) {
  Hypergraph g;
  g.config.fanout = j.at("config").at("fanout").get<int>();
  g.config.max_depth = j.at("config").at("max_depth").get<int>();
  for (const auto& row : j.at("nodes")) {
    HNode n;
    n.id = require_string(row, "id");
    n.modality = require_string(row, "modality") == "image" ? Modality::Image : Modality::Text;
    n.depth = row.at("depth").get<int>();
    n.index = row.at("index").get<int>();
    if (row.contains("parent")) n.parent = row["parent"].get<std::string>();
    n.payload = require_string(row, "payload");
    n.url = require_string(row, "url");
    n.annotation = require_string(row, "annotation");
    const bool expanded = row.at("expanded").get<bool>();
    g.by_id_[n.id] = g.nodes_.size();
    if (!n.url.empty()) g.url_to_node_[n.url] = n.id;
    g.next_index_at_depth_[n.depth] = std::max(g.next_index_at_depth_[n.depth], n.index + 1);
    if (expanded) g.expanded_.insert(n.id);
    g.nodes_.push_back(std::move(n));
  }
  for (const auto& row : j.at("edges")) {
    Hyperedge e;
    e.id = require_string(row, "id");
    e.parent_node = require_string(row, "parent_node");
    e.members = row.at("members").get<std::vector<std::string>>();
    e.reused = row.at("reused").get<std::vector<std::string>>();
    e.partial = row.at("partial").get<bool>();
    g.edges_.push_back(std::move(e));
  }
  return g;
}

Hypergraph make_graph(GraphConfig cfg, const std::string& seed_image_ref) {
  Hypergraph g;
  g.config = cfg;
  g.add_or_link_node(Modality::Image, 0, std::nullopt, seed_image_ref, seed_image_ref);
  return g;
}

namespace {

void check_expandable(const Hypergraph& g, const HNode& n) {
  if (g.is_expanded(n.id)) throw AlreadyExpanded(n.id);
  if (n.depth >= g.config.max_depth)
    throw DepthExceeded(n.id + " at depth " + std::to_string(n.depth));
}

}  // namespace

Hyperedge& expand_image_node(Hypergraph& g, std::string node_id, SearchProvider& provider) {
  const HNode n = g.node(node_id);
  if (n.modality != Modality::Image)
    throw SchemaViolation("expand_image_node on a text node " + node_id);
  check_expandable(g, n);

  const int k = g.config.fanout;
  std::vector<WebPage> pages;
  std::vector<std::string> similar;
  try {
    pages = provider.image_reverse_search(n.payload, k);
  } catch (const std::exception& e) {
    throw ProviderFailure("image_reverse_search(" + node_id + "): " + e.what());
  }
  try {
    similar = provider.image_visual_search(n.payload, k);
  } catch (const std::exception& e) {
    throw ProviderFailure("image_visual_search(" + node_id + "): " + e.what());
  }
  if (static_cast<int>(pages.size()) > k) pages.resize(static_cast<std::size_t>(k));
  if (static_cast<int>(similar.size()) > k) similar.resize(static_cast<std::size_t>(k));

  Hyperedge e;
  e.parent_node = node_id;
  e.members.push_back(node_id);
  e.partial = static_cast<int>(pages.size()) < k || static_cast<int>(similar.size()) < k;

  auto link = [&](Modality modality, const std::string& payload, const std::string& url) {
    auto [id, fresh] = g.add_or_link_node(modality, n.depth + 1, node_id, payload, url);
    if (std::find(e.members.begin(), e.members.end(), id) != e.members.end()) return;
    e.members.push_back(id);
    if (!fresh) e.reused.push_back(id);
  };
  for (const std::string& ref : similar) link(Modality::Image, ref, ref);
  for (const WebPage& page : pages) link(Modality::Text, page.content, page.url);

  g.mark_expanded(node_id);
  return g.add_edge(std::move(e));
}

namespace {

// The extractor must reply with {"urls": [...], "image_links": [...]}.
std::pair<std::vector<std::string>, std::vector<std::string>> extract_links(
    ModelClient& extractor, const std::string& payload, int k) {
  std::vector<ChatTurn> turns{
      {Role::System,
       "Extract from the webpage content below the top-" + std::to_string(k) +
           " most informative webpage URLs and the top-" + std::to_string(k) +
           " most relevant image links. Reply with exactly one JSON object "
           "{\"urls\": [...], \"image_links\": [...]} and nothing else.",
       std::nullopt},
      {Role::User, payload, std::nullopt},
  };
  const std::string reply = extractor.complete(turns);
  Json parsed = Json::parse(reply, nullptr, false);
  if (parsed.is_discarded() || !parsed.is_object() || !parsed.contains("urls") ||
      !parsed.contains("image_links") || !parsed["urls"].is_array() ||
      !parsed["image_links"].is_array())
    throw ExtractionUnparseable(reply.substr(0, 120));
  auto urls = parsed["urls"].get<std::vector<std::string>>();
  auto links = parsed["image_links"].get<std::vector<std::string>>();
  if (static_cast<int>(urls.size()) > k) urls.resize(static_cast<std::size_t>(k));
  if (static_cast<int>(links.size()) > k) links.resize(static_cast<std::size_t>(k));
  return {std::move(urls), std::move(links)};
}

}  // namespace

Hyperedge& expand_text_node(Hypergraph& g, std::string node_id, ModelClient& extractor,
                            SearchProvider& fetcher) {
  const HNode n = g.node(node_id);
  if (n.modality != Modality::Text)
    throw SchemaViolation("expand_text_node on an image node " + node_id);
  check_expandable(g, n);

  const int k = g.config.fanout;
  auto [urls, image_links] = extract_links(extractor, n.payload, k);

  Hyperedge e;
  e.parent_node = node_id;
  e.members.push_back(node_id);
  e.partial = static_cast<int>(urls.size()) < k || static_cast<int>(image_links.size()) < k;

  auto link_member = [&](Modality modality, const std::string& payload, const std::string& url) {
    auto [id, fresh] = g.add_or_link_node(modality, n.depth + 1, node_id, payload, url);
    if (std::find(e.members.begin(), e.members.end(), id) != e.members.end()) return;
    e.members.push_back(id);
    if (!fresh) e.reused.push_back(id);
  };

  for (const std::string& link : image_links) {
    std::string ref;
    try {
      ref = fetcher.fetch_image(link);
    } catch (const std::exception& ex) {
      throw ProviderFailure("fetch_image(" + link + "): " + ex.what());
    }
    link_member(Modality::Image, ref, ref);
  }
  for (const std::string& url : urls) {
    WebPage page;
    try {
      page = fetcher.fetch_page(url);
    } catch (const std::exception& ex) {
      throw ProviderFailure("fetch_page(" + url + "): " + ex.what());
    }
    link_member(Modality::Text, page.content, page.url);
  }

  g.mark_expanded(node_id);
  return g.add_edge(std::move(e));
}

Hypergraph build_hypergraph(const std::string& seed_image_ref, GraphConfig cfg,
                            BuildClients clients, BuildReport* report) {
  if (cfg.fanout < 1) throw SchemaViolation("fanout must be >= 1");
  if (cfg.max_depth < 0) throw SchemaViolation("max_depth must be >= 0");

  Hypergraph g = make_graph(cfg, seed_image_ref);
  BuildReport local;
  BuildReport& rep = report ? *report : local;

  auto annotate_node = [&](const std::string& id) {
    HNode& n = g.node_mut(id);
    n.annotation =
        modelclient::annotate(clients.annotator, n.payload, n.modality == Modality::Image);
  };
  annotate_node(g.nodes().front().id);

  // BFS in creation order; creation order is (depth, k) by construction.
  std::deque<std::string> frontier{g.nodes().front().id};
  while (!frontier.empty()) {
    const std::string id = frontier.front();
    frontier.pop_front();
    const HNode n = g.node(id);
    if (n.depth >= cfg.max_depth) continue;

    std::vector<std::string> fresh;
    try {
      const std::size_t before = g.nodes().size();
      const Hyperedge& e = n.modality == Modality::Image
                               ? expand_image_node(g, id, clients.provider)
                               : expand_text_node(g, id, clients.extractor, clients.provider);
      ++rep.expansions;
      for (std::size_t i = before; i < g.nodes().size(); ++i) fresh.push_back(g.nodes()[i].id);
      (void)e;
    } catch (const Error& err) {
      rep.branch_failures.push_back(id + ": " + err.what());
      continue;
    }
    for (const std::string& child : fresh) {
      annotate_node(child);
      frontier.push_back(child);
    }
  }
  return g;
}

namespace {

bool edge_has_image_member(const Hypergraph& g, const Hyperedge& e) {
  return std::any_of(e.members.begin(), e.members.end(), [&](const std::string& id) {
    return g.node(id).modality == Modality::Image;
  });
}

std::vector<std::string> image_members(const Hypergraph& g,
                                       const std::vector<std::string>& members) {
  std::vector<std::string> out;
  for (const std::string& id : members)
    if (g.node(id).modality == Modality::Image) out.push_back(id);
  return out;
}

}  // namespace

QAContext select_qa_context(const Hypergraph& g, QALevel level, int m, Rng& rng) {
  QAContext ctx;
  ctx.level = level;

  if (level == QALevel::Intra) {
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < g.edges().size(); ++i) {
      const Hyperedge& e = g.edges()[i];
      if (!e.partial && e.members.size() >= 2 && edge_has_image_member(g, e)) eligible.push_back(i);
    }
    if (eligible.empty()) throw NoEligibleEdge("no complete hyperedge with an image member");
    const Hyperedge& e = g.edges()[eligible[rng.below(eligible.size())]];
    const auto imgs = image_members(g, e.members);
    ctx.query_image = imgs[rng.below(imgs.size())];
    ctx.source_edges = {e.id};
    for (const std::string& id : e.members)
      if (id != ctx.query_image) ctx.evidence.push_back(id);
    if (ctx.evidence.empty()) throw NoEligibleEdge("edge has no evidence beyond the query image");
    return ctx;
  }

  if (m < 2) throw InsufficientLinkedEdges("inter-hyperedge selection needs m >= 2");
  if (static_cast<int>(g.edges().size()) < m)
    throw InsufficientLinkedEdges("graph has " + std::to_string(g.edges().size()) + " edges");

  // Adjacency by shared membership.
  std::map<std::string, std::vector<std::size_t>> edges_of_node;
  for (std::size_t i = 0; i < g.edges().size(); ++i)
    for (const std::string& id : g.edges()[i].members) edges_of_node[id].push_back(i);

  auto adjacent = [&](std::size_t edge_pos) {
    std::set<std::size_t> out;
    for (const std::string& id : g.edges()[edge_pos].members)
      for (std::size_t other : edges_of_node[id])
        if (other != edge_pos) out.insert(other);
    return out;
  };

  std::vector<std::size_t> starts;
  for (std::size_t i = 0; i < g.edges().size(); ++i)
    if (edge_has_image_member(g, g.edges()[i])) starts.push_back(i);
  if (starts.empty()) throw NoEligibleEdge("no edge with an image member");

  // Deterministic rotation over start edges until one yields m linked edges.
  const std::size_t offset = rng.below(starts.size());
  for (std::size_t attempt = 0; attempt < starts.size(); ++attempt) {
    const std::size_t start = starts[(offset + attempt) % starts.size()];
    std::vector<std::size_t> chosen{start};
    std::set<std::size_t> chosen_set{start};
    while (static_cast<int>(chosen.size()) < m) {
      std::set<std::size_t> frontier;
      for (std::size_t pos : chosen)
        for (std::size_t adj : adjacent(pos))
          if (!chosen_set.count(adj)) frontier.insert(adj);
      if (frontier.empty()) break;
      std::vector<std::size_t> options(frontier.begin(), frontier.end());
      const std::size_t pick = options[rng.below(options.size())];
      chosen.push_back(pick);
      chosen_set.insert(pick);
    }
    if (static_cast<int>(chosen.size()) != m) continue;

    const auto imgs = image_members(g, g.edges()[start].members);
    ctx.query_image = imgs[rng.below(imgs.size())];
    std::set<std::string> seen{ctx.query_image};
    for (std::size_t pos : chosen) {
      ctx.source_edges.push_back(g.edges()[pos].id);
      for (const std::string& id : g.edges()[pos].members)
        if (seen.insert(id).second) ctx.evidence.push_back(id);
    }
    if (ctx.evidence.empty()) continue;
    return ctx;
  }
  throw InsufficientLinkedEdges("no connected set of " + std::to_string(m) + " edges");
}

Json QAPair::to_json() const {
  Json j;
  j["id"] = id;
  j["question"] = question;
  j["answer"] = answer;
  j["query_image"] = query_image;
  j["evidence_ids"] = evidence;
  j["level"] = std::string(to_string(level));
  j["source_edges"] = source_edges;
  return j;
}

QAPair QAPair::from_json(const Json& j) {
  QAPair p;
  p.id = require_string(j, "id");
  p.question = require_string(j, "question");
  p.answer = require_string(j, "answer");
  p.query_image = require_string(j, "query_image");
  p.evidence = j.at("evidence_ids").get<std::vector<std::string>>();
  p.level = level_from_string(require_string(j, "level"));
  p.source_edges = j.at("source_edges").get<std::vector<std::string>>();
  return p;
}

namespace {

// First balanced {...} block in `text`, empty if none.
std::string extract_json_object(const std::string& text) {
  const std::size_t start = text.find('{');
  if (start == std::string::npos) return "";
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = start; i < text.size(); ++i) {
    const char c = text[i];
    if (escaped) {
      escaped = false;
      continue;
    }
    if (c == '\\') {
      escaped = in_string;
      continue;
    }
    if (c == '"') in_string = !in_string;
    if (in_string) continue;
    if (c == '{') ++depth;
    if (c == '}' && --depth == 0) return text.substr(start, i - start + 1);
  }
  return "";
}

}  // namespace

QAPair generate_qa(const Hypergraph& g, const QAContext& ctx, ModelClient& generator,
                   const std::string& id) {
  std::vector<std::string> summaries;
  std::vector<std::string> captions;
  for (const std::string& node_id : ctx.evidence) {
    const HNode& n = g.node(node_id);
    if (n.modality == Modality::Text)
      summaries.push_back(n.annotation.empty() ? n.payload : n.annotation);
    else
      captions.push_back(n.annotation);
  }

  const std::string prompt = prompts::render_qa_generation_prompt(summaries, captions);
  std::vector<ChatTurn> turns{{Role::System, prompt, g.node(ctx.query_image).payload}};
  const std::string reply = generator.complete(turns);

  const std::string block = extract_json_object(reply);
  Json parsed = block.empty() ? Json(nullptr) : Json::parse(block, nullptr, false);
  if (block.empty() || parsed.is_discarded() || !parsed.is_object() ||
      !parsed.contains("question") || !parsed.contains("answer") ||
      !parsed["question"].is_string() || !parsed["answer"].is_string())
    throw GenerationUnparseable(reply.substr(0, 120));

  QAPair pair;
  pair.id = id;
  pair.question = trim(parsed["question"].get<std::string>());
  pair.answer = trim(parsed["answer"].get<std::string>());
  if (pair.question.empty()) throw EmptyField("question");
  if (pair.answer.empty()) throw EmptyField("answer");
  pair.query_image = ctx.query_image;
  pair.evidence = ctx.evidence;
  pair.level = ctx.level;
  pair.source_edges = ctx.source_edges;
  return pair;
}

namespace {

struct Probe {
  const char* reason;
  const char* question;
};

constexpr Probe kProbes[] = {
    {"VisuallyIrrelevant",
     "Is the question visually dependent on the query image, i.e. does answering it require "
     "looking at the image?"},
    {"SearchFree",
     "Does answering the question require external search beyond what the image alone shows?"},
    {"Unverifiable", "Is the stated answer verifiable from the evidence summaries provided?"},
};

}  // namespace

FilterOutcome filter_qa(const std::vector<QAPair>& pairs,
                        const std::vector<ModelClient*>& judges) {
  FilterOutcome out;
  std::set<std::string> seen_questions;

  for (const QAPair& pair : pairs) {
    const std::string key = normalize_text(pair.question);
    if (!seen_questions.insert(key).second) {
      out.rejected.push_back({pair, "Duplicate"});
      continue;
    }

    bool rejected = false;
    bool quarantined = false;
    for (ModelClient* judge : judges) {
      for (const Probe& probe : kProbes) {
        std::vector<ChatTurn> turns{
            {Role::System,
             "You are a strict data-quality judge for multimodal search questions. Answer "
             "strictly Yes or No.",
             std::nullopt},
            {Role::User,
             std::string("Question: ") + pair.question + "\nAnswer: " + pair.answer +
                 "\nProbe: " + probe.question + "\nReply strictly Yes or No.",
             std::nullopt},
        };
        std::string reply;
        try {
          reply = lower(trim(judge->complete(turns)));
        } catch (const Error& e) {
          out.quarantined.push_back({pair, std::string("JudgeUnavailable: ") + e.what()});
          quarantined = true;
          break;
        }
        if (reply == "yes") continue;
        if (reply == "no") {
          out.rejected.push_back({pair, probe.reason});
          rejected = true;
          break;
        }
        out.quarantined.push_back({pair, "JudgeUnparseable"});
        quarantined = true;
        break;
      }
      if (rejected || quarantined) break;
    }
    if (!rejected && !quarantined) out.kept.push_back(pair);
  }
  return out;
}

}  // namespace searchforge::hypergraph
