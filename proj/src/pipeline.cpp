#include "searchforge/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "searchforge/prompts.hpp"
#include "searchforge/stubs.hpp"
#include "searchforge/util.hpp"

namespace searchforge::pipeline {

namespace fs = std::filesystem;
using hypergraph::Hypergraph;
using hypergraph::QAPair;
using treesearch::SftRecord;

std::vector<toolserver::DocInput> load_docs(const fs::path& path) {
  std::vector<toolserver::DocInput> docs;
  for (const Json& row : read_jsonl(path)) {
    toolserver::DocInput doc;
    doc.title = require_string(row, "title");
    doc.body = require_string(row, "body");
    if (row.contains("url") && row["url"].is_string()) doc.url = row["url"].get<std::string>();
    docs.push_back(std::move(doc));
  }
  return docs;
}

std::vector<toolserver::ImageEntry> load_images(const fs::path& path) {
  std::vector<toolserver::ImageEntry> entries;
  for (const Json& row : read_jsonl(path)) {
    toolserver::ImageEntry e;
    e.uri = require_string(row, "uri");
    if (row.contains("image_id") && row["image_id"].is_string())
      e.image_id = row["image_id"].get<std::string>();
    if (row.contains("caption") && row["caption"].is_string())
      e.caption = row["caption"].get<std::string>();
    entries.push_back(std::move(e));
  }
  return entries;
}

std::vector<SeedEntry> load_seeds(const fs::path& path) {
  std::vector<SeedEntry> seeds;
  for (const Json& row : read_jsonl(path)) {
    seeds.push_back({require_string(row, "image_path"), require_string(row, "category")});
  }
  return seeds;
}

namespace {

constexpr const char* kFixtureWords[] = {
    "harbor",   "granite", "estuary",  "foundry",  "meridian", "obelisk", "pavilion", "quarry",
    "terrace",  "viaduct", "causeway", "keystone", "lattice",  "monolith", "outpost", "rampart",
    "trestle",  "zenith",  "bastion",  "cistern",  "esplanade", "gantry",  "headland", "mooring",
};
constexpr std::size_t kFixtureWordCount = sizeof(kFixtureWords) / sizeof(kFixtureWords[0]);

std::string fixture_sentence(Rng& rng, std::size_t words) {
  std::vector<std::string> parts;
  for (std::size_t i = 0; i < words; ++i)
    parts.push_back(kFixtureWords[rng.below(kFixtureWordCount)]);
  return join(parts, " ");
}

}  // namespace

void write_fixture_corpus(const fs::path& path, std::uint64_t seed, int doc_count) {
  Rng rng = Rng(seed).fork("fixture-corpus");
  // Includes one 1200-word doc (3 passages), one exactly at the 512-word
  // boundary, and one just past it.
  const std::size_t special[] = {1200, 512, 513};
  std::vector<Json> rows;
  for (int i = 0; i < doc_count; ++i) {
    const std::size_t n = i < 3 ? special[i] : 60 + rng.below(340);
    Json row;
    row["title"] = "The " + std::string(kFixtureWords[rng.below(kFixtureWordCount)]) + " " +
                   std::string(kFixtureWords[rng.below(kFixtureWordCount)]) + " survey " +
                   std::to_string(i);
    row["body"] = fixture_sentence(rng, n);
    row["url"] = "http://fixtures.local/doc" + std::to_string(i);
    rows.push_back(std::move(row));
  }
  write_jsonl(path, rows);
}

void write_fixture_images(const fs::path& path, std::uint64_t seed, int image_count) {
  Rng rng = Rng(seed).fork("fixture-images");
  std::vector<Json> rows;
  for (int i = 0; i < image_count; ++i) {
    const std::string w1 = kFixtureWords[rng.below(kFixtureWordCount)];
    const std::string w2 = kFixtureWords[rng.below(kFixtureWordCount)];
    Json row;
    row["image_id"] = "fx" + std::to_string(i);
    row["uri"] = "img://corpus/" + w1 + "_" + w2 + "/" + to_hex(rng.next(), 8);
    row["caption"] = "A study of the " + w1 + " " + w2;
    rows.push_back(std::move(row));
  }
  write_jsonl(path, rows);
}

void write_fixture_seeds(const fs::path& path, std::uint64_t seed) {
  Rng rng = Rng(seed).fork("fixture-seeds");
  const char* categories[] = {"arts", "sports", "education", "history",
                              "movies", "places", "technology"};
  std::vector<Json> rows;
  for (int i = 0; i < 2; ++i) {
    const std::string category = categories[rng.below(7)];
    Json row;
    row["image_path"] = "img://seed/" + category + "/" + to_hex(rng.next(), 6);
    row["category"] = category;
    rows.push_back(std::move(row));
  }
  write_jsonl(path, rows);
}

RlExport export_rl(const std::vector<QAPair>& pairs, const std::vector<Hypergraph>& graphs) {
  RlExport out;
  for (const QAPair& pair : pairs) {
    if (trim(pair.answer).empty()) {
      out.rejects.push_back(pair.id + ": MissingGoldenAnswer");
      continue;
    }
    std::string image_ref;
    for (const Hypergraph& g : graphs) {
      if (g.has_node(pair.query_image)) {
        image_ref = g.node(pair.query_image).payload;
        break;
      }
    }
    if (image_ref.empty()) {
      out.rejects.push_back(pair.id + ": UnresolvableQueryImage");
      continue;
    }
    Json row;
    row["id"] = pair.id;
    row["question"] = pair.question;
    row["image_ref"] = image_ref;
    row["golden"] = pair.answer;
    row["candidates"] = Json::array();
    out.records.push_back(std::move(row));
  }
  return out;
}

namespace {

std::vector<Json> spans_to_json(const std::vector<reward::Span>& spans) {
  std::vector<Json> out;
  for (const auto& s : spans) out.push_back(Json::array({s.begin, s.end}));
  return out;
}

std::vector<reward::Span> token_offsets_for(const std::string& text, Rng& rng) {
  std::vector<reward::Span> offsets;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t len = std::min<std::size_t>(1 + rng.below(4), text.size() - pos);
    offsets.push_back({pos, pos + len});
    pos += len;
  }
  return offsets;
}

std::vector<double> logprob_row(std::size_t n, Rng& rng) {
  std::vector<double> v;
  v.reserve(n);
  for (std::size_t i = 0; i < n; ++i) v.push_back(-(0.1 + 2.4 * rng.unit()));
  return v;
}

// Mutations that break the grammar or the tool-call schema on purpose.
std::string mutate_wrong_answer(const std::vector<protocol::Segment>& segs) {
  auto copy = segs;
  copy.back().body = "wrong-" + to_hex(fnv1a64(copy.back().body), 6);
  return protocol::render_segments(copy, true).text;
}

std::string mutate_drop_answer(const std::vector<protocol::Segment>& segs) {
  std::vector<protocol::Segment> copy(segs.begin(), segs.end() - 1);
  return protocol::render_segments(copy, false).text;
}

std::string mutate_break_format(const std::vector<protocol::Segment>& segs,
                                const std::string& rendered) {
  for (std::size_t i = 0; i < segs.size(); ++i) {
    if (segs[i].kind == protocol::SegmentKind::ToolCall) {
      auto copy = segs;
      copy[i].body = "{not-a-tool-call";
      return protocol::render_segments(copy, true).text;
    }
  }
  return rendered + "\nloose trailing text";
}

}  // namespace

std::vector<Json> synthesize_rollouts(const std::vector<SftRecord>& records, int group_size,
                                      Rng rng) {
  std::vector<Json> rows;
  for (const SftRecord& rec : records) {
    const auto parsed = protocol::parse_trajectory(rec.raw_text);
    const auto& segs = parsed.segments;

    std::vector<std::string> variants;
    variants.push_back(rec.raw_text);
    variants.push_back(mutate_wrong_answer(segs));
    variants.push_back(mutate_drop_answer(segs));
    variants.push_back(mutate_break_format(segs, rec.raw_text));
    while (static_cast<int>(variants.size()) < group_size) variants.push_back(rec.raw_text);
    variants.resize(static_cast<std::size_t>(group_size));

    for (std::size_t v = 0; v < variants.size(); ++v) {
      Rng row_rng = rng.fork(rec.id + "#" + std::to_string(v));
      const std::string& text = variants[v];
      const auto offsets = token_offsets_for(text, row_rng);

      Json row;
      row["question_id"] = rec.id;
      row["question"] = rec.question;
      row["golden"] = [&] {
        const auto p = protocol::parse_trajectory(rec.raw_text);
        return p.segments.back().body;
      }();
      row["raw_text"] = text;
      row["token_offsets"] = spans_to_json(offsets);
      Json lp;
      lp["theta"] = logprob_row(offsets.size(), row_rng);
      lp["old"] = logprob_row(offsets.size(), row_rng);
      lp["ref"] = logprob_row(offsets.size(), row_rng);
      row["token_logprobs"] = std::move(lp);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

namespace {

std::vector<reward::Span> spans_from_json(const Json& arr) {
  std::vector<reward::Span> out;
  for (const auto& pair : arr)
    out.push_back({pair.at(0).get<std::size_t>(), pair.at(1).get<std::size_t>()});
  return out;
}

// tool_response extents located by direct string scan, independent of the
// parser.
std::vector<reward::Span> scan_tool_response_extents(const std::string& text) {
  std::vector<reward::Span> out;
  const std::string open = "<tool_response>";
  const std::string close = "</tool_response>";
  std::size_t pos = 0;
  while ((pos = text.find(open, pos)) != std::string::npos) {
    const std::size_t end = text.find(close, pos);
    if (end == std::string::npos) break;
    out.push_back({pos, end + close.size()});
    pos = end + close.size();
  }
  return out;
}

std::vector<reward::Span> complement_spans(const std::vector<reward::Span>& masked,
                                           std::size_t len) {
  std::vector<reward::Span> out;
  std::size_t cursor = 0;
  for (const auto& m : masked) {
    if (m.begin > cursor) out.push_back({cursor, m.begin});
    cursor = m.end;
  }
  if (cursor < len) out.push_back({cursor, len});
  return out;
}

}  // namespace

std::vector<Json> score_rollouts(const std::vector<Json>& rows, const reward::RewardConfig& cfg,
                                 modelclient::ModelClient& judge) {
  std::vector<Json> out;
  std::size_t i = 0;
  while (i < rows.size()) {
    const std::string qid = require_string(rows[i], "question_id");
    std::size_t j = i;
    while (j < rows.size() && require_string(rows[j], "question_id") == qid) ++j;

    reward::RolloutGroup group;
    group.question_id = qid;
    for (std::size_t r = i; r < j; ++r) {
      const Json& row = rows[r];
      reward::ScoredRollout rollout;
      rollout.raw_text = require_string(row, "raw_text");
      rollout.r_format = reward::format_reward(rollout.raw_text);

      const auto parsed = protocol::parse_trajectory(rollout.raw_text);
      std::optional<std::string> answer;
      if (!parsed.segments.empty() &&
          parsed.segments.back().kind == protocol::SegmentKind::Answer)
        answer = parsed.segments.back().body;
      rollout.r_acc = reward::accuracy_reward(require_string(row, "question"),
                                              require_string(row, "golden"), {}, answer, judge);
      rollout.reward = reward::combined_reward(rollout.r_acc, rollout.r_format, cfg);

      const Json& lp = require_field(row, "token_logprobs");
      rollout.logprobs.theta = lp.at("theta").get<std::vector<double>>();
      rollout.logprobs.old_policy = lp.at("old").get<std::vector<double>>();
      rollout.logprobs.ref = lp.at("ref").get<std::vector<double>>();

      const auto offsets = spans_from_json(require_field(row, "token_offsets"));
      const auto masked = scan_tool_response_extents(rollout.raw_text);
      const auto supervised = complement_spans(masked, rollout.raw_text.size());
      const auto mask = reward::build_sft_mask(supervised, masked, offsets,
                                               rollout.raw_text.size());
      rollout.token_mask.assign(mask.begin(), mask.end());
      group.rollouts.push_back(std::move(rollout));
    }

    const reward::GrpoResult result = reward::grpo_objective(group, cfg);

    Json row;
    row["question_id"] = qid;
    Json rewards = Json::array();
    Json formats = Json::array();
    Json accs = Json::array();
    for (const auto& r : group.rollouts) {
      rewards.push_back(r.reward);
      formats.push_back(r.r_format);
      accs.push_back(r.r_acc);
    }
    row["rewards"] = std::move(rewards);
    row["format_rewards"] = std::move(formats);
    row["accuracy_rewards"] = std::move(accs);
    row["advantages"] = result.advantages;
    row["objective"] = result.objective;
    Json terms = Json::array();
    for (const auto& t : result.terms)
      terms.push_back(Json{{"ratio", t.ratio}, {"kl", t.kl}, {"value", t.value}});
    row["objective_terms"] = std::move(terms);
    out.push_back(std::move(row));
    i = j;
  }
  return out;
}

bool SmokeReport::ok() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

std::string SmokeReport::first_failure() const {
  for (const CheckResult& c : checks)
    if (!c.passed) return c.name;
  return "";
}

Json SmokeReport::to_json(std::uint64_t seed) const {
  Json j;
  j["seed"] = seed;
  int passed = 0;
  Json rows = Json::array();
  for (const CheckResult& c : checks) {
    rows.push_back(Json{{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
    if (c.passed) ++passed;
  }
  j["passed"] = passed;
  j["failed"] = static_cast<int>(checks.size()) - passed;
  j["checks"] = std::move(rows);
  return j;
}

namespace {

class Checker {
 public:
  explicit Checker(SmokeReport& report) : report_(report) {}

  void check(const std::string& name, bool passed, const std::string& detail = "") {
    report_.checks.push_back({name, passed, passed ? detail : (detail.empty() ? "failed" : detail)});
  }

  template <typename Fn>
  void run(const std::string& name, Fn&& fn) {
    try {
      fn(*this);
    } catch (const std::exception& e) {
      report_.checks.push_back({name, false, std::string("exception: ") + e.what()});
    }
  }

 private:
  SmokeReport& report_;
};

// Brute-force ranking independent of the index search path.
std::vector<std::string> brute_force_text_ids(const toolserver::SearchIndex& index,
                                              const std::vector<float>& qv, int top_k) {
  struct Row {
    double score;
    std::string id;
  };
  std::vector<Row> rows;
  for (std::size_t i = 0; i < index.passage_vectors().size(); ++i) {
    double s = 0.0;
    for (std::size_t d = 0; d < qv.size(); ++d)
      s += static_cast<double>(index.passage_vectors()[i][d]) * static_cast<double>(qv[d]);
    rows.push_back({s, index.passages()[i].passage_id});
  }
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  });
  std::vector<std::string> ids;
  for (int i = 0; i < top_k && i < static_cast<int>(rows.size()); ++i) ids.push_back(rows[i].id);
  return ids;
}

}  // namespace

SmokeReport run_pipeline_smoke(const SmokeOptions& options) {
  SmokeReport report;
  Checker checker(report);
  const std::uint64_t seed = options.seed;
  const fs::path out = options.out_dir;
  fs::create_directories(out);

  // -- fixtures -------------------------------------------------------------
  write_fixture_corpus(out / "fixtures" / "docs.jsonl", seed, 8);
  write_fixture_images(out / "fixtures" / "images.jsonl", seed, 12);
  write_fixture_seeds(out / "fixtures" / "seeds.jsonl", seed);

  // -- ingest ---------------------------------------------------------------
  modelclient::HashEmbedder embedder(64);
  toolserver::SearchIndex index;
  const auto docs = load_docs(out / "fixtures" / "docs.jsonl");
  const auto stats = toolserver::ingest_text(index, docs, embedder);
  toolserver::ingest_images(index, load_images(out / "fixtures" / "images.jsonl"), embedder);
  toolserver::save_index(index, out / "index");
  index = toolserver::load_index(out / "index");

  checker.check("ingest-chunking",
                stats.passage_count >= docs.size() + 2,
                std::to_string(stats.doc_count) + " docs, " +
                    std::to_string(stats.passage_count) + " passages");

  checker.run("embedding-unit-norm", [&](Checker& c) {
    bool ok = true;
    for (const auto& v : index.passage_vectors())
      ok = ok && std::fabs(modelclient::l2_norm(v) - 1.0) < 1e-6;
    for (const auto& v : index.image_vectors())
      ok = ok && std::fabs(modelclient::l2_norm(v) - 1.0) < 1e-6;
    c.check("embedding-unit-norm", ok,
            std::to_string(index.passage_vectors().size() + index.image_vectors().size()) +
                " vectors");
  });

  // -- hypergraph build -----------------------------------------------------
  const hypergraph::GraphConfig graph_cfg{2, 2};  // K=2, D=2 at desk scale
  stubs::StubSearchProvider provider(seed);
  auto extractor = stubs::offline_extractor();
  auto annotator = stubs::offline_annotator(seed);
  std::vector<Hypergraph> graphs;
  hypergraph::BuildReport build_report;
  for (const SeedEntry& s : load_seeds(out / "fixtures" / "seeds.jsonl")) {
    graphs.push_back(hypergraph::build_hypergraph(
        s.image_path, graph_cfg, {provider, *extractor, *annotator}, &build_report));
  }

  if (options.inject_fault == "edge-cardinality" && !graphs.empty() &&
      !graphs.front().edges().empty()) {
    // Deliberate corruption for fault-path testing.
    const_cast<hypergraph::Hyperedge&>(graphs.front().edges().front()).members.pop_back();
  }

  Json graphs_json = Json::array();
  for (const Hypergraph& g : graphs) graphs_json.push_back(g.to_json());
  Json graph_doc;
  graph_doc["provenance"] = Json{{"seed", seed},
                                 {"fanout", graph_cfg.fanout},
                                 {"max_depth", graph_cfg.max_depth},
                                 {"backends", "offline-stubs"}};
  graph_doc["graphs"] = graphs_json;
  write_text_file(out / "hypergraph.json", graph_doc.dump(2) + "\n");

  checker.run("edge-cardinality", [&](Checker& c) {
    bool ok = true;
    std::string detail;
    for (const Hypergraph& g : graphs) {
      const std::size_t expect = 2 * static_cast<std::size_t>(g.config.fanout) + 1;
      for (const auto& e : g.edges()) {
        if (!e.partial && e.reused.empty() && e.members.size() != expect) {
          ok = false;
          detail = e.id + " has " + std::to_string(e.members.size()) + " members, expected " +
                   std::to_string(expect);
        }
      }
    }
    c.check("edge-cardinality", ok, detail);
  });

  checker.run("depth-monotonicity", [&](Checker& c) {
    bool ok = true;
    for (const Hypergraph& g : graphs) {
      for (const auto& e : g.edges()) {
        const int parent_depth = g.node(e.parent_node).depth;
        for (const auto& id : e.members) {
          if (id == e.parent_node) continue;
          if (std::find(e.reused.begin(), e.reused.end(), id) != e.reused.end()) continue;
          ok = ok && g.node(id).depth == parent_depth + 1;
        }
      }
    }
    c.check("depth-monotonicity", ok);
  });

  checker.run("single-expansion-per-parent", [&](Checker& c) {
    bool ok = true;
    for (const Hypergraph& g : graphs) {
      std::set<std::string> parents;
      for (const auto& e : g.edges()) ok = ok && parents.insert(e.parent_node).second;
    }
    c.check("single-expansion-per-parent", ok);
  });

  checker.run("annotation-nonempty", [&](Checker& c) {
    bool ok = true;
    for (const Hypergraph& g : graphs)
      for (const auto& n : g.nodes()) ok = ok && !n.annotation.empty();
    c.check("annotation-nonempty", ok);
  });

  checker.run("parent-depth-acyclic", [&](Checker& c) {
    bool ok = true;
    for (const Hypergraph& g : graphs)
      for (const auto& n : g.nodes())
        if (n.parent) ok = ok && n.depth == g.node(*n.parent).depth + 1;
    c.check("parent-depth-acyclic", ok);
  });

  checker.run("graph-counting-oracle", [&](Checker& c) {
    // Full stub providers, no dedup: depth-d frontier is (2K)^d.
    bool ok = options.inject_fault.empty() ? true : graphs.size() == 2;
    std::string detail;
    std::size_t expected_nodes = 0;
    std::size_t expected_edges = 0;
    std::size_t level = 1;
    for (int d = 0; d <= graph_cfg.max_depth; ++d) {
      expected_nodes += level;
      if (d < graph_cfg.max_depth) expected_edges += level;
      level *= 2 * static_cast<std::size_t>(graph_cfg.fanout);
    }
    for (const Hypergraph& g : graphs) {
      if (g.nodes().size() != expected_nodes || g.edges().size() != expected_edges) {
        ok = false;
        detail = "got " + std::to_string(g.nodes().size()) + " nodes / " +
                 std::to_string(g.edges().size()) + " edges, expected " +
                 std::to_string(expected_nodes) + " / " + std::to_string(expected_edges);
      }
    }
    c.check("graph-counting-oracle", ok, detail);
  });

  checker.run("graph-serialization-roundtrip", [&](Checker& c) {
    bool ok = true;
    for (const Hypergraph& g : graphs) {
      const Json a = g.to_json();
      const Json b = Hypergraph::from_json(a).to_json();
      ok = ok && a.dump() == b.dump();
    }
    c.check("graph-serialization-roundtrip", ok);
  });

  checker.check("build-branch-failures", build_report.branch_failures.empty(),
                std::to_string(build_report.branch_failures.size()) + " failures");

  // -- QA generation --------------------------------------------------------
  auto generator = stubs::offline_qa_generator(seed);
  std::vector<QAPair> raw_pairs;
  Rng qa_rng = Rng(seed).fork("qa-select");
  for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
    for (int k = 0; k < 3; ++k) {
      const auto ctx = hypergraph::select_qa_context(graphs[gi], hypergraph::QALevel::Intra, 0, qa_rng);
      raw_pairs.push_back(hypergraph::generate_qa(
          graphs[gi], ctx, *generator, "qa-g" + std::to_string(gi) + "-intra-" + std::to_string(k)));
    }
    for (int k = 0; k < 2; ++k) {
      const auto ctx = hypergraph::select_qa_context(graphs[gi], hypergraph::QALevel::Inter, 2, qa_rng);
      raw_pairs.push_back(hypergraph::generate_qa(
          graphs[gi], ctx, *generator, "qa-g" + std::to_string(gi) + "-inter-" + std::to_string(k)));
    }
  }
  // seeded duplicate exercises the dedup filter
  QAPair duplicate = raw_pairs.front();
  duplicate.id = "qa-dup-0";
  raw_pairs.push_back(duplicate);

  std::vector<Json> raw_rows;
  for (const QAPair& p : raw_pairs) raw_rows.push_back(p.to_json());
  write_jsonl(out / "qa_raw.jsonl", raw_rows);

  checker.run("qa-groundedness", [&](Checker& c) {
    bool ok = true;
    for (const QAPair& p : raw_pairs) {
      std::set<std::string> allowed;
      for (const Hypergraph& g : graphs) {
        for (const auto& e : g.edges()) {
          if (std::find(p.source_edges.begin(), p.source_edges.end(), e.id) ==
              p.source_edges.end())
            continue;
          if (!g.has_node(p.query_image)) continue;
          for (const auto& id : e.members) allowed.insert(id);
        }
      }
      allowed.erase(p.query_image);
      ok = ok && !p.evidence.empty();
      for (const auto& id : p.evidence) ok = ok && allowed.count(id) > 0;
    }
    c.check("qa-groundedness", ok);
  });

  checker.run("qa-level-separation", [&](Checker& c) {
    bool ok = true;
    for (const QAPair& p : raw_pairs) {
      if (p.level == hypergraph::QALevel::Intra) ok = ok && p.source_edges.size() == 1;
      if (p.level == hypergraph::QALevel::Inter) ok = ok && p.source_edges.size() >= 2;
    }
    c.check("qa-level-separation", ok);
  });

  checker.run("qa-query-image-modality", [&](Checker& c) {
    bool ok = true;
    for (const QAPair& p : raw_pairs)
      for (const Hypergraph& g : graphs)
        if (g.has_node(p.query_image))
          ok = ok && g.node(p.query_image).modality == hypergraph::Modality::Image;
    c.check("qa-query-image-modality", ok);
  });

  checker.run("qa-answer-form", [&](Checker& c) {
    bool ok = true;
    for (const QAPair& p : raw_pairs) ok = ok && !p.answer.empty() && p.answer.back() != '.';
    c.check("qa-answer-form", ok);
  });

  // -- filtering ------------------------------------------------------------
  auto judge_a = stubs::offline_filter_judge(seed, 17);
  auto judge_b = stubs::offline_filter_judge(seed ^ 0x5bd1e995u, 23);
  const auto filtered = hypergraph::filter_qa(raw_pairs, {judge_a.get(), judge_b.get()});

  std::vector<Json> kept_rows;
  for (const QAPair& p : filtered.kept) kept_rows.push_back(p.to_json());
  write_jsonl(out / "qa_filtered.jsonl", kept_rows);
  std::vector<Json> rejected_rows;
  for (const auto& r : filtered.rejected) {
    Json row = r.pair.to_json();
    row["reason"] = r.reason;
    rejected_rows.push_back(std::move(row));
  }
  write_jsonl(out / "qa_rejected.jsonl", rejected_rows);

  checker.check("filter-accounting",
                filtered.kept.size() + filtered.rejected.size() + filtered.quarantined.size() ==
                    raw_pairs.size(),
                std::to_string(filtered.kept.size()) + " kept, " +
                    std::to_string(filtered.rejected.size()) + " rejected");
  checker.run("filter-dedup", [&](Checker& c) {
    const bool dup_rejected =
        std::any_of(filtered.rejected.begin(), filtered.rejected.end(),
                    [](const auto& r) { return r.pair.id == "qa-dup-0" && r.reason == "Duplicate"; });
    c.check("filter-dedup", dup_rejected);
  });
  checker.check("filter-kept-nonempty", !filtered.kept.empty(),
                std::to_string(filtered.kept.size()) + " pairs");

  // -- RL export ------------------------------------------------------------
  const RlExport rl = export_rl(filtered.kept, graphs);
  write_jsonl(out / "rl.jsonl", rl.records);
  checker.check("rl-export-complete", rl.records.size() == filtered.kept.size() &&
                                          rl.rejects.empty(),
                std::to_string(rl.records.size()) + " records");

  // -- retrieval checks over the live index ----------------------------------
  const toolserver::RetrievalConfig train_cfg =
      toolserver::RetrievalConfig::for_mode(toolserver::Mode::Train);

  checker.run("retrieval-oracle-sample", [&](Checker& c) {
    Rng r = Rng(seed).fork("retrieval-queries");
    bool ok = true;
    for (int q = 0; q < 20; ++q) {
      const std::string query = std::string(kFixtureWords[r.below(kFixtureWordCount)]) + " " +
                                std::string(kFixtureWords[r.below(kFixtureWordCount)]);
      const auto result = toolserver::search_text(index, {query}, train_cfg, embedder);
      const auto qv = modelclient::embed(embedder, {query}).front();
      const auto expect = brute_force_text_ids(index, qv, train_cfg.text_top_k);
      std::vector<std::string> got;
      for (const auto& h : result.per_query.front().hits) got.push_back(h.id);
      ok = ok && got == expect;
    }
    c.check("retrieval-oracle-sample", ok, "20 queries vs brute force");
  });

  checker.run("threshold-monotonicity", [&](Checker& c) {
    Rng r = Rng(seed).fork("threshold-queries");
    bool ok = true;
    for (int q = 0; q < 5; ++q) {
      const std::string query = std::string(kFixtureWords[r.below(kFixtureWordCount)]);
      toolserver::RetrievalConfig lo = train_cfg;
      lo.image_sim_threshold = 0.0;
      lo.image_top_k = 1000;
      toolserver::RetrievalConfig hi = lo;
      hi.image_sim_threshold = 0.3;
      const auto low_hits =
          toolserver::search_image_by_text(index, {query}, lo, embedder).per_query.front().hits;
      const auto high_hits =
          toolserver::search_image_by_text(index, {query}, hi, embedder).per_query.front().hits;
      std::set<std::string> low_ids;
      for (const auto& h : low_hits) low_ids.insert(h.id);
      ok = ok && high_hits.size() <= low_hits.size();
      for (const auto& h : high_hits) ok = ok && low_ids.count(h.id) > 0;
    }
    c.check("threshold-monotonicity", ok);
  });

  checker.run("retrieval-determinism", [&](Checker& c) {
    const std::string query = "granite harbor";
    const auto a = toolserver::search_text(index, {query}, train_cfg, embedder).to_json().dump();
    const auto b = toolserver::search_text(index, {query}, train_cfg, embedder).to_json().dump();
    c.check("retrieval-determinism", a == b);
  });

  // -- tree search ----------------------------------------------------------
  auto knowledge = stubs::offline_knowledge_expert(seed);
  const toolserver::ToolService service(index, train_cfg, embedder, knowledge.get());
  toolserver::LocalToolClient tools(service);
  auto rule_judge = stubs::offline_rule_judge();
  treesearch::SearchConfig search_cfg;

  std::vector<treesearch::VerifiedTrajectory> trajectories;
  std::vector<treesearch::SearchTree> trees;
  std::vector<Json> traj_rows;
  Json stats_json = Json::array();
  std::size_t solved = 0;
  for (const Json& row : rl.records) {
    const std::string golden = require_string(row, "golden");
    auto expert_call = stubs::offline_expert("text_search", golden,
                                             stubs::ExpertBehavior::CallThenAnswer);
    auto expert_wrong = stubs::offline_expert("image_search_by_text_query", golden,
                                              stubs::ExpertBehavior::AnswerWrong);
    treesearch::ExpertPool pool;
    pool.experts.push_back({"text_search", expert_call.get()});
    pool.experts.push_back({"image_search_by_text_query", expert_wrong.get()});

    protocol::MultimodalQuery question{require_string(row, "question"),
                                       require_string(row, "image_ref")};
    treesearch::SearchStats stats;
    treesearch::SearchTree tree;
    auto found = treesearch::run_tree_search(question, golden, {}, pool, tools, *rule_judge,
                                             search_cfg, &stats, &tree);
    Json st;
    st["id"] = require_string(row, "id");
    st["expanded"] = stats.expanded;
    st["judged"] = stats.judged;
    st["pruned"] = stats.pruned;
    st["solved"] = found.has_value();
    stats_json.push_back(std::move(st));
    trees.push_back(std::move(tree));
    if (found) {
      ++solved;
      traj_rows.push_back(
          treesearch::trajectory_export_row(require_string(row, "id"), *found));
      trajectories.push_back(std::move(*found));
    }
  }
  write_jsonl(out / "traj.jsonl", traj_rows);
  write_text_file(out / "stats.json", Json{{"per_question", stats_json}}.dump(2) + "\n");

  checker.check("tree-search-solved-all", solved == rl.records.size(),
                std::to_string(solved) + "/" + std::to_string(rl.records.size()));

  checker.run("single-terminal-correct", [&](Checker& c) {
    bool ok = true;
    for (const auto& tree : trees) {
      int correct = 0;
      for (const auto& n : tree.nodes)
        if (n.status == treesearch::NodeStatus::TerminalCorrect) ++correct;
      ok = ok && correct <= 1;
    }
    c.check("single-terminal-correct", ok);
  });

  checker.run("prune-soundness", [&](Checker& c) {
    bool ok = true;
    for (const auto& tree : trees)
      for (const auto& n : tree.nodes)
        if (n.parent >= 0) {
          const auto parent_status = tree.node(n.parent).status;
          ok = ok && parent_status != treesearch::NodeStatus::TerminalIncorrect &&
               parent_status != treesearch::NodeStatus::Pruned;
        }
    c.check("prune-soundness", ok);
  });

  checker.run("depth-bound", [&](Checker& c) {
    bool ok = true;
    for (const auto& tree : trees)
      for (const auto& n : tree.nodes) ok = ok && n.depth <= search_cfg.max_depth;
    for (const auto& vt : trajectories)
      ok = ok && vt.trajectory.tool_call_count() <= search_cfg.max_depth;
    c.check("depth-bound", ok);
  });

  checker.run("extraction-faithfulness", [&](Checker& c) {
    bool ok = true;
    for (std::size_t t = 0; t < trees.size(); ++t) {
      const auto& tree = trees[t];
      for (const auto& n : tree.nodes) {
        if (n.status != treesearch::NodeStatus::TerminalCorrect) continue;
        const auto segs = treesearch::collect_path_segments(tree, n.id);
        bool found_match = false;
        for (const auto& vt : trajectories) found_match = found_match || vt.trajectory.steps == segs;
        ok = ok && found_match;
      }
    }
    c.check("extraction-faithfulness", ok);
  });

  // -- SFT export -----------------------------------------------------------
  const auto sft = treesearch::extract_sft_dataset(trajectories);
  std::vector<Json> sft_rows;
  for (const auto& rec : sft) sft_rows.push_back(rec.to_json());
  write_jsonl(out / "sft.jsonl", sft_rows);

  checker.run("trajectory-grammar-valid", [&](Checker& c) {
    bool ok = !sft.empty();
    for (const auto& rec : sft)
      ok = ok && protocol::parse_trajectory(rec.raw_text).verdict == protocol::Verdict::Valid;
    c.check("trajectory-grammar-valid", ok);
  });

  checker.run("trajectory-roundtrip", [&](Checker& c) {
    bool ok = true;
    for (const auto& rec : sft) {
      const auto parsed = protocol::parse_trajectory(rec.raw_text);
      ok = ok && protocol::render_segments(parsed.segments, true).text == rec.raw_text;
    }
    c.check("trajectory-roundtrip", ok);
  });

  checker.run("tool-call-cap", [&](Checker& c) {
    bool ok = true;
    for (const auto& rec : sft) ok = ok && rec.tool_call_count <= protocol::kDefaultMaxToolCalls;
    c.check("tool-call-cap", ok);
  });

  checker.run("sft-mask-extents", [&](Checker& c) {
    bool ok = true;
    for (const auto& rec : sft) {
      const auto expect = scan_tool_response_extents(rec.raw_text);
      ok = ok && rec.masked_spans.size() == expect.size();
      for (std::size_t i = 0; i < expect.size() && ok; ++i)
        ok = rec.masked_spans[i].begin == expect[i].begin &&
             rec.masked_spans[i].end == expect[i].end;
    }
    c.check("sft-mask-extents", ok);
  });

  checker.run("sft-span-tiling", [&](Checker& c) {
    bool ok = true;
    for (const auto& rec : sft) {
      std::vector<std::pair<std::size_t, std::size_t>> all;
      for (const auto& s : rec.supervised_spans) all.emplace_back(s.begin, s.end);
      for (const auto& s : rec.masked_spans) all.emplace_back(s.begin, s.end);
      std::sort(all.begin(), all.end());
      std::size_t cursor = 0;
      for (const auto& [b, e] : all) {
        ok = ok && b == cursor && e > b;
        cursor = e;
      }
      ok = ok && cursor == rec.raw_text.size();
    }
    c.check("sft-span-tiling", ok);
  });

  // -- rollout scoring --------------------------------------------------------
  const reward::RewardConfig reward_cfg;
  const auto rollout_rows = synthesize_rollouts(sft, 5, Rng(seed).fork("rollouts"));
  write_jsonl(out / "rollouts.jsonl", rollout_rows);
  const auto score_rows = score_rollouts(rollout_rows, reward_cfg, *rule_judge);
  write_jsonl(out / "scores.jsonl", score_rows);

  checker.run("advantage-zero-sum", [&](Checker& c) {
    bool ok = !score_rows.empty();
    for (const auto& row : score_rows) {
      double sum = 0.0;
      for (const auto& a : row.at("advantages")) sum += a.get<double>();
      ok = ok && std::fabs(sum) <= 1e-9;
    }
    c.check("advantage-zero-sum", ok);
  });

  checker.run("reward-bounds", [&](Checker& c) {
    bool ok = true;
    for (const auto& row : score_rows)
      for (const auto& r : row.at("rewards")) {
        const double v = r.get<double>();
        ok = ok && v >= 0.0 && v <= 1.0;
      }
    c.check("reward-bounds", ok);
  });

  checker.run("format-reward-discrimination", [&](Checker& c) {
    // Variant layout per group: intact, wrong answer, dropped answer,
    // broken call; the grammar mutants must score 0 and the intact rows 1.
    bool ok = true;
    for (const auto& row : score_rows) {
      const auto& fmts = row.at("format_rewards");
      ok = ok && fmts.at(0).get<int>() == 1 && fmts.at(2).get<int>() == 0 &&
           fmts.at(3).get<int>() == 0;
    }
    c.check("format-reward-discrimination", ok);
  });

  checker.run("accuracy-reward-discrimination", [&](Checker& c) {
    bool ok = true;
    for (const auto& row : score_rows) {
      const auto& accs = row.at("accuracy_rewards");
      ok = ok && accs.at(0).get<int>() == 1 && accs.at(1).get<int>() == 0 &&
           accs.at(2).get<int>() == 0;
    }
    c.check("accuracy-reward-discrimination", ok);
  });

  checker.run("kl-nonnegative", [&](Checker& c) {
    bool ok = true;
    for (const auto& row : score_rows)
      for (const auto& t : row.at("objective_terms")) ok = ok && t.at("kl").get<double>() >= 0.0;
    c.check("kl-nonnegative", ok);
  });

  checker.run("identity-collapse", [&](Checker& c) {
    // Synthetic group where all three policies coincide.
    reward::RolloutGroup group;
    group.question_id = "identity";
    Rng r = Rng(seed).fork("identity");
    for (int i = 0; i < 5; ++i) {
      reward::ScoredRollout rollout;
      rollout.reward = r.unit();
      for (int t = 0; t < 24; ++t) {
        const double lp = -(0.1 + 2.0 * r.unit());
        rollout.logprobs.theta.push_back(lp);
        rollout.logprobs.old_policy.push_back(lp);
        rollout.logprobs.ref.push_back(lp);
      }
      group.rollouts.push_back(std::move(rollout));
    }
    const auto result = reward::grpo_objective(group, reward_cfg);
    c.check("identity-collapse", std::fabs(result.objective) <= 1e-9,
            "objective " + std::to_string(result.objective));
  });

  checker.run("export-schema", [&](Checker& c) {
    bool ok = true;
    for (const auto& row : read_jsonl(out / "rl.jsonl"))
      ok = ok && row.contains("id") && row.contains("question") && row.contains("image_ref") &&
           row.contains("golden") && row.contains("candidates");
    for (const auto& row : read_jsonl(out / "traj.jsonl"))
      ok = ok && row.contains("id") && row.contains("question_text") &&
           row.contains("image_ref") && row.contains("raw_text") &&
           row.contains("tool_call_count") && row.contains("answer");
    for (const auto& row : read_jsonl(out / "sft.jsonl"))
      ok = ok && row.contains("id") && row.contains("raw_text") &&
           row.contains("supervised_spans") && row.contains("masked_spans") &&
           row.contains("tool_call_count");
    for (const auto& row : read_jsonl(out / "scores.jsonl"))
      ok = ok && row.contains("question_id") && row.contains("rewards") &&
           row.contains("advantages") && row.contains("objective_terms");
    c.check("export-schema", ok);
  });

  write_text_file(out / "report.json", report.to_json(seed).dump(2) + "\n");
  return report;
}

}  // namespace searchforge::pipeline
