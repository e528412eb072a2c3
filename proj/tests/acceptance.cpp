// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. argv[1] must point at the searchforge CLI binary (used by the
// end-to-end smoke criterion).
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include "searchforge/hypergraph.hpp"
#include "searchforge/pipeline.hpp"
#include "searchforge/prompts.hpp"
#include "searchforge/reward.hpp"
#include "searchforge/stubs.hpp"
#include "searchforge/toolserver.hpp"
#include "searchforge/treesearch.hpp"

namespace fs = std::filesystem;
using namespace searchforge;
using Clock = std::chrono::steady_clock;

namespace {

struct Harness {
  int failures = 0;
  std::string cli_path;

  void run(const std::string& name, double budget_seconds,
           const std::function<void(std::ostringstream&)>& body) {
    std::ostringstream detail;
    const auto start = Clock::now();
    bool ok = true;
    try {
      body(detail);
    } catch (const std::exception& e) {
      ok = false;
      detail << " exception: " << e.what();
    }
    const double elapsed =
        std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start).count() /
        1000.0;
    if (budget_seconds > 0 && elapsed > budget_seconds) {
      ok = false;
      detail << " over time budget " << budget_seconds << "s";
    }
    std::cout << (ok ? "[PASS] " : "[FAIL] ") << name << " (" << elapsed << "s)"
              << (detail.str().empty() ? "" : " --" + detail.str()) << "\n";
    if (!ok) ++failures;
  }
};

#define REQUIRE_TRUE(cond, msg)                                      \
  do {                                                               \
    if (!(cond)) throw std::runtime_error(std::string("") + (msg)); \
  } while (0)

// ---------------------------------------------------------------------------
// criterion 1: grammar round-trip + mutant format rewards
// ---------------------------------------------------------------------------

protocol::Trajectory random_trajectory(Rng& rng) {
  using protocol::SegmentKind;
  const char* tools[] = {"image_search_by_text_query", "image_search_by_lens", "text_search",
                         "model_search"};
  protocol::Trajectory t;
  const int rounds = static_cast<int>(rng.below(5));
  for (int i = 0; i < rounds; ++i) {
    t.steps.push_back(protocol::make_segment(SegmentKind::Think,
                                             "hypothesis " + to_hex(rng.next(), 6)));
    t.steps.push_back(protocol::make_segment(
        SegmentKind::ToolCall, std::string("{\"name\":\"") + tools[rng.below(4)] +
                                   "\",\"arguments\":{\"query_list\":[\"q " +
                                   to_hex(rng.next(), 4) + "\"]}}"));
    t.steps.push_back(protocol::make_segment(
        SegmentKind::ToolResponse, "{\"hits\":[\"" + to_hex(rng.next(), 8) + "\"]}"));
  }
  t.steps.push_back(
      protocol::make_segment(SegmentKind::Think, "conclusion " + to_hex(rng.next(), 6)));
  t.steps.push_back(protocol::make_segment(SegmentKind::Answer, "answer " + to_hex(rng.next(), 4)));
  return t;
}

std::string mutate(const protocol::Trajectory& t, const std::string& raw, int which) {
  using protocol::SegmentKind;
  switch (which % 8) {
    case 0: {  // drop the final answer segment
      std::vector<protocol::Segment> steps(t.steps.begin(), t.steps.end() - 1);
      return protocol::render_fragment(steps);
    }
    case 1: {  // reorder: swap the last two segments
      std::vector<protocol::Segment> steps = t.steps;
      std::swap(steps[steps.size() - 1], steps[steps.size() - 2]);
      return protocol::render_fragment(steps);
    }
    case 2: {  // drop a closing tag
      std::string s = raw;
      return s.replace(s.find("</think>"), 8, "");
    }
    case 3: {  // unknown tag
      std::string s = raw;
      return s.replace(s.find("<answer>"), 8, "<asnwer>");
    }
    case 4: {  // nested tag inside the answer body
      std::string s = raw;
      return s.insert(s.find("</answer>"), "<think>");
    }
    case 5:  // trailing content after the answer
      return raw + "\n<think>tail</think>";
    case 6:  // truncate inside the final closing tag
      return raw.substr(0, raw.size() - 3);
    default: {  // unparsable tool call, or a dropped opening tag
      if (t.tool_call_count() > 0) {
        std::vector<protocol::Segment> steps = t.steps;
        for (auto& s : steps)
          if (s.kind == SegmentKind::ToolCall) {
            s.body = "{broken";
            s.parsed_call.reset();
            break;
          }
        return protocol::render_fragment(steps);
      }
      std::string s = raw;
      return s.replace(s.find("<think>"), 7, "");
    }
  }
}

void criterion_grammar(std::ostringstream& detail) {
  Rng rng(101);
  for (int i = 0; i < 1000; ++i) {
    const auto t = random_trajectory(rng);
    const std::string raw = protocol::render_trajectory(t);
    const auto parsed = protocol::parse_trajectory(raw);
    REQUIRE_TRUE(parsed.verdict == protocol::Verdict::Valid, "round-trip parse not Valid");
    REQUIRE_TRUE(parsed.segments == t.steps, "round-trip segments differ");
    REQUIRE_TRUE(protocol::render_segments(parsed.segments, true).text == raw,
                 "round-trip render not byte-identical");
  }
  int mutants = 0;
  for (int i = 0; i < 200; ++i) {
    const auto t = random_trajectory(rng);
    const std::string raw = protocol::render_trajectory(t);
    const std::string bad = mutate(t, raw, i);
    REQUIRE_TRUE(reward::format_reward(bad) == 0,
                 "mutant " + std::to_string(i) + " scored format 1: " + bad.substr(0, 80));
    ++mutants;
  }
  detail << " 1000 round-trips, " << mutants << " mutants at format 0";
}

// ---------------------------------------------------------------------------
// criterion 2: retrieval vs brute force on 5000 passages
// ---------------------------------------------------------------------------

void criterion_retrieval_oracle(std::ostringstream& detail) {
  const char* pool[] = {"harbor", "granite", "estuary", "foundry", "meridian", "obelisk",
                        "pavilion", "quarry", "terrace", "viaduct", "causeway", "keystone",
                        "lattice", "monolith", "outpost", "rampart", "trestle", "zenith",
                        "bastion", "cistern", "gantry", "headland", "mooring", "anchor"};
  const std::size_t pool_n = sizeof(pool) / sizeof(pool[0]);
  Rng rng(2202);

  modelclient::HashEmbedder embedder(64);
  toolserver::SearchIndex index;
  std::vector<toolserver::DocInput> docs;
  for (int i = 0; i < 5000; ++i) {
    std::vector<std::string> words;
    const std::size_t n = 25 + rng.below(30);
    for (std::size_t w = 0; w < n; ++w) words.push_back(pool[rng.below(pool_n)]);
    docs.push_back({"doc " + std::to_string(i), join(words, " "), std::nullopt});
  }
  const auto stats = toolserver::ingest_text(index, docs, embedder);
  REQUIRE_TRUE(stats.passage_count == 5000, "expected 5000 passages");

  auto brute_force = [&](const std::vector<float>& qv, int k) {
    struct Row {
      double score;
      std::string id;
    };
    std::vector<Row> rows;
    rows.reserve(5000);
    for (std::size_t i = 0; i < index.passage_vectors().size(); ++i) {
      double s = 0.0;
      const auto& v = index.passage_vectors()[i];
      for (std::size_t d = 0; d < v.size(); ++d)
        s += static_cast<double>(v[d]) * static_cast<double>(qv[d]);
      rows.push_back({s, index.passages()[i].passage_id});
    }
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
      if (a.score != b.score) return a.score > b.score;
      return a.id < b.id;
    });
    std::vector<std::string> ids;
    for (int i = 0; i < k; ++i) ids.push_back(rows[static_cast<std::size_t>(i)].id);
    return ids;
  };

  const auto train = toolserver::RetrievalConfig::for_mode(toolserver::Mode::Train);
  const auto eval = toolserver::RetrievalConfig::for_mode(toolserver::Mode::Eval);
  for (int q = 0; q < 100; ++q) {
    std::vector<std::string> words;
    const std::size_t n = 2 + rng.below(3);
    for (std::size_t w = 0; w < n; ++w) words.push_back(pool[rng.below(pool_n)]);
    const std::string query = join(words, " ");
    const auto qv = modelclient::embed(embedder, {query}).front();

    for (const auto* cfg : {&train, &eval}) {
      const auto result = toolserver::search_text(index, {query}, *cfg, embedder);
      const auto expect = brute_force(qv, cfg->text_top_k);
      REQUIRE_TRUE(result.per_query[0].hits.size() == expect.size(), "hit count mismatch");
      for (std::size_t i = 0; i < expect.size(); ++i)
        REQUIRE_TRUE(result.per_query[0].hits[i].id == expect[i],
                     "rank mismatch for query '" + query + "' at position " + std::to_string(i));
    }
  }
  detail << " 100 queries, top-3 and top-5, ids and order equal";
}

// ---------------------------------------------------------------------------
// criterion 3: image threshold semantics
// ---------------------------------------------------------------------------

class PlantedEmbedder : public modelclient::EmbeddingProvider {
 public:
  std::map<std::string, std::vector<float>> vectors;
  std::vector<std::vector<float>> embed_texts(const std::vector<std::string>& texts) override {
    std::vector<std::vector<float>> out;
    for (const auto& t : texts) out.push_back(vectors.at(t));
    return out;
  }
  std::vector<float> embed_image(const std::string& ref) override { return vectors.at(ref); }
};

void criterion_image_threshold(std::ostringstream& detail) {
  PlantedEmbedder embedder;
  embedder.vectors["probe"] = {1.0f, 0.0f};
  auto make_index = [&](const std::vector<double>& sims) {
    toolserver::SearchIndex index;
    std::vector<toolserver::ImageEntry> entries;
    for (std::size_t i = 0; i < sims.size(); ++i) {
      const std::string uri = "img://t/" + std::to_string(i);
      const float s = static_cast<float>(sims[i]);
      embedder.vectors[uri] = {s, std::sqrt(1.0f - s * s)};
      entries.push_back({"img" + std::to_string(i), uri, std::nullopt});
    }
    toolserver::ingest_images(index, entries, embedder);
    return index;
  };

  const auto train = toolserver::RetrievalConfig::for_mode(toolserver::Mode::Train);
  const auto eval = toolserver::RetrievalConfig::for_mode(toolserver::Mode::Eval);

  auto below = make_index({0.69, 0.5, 0.2});
  REQUIRE_TRUE(
      toolserver::search_image_by_text(below, {"probe"}, train, embedder).per_query[0].hits.empty(),
      "similarities below 0.7 must yield zero hits");
  REQUIRE_TRUE(
      toolserver::search_image_by_text(below, {"probe"}, eval, embedder).per_query[0].hits.empty(),
      "eval mode must also honor the threshold");

  auto four_above = make_index({0.95, 0.9, 0.8, 0.75});
  const auto train_hits =
      toolserver::search_image_by_text(four_above, {"probe"}, train, embedder).per_query[0].hits;
  REQUIRE_TRUE(train_hits.size() == 1, "train mode keeps a single image");
  REQUIRE_TRUE(train_hits[0].id == "img0", "train mode must keep the most similar image");

  const auto eval_hits =
      toolserver::search_image_by_text(four_above, {"probe"}, eval, embedder).per_query[0].hits;
  REQUIRE_TRUE(eval_hits.size() == 3, "eval mode caps at three");
  REQUIRE_TRUE(eval_hits[0].id == "img0" && eval_hits[1].id == "img1" && eval_hits[2].id == "img2",
               "eval hits must be the top three by similarity");

  auto two_above = make_index({0.9, 0.72, 0.3});
  REQUIRE_TRUE(toolserver::search_image_by_text(two_above, {"probe"}, eval, embedder)
                   .per_query[0]
                   .hits.size() == 2,
               "eval returns up to three, here two");
  detail << " zero below 0.7, one in train, <=3 in eval";
}

// ---------------------------------------------------------------------------
// criterion 4: hypergraph counting + dedup fixture
// ---------------------------------------------------------------------------

class DedupProvider : public hypergraph::SearchProvider {
 public:
  // seed reverse search gives pages u0,u1; expanding u0 links back to u1.
  std::vector<hypergraph::WebPage> image_reverse_search(const std::string& ref, int k) override {
    std::vector<hypergraph::WebPage> pages;
    for (int i = 0; i < k; ++i) pages.push_back(fetch_page(url_of(ref, i)));
    return pages;
  }
  std::vector<std::string> image_visual_search(const std::string& ref, int k) override {
    std::vector<std::string> refs;
    for (int i = 0; i < k; ++i) refs.push_back("img://d/" + to_hex(fnv1a64(ref), 6) + "/" +
                                               std::to_string(i));
    return refs;
  }
  hypergraph::WebPage fetch_page(const std::string& url) override {
    hypergraph::WebPage p;
    p.url = url;
    p.title = "dedup";
    p.content = "body of " + url;
    if (url == url_of("img://seed/dedup", 0)) {
      // links back to sibling u1, plus one fresh page
      p.content += "\nSee also: " + url_of("img://seed/dedup", 1);
      p.content += "\nSee also: http://d/fresh-from-u0";
    } else {
      p.content += "\nSee also: http://d/f1-" + to_hex(fnv1a64(url), 6);
      p.content += "\nSee also: http://d/f2-" + to_hex(fnv1a64(url), 6);
    }
    p.content += "\nImage: img://d/e1-" + to_hex(fnv1a64(url), 6);
    p.content += "\nImage: img://d/e2-" + to_hex(fnv1a64(url), 6);
    return p;
  }
  std::string fetch_image(const std::string& link) override { return link; }

  static std::string url_of(const std::string& ref, int i) {
    return "http://d/" + to_hex(fnv1a64(ref), 6) + "/p" + std::to_string(i);
  }
};

void criterion_hypergraph_counting(std::ostringstream& detail) {
  for (int k : {1, 2, 3}) {
    for (int d : {1, 2}) {
      stubs::StubSearchProvider provider(404);
      auto extractor = stubs::offline_extractor();
      auto annotator = stubs::offline_annotator(404);
      const auto g = hypergraph::build_hypergraph("img://seed/count", {k, d},
                                                  {provider, *extractor, *annotator});
      // enumeration oracle: frontier at depth d is (2K)^d
      std::size_t nodes = 0, edges = 0, level = 1;
      for (int depth = 0; depth <= d; ++depth) {
        nodes += level;
        if (depth < d) edges += level;
        level *= 2 * static_cast<std::size_t>(k);
      }
      REQUIRE_TRUE(g.nodes().size() == nodes,
                   "K=" + std::to_string(k) + " D=" + std::to_string(d) + ": node count " +
                       std::to_string(g.nodes().size()) + " != " + std::to_string(nodes));
      REQUIRE_TRUE(g.edges().size() == edges, "edge count mismatch");
      for (const auto& e : g.edges())
        REQUIRE_TRUE(e.members.size() == 2 * static_cast<std::size_t>(k) + 1,
                     "complete edge must have 2K+1 members");
    }
  }

  // dedup fixture, K=2 D=2: expanding page u0 links back to u1, so the build
  // creates 20 nodes instead of 21 and records exactly one reused member.
  DedupProvider provider;
  auto extractor = stubs::offline_extractor();
  auto annotator = stubs::offline_annotator(404);
  const auto g = hypergraph::build_hypergraph("img://seed/dedup", {2, 2},
                                              {provider, *extractor, *annotator});
  REQUIRE_TRUE(g.nodes().size() == 20, "dedup build must create 20 nodes, got " +
                                           std::to_string(g.nodes().size()));
  REQUIRE_TRUE(g.edges().size() == 5, "dedup build must create 5 edges");
  std::size_t reused_total = 0;
  for (const auto& e : g.edges()) {
    reused_total += e.reused.size();
    REQUIRE_TRUE(e.members.size() == 5, "every dedup edge still has 2K+1 members");
  }
  REQUIRE_TRUE(reused_total == 1, "exactly one member is a reused node");
  detail << " counts match for K in {1,2,3} x D in {1,2}; dedup run 21->20 nodes";
}

// ---------------------------------------------------------------------------
// criterion 5: tree-search determinism and termination
// ---------------------------------------------------------------------------

struct SearchRig {
  modelclient::HashEmbedder embedder{64};
  toolserver::SearchIndex index;
  std::unique_ptr<modelclient::ModelClient> knowledge = stubs::offline_knowledge_expert(9);
  std::unique_ptr<toolserver::ToolService> service;
  std::unique_ptr<toolserver::LocalToolClient> tools;

  SearchRig() {
    toolserver::ingest_text(index,
                            {{"Beacon", "the beacon stands by the granite harbor", std::nullopt},
                             {"Quarry", "the quarry feeds the foundry", std::nullopt}},
                            embedder);
    service = std::make_unique<toolserver::ToolService>(
        index, toolserver::RetrievalConfig::for_mode(toolserver::Mode::Train), embedder,
        knowledge.get());
    tools = std::make_unique<toolserver::LocalToolClient>(*service);
  }
};

void criterion_tree_search(std::ostringstream& detail) {
  using treesearch::NodeStatus;
  SearchRig rig;

  // scripted 2-expert pool, judged by exact match
  modelclient::FunctionBackend expert1([](const std::vector<modelclient::ChatTurn>& turns) {
    int rounds = 0;
    for (const auto& t : turns)
      if (t.role == modelclient::Role::Assistant) ++rounds;
    if (rounds == 0)
      return std::string(
          "<think>search first</think>\n<tool_call>{\"name\":\"text_search\","
          "\"arguments\":{\"query_list\":[\"beacon\"]}}</tool_call>");
    return std::string("<think>got it</think>\n<answer>the beacon record</answer>");
  });
  modelclient::FunctionBackend expert2([](const std::vector<modelclient::ChatTurn>&) {
    return std::string("<think>guessing</think>\n<answer>wrong guess</answer>");
  });
  modelclient::FunctionBackend judge([](const std::vector<modelclient::ChatTurn>& turns) {
    const std::string& u = turns.back().content;
    const auto golden = u.substr(u.find("Ground Truth Answer: ") + 21);
    const auto response = u.substr(u.find("Model Response: ") + 16);
    return std::string(response.substr(0, response.find('\n')) ==
                               golden.substr(0, golden.find('\n'))
                           ? "Yes"
                           : "No");
  });

  treesearch::ExpertPool pool;
  pool.experts.push_back({"text_search", &expert1});
  pool.experts.push_back({"text_search", &expert2});
  treesearch::SearchStats stats;
  treesearch::SearchTree tree;
  const auto found =
      treesearch::run_tree_search({"which record?", std::nullopt}, "the beacon record", {}, pool,
                                  *rig.tools, judge, {}, &stats, &tree);

  REQUIRE_TRUE(found.has_value(), "scripted pool must solve the question");
  REQUIRE_TRUE(tree.nodes.size() == 5, "hand-enumerated tree has 5 nodes");
  REQUIRE_TRUE(tree.node(1).status == NodeStatus::Open && tree.node(1).call.has_value(),
               "node 1 is expert 1's tool call");
  REQUIRE_TRUE(tree.node(2).status == NodeStatus::TerminalIncorrect,
               "node 2 is expert 2's pruned wrong answer");
  REQUIRE_TRUE(tree.node(3).status == NodeStatus::TerminalCorrect,
               "node 3 is the verified answer");
  REQUIRE_TRUE(tree.node(4).status == NodeStatus::Open, "node 4 was never judged");
  int terminal_correct = 0;
  for (const auto& n : tree.nodes)
    if (n.status == NodeStatus::TerminalCorrect) ++terminal_correct;
  REQUIRE_TRUE(terminal_correct == 1, "exactly one TerminalCorrect node");

  const auto& steps = found->trajectory.steps;
  REQUIRE_TRUE(steps.size() == 5, "trajectory is think/call/response/think/answer");
  REQUIRE_TRUE(steps[0].kind == protocol::SegmentKind::Think &&
                   steps[1].kind == protocol::SegmentKind::ToolCall &&
                   steps[2].kind == protocol::SegmentKind::ToolResponse &&
                   steps[3].kind == protocol::SegmentKind::Think &&
                   steps[4].kind == protocol::SegmentKind::Answer,
               "trajectory segment kinds");
  REQUIRE_TRUE(found->trajectory.tool_call_count() == 1, "one tool call");

  // 500 randomized scripted pools: the cap and the structural invariants hold
  int solved = 0;
  for (int pool_seed = 0; pool_seed < 500; ++pool_seed) {
    Rng pool_rng(9000 + static_cast<std::uint64_t>(pool_seed));
    const int m = 1 + static_cast<int>(pool_rng.below(3));
    const std::string golden = "golden-" + to_hex(pool_rng.next(), 5);

    std::vector<std::unique_ptr<modelclient::ModelClient>> owned;
    treesearch::ExpertPool rand_pool;
    for (int j = 0; j < m; ++j) {
      const std::uint64_t expert_seed = pool_rng.next();
      const int answer_round = static_cast<int>(expert_seed % 7);  // may exceed the depth cap
      owned.push_back(std::make_unique<modelclient::FunctionBackend>(
          [expert_seed, answer_round, golden](const std::vector<modelclient::ChatTurn>& turns) {
            int rounds = 0;
            for (const auto& t : turns)
              if (t.role == modelclient::Role::Assistant) ++rounds;
            const std::uint64_t h =
                fnv1a64(modelclient::render_turns(turns)) ^ expert_seed;
            if (rounds >= answer_round) {
              const bool correct = h % 100 < 30;
              return "<think>deciding</think>\n<answer>" +
                     (correct ? golden : "guess-" + to_hex(h, 5)) + "</answer>";
            }
            return "<think>digging</think>\n<tool_call>{\"name\":\"text_search\","
                   "\"arguments\":{\"query_list\":[\"q-" +
                   to_hex(h, 6) + "\"]}}</tool_call>";
          }));
      rand_pool.experts.push_back({"text_search", owned.back().get()});
    }

    treesearch::SearchStats rand_stats;
    treesearch::SearchTree rand_tree;
    const auto result = treesearch::run_tree_search({"q?", std::nullopt}, golden, {}, rand_pool,
                                                    *rig.tools, judge, {}, &rand_stats, &rand_tree);
    if (result) {
      ++solved;
      REQUIRE_TRUE(result->trajectory.tool_call_count() <= 5, "tool calls capped at 5");
      REQUIRE_TRUE(
          protocol::parse_trajectory(protocol::render_segments(result->trajectory.steps, true).text)
                  .verdict == protocol::Verdict::Valid,
          "extracted trajectory must be grammatical");
    }
    int correct_nodes = 0;
    for (const auto& n : rand_tree.nodes) {
      REQUIRE_TRUE(n.depth <= 5, "node depth capped at 5");
      if (n.status == NodeStatus::TerminalCorrect) ++correct_nodes;
      if (n.parent >= 0) {
        const auto parent_status = rand_tree.node(n.parent).status;
        REQUIRE_TRUE(parent_status != NodeStatus::TerminalIncorrect &&
                         parent_status != NodeStatus::Pruned,
                     "pruned nodes must not have children");
      }
    }
    REQUIRE_TRUE(correct_nodes <= 1, "at most one TerminalCorrect per tree");
  }
  REQUIRE_TRUE(solved >= 100, "randomized pools should solve a healthy fraction");
  detail << " hand tree exact; " << solved << "/500 randomized pools solved within the cap";
}

// ---------------------------------------------------------------------------
// criterion 6: reward math
// ---------------------------------------------------------------------------

void criterion_reward_math(std::ostringstream& detail) {
  Rng rng(606);
  for (int i = 0; i < 10000; ++i) {
    std::vector<double> rewards;
    const std::size_t g = 2 + rng.below(7);
    for (std::size_t k = 0; k < g; ++k) rewards.push_back(rng.unit());
    const auto adv = reward::group_advantages(rewards);
    double sum = 0.0;
    for (double a : adv) sum += a;
    REQUIRE_TRUE(std::fabs(sum) <= 1e-9, "advantages must sum to zero");
  }

  // identical policies collapse the objective to zero
  for (int trial = 0; trial < 20; ++trial) {
    reward::RolloutGroup group;
    const std::size_t g = 2 + rng.below(4);
    for (std::size_t i = 0; i < g; ++i) {
      reward::ScoredRollout r;
      r.reward = rng.unit();
      const std::size_t n = 1 + rng.below(64);
      for (std::size_t t = 0; t < n; ++t) {
        const double lp = -(0.05 + 3.0 * rng.unit());
        r.logprobs.theta.push_back(lp);
        r.logprobs.old_policy.push_back(lp);
        r.logprobs.ref.push_back(lp);
      }
      group.rollouts.push_back(std::move(r));
    }
    REQUIRE_TRUE(std::fabs(reward::grpo_objective(group, {}).objective) <= 1e-9,
                 "identity collapse");
  }

  // hand-computed clip cases at ratio 2, eps 0.2
  reward::RewardConfig cfg;
  cfg.clip_eps = 0.2;
  cfg.kl_beta = 0.0;
  reward::ScoredRollout rollout;
  rollout.logprobs.theta = {std::log(2.0) - 1.0};
  rollout.logprobs.old_policy = {-1.0};
  rollout.logprobs.ref = rollout.logprobs.theta;
  const auto plus = reward::grpo_rollout_term(rollout, +1.0, cfg);
  REQUIRE_TRUE(std::fabs(plus.value - 1.2) <= 1e-12, "A=+1 term must be 1.2");
  const auto minus = reward::grpo_rollout_term(rollout, -1.0, cfg);
  REQUIRE_TRUE(std::fabs(minus.value - (-2.0)) <= 1e-12, "A=-1 term must be -2.0");

  for (int i = 0; i < 10000; ++i) {
    const double t = -(6.0 * rng.unit());
    const double r = -(6.0 * rng.unit());
    const double d = r - t;
    REQUIRE_TRUE(std::exp(d) - d - 1.0 >= 0.0, "per-token KL estimate must be >= 0");
  }
  detail << " 10k zero-sum groups, clip cases to 1e-12, 10k KL samples >= 0";
}

// ---------------------------------------------------------------------------
// criterion 7: SFT mask fidelity
// ---------------------------------------------------------------------------

void criterion_sft_mask(std::ostringstream& detail) {
  Rng rng(707);
  int masked_total = 0;
  for (int i = 0; i < 200; ++i) {
    const auto t = random_trajectory(rng);
    treesearch::VerifiedTrajectory vt;
    vt.trajectory = t;
    vt.trajectory.question = {"q" + std::to_string(i), std::nullopt};
    const auto records = treesearch::extract_sft_dataset({vt});
    const auto& rec = records.front();

    // independent extent scan
    std::vector<std::pair<std::size_t, std::size_t>> expect;
    std::size_t pos = 0;
    while ((pos = rec.raw_text.find("<tool_response>", pos)) != std::string::npos) {
      const std::size_t end = rec.raw_text.find("</tool_response>", pos) + 16;
      expect.emplace_back(pos, end);
      pos = end;
    }
    REQUIRE_TRUE(rec.masked_spans.size() == expect.size(), "masked span count");
    for (std::size_t s = 0; s < expect.size(); ++s) {
      REQUIRE_TRUE(rec.masked_spans[s].begin == expect[s].first &&
                       rec.masked_spans[s].end == expect[s].second,
                   "masked span must equal the tool_response extent");
    }
    masked_total += static_cast<int>(expect.size());

    std::vector<std::pair<std::size_t, std::size_t>> all;
    for (const auto& s : rec.supervised_spans) all.emplace_back(s.begin, s.end);
    for (const auto& s : rec.masked_spans) all.emplace_back(s.begin, s.end);
    std::sort(all.begin(), all.end());
    std::size_t cursor = 0;
    for (const auto& [b, e] : all) {
      REQUIRE_TRUE(b == cursor && e > b, "spans must tile without gaps or overlap");
      cursor = e;
    }
    REQUIRE_TRUE(cursor == rec.raw_text.size(), "spans must cover the whole text");
  }
  detail << " 200 trajectories, " << masked_total << " masked extents verified";
}

// ---------------------------------------------------------------------------
// criterion 8: end-to-end smoke determinism via the CLI
// ---------------------------------------------------------------------------

int run_cli(const std::string& cli, const std::string& args) {
  const int status = std::system((cli + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void compare_trees(const fs::path& a, const fs::path& b) {
  std::set<fs::path> rel_a, rel_b;
  for (const auto& entry : fs::recursive_directory_iterator(a))
    if (entry.is_regular_file()) rel_a.insert(fs::relative(entry.path(), a));
  for (const auto& entry : fs::recursive_directory_iterator(b))
    if (entry.is_regular_file()) rel_b.insert(fs::relative(entry.path(), b));
  REQUIRE_TRUE(rel_a == rel_b, "smoke runs produced different file sets");
  for (const auto& rel : rel_a)
    REQUIRE_TRUE(read_text_file(a / rel) == read_text_file(b / rel),
                 "file differs between runs: " + rel.string());
}

void criterion_smoke(const std::string& cli, std::ostringstream& detail) {
  REQUIRE_TRUE(!cli.empty() && fs::exists(cli), "CLI path required as argv[1]");
  const fs::path base = fs::temp_directory_path() / ("sf-accept-" + std::to_string(::getpid()));
  fs::remove_all(base);
  const fs::path run_a = base / "a";
  const fs::path run_b = base / "b";
  REQUIRE_TRUE(run_cli(cli, "pipeline-smoke --offline --seed 7 --out " + run_a.string()) == 0,
               "first smoke run must exit 0");
  REQUIRE_TRUE(run_cli(cli, "pipeline-smoke --offline --seed 7 --out " + run_b.string()) == 0,
               "second smoke run must exit 0");
  compare_trees(run_a, run_b);

  const Json report = Json::parse(read_text_file(run_a / "report.json"));
  REQUIRE_TRUE(report.at("failed").get<int>() == 0, "report must list zero failed checks");
  REQUIRE_TRUE(report.at("passed").get<int>() >= 20, "report must list >= 20 checks");
  fs::remove_all(base);
  detail << " two seeded runs byte-identical, " << report.at("passed").get<int>()
         << " invariant checks";
}

// ---------------------------------------------------------------------------
// criterion 9: judge protocol
// ---------------------------------------------------------------------------

void criterion_judge_protocol(std::ostringstream& detail) {
  const std::string golden_dir = std::string(SEARCHFORGE_SOURCE_DIR) + "/tests/golden/";
  const std::string rendered = prompts::render_judge_prompt(
      "What is the capital of France?", "Paris", {"Paris, France"}, "The capital is Paris.");
  REQUIRE_TRUE(rendered == read_text_file(golden_dir + "judge_prompt.golden.txt"),
               "judge template instantiation must match the golden file");
  REQUIRE_TRUE(prompts::kJudgeSystemMessage ==
                   read_text_file(golden_dir + "judge_system.golden.txt"),
               "judge system message must match the golden file");

  struct Case {
    const char* reply;
    treesearch::JudgeVerdict::State expect;
  };
  using S = treesearch::JudgeVerdict::State;
  const Case cases[30] = {
      {"Yes", S::Correct},        {"No", S::Incorrect},      {"yes", S::Correct},
      {"no", S::Incorrect},       {"YES", S::Correct},       {"NO", S::Incorrect},
      {" Yes ", S::Correct},      {"No\n", S::Incorrect},    {"Yes.", S::Unparseable},
      {"Nope", S::Unparseable},   {"Yes!", S::Unparseable},  {"yes sir", S::Unparseable},
      {"correct", S::Unparseable}, {"true", S::Unparseable}, {"False", S::Unparseable},
      {"Y", S::Unparseable},      {"N", S::Unparseable},     {"\tYes", S::Correct},
      {"no ", S::Incorrect},      {"maybe", S::Unparseable}, {"", S::Unparseable},
      {"Yes indeed", S::Unparseable}, {"no way", S::Unparseable}, {"NO!", S::Unparseable},
      {"yES", S::Correct},        {" nO ", S::Incorrect},    {"affirmative", S::Unparseable},
      {"negative", S::Unparseable}, {"Yes", S::Correct},     {"No", S::Incorrect},
  };
  for (int i = 0; i < 30; ++i) {
    modelclient::FunctionBackend stub(
        [&](const std::vector<modelclient::ChatTurn>&) { return std::string(cases[i].reply); });
    const auto verdict = treesearch::verify_answer("q", "g", {}, "a", stub);
    REQUIRE_TRUE(verdict.state == cases[i].expect,
                 "case " + std::to_string(i) + " ('" + cases[i].reply + "') mapped wrong");
  }
  detail << " golden templates byte-exact, 30/30 verdict mappings agree";
}

}  // namespace

int main(int argc, char** argv) {
  Harness harness;
  if (argc > 1) harness.cli_path = argv[1];

  harness.run("criterion 1: grammar round-trip and mutant format rewards", 10.0,
              criterion_grammar);
  harness.run("criterion 2: retrieval equals brute-force ranking on 5000 passages", 60.0,
              criterion_retrieval_oracle);
  harness.run("criterion 3: image similarity threshold semantics", 0.0, criterion_image_threshold);
  harness.run("criterion 4: hypergraph counting and dedup oracle", 0.0,
              criterion_hypergraph_counting);
  harness.run("criterion 5: tree search determinism, pruning, and the tool-call cap", 0.0,
              criterion_tree_search);
  harness.run("criterion 6: reward mathematics", 0.0, criterion_reward_math);
  harness.run("criterion 7: sft mask fidelity", 0.0, criterion_sft_mask);
  harness.run("criterion 8: end-to-end pipeline smoke determinism", 300.0,
              [&](std::ostringstream& d) { criterion_smoke(harness.cli_path, d); });
  harness.run("criterion 9: judge protocol", 0.0, criterion_judge_protocol);

  if (harness.failures) {
    std::cout << harness.failures << " criterion(s) failed\n";
    return 1;
  }
  std::cout << "all 9 criteria passed\n";
  return 0;
}
