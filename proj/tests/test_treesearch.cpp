#include <doctest.h>

#include "searchforge/prompts.hpp"
#include "searchforge/stubs.hpp"
#include "searchforge/treesearch.hpp"
#include "searchforge/util.hpp"

using namespace searchforge;
using namespace searchforge::treesearch;
using modelclient::ChatTurn;
using modelclient::FunctionBackend;
using modelclient::Role;

namespace {

struct ToolRig {
  modelclient::HashEmbedder embedder{64};
  toolserver::SearchIndex index;
  std::unique_ptr<modelclient::ModelClient> knowledge = stubs::offline_knowledge_expert(3);
  std::unique_ptr<toolserver::ToolService> service;
  std::unique_ptr<toolserver::LocalToolClient> tools;

  ToolRig() {
    toolserver::ingest_text(index,
                            {{"Harbor notes", "the granite harbor holds the old beacon", std::nullopt},
                             {"Quarry notes", "the quarry feeds the foundry by viaduct", std::nullopt}},
                            embedder);
    toolserver::ingest_images(index, {{"", "img://corpus/granite_harbor/0", std::nullopt}},
                              embedder);
    service = std::make_unique<toolserver::ToolService>(
        index, toolserver::RetrievalConfig::for_mode(toolserver::Mode::Train), embedder,
        knowledge.get());
    tools = std::make_unique<toolserver::LocalToolClient>(*service);
  }
};

std::string call_body(const std::string& tool, const std::string& query) {
  return "{\"name\":\"" + tool + "\",\"arguments\":{\"query_list\":[\"" + query + "\"]}}";
}

}  // namespace

TEST_CASE("classify_task maps replies onto the label set") {
  SUBCASE("pass-through") {
    FunctionBackend stub([](const std::vector<ChatTurn>&) { return std::string("text_search"); });
    CHECK(classify_task("q", std::nullopt, stub).label == ToolLabel::TextSearch);
  }
  SUBCASE("whitespace and case are tolerated") {
    FunctionBackend stub(
        [](const std::vector<ChatTurn>&) { return std::string("  Model_Search \n"); });
    CHECK(classify_task("q", std::nullopt, stub).label == ToolLabel::ModelSearch);
  }
  SUBCASE("anything else is Unknown, never guessed") {
    FunctionBackend stub(
        [](const std::vector<ChatTurn>&) { return std::string("maybe images?"); });
    const auto result = classify_task("q", std::nullopt, stub);
    CHECK(result.label == ToolLabel::Unknown);
    CHECK(result.raw == "maybe images?");
  }
  SUBCASE("scripted 12-item partition matches the script") {
    const char* script[12] = {"text_search", "text_search", "image_search_by_lens",
                              "model_search", "text_search", "image_search_by_text_query",
                              "nonsense",    "model_search", "image_search_by_lens",
                              "text_search", "image_search_by_text_query", "garbage"};
    int idx = 0;
    FunctionBackend stub([&](const std::vector<ChatTurn>&) { return std::string(script[idx++]); });
    std::map<ToolLabel, int> counts;
    for (int i = 0; i < 12; ++i) counts[classify_task("q" + std::to_string(i), std::nullopt, stub).label]++;
    CHECK(counts[ToolLabel::TextSearch] == 4);
    CHECK(counts[ToolLabel::ImageSearchByLens] == 2);
    CHECK(counts[ToolLabel::ImageSearchByTextQuery] == 2);
    CHECK(counts[ToolLabel::ModelSearch] == 2);
    CHECK(counts[ToolLabel::Unknown] == 2);
  }
}

TEST_CASE("verify_answer enforces the strict Yes/No protocol") {
  SUBCASE("Yes / No / anything else") {
    FunctionBackend yes([](const std::vector<ChatTurn>&) { return std::string("Yes"); });
    FunctionBackend no([](const std::vector<ChatTurn>&) { return std::string("No"); });
    FunctionBackend chatty(
        [](const std::vector<ChatTurn>&) { return std::string("Yes, because it matches"); });
    CHECK(verify_answer("q", "g", {}, "a", yes).state == JudgeVerdict::State::Correct);
    CHECK(verify_answer("q", "g", {}, "a", no).state == JudgeVerdict::State::Incorrect);
    CHECK(verify_answer("q", "g", {}, "a", chatty).state == JudgeVerdict::State::Unparseable);
  }
  SUBCASE("case and whitespace folding") {
    FunctionBackend yes([](const std::vector<ChatTurn>&) { return std::string("  yes \n"); });
    CHECK(verify_answer("q", "g", {}, "a", yes).correct());
  }
  SUBCASE("the judge sees the filled canonical template") {
    std::vector<ChatTurn> seen;
    FunctionBackend spy([&](const std::vector<ChatTurn>& turns) {
      seen = turns;
      return std::string("Yes");
    });
    verify_answer("What city?", "Beijing", {"Peking"}, "Beijing", spy);
    REQUIRE(seen.size() == 2);
    CHECK(seen[0].role == Role::System);
    CHECK(seen[0].content == prompts::kJudgeSystemMessage);
    CHECK(seen[1].content.find("Question: What city?") != std::string::npos);
    CHECK(seen[1].content.find("Ground Truth Answer: Beijing") != std::string::npos);
    CHECK(seen[1].content.find("Candidate Answers: Peking") != std::string::npos);
    CHECK(seen[1].content.find("Model Response: Beijing") != std::string::npos);
  }
  SUBCASE("30-case scripted table maps with full agreement") {
    const char* replies[30] = {"Yes", "No",  "yes", "no",  "YES", "NO",  " Yes ", "No\n", "Yes.",
                               "Nope", "Yes!", "yes sir", "correct", "true", "False", "Y", "N",
                               "Yes", "No", "maybe", "", "Yes indeed", "no way", "NO!", "yES",
                               " nO ", "affirmative", "negative", "Yes", "No"};
    const JudgeVerdict::State expect[30] = {
        JudgeVerdict::State::Correct,     JudgeVerdict::State::Incorrect,
        JudgeVerdict::State::Correct,     JudgeVerdict::State::Incorrect,
        JudgeVerdict::State::Correct,     JudgeVerdict::State::Incorrect,
        JudgeVerdict::State::Correct,     JudgeVerdict::State::Incorrect,
        JudgeVerdict::State::Unparseable, JudgeVerdict::State::Unparseable,
        JudgeVerdict::State::Unparseable, JudgeVerdict::State::Unparseable,
        JudgeVerdict::State::Unparseable, JudgeVerdict::State::Unparseable,
        JudgeVerdict::State::Unparseable, JudgeVerdict::State::Unparseable,
        JudgeVerdict::State::Unparseable, JudgeVerdict::State::Correct,
        JudgeVerdict::State::Incorrect,   JudgeVerdict::State::Unparseable,
        JudgeVerdict::State::Unparseable, JudgeVerdict::State::Unparseable,
        JudgeVerdict::State::Unparseable, JudgeVerdict::State::Unparseable,
        JudgeVerdict::State::Correct,     JudgeVerdict::State::Incorrect,
        JudgeVerdict::State::Unparseable, JudgeVerdict::State::Unparseable,
        JudgeVerdict::State::Correct,     JudgeVerdict::State::Incorrect};
    for (int i = 0; i < 30; ++i) {
      CAPTURE(i);
      FunctionBackend stub([&](const std::vector<ChatTurn>&) { return std::string(replies[i]); });
      CHECK(verify_answer("q", "g", {}, "a", stub).state == expect[i]);
    }
  }
}

TEST_CASE("judge prompt golden file") {
  const std::string rendered = prompts::render_judge_prompt(
      "What is the capital of France?", "Paris", {"Paris, France"}, "The capital is Paris.");
  const std::string golden = read_text_file(std::string(SEARCHFORGE_SOURCE_DIR) +
                                            "/tests/golden/judge_prompt.golden.txt");
  CHECK(rendered == golden);
  CHECK(prompts::kJudgeSystemMessage ==
        read_text_file(std::string(SEARCHFORGE_SOURCE_DIR) +
                       "/tests/golden/judge_system.golden.txt"));
}

TEST_CASE("expand creates one child per expert in pool order") {
  ToolRig rig;
  FunctionBackend caller_a([](const std::vector<ChatTurn>&) {
    return "<think>try text</think>\n<tool_call>" + call_body("text_search", "granite harbor") +
           "</tool_call>";
  });
  FunctionBackend caller_b([](const std::vector<ChatTurn>&) {
    return "<think>try images</think>\n<tool_call>" +
           call_body("image_search_by_text_query", "granite harbor") + "</tool_call>";
  });
  ExpertPool pool;
  pool.experts.push_back({"text_search", &caller_a});
  pool.experts.push_back({"image_search_by_text_query", &caller_b});

  SearchTree tree = make_tree({"which harbor?", std::string("img://corpus/granite_harbor/0")}, {});
  const auto children = expand(tree, 0, pool, *rig.tools);
  REQUIRE(children.size() == 2);
  const TreeNode& a = tree.node(children[0]);
  const TreeNode& b = tree.node(children[1]);
  CHECK(a.expert_index == 0);
  CHECK(b.expert_index == 1);
  CHECK(a.status == NodeStatus::Open);
  CHECK(a.call->name == "text_search");
  REQUIRE(a.response.has_value());
  CHECK(a.response->find("\"tool\":\"text_search\"") != std::string::npos);
  CHECK(b.call->name == "image_search_by_text_query");
  CHECK(a.depth == 1);

  SUBCASE("re-expanding a non-open node throws NotExpandable") {
    tree.nodes[static_cast<std::size_t>(children[0])].status = NodeStatus::Pruned;
    CHECK_THROWS_AS(expand(tree, children[0], pool, *rig.tools), NotExpandable);
  }
}

TEST_CASE("expand prunes malformed expert output and records expert failures as gaps") {
  ToolRig rig;
  FunctionBackend malformed(
      [](const std::vector<ChatTurn>&) { return std::string("I will just chat instead."); });
  FunctionBackend crashing([](const std::vector<ChatTurn>&) -> std::string {
    throw modelclient::BackendUnavailable("expert down");
  });
  FunctionBackend bad_call([](const std::vector<ChatTurn>&) {
    return std::string("<think>t</think>\n<tool_call>{\"name\":\"web_search\","
                       "\"arguments\":{\"query_list\":[\"x\"]}}</tool_call>");
  });
  ExpertPool pool;
  pool.experts.push_back({"text_search", &malformed});
  pool.experts.push_back({"text_search", &crashing});
  pool.experts.push_back({"text_search", &bad_call});

  SearchTree tree = make_tree({"q", std::nullopt}, {});
  const auto children = expand(tree, 0, pool, *rig.tools);
  REQUIRE(children.size() == 3);
  CHECK(tree.node(children[0]).status == NodeStatus::Pruned);
  CHECK(tree.node(children[0]).note == "FormatInvalid");
  CHECK(tree.node(children[1]).status == NodeStatus::Pruned);
  CHECK(tree.node(children[1]).note.find("ExpertFailure") == 0);
  CHECK(tree.node(children[2]).status == NodeStatus::Pruned);
  CHECK(tree.node(children[2]).note == "FormatInvalid");
}

TEST_CASE("expanding at max depth marks the node exhausted and throws") {
  ToolRig rig;
  FunctionBackend idle([](const std::vector<ChatTurn>&) { return std::string(""); });
  ExpertPool pool;
  pool.experts.push_back({"text_search", &idle});
  SearchConfig cfg;
  cfg.max_depth = 5;
  SearchTree tree = make_tree({"q", std::nullopt}, cfg);
  tree.nodes[0].depth = 5;
  CHECK_THROWS_AS(expand(tree, 0, pool, *rig.tools), DepthExceeded);
  CHECK(tree.node(0).status == NodeStatus::Exhausted);
}

TEST_CASE("context overflow exhausts the node instead of expanding") {
  ToolRig rig;
  FunctionBackend idle([](const std::vector<ChatTurn>&) { return std::string(""); });
  ExpertPool pool;
  pool.experts.push_back({"text_search", &idle});
  SearchConfig cfg;
  cfg.context_token_budget = 10;  // the system message alone exceeds this
  SearchTree tree = make_tree({"q", std::nullopt}, cfg);
  const auto children = expand(tree, 0, pool, *rig.tools);
  CHECK(children.empty());
  CHECK(tree.node(0).status == NodeStatus::Exhausted);
  CHECK(tree.node(0).note == "ContextOverflow");
}

TEST_CASE("hand-enumerated 2-expert search: call-then-answer beats wrong-answerer") {
  // Expert 1 calls text_search at depth 1, then answers correctly at depth 2.
  // Expert 2 always answers wrong. BFS + immediate judging must produce:
  //   n1 (e1 call)      -> Open, later expanded
  //   n2 (e2 wrong)     -> TerminalIncorrect (pruned)
  //   n3 (e1 answer)    -> TerminalCorrect, search ends
  // and the extracted trajectory is think/call/response/think/answer.
  ToolRig rig;
  auto expert1 = stubs::offline_expert("text_search", "the beacon record",
                                       stubs::ExpertBehavior::CallThenAnswer);
  auto expert2 =
      stubs::offline_expert("text_search", "unused", stubs::ExpertBehavior::AnswerWrong);
  auto judge = stubs::offline_rule_judge();

  ExpertPool pool;
  pool.experts.push_back({"text_search", expert1.get()});
  pool.experts.push_back({"text_search", expert2.get()});

  SearchStats stats;
  SearchTree tree;
  const auto found =
      run_tree_search({"Which record mentions the beacon?", std::nullopt}, "the beacon record",
                      {}, pool, *rig.tools, *judge, {}, &stats, &tree);

  REQUIRE(found.has_value());
  REQUIRE(tree.nodes.size() == 5);  // root + 2 children + 2 grandchildren
  CHECK(tree.node(1).status == NodeStatus::Open);
  CHECK(tree.node(1).call.has_value());
  CHECK(tree.node(2).status == NodeStatus::TerminalIncorrect);
  CHECK(tree.node(3).status == NodeStatus::TerminalCorrect);
  CHECK(tree.node(3).parent == 1);
  // node 4 is expert 2's wrong answer at depth 2; BFS order means it was
  // created before node 3 was judged? No: children are judged in expert
  // order, so node 3 (expert 1) terminates before node 4 is judged.
  CHECK(tree.node(4).status == NodeStatus::Open);

  CHECK(stats.judged == 2);  // n2 and n3
  CHECK(stats.pruned == 1);  // n2

  const auto& steps = found->trajectory.steps;
  REQUIRE(steps.size() == 5);
  CHECK(steps[0].kind == protocol::SegmentKind::Think);
  CHECK(steps[1].kind == protocol::SegmentKind::ToolCall);
  CHECK(steps[2].kind == protocol::SegmentKind::ToolResponse);
  CHECK(steps[3].kind == protocol::SegmentKind::Think);
  CHECK(steps[4].kind == protocol::SegmentKind::Answer);
  CHECK(steps[4].body == "the beacon record");
  CHECK(found->trajectory.tool_call_count() == 1);
  CHECK(found->path == std::vector<int>{0, 1, 3});

  SUBCASE("extraction faithfulness via path segments") {
    CHECK(collect_path_segments(tree, 3) == steps);
  }
  SUBCASE("deterministic rerun builds the identical tree") {
    auto e1 = stubs::offline_expert("text_search", "the beacon record",
                                    stubs::ExpertBehavior::CallThenAnswer);
    auto e2 = stubs::offline_expert("text_search", "unused", stubs::ExpertBehavior::AnswerWrong);
    ExpertPool pool2;
    pool2.experts.push_back({"text_search", e1.get()});
    pool2.experts.push_back({"text_search", e2.get()});
    SearchStats stats2;
    SearchTree tree2;
    const auto found2 =
        run_tree_search({"Which record mentions the beacon?", std::nullopt}, "the beacon record",
                        {}, pool2, *rig.tools, *judge, {}, &stats2, &tree2);
    REQUIRE(found2.has_value());
    REQUIRE(tree2.nodes.size() == tree.nodes.size());
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
      CHECK(tree2.nodes[i].status == tree.nodes[i].status);
      CHECK(tree2.nodes[i].think == tree.nodes[i].think);
      CHECK(tree2.nodes[i].response == tree.nodes[i].response);
    }
    CHECK(protocol::render_segments(found2->trajectory.steps, true).text ==
          protocol::render_segments(found->trajectory.steps, true).text);
  }
}

TEST_CASE("immediate correct answer at depth 1 gives a zero-tool-call trajectory") {
  ToolRig rig;
  auto wrong = stubs::offline_expert("text_search", "x", stubs::ExpertBehavior::AnswerWrong);
  auto right =
      stubs::offline_expert("text_search", "the answer", stubs::ExpertBehavior::AnswerImmediately);
  auto judge = stubs::offline_rule_judge();
  ExpertPool pool;
  pool.experts.push_back({"text_search", wrong.get()});
  pool.experts.push_back({"text_search", right.get()});

  SearchStats stats;
  const auto found = run_tree_search({"q?", std::nullopt}, "the answer", {}, pool, *rig.tools,
                                     *judge, {}, &stats);
  REQUIRE(found.has_value());
  CHECK(found->trajectory.tool_call_count() == 0);
  CHECK(found->path.size() == 2);  // root + answer leaf
  CHECK(found->trajectory.steps.size() == 2);
  CHECK(stats.judged == 2);
}

TEST_CASE("expert 2 answering correctly at depth 1 terminates with a single judge call") {
  // expert 1 emits a tool call (never judged); expert 2 answers correctly
  ToolRig rig;
  auto caller = stubs::offline_expert("text_search", "the answer",
                                      stubs::ExpertBehavior::CallThenAnswer);
  auto right =
      stubs::offline_expert("model_search", "the answer", stubs::ExpertBehavior::AnswerImmediately);
  auto judge = stubs::offline_rule_judge();
  ExpertPool pool;
  pool.experts.push_back({"text_search", caller.get()});
  pool.experts.push_back({"model_search", right.get()});

  SearchStats stats;
  SearchTree tree;
  const auto found = run_tree_search({"q?", std::nullopt}, "the answer", {}, pool, *rig.tools,
                                     *judge, {}, &stats, &tree);
  REQUIRE(found.has_value());
  CHECK(found->trajectory.tool_call_count() == 0);
  CHECK(found->path == std::vector<int>{0, 2});
  CHECK(stats.judged == 1);
  CHECK(stats.pruned == 0);
  CHECK(tree.node(1).status == NodeStatus::Open);  // the unexplored call branch
  CHECK(tree.node(2).status == NodeStatus::TerminalCorrect);
}

TEST_CASE("exhaustion without a correct answer returns none with prune counts") {
  ToolRig rig;
  auto wrong1 = stubs::offline_expert("text_search", "x", stubs::ExpertBehavior::AnswerWrong);
  auto wrong2 = stubs::offline_expert("text_search", "x", stubs::ExpertBehavior::AnswerWrong);
  auto judge = stubs::offline_rule_judge();
  ExpertPool pool;
  pool.experts.push_back({"text_search", wrong1.get()});
  pool.experts.push_back({"text_search", wrong2.get()});

  SearchStats stats;
  SearchTree tree;
  const auto found = run_tree_search({"q?", std::nullopt}, "never matched", {}, pool, *rig.tools,
                                     *judge, {}, &stats, &tree);
  CHECK(!found.has_value());
  CHECK(stats.pruned == 2);
  CHECK(stats.judged == 2);
  int incorrect = 0;
  for (const auto& n : tree.nodes)
    if (n.status == NodeStatus::TerminalIncorrect) ++incorrect;
  CHECK(incorrect == stats.pruned);
}

TEST_CASE("node budget stops the search") {
  ToolRig rig;
  // experts that always call tools -> unbounded growth without a budget
  FunctionBackend caller([](const std::vector<ChatTurn>&) {
    return "<think>more evidence</think>\n<tool_call>" + call_body("text_search", "harbor") +
           "</tool_call>";
  });
  auto judge = stubs::offline_rule_judge();
  ExpertPool pool;
  pool.experts.push_back({"text_search", &caller});
  pool.experts.push_back({"text_search", &caller});

  SearchConfig cfg;
  cfg.node_budget = 9;
  SearchStats stats;
  SearchTree tree;
  const auto found =
      run_tree_search({"q?", std::nullopt}, "g", {}, pool, *rig.tools, *judge, cfg, &stats, &tree);
  CHECK(!found.has_value());
  CHECK(stats.budget_exhausted);
  CHECK(tree.nodes.size() <= 11);  // budget + one in-flight expansion
}

TEST_CASE("judge-unparseable counts as incorrect but is recorded distinctly") {
  ToolRig rig;
  auto expert =
      stubs::offline_expert("text_search", "the answer", stubs::ExpertBehavior::AnswerImmediately);
  FunctionBackend vague([](const std::vector<ChatTurn>&) { return std::string("possibly"); });
  ExpertPool pool;
  pool.experts.push_back({"text_search", expert.get()});

  SearchStats stats;
  SearchTree tree;
  const auto found =
      run_tree_search({"q?", std::nullopt}, "the answer", {}, pool, *rig.tools, vague, {}, &stats,
                      &tree);
  CHECK(!found.has_value());
  REQUIRE(tree.nodes.size() >= 2);
  CHECK(tree.node(1).status == NodeStatus::TerminalIncorrect);
  CHECK(tree.node(1).note == "JudgeUnparseable");
}

TEST_CASE("sft extraction masks exactly the tool_response extents") {
  ToolRig rig;
  auto expert = stubs::offline_expert("text_search", "the beacon record",
                                      stubs::ExpertBehavior::CallThenAnswer);
  auto judge = stubs::offline_rule_judge();
  ExpertPool pool;
  pool.experts.push_back({"text_search", expert.get()});

  const auto found = run_tree_search({"q?", std::nullopt}, "the beacon record", {}, pool,
                                     *rig.tools, *judge, {});
  REQUIRE(found.has_value());
  const auto records = extract_sft_dataset({*found});
  REQUIRE(records.size() == 1);
  const auto& rec = records[0];

  REQUIRE(rec.masked_spans.size() == 1);
  const auto& m = rec.masked_spans[0];
  CHECK(rec.raw_text.substr(m.begin, 15) == "<tool_response>");
  CHECK(rec.raw_text.substr(m.end - 16, 16) == "</tool_response>");
  CHECK(rec.tool_call_count == 1);

  // spans tile the text
  std::vector<std::pair<std::size_t, std::size_t>> all;
  for (const auto& s : rec.supervised_spans) all.emplace_back(s.begin, s.end);
  for (const auto& s : rec.masked_spans) all.emplace_back(s.begin, s.end);
  std::sort(all.begin(), all.end());
  std::size_t cursor = 0;
  for (const auto& [b, e] : all) {
    CHECK(b == cursor);
    cursor = e;
  }
  CHECK(cursor == rec.raw_text.size());

  SUBCASE("zero masked spans for a zero-tool-call trajectory") {
    VerifiedTrajectory vt;
    vt.trajectory.question = {"q", std::nullopt};
    vt.trajectory.steps = {protocol::make_segment(protocol::SegmentKind::Think, "t"),
                           protocol::make_segment(protocol::SegmentKind::Answer, "a")};
    const auto recs = extract_sft_dataset({vt});
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].masked_spans.empty());
    REQUIRE(recs[0].supervised_spans.size() == 1);
    CHECK(recs[0].supervised_spans[0].begin == 0);
    CHECK(recs[0].supervised_spans[0].end == recs[0].raw_text.size());
  }
  SUBCASE("sft_record_from_raw agrees with the rendered extraction") {
    const auto again = sft_record_from_raw(rec.id, rec.question, rec.image_ref, rec.raw_text);
    CHECK(again.masked_spans.size() == rec.masked_spans.size());
    for (std::size_t i = 0; i < rec.masked_spans.size(); ++i) {
      CHECK(again.masked_spans[i].begin == rec.masked_spans[i].begin);
      CHECK(again.masked_spans[i].end == rec.masked_spans[i].end);
    }
    CHECK_THROWS_AS(sft_record_from_raw("x", "q", std::nullopt, "<think>t</think>"),
                    protocol::InvariantViolation);
  }
}

TEST_CASE("context turns replay the path under the canonical system message") {
  ToolRig rig;
  auto expert = stubs::offline_expert("text_search", "the beacon record",
                                      stubs::ExpertBehavior::CallThenAnswer);
  auto judge = stubs::offline_rule_judge();
  ExpertPool pool;
  pool.experts.push_back({"text_search", expert.get()});
  SearchTree tree;
  run_tree_search({"which?", std::string("img://q/1")}, "the beacon record", {}, pool, *rig.tools,
                  *judge, {}, nullptr, &tree);

  const auto turns = context_turns(tree, 1);
  REQUIRE(turns.size() >= 4);
  CHECK(turns[0].role == Role::System);
  CHECK(turns[0].content == prompts::kSystemMessage);
  CHECK(turns[1].role == Role::User);
  CHECK(turns[1].content == prompts::render_user_question("which?"));
  CHECK(turns[1].image == "img://q/1");
  CHECK(turns[2].role == Role::Assistant);
  CHECK(starts_with(turns[2].content, "<think>"));
  CHECK(turns[3].role == Role::Tool);
  CHECK(starts_with(turns[3].content, "<tool_response>"));
}
