// searchforge: desk-scale pipeline for synthesizing search-agent training
// data. Subcommands cover corpus ingestion, hypergraph QA generation and
// filtering, the offline tool server, expert tree search, SFT/RL export, and
// rollout scoring.
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <memory>
#include <thread>

#include <CLI11.hpp>

#include "searchforge/config.hpp"
#include "searchforge/pipeline.hpp"
#include "searchforge/prompts.hpp"
#include "searchforge/stubs.hpp"

namespace fs = std::filesystem;
using namespace searchforge;

namespace {

constexpr int kExitFailure = 1;   // invariant or search failure
constexpr int kExitBadInput = 2;  // ingestion/schema/config failure

struct GlobalOptions {
  std::string config_file;
  bool offline = false;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string mode;
};

config::PipelineConfig resolve_config(const GlobalOptions& g) {
  config::PipelineConfig cfg = config::load_pipeline_config(
      g.config_file.empty() ? std::nullopt : std::optional<fs::path>(g.config_file));
  // flags beat environment and file
  if (g.seed_set) cfg.seed = g.seed;
  if (g.offline) cfg.offline = true;
  if (!g.mode.empty()) {
    const double thr = cfg.retrieval.image_sim_threshold;
    cfg.retrieval = toolserver::RetrievalConfig::for_mode(toolserver::mode_from_string(g.mode));
    cfg.retrieval.image_sim_threshold = thr;
  }
  return cfg;
}

std::unique_ptr<modelclient::ModelClient> make_http_client(const config::EndpointSet& eps,
                                                           const std::string& name) {
  auto it = eps.endpoints.find(name);
  if (it == eps.endpoints.end())
    throw config::ConfigError("no [" + name + "] endpoint configured");
  return std::make_unique<modelclient::HttpBackend>(it->second);
}

config::EndpointSet require_endpoints(const config::PipelineConfig& cfg) {
  if (!cfg.endpoints_file)
    throw config::ConfigError("online mode needs paths.endpoints in the config; "
                              "pass --offline to run on stubs");
  return config::load_endpoints(*cfg.endpoints_file);
}

int cmd_ingest(const config::PipelineConfig& cfg, bool force) {
  if (cfg.corpus.empty()) {
    std::cerr << "ingest: no corpus manifest configured\n";
    return kExitBadInput;
  }
  if (fs::exists(cfg.index_dir / "manifest.json") && !force) {
    std::cerr << "ingest: index already exists at " << cfg.index_dir.string()
              << "; re-run with --force to overwrite\n";
    return kExitBadInput;
  }
  std::unique_ptr<modelclient::EmbeddingProvider> embedder;
  if (cfg.offline) {
    embedder = std::make_unique<modelclient::HashEmbedder>(64);
  } else {
    const auto eps = require_endpoints(cfg);
    auto it = eps.endpoints.find("embedder");
    if (it == eps.endpoints.end()) throw config::ConfigError("no [embedder] endpoint configured");
    embedder = std::make_unique<modelclient::HttpEmbedder>(it->second);
  }

  toolserver::SearchIndex index;
  const auto stats = toolserver::ingest_text(index, pipeline::load_docs(cfg.corpus), *embedder);
  std::size_t images = 0;
  if (!cfg.images.empty() && fs::exists(cfg.images))
    images = toolserver::ingest_images(index, pipeline::load_images(cfg.images), *embedder);
  toolserver::save_index(index, cfg.index_dir);
  std::cout << "ingested doc_count=" << stats.doc_count
            << " passage_count=" << stats.passage_count << " image_count=" << images << "\n";
  return 0;
}

int cmd_build_graph(const config::PipelineConfig& cfg, const std::string& out_file) {
  if (!cfg.offline)
    throw config::ConfigError("build-graph runs against live search providers only when one is "
                              "wired in; pass --offline for the stub universe");
  stubs::StubSearchProvider provider(cfg.seed);
  auto extractor = stubs::offline_extractor();
  auto annotator = stubs::offline_annotator(cfg.seed);

  hypergraph::GraphConfig graph_cfg{cfg.fanout, cfg.graph_depth};
  hypergraph::BuildReport report;
  Json graphs = Json::array();
  Json seed_rows = Json::array();
  for (const auto& seed_row : pipeline::load_seeds(cfg.seeds)) {
    auto g = hypergraph::build_hypergraph(seed_row.image_path, graph_cfg,
                                          {provider, *extractor, *annotator}, &report);
    graphs.push_back(g.to_json());
    seed_rows.push_back(Json{{"image_path", seed_row.image_path}, {"category", seed_row.category}});
  }
  Json doc;
  doc["provenance"] = Json{{"seed", cfg.seed},
                           {"fanout", cfg.fanout},
                           {"max_depth", cfg.graph_depth},
                           {"backends", "offline-stubs"},
                           {"seeds", seed_rows}};
  doc["graphs"] = graphs;
  write_text_file(out_file, doc.dump(2) + "\n");
  std::cout << "built " << graphs.size() << " graphs, " << report.expansions << " expansions, "
            << report.branch_failures.size() << " branch failures\n";
  for (const auto& f : report.branch_failures) std::cerr << "  branch failure: " << f << "\n";
  return 0;
}

std::vector<hypergraph::Hypergraph> load_graphs(const fs::path& path) {
  const Json doc = Json::parse(read_text_file(path));
  std::vector<hypergraph::Hypergraph> graphs;
  for (const auto& g : doc.at("graphs")) graphs.push_back(hypergraph::Hypergraph::from_json(g));
  return graphs;
}

int cmd_gen_qa(const config::PipelineConfig& cfg, const std::string& graph_file,
               const std::string& out_file, int intra, int inter, int inter_m) {
  const auto graphs = load_graphs(graph_file);
  std::unique_ptr<modelclient::ModelClient> generator;
  if (cfg.offline) {
    generator = stubs::offline_qa_generator(cfg.seed);
  } else {
    generator = make_http_client(require_endpoints(cfg), "generator");
  }

  Rng rng = Rng(cfg.seed).fork("qa-select");
  std::vector<Json> rows;
  for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
    for (int k = 0; k < intra; ++k) {
      const auto ctx = hypergraph::select_qa_context(graphs[gi], hypergraph::QALevel::Intra, 0, rng);
      rows.push_back(hypergraph::generate_qa(graphs[gi], ctx, *generator,
                                             "qa-g" + std::to_string(gi) + "-intra-" +
                                                 std::to_string(k))
                         .to_json());
    }
    for (int k = 0; k < inter; ++k) {
      const auto ctx =
          hypergraph::select_qa_context(graphs[gi], hypergraph::QALevel::Inter, inter_m, rng);
      rows.push_back(hypergraph::generate_qa(graphs[gi], ctx, *generator,
                                             "qa-g" + std::to_string(gi) + "-inter-" +
                                                 std::to_string(k))
                         .to_json());
    }
  }
  write_jsonl(out_file, rows);
  std::cout << "generated " << rows.size() << " qa pairs\n";
  return 0;
}

int cmd_filter_qa(const config::PipelineConfig& cfg, const std::string& in_file,
                  const std::string& out_file, const std::string& rejected_file) {
  std::vector<hypergraph::QAPair> pairs;
  for (const Json& row : read_jsonl(in_file)) pairs.push_back(hypergraph::QAPair::from_json(row));

  std::vector<std::unique_ptr<modelclient::ModelClient>> owned;
  std::vector<modelclient::ModelClient*> judges;
  if (cfg.offline) {
    owned.push_back(stubs::offline_filter_judge(cfg.seed, 17));
    owned.push_back(stubs::offline_filter_judge(cfg.seed ^ 0x5bd1e995u, 23));
  } else {
    owned.push_back(make_http_client(require_endpoints(cfg), "judge"));
  }
  for (auto& j : owned) judges.push_back(j.get());

  const auto outcome = hypergraph::filter_qa(pairs, judges);
  std::vector<Json> kept;
  for (const auto& p : outcome.kept) kept.push_back(p.to_json());
  write_jsonl(out_file, kept);
  if (!rejected_file.empty()) {
    std::vector<Json> rejected;
    for (const auto& r : outcome.rejected) {
      Json row = r.pair.to_json();
      row["reason"] = r.reason;
      rejected.push_back(std::move(row));
    }
    for (const auto& r : outcome.quarantined) {
      Json row = r.pair.to_json();
      row["reason"] = r.reason;
      row["quarantined"] = true;
      rejected.push_back(std::move(row));
    }
    write_jsonl(rejected_file, rejected);
  }
  std::cout << "kept " << outcome.kept.size() << ", rejected " << outcome.rejected.size()
            << ", quarantined " << outcome.quarantined.size() << "\n";
  return 0;
}

int cmd_export_rl(const config::PipelineConfig& cfg, const std::string& qa_file,
                  const std::string& graph_file, const std::string& out_file) {
  (void)cfg;
  std::vector<hypergraph::QAPair> pairs;
  for (const Json& row : read_jsonl(qa_file)) pairs.push_back(hypergraph::QAPair::from_json(row));
  const auto graphs = load_graphs(graph_file);
  const auto rl = pipeline::export_rl(pairs, graphs);
  write_jsonl(out_file, rl.records);
  for (const auto& reject : rl.rejects) std::cerr << "rejected " << reject << "\n";
  std::cout << "exported " << rl.records.size() << " rl records, " << rl.rejects.size()
            << " rejected\n";
  return rl.records.empty() && !pairs.empty() ? kExitBadInput : 0;
}

int cmd_serve_tools(const config::PipelineConfig& cfg, const std::string& host, int port) {
  const auto index = toolserver::load_index(cfg.index_dir);
  std::unique_ptr<modelclient::EmbeddingProvider> embedder;
  std::unique_ptr<modelclient::ModelClient> expert;
  // environment beats the endpoints file
  const char* embedder_url = std::getenv("SEARCHFORGE_EMBEDDER_URL");
  const char* expert_url = std::getenv("SEARCHFORGE_EXPERT_URL");
  if (cfg.offline) {
    embedder = std::make_unique<modelclient::HashEmbedder>(64);
    expert = stubs::offline_knowledge_expert(cfg.seed);
  } else {
    if (embedder_url) {
      modelclient::Endpoint ep;
      ep.base_url = embedder_url;
      embedder = std::make_unique<modelclient::HttpEmbedder>(ep);
    }
    if (expert_url) {
      modelclient::Endpoint ep;
      ep.base_url = expert_url;
      expert = std::make_unique<modelclient::HttpBackend>(ep);
    }
    if (!embedder || !expert) {
      const auto eps = require_endpoints(cfg);
      if (!embedder) {
        auto it = eps.endpoints.find("embedder");
        if (it == eps.endpoints.end())
          throw config::ConfigError("no [embedder] endpoint configured");
        embedder = std::make_unique<modelclient::HttpEmbedder>(it->second);
      }
      if (!expert && !eps.experts.empty())
        expert = std::make_unique<modelclient::HttpBackend>(eps.experts.front().second);
    }
  }

  toolserver::ToolService service(index, cfg.retrieval, *embedder, expert.get());
  toolserver::ToolServer server(service);
  const int bound = server.start(host, port);
  std::cout << "serving tools on http://" << host << ":" << bound << " (mode "
            << toolserver::to_string(cfg.retrieval.mode) << ", text_top_k "
            << cfg.retrieval.text_top_k << ", image_threshold "
            << cfg.retrieval.image_sim_threshold << ")\n";
  std::cout << "press Ctrl-C to stop\n";
  for (;;) std::this_thread::sleep_for(std::chrono::seconds(3600));
}

int cmd_tree_search(const config::PipelineConfig& cfg, const std::string& questions_file,
                    const std::string& experts_file, const std::string& out_file,
                    const std::string& stats_file) {
  const auto index = toolserver::load_index(cfg.index_dir);
  modelclient::HashEmbedder embedder(64);
  auto knowledge = stubs::offline_knowledge_expert(cfg.seed);
  toolserver::ToolService service(index, cfg.retrieval, embedder, knowledge.get());
  toolserver::LocalToolClient tools(service);

  std::unique_ptr<modelclient::ModelClient> judge;
  std::vector<std::pair<std::string, modelclient::Endpoint>> expert_endpoints;
  if (cfg.offline) {
    judge = stubs::offline_rule_judge();
    if (!experts_file.empty() && fs::exists(experts_file)) {
      // labels come from the file; behavior stays scripted offline
      expert_endpoints = config::load_endpoints(experts_file).experts;
    }
  } else {
    const auto eps = require_endpoints(cfg);
    judge = make_http_client(eps, "judge");
    expert_endpoints = config::load_endpoints(experts_file).experts;
  }

  treesearch::SearchConfig search_cfg;
  search_cfg.max_depth = cfg.max_depth;
  search_cfg.node_budget = cfg.node_budget;
  search_cfg.context_token_budget = cfg.context_token_budget;

  std::vector<Json> traj_rows;
  Json stats_rows = Json::array();
  std::size_t solved = 0;
  const auto questions = read_jsonl(questions_file);
  for (const Json& row : questions) {
    const std::string id = require_string(row, "id");
    const std::string golden = row.contains("golden") ? require_string(row, "golden")
                                                      : require_string(row, "answer");
    std::vector<std::string> candidates;
    if (row.contains("candidates"))
      candidates = row["candidates"].get<std::vector<std::string>>();

    protocol::MultimodalQuery question;
    question.text = require_string(row, "question");
    if (row.contains("image_ref") && row["image_ref"].is_string())
      question.image = row["image_ref"].get<std::string>();

    treesearch::ExpertPool pool;
    std::vector<std::unique_ptr<modelclient::ModelClient>> owned;
    if (cfg.offline) {
      std::vector<std::string> labels{"text_search", "image_search_by_text_query"};
      if (!expert_endpoints.empty()) {
        labels.clear();
        for (const auto& [label, _] : expert_endpoints) labels.push_back(label);
      }
      for (std::size_t j = 0; j < labels.size(); ++j) {
        owned.push_back(stubs::offline_expert(labels[j], golden,
                                              j == 0 ? stubs::ExpertBehavior::CallThenAnswer
                                                     : stubs::ExpertBehavior::AnswerWrong));
        pool.experts.push_back({labels[j], owned.back().get()});
      }
    } else {
      for (const auto& [label, endpoint] : expert_endpoints) {
        owned.push_back(std::make_unique<modelclient::HttpBackend>(endpoint));
        pool.experts.push_back({label, owned.back().get()});
      }
    }
    if (pool.experts.empty()) throw config::ConfigError("expert pool is empty");

    treesearch::SearchStats stats;
    auto found = treesearch::run_tree_search(question, golden, candidates, pool, tools, *judge,
                                             search_cfg, &stats);
    Json st;
    st["id"] = id;
    st["expanded"] = stats.expanded;
    st["nodes_created"] = stats.nodes_created;
    st["judged"] = stats.judged;
    st["pruned"] = stats.pruned;
    st["format_invalid"] = stats.format_invalid;
    st["budget_exhausted"] = stats.budget_exhausted;
    st["solved"] = found.has_value();
    stats_rows.push_back(std::move(st));
    if (found) {
      ++solved;
      traj_rows.push_back(treesearch::trajectory_export_row(id, *found));
    }
  }
  write_jsonl(out_file, traj_rows);
  if (!stats_file.empty())
    write_text_file(stats_file, Json{{"per_question", stats_rows}}.dump(2) + "\n");
  std::cout << "solved " << solved << "/" << questions.size() << " questions\n";
  return 0;
}

int cmd_export_sft(const std::string& traj_file, const std::string& out_file) {
  std::vector<Json> rows;
  for (const Json& row : read_jsonl(traj_file)) {
    std::optional<std::string> image;
    if (row.contains("image_ref") && row["image_ref"].is_string())
      image = row["image_ref"].get<std::string>();
    const auto rec = treesearch::sft_record_from_raw(
        require_string(row, "id"), require_string(row, "question_text"), image,
        require_string(row, "raw_text"));
    rows.push_back(rec.to_json());
  }
  write_jsonl(out_file, rows);
  std::cout << "exported " << rows.size() << " sft records\n";
  return 0;
}

int cmd_score_rollouts(const config::PipelineConfig& cfg, const std::string& in_file,
                       const std::string& out_file, double alpha, double eps, double beta) {
  reward::RewardConfig reward_cfg;
  reward_cfg.alpha = alpha;
  reward_cfg.clip_eps = eps;
  reward_cfg.kl_beta = beta;

  std::unique_ptr<modelclient::ModelClient> judge;
  if (cfg.offline) {
    judge = stubs::offline_rule_judge();
  } else {
    judge = make_http_client(require_endpoints(cfg), "judge");
  }
  const auto rows = read_jsonl(in_file);
  const auto scored = pipeline::score_rollouts(rows, reward_cfg, *judge);
  write_jsonl(out_file, scored);
  std::cout << "scored " << scored.size() << " groups (" << rows.size() << " rollouts)\n";
  return 0;
}

int cmd_pipeline_smoke(const config::PipelineConfig& cfg, const std::string& out_dir,
                       const std::string& inject_fault) {
  if (!cfg.offline) {
    std::cerr << "pipeline-smoke requires --offline\n";
    return kExitBadInput;
  }
  pipeline::SmokeOptions options;
  options.out_dir = out_dir;
  options.seed = cfg.seed;
  options.inject_fault = inject_fault;
  const auto report = pipeline::run_pipeline_smoke(options);
  int passed = 0;
  for (const auto& c : report.checks) {
    std::cout << (c.passed ? "[ok]   " : "[FAIL] ") << c.name
              << (c.detail.empty() ? "" : "  (" + c.detail + ")") << "\n";
    if (c.passed) ++passed;
  }
  std::cout << passed << "/" << report.checks.size() << " invariant checks passed\n";
  if (!report.ok()) {
    std::cerr << "first failed invariant: " << report.first_failure() << "\n";
    return kExitFailure;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"searchforge: data synthesis and training support for multimodal search agents"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  GlobalOptions global;
  app.add_option("--config", global.config_file, "pipeline TOML config");
  app.add_flag("--offline", global.offline, "force deterministic scripted backends everywhere");
  auto* seed_opt = app.add_option("--seed", global.seed, "rng seed");
  app.add_option("--mode", global.mode, "train|eval retrieval defaults");
  std::string index_dir;
  app.add_option("--index-dir", index_dir, "dense index directory");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "build the dense retrieval index");
  std::string corpus, images, seeds;
  bool force = false;
  ingest->add_option("--corpus", corpus, "docs jsonl {title, body, url}");
  ingest->add_option("--images", images, "image jsonl {image_id, uri, caption}");
  ingest->add_flag("--force", force, "overwrite an existing index");

  // build-graph
  auto* build = app.add_subcommand("build-graph", "grow hypergraphs from seed images");
  std::string graph_out = "out/hypergraph.json";
  int fanout = 0, depth = -1;
  build->add_option("--seeds", seeds, "seed manifest jsonl {image_path, category}");
  build->add_option("--out", graph_out, "output graph json");
  build->add_option("--fanout", fanout, "children per modality per expansion (K)");
  build->add_option("--depth", depth, "maximum expansion depth (D)");

  // gen-qa
  auto* genqa = app.add_subcommand("gen-qa", "generate qa pairs from a hypergraph");
  std::string graph_in = "out/hypergraph.json", qa_out = "out/qa_raw.jsonl";
  int n_intra = 3, n_inter = 2, inter_m = 2;
  genqa->add_option("--graph", graph_in, "hypergraph json");
  genqa->add_option("--out", qa_out, "output qa jsonl");
  genqa->add_option("--intra", n_intra, "intra-edge pairs per graph");
  genqa->add_option("--inter", n_inter, "inter-edge pairs per graph");
  genqa->add_option("--inter-m", inter_m, "edges aggregated per inter pair");

  // filter-qa
  auto* filter = app.add_subcommand("filter-qa", "dedup + judge-filter qa pairs");
  std::string filter_in = "out/qa_raw.jsonl", filter_out = "out/qa_filtered.jsonl",
              rejected_out = "out/qa_rejected.jsonl";
  filter->add_option("--in", filter_in, "qa jsonl");
  filter->add_option("--out", filter_out, "kept jsonl");
  filter->add_option("--rejected", rejected_out, "rejections jsonl");

  // export-rl
  auto* exprl = app.add_subcommand("export-rl", "emit RL training records");
  std::string rl_qa = "out/qa_filtered.jsonl", rl_graph = "out/hypergraph.json",
              rl_out = "out/rl.jsonl";
  exprl->add_option("--qa", rl_qa, "filtered qa jsonl");
  exprl->add_option("--graph", rl_graph, "hypergraph json for image resolution");
  exprl->add_option("--out", rl_out, "output jsonl");

  // serve-tools
  auto* serve = app.add_subcommand("serve-tools", "run the HTTP tool server");
  std::string host = "127.0.0.1";
  int port = 8722, text_top_k = 0;
  double image_threshold = -1.0;
  serve->add_option("--host", host, "bind host");
  serve->add_option("--port", port, "bind port");
  serve->add_option("--text-top-k", text_top_k, "passages returned per query");
  serve->add_option("--image-threshold", image_threshold, "minimum image similarity");

  // tree-search
  auto* tsearch = app.add_subcommand("tree-search", "explore trajectories with tool experts");
  std::string q_file = "out/rl.jsonl", experts_file, traj_out = "out/traj.jsonl",
              stats_out = "out/stats.json";
  tsearch->add_option("--questions", q_file, "questions jsonl {id, question, golden, image_ref}");
  tsearch->add_option("--experts", experts_file, "experts toml");
  tsearch->add_option("--out", traj_out, "trajectories jsonl");
  tsearch->add_option("--stats", stats_out, "per-question stats json");

  // export-sft
  auto* expsft = app.add_subcommand("export-sft", "emit SFT records with loss-mask spans");
  std::string sft_traj = "out/traj.jsonl", sft_out = "out/sft.jsonl";
  expsft->add_option("--traj", sft_traj, "trajectories jsonl");
  expsft->add_option("--out", sft_out, "output jsonl");

  // score-rollouts
  auto* score = app.add_subcommand("score-rollouts", "reward + objective for rollout groups");
  std::string score_in = "out/rollouts.jsonl", score_out = "out/scores.jsonl";
  double alpha = 0.9, eps = 0.2, beta = 0.0;
  score->add_option("--in", score_in, "rollouts jsonl");
  score->add_option("--out", score_out, "scores jsonl");
  score->add_option("--alpha", alpha, "accuracy weight");
  score->add_option("--eps", eps, "clip epsilon");
  score->add_option("--beta", beta, "kl penalty weight");

  // pipeline-smoke
  auto* smoke = app.add_subcommand("pipeline-smoke", "end-to-end offline run with invariant checks");
  std::string smoke_out = "out/smoke";
  std::string inject_fault;
  smoke->add_option("--out", smoke_out, "output directory");
  smoke->add_option("--inject-fault", inject_fault, "corrupt an artifact to test the checks");

  CLI11_PARSE(app, argc, argv);

  try {
    global.seed_set = seed_opt->count() > 0;
    config::PipelineConfig cfg = resolve_config(global);
    if (!corpus.empty()) cfg.corpus = corpus;
    if (!images.empty()) cfg.images = images;
    if (!index_dir.empty()) cfg.index_dir = index_dir;
    if (!seeds.empty()) cfg.seeds = seeds;
    if (fanout > 0) cfg.fanout = fanout;
    if (depth >= 0) cfg.graph_depth = depth;
    if (text_top_k > 0) cfg.retrieval.text_top_k = text_top_k;
    if (image_threshold >= 0.0) cfg.retrieval.image_sim_threshold = image_threshold;

    if (app.got_subcommand(ingest)) return cmd_ingest(cfg, force);
    if (app.got_subcommand(build)) return cmd_build_graph(cfg, graph_out);
    if (app.got_subcommand(genqa)) return cmd_gen_qa(cfg, graph_in, qa_out, n_intra, n_inter, inter_m);
    if (app.got_subcommand(filter)) return cmd_filter_qa(cfg, filter_in, filter_out, rejected_out);
    if (app.got_subcommand(exprl)) return cmd_export_rl(cfg, rl_qa, rl_graph, rl_out);
    if (app.got_subcommand(serve)) return cmd_serve_tools(cfg, host, port);
    if (app.got_subcommand(tsearch))
      return cmd_tree_search(cfg, q_file, experts_file, traj_out, stats_out);
    if (app.got_subcommand(expsft)) return cmd_export_sft(sft_traj, sft_out);
    if (app.got_subcommand(score)) return cmd_score_rollouts(cfg, score_in, score_out, alpha, eps, beta);
    if (app.got_subcommand(smoke)) return cmd_pipeline_smoke(cfg, smoke_out, inject_fault);
  } catch (const toolserver::EmptyCorpus& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBadInput;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBadInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBadInput;
  }
  return 0;
}
