#pragma once

#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "searchforge/hypergraph.hpp"
#include "searchforge/modelclient.hpp"

namespace searchforge::stubs {

// Deterministic synthetic web: page content, urls, and image refs are all
// derived from hashes of the thing being expanded, so identical seeds give
// byte-identical graphs. Pages embed link markers ("See also:" / "Image:")
// that the offline extractor reads back out.
class StubSearchProvider : public hypergraph::SearchProvider {
 public:
  struct Options {
    int underfill_reverse = 0;  // return k - underfill results
    int underfill_visual = 0;
    std::set<std::string> fail_refs;  // refs whose expansion throws
  };

  explicit StubSearchProvider(std::uint64_t seed) : seed_(seed) {}
  StubSearchProvider(std::uint64_t seed, Options options) : seed_(seed), options_(options) {}

  std::vector<hypergraph::WebPage> image_reverse_search(const std::string& image_ref,
                                                        int k) override;
  std::vector<std::string> image_visual_search(const std::string& image_ref, int k) override;
  hypergraph::WebPage fetch_page(const std::string& url) override;
  std::string fetch_image(const std::string& link) override;

  std::string page_url(const std::string& parent_key, int i) const;
  std::string image_ref(const std::string& parent_key, int i) const;

 private:
  std::uint64_t seed_;
  Options options_;
};

// Topic words drawn deterministically from a fixed pool; shared between the
// provider and the annotator so captions relate to refs.
std::vector<std::string> topic_words(std::uint64_t seed, const std::string& key, int count);

// Regex extraction of the stub page's link markers; honors the top-K stated
// in the system turn. Replies {"urls": [...], "image_links": [...]}.
std::unique_ptr<modelclient::ModelClient> offline_extractor();

// Deterministic captions/summaries derived from the payload.
std::unique_ptr<modelclient::ModelClient> offline_annotator(std::uint64_t seed);

// Produces a unique {"question","answer"} object per filled template.
std::unique_ptr<modelclient::ModelClient> offline_qa_generator(std::uint64_t seed);

// Yes/No filter judge; rejects a deterministic fraction of probes
// (hash(question+probe) % reject_mod == 0 -> "No"). reject_mod <= 0 accepts
// everything.
std::unique_ptr<modelclient::ModelClient> offline_filter_judge(std::uint64_t seed, int reject_mod);

// Rule-based verdict: parses the golden answer and model response back out
// of the judge prompt and answers Yes iff they match after normalization.
std::unique_ptr<modelclient::ModelClient> offline_rule_judge();

// Knowledge expert for model_search: deterministic one-line answer per query.
std::unique_ptr<modelclient::ModelClient> offline_knowledge_expert(std::uint64_t seed);

enum class ExpertBehavior {
  CallThenAnswer,    // round 0: tool call with its specialty; later: golden answer
  AnswerWrong,       // immediate wrong answer
  AnswerImmediately  // immediate golden answer
};

// Tool expert for offline tree search; `golden` is the per-question answer
// key the CallThenAnswer/AnswerImmediately behaviors emit.
std::unique_ptr<modelclient::ModelClient> offline_expert(const std::string& tool_label,
                                                         const std::string& golden,
                                                         ExpertBehavior behavior);

}  // namespace searchforge::stubs
