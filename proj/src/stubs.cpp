#include "searchforge/stubs.hpp"

#include <stdexcept>

#include <nlohmann/json.hpp>

#include "searchforge/util.hpp"

namespace searchforge::stubs {

using modelclient::ChatTurn;
using modelclient::FunctionBackend;
using modelclient::ModelClient;
using modelclient::Role;

namespace {

constexpr const char* kWordPool[] = {
    "archive",  "basalt",   "canal",    "dynamo",  "estuary",  "foundry", "granite", "harbor",
    "isotope",  "junction", "kiln",     "lagoon",  "meridian", "nebula",  "obelisk", "pavilion",
    "quarry",   "reservoir", "summit",  "terrace", "uplands",  "viaduct", "warehouse", "xenon",
    "yardline", "zeppelin", "aqueduct", "breaker", "causeway", "derrick", "embankment", "flume",
    "gangway",  "hangar",   "inlet",    "jetty",   "keystone", "lattice", "monolith", "narrows",
    "outpost",  "pylon",    "quay",     "rampart", "silo",     "trestle", "underpass", "vault",
    "windlass", "yoke",     "zenith",   "anchor",  "bastion",  "cistern", "dockyard", "esplanade",
    "furnace",  "gantry",   "headland", "icehouse", "jibboom", "kedge",   "lighthouse", "mooring",
};
constexpr std::size_t kWordPoolSize = sizeof(kWordPool) / sizeof(kWordPool[0]);

constexpr int kLinksPerPage = 4;

std::string pick_word(std::uint64_t h, int slot) {
  return kWordPool[(h >> (slot * 6)) % kWordPoolSize];
}

std::string find_between(const std::string& text, const std::string& prefix,
                         const std::string& suffix) {
  const std::size_t b = text.find(prefix);
  if (b == std::string::npos) return "";
  const std::size_t start = b + prefix.size();
  const std::size_t e = suffix.empty() ? std::string::npos : text.find(suffix, start);
  return trim(text.substr(start, e == std::string::npos ? std::string::npos : e - start));
}

const ChatTurn* find_user_turn(const std::vector<ChatTurn>& turns) {
  for (const ChatTurn& t : turns)
    if (t.role == Role::User) return &t;
  return nullptr;
}

int count_assistant_turns(const std::vector<ChatTurn>& turns) {
  int n = 0;
  for (const ChatTurn& t : turns)
    if (t.role == Role::Assistant) ++n;
  return n;
}

}  // namespace

std::vector<std::string> topic_words(std::uint64_t seed, const std::string& key, int count) {
  std::vector<std::string> out;
  const std::uint64_t h = fnv1a64(key) ^ seed;
  for (int i = 0; i < count; ++i) out.push_back(pick_word(h, i));
  return out;
}

std::string StubSearchProvider::page_url(const std::string& parent_key, int i) const {
  const std::string key = parent_key + "#page" + std::to_string(i);
  const auto words = topic_words(seed_, key, 2);
  return "http://stub.local/" + words[0] + "-" + words[1] + "/" +
         to_hex(fnv1a64(key) ^ seed_, 10);
}

std::string StubSearchProvider::image_ref(const std::string& parent_key, int i) const {
  const std::string key = parent_key + "#img" + std::to_string(i);
  const auto words = topic_words(seed_, key, 2);
  return "img://stub/" + words[0] + "_" + words[1] + "/" + to_hex(fnv1a64(key) ^ seed_, 10);
}

hypergraph::WebPage StubSearchProvider::fetch_page(const std::string& url) {
  if (options_.fail_refs.count(url)) throw std::runtime_error("stub fetch failure for " + url);
  const auto words = topic_words(seed_, url, 6);
  hypergraph::WebPage page;
  page.url = url;
  page.title = "About " + words[0] + " " + words[1];

  std::string body;
  body += "The " + words[0] + " near the " + words[1] + " was documented alongside the " +
          words[2] + " record. ";
  body += "Survey notes describe the " + words[3] + " and its relation to the " + words[4] +
          ", including measurements archived under " + to_hex(fnv1a64(url + "#fact"), 6) + ". ";
  body += "Later catalogues reference the " + words[5] + " as the defining feature of this site. ";
  for (int i = 0; i < kLinksPerPage; ++i)
    body += "\nSee also: " + page_url(url + "#link", i);
  for (int i = 0; i < kLinksPerPage; ++i)
    body += "\nImage: " + image_ref(url + "#embed", i);
  page.content = body;
  return page;
}

std::string StubSearchProvider::fetch_image(const std::string& link) {
  if (options_.fail_refs.count(link)) throw std::runtime_error("stub image failure for " + link);
  return link;  // links already are resolvable refs in the stub universe
}

std::vector<hypergraph::WebPage> StubSearchProvider::image_reverse_search(
    const std::string& image_ref_in, int k) {
  if (options_.fail_refs.count(image_ref_in))
    throw std::runtime_error("stub reverse-search failure for " + image_ref_in);
  const int n = std::max(0, k - options_.underfill_reverse);
  std::vector<hypergraph::WebPage> pages;
  for (int i = 0; i < n; ++i) pages.push_back(fetch_page(page_url(image_ref_in + "#rev", i)));
  return pages;
}

std::vector<std::string> StubSearchProvider::image_visual_search(const std::string& image_ref_in,
                                                                 int k) {
  if (options_.fail_refs.count(image_ref_in))
    throw std::runtime_error("stub visual-search failure for " + image_ref_in);
  const int n = std::max(0, k - options_.underfill_visual);
  std::vector<std::string> refs;
  for (int i = 0; i < n; ++i) refs.push_back(image_ref(image_ref_in + "#vis", i));
  return refs;
}

std::unique_ptr<ModelClient> offline_extractor() {
  return std::make_unique<FunctionBackend>([](const std::vector<ChatTurn>& turns) {
    int k = kLinksPerPage;
    if (!turns.empty()) {
      const std::string& sys = turns.front().content;
      const std::size_t p = sys.find("top-");
      if (p != std::string::npos) k = std::atoi(sys.c_str() + p + 4);
    }
    const ChatTurn* user = find_user_turn(turns);
    const std::string payload = user ? user->content : "";

    auto collect = [&](const std::string& marker) {
      std::vector<std::string> out;
      std::size_t pos = 0;
      while (static_cast<int>(out.size()) < k &&
             (pos = payload.find(marker, pos)) != std::string::npos) {
        pos += marker.size();
        std::size_t end = payload.find_first_of(" \n\t", pos);
        if (end == std::string::npos) end = payload.size();
        out.push_back(payload.substr(pos, end - pos));
        pos = end;
      }
      return out;
    };

    nlohmann::json reply;
    reply["urls"] = collect("See also: ");
    reply["image_links"] = collect("Image: ");
    return reply.dump();
  });
}

std::unique_ptr<ModelClient> offline_annotator(std::uint64_t seed) {
  return std::make_unique<FunctionBackend>([seed](const std::vector<ChatTurn>& turns) {
    const ChatTurn* user = find_user_turn(turns);
    if (!user) return std::string("unlabeled");
    if (user->image) {
      const auto words = topic_words(seed, *user->image, 3);
      return "Photo of the " + words[0] + " " + words[1] + " beside a " + words[2] +
             ", reference " + to_hex(fnv1a64(*user->image) ^ seed, 6);
    }
    const auto words = topic_words(seed, user->content, 3);
    return "Covers the " + words[0] + " and the " + words[1] + " with notes on the " + words[2] +
           ", record " + to_hex(fnv1a64(user->content) ^ seed, 6);
  });
}

std::unique_ptr<ModelClient> offline_qa_generator(std::uint64_t seed) {
  return std::make_unique<FunctionBackend>([seed](const std::vector<ChatTurn>& turns) {
    const std::uint64_t h = fnv1a64(modelclient::render_turns(turns)) ^ seed;
    nlohmann::json reply;
    reply["question"] = "Which catalog record is associated with the " +
                        std::string(pick_word(h, 0)) + " depicted in the query image (series " +
                        to_hex(h, 8) + ")?";
    reply["answer"] = "record " + to_hex(h >> 8, 6);
    return reply.dump();
  });
}

std::unique_ptr<ModelClient> offline_filter_judge(std::uint64_t seed, int reject_mod) {
  return std::make_unique<FunctionBackend>([seed, reject_mod](const std::vector<ChatTurn>& turns) {
    if (reject_mod <= 0) return std::string("Yes");
    const ChatTurn* user = find_user_turn(turns);
    const std::string question = user ? find_between(user->content, "Question: ", "\n") : "";
    const std::string probe = user ? find_between(user->content, "Probe: ", "\n") : "";
    const std::uint64_t h = fnv1a64(question + "|" + probe) ^ seed;
    return std::string(h % static_cast<std::uint64_t>(reject_mod) == 0 ? "No" : "Yes");
  });
}

std::unique_ptr<ModelClient> offline_rule_judge() {
  return std::make_unique<FunctionBackend>([](const std::vector<ChatTurn>& turns) {
    const ChatTurn* user = find_user_turn(turns);
    if (!user) return std::string("No");
    const std::string golden =
        find_between(user->content, "Ground Truth Answer: ", "\nCandidate Answers:");
    const std::string response =
        find_between(user->content, "Model Response: ", "\nEvaluation Instructions");
    const std::string g = normalize_text(golden);
    const std::string r = normalize_text(response);
    if (g.empty() || r.empty()) return std::string("No");
    return std::string(r.find(g) != std::string::npos ? "Yes" : "No");
  });
}

std::unique_ptr<ModelClient> offline_knowledge_expert(std::uint64_t seed) {
  return std::make_unique<FunctionBackend>([seed](const std::vector<ChatTurn>& turns) {
    const ChatTurn* user = find_user_turn(turns);
    const std::string query = user ? user->content : "";
    const auto words = topic_words(seed, query, 2);
    return "The archive links " + words[0] + " with " + words[1] + " under record " +
           to_hex(fnv1a64(query) ^ seed, 6) + ".";
  });
}

std::unique_ptr<ModelClient> offline_expert(const std::string& tool_label,
                                            const std::string& golden, ExpertBehavior behavior) {
  return std::make_unique<FunctionBackend>(
      [tool_label, golden, behavior](const std::vector<ChatTurn>& turns) {
        const int rounds = count_assistant_turns(turns);
        const ChatTurn* user = find_user_turn(turns);
        std::string question = user ? user->content : "";
        const std::size_t q = question.find("Question: ");
        if (q != std::string::npos) question = trim(question.substr(q + 10));

        if (behavior == ExpertBehavior::AnswerWrong)
          return std::string("<think>The evidence already on hand settles this.</think>\n"
                             "<answer>unknown</answer>");
        if (behavior == ExpertBehavior::AnswerImmediately || rounds >= 1)
          return "<think>The gathered evidence is sufficient to answer.</think>\n<answer>" +
                 golden + "</answer>";

        nlohmann::json call;
        call["name"] = tool_label;
        call["arguments"] = {{"query_list", {question}}};
        return "<think>Consulting " + tool_label + " for supporting evidence.</think>\n" +
               "<tool_call>" + call.dump() + "</tool_call>";
      });
}

}  // namespace searchforge::stubs
