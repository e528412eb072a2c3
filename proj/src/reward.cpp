#include "searchforge/reward.hpp"

#include <algorithm>
#include <cmath>

#include "searchforge/protocol.hpp"

namespace searchforge::reward {

int format_reward(const std::string& raw) {
  const protocol::ParseResult parsed = protocol::parse_trajectory(raw);
  if (parsed.verdict != protocol::Verdict::Valid) return 0;
  for (const protocol::Segment& s : parsed.segments) {
    if (s.kind == protocol::SegmentKind::ToolCall && !s.parsed_call) return 0;
  }
  return 1;
}

int accuracy_reward(const std::string& question, const std::string& golden,
                    const std::vector<std::string>& candidates,
                    const std::optional<std::string>& answer, modelclient::ModelClient& judge) {
  if (!answer) return 0;
  try {
    const auto verdict = treesearch::verify_answer(question, golden, candidates, *answer, judge);
    return verdict.correct() ? 1 : 0;
  } catch (const Error&) {
    return 0;
  }
}

double combined_reward(int r_acc, int r_fmt, const RewardConfig& cfg) {
  return cfg.alpha * r_acc + (1.0 - cfg.alpha) * r_fmt;
}

std::vector<double> group_advantages(const std::vector<double>& rewards) {
  if (rewards.size() < 2)
    throw GroupTooSmall("group size " + std::to_string(rewards.size()) + " < 2");
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= static_cast<double>(rewards.size());
  std::vector<double> advantages;
  advantages.reserve(rewards.size());
  for (double r : rewards) advantages.push_back(r - mean);
  return advantages;
}

namespace {

void check_logprobs(const ScoredRollout& r) {
  const std::size_t n = r.logprobs.theta.size();
  if (r.logprobs.old_policy.size() != n || r.logprobs.ref.size() != n)
    throw LengthMismatch("theta/old/ref lengths " + std::to_string(n) + "/" +
                         std::to_string(r.logprobs.old_policy.size()) + "/" +
                         std::to_string(r.logprobs.ref.size()));
  if (!r.token_mask.empty() && r.token_mask.size() != n)
    throw LengthMismatch("token_mask length " + std::to_string(r.token_mask.size()));
  auto finite = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  if (!finite(r.logprobs.theta) || !finite(r.logprobs.old_policy) || !finite(r.logprobs.ref))
    throw NonFiniteLogProb("log-probabilities must be finite");
}

}  // namespace

RolloutTerm grpo_rollout_term(const ScoredRollout& rollout, double advantage,
                              const RewardConfig& cfg) {
  check_logprobs(rollout);
  const std::size_t n = rollout.logprobs.theta.size();

  double log_ratio = 0.0;
  double kl_sum = 0.0;
  std::size_t included = 0;
  for (std::size_t t = 0; t < n; ++t) {
    if (!rollout.token_mask.empty() && !rollout.token_mask[t]) continue;
    ++included;
    log_ratio += rollout.logprobs.theta[t] - rollout.logprobs.old_policy[t];
    const double d = rollout.logprobs.ref[t] - rollout.logprobs.theta[t];
    kl_sum += std::exp(d) - d - 1.0;  // >= 0 for every token
  }

  RolloutTerm term;
  term.ratio = std::exp(log_ratio);
  term.kl = included ? kl_sum / static_cast<double>(included) : 0.0;
  term.unclipped = term.ratio * advantage;
  const double clipped_ratio =
      std::clamp(term.ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps);
  term.clipped = clipped_ratio * advantage;
  term.value = std::min(term.unclipped, term.clipped) - cfg.kl_beta * term.kl;
  return term;
}

GrpoResult grpo_objective(const RolloutGroup& group, const RewardConfig& cfg) {
  if (group.rollouts.size() < 2)
    throw GroupTooSmall("group size " + std::to_string(group.rollouts.size()) + " < 2");

  GrpoResult out;
  if (!group.advantages.empty()) {
    if (group.advantages.size() != group.rollouts.size())
      throw LengthMismatch("advantages/rollouts size mismatch");
    out.advantages = group.advantages;
  } else {
    std::vector<double> rewards;
    rewards.reserve(group.rollouts.size());
    for (const ScoredRollout& r : group.rollouts) rewards.push_back(r.reward);
    out.advantages = group_advantages(rewards);
  }

  double total = 0.0;
  for (std::size_t i = 0; i < group.rollouts.size(); ++i) {
    RolloutTerm term = grpo_rollout_term(group.rollouts[i], out.advantages[i], cfg);
    total += term.value;
    out.terms.push_back(term);
  }
  out.objective = total / static_cast<double>(group.rollouts.size());
  return out;
}

std::vector<bool> build_sft_mask(const std::vector<Span>& supervised,
                                 const std::vector<Span>& masked,
                                 const std::vector<Span>& token_offsets, std::size_t text_len) {
  std::size_t cursor = 0;
  for (const Span& t : token_offsets) {
    if (t.begin != cursor || t.end <= t.begin)
      throw OffsetsNotTiling("token at " + std::to_string(t.begin) + " does not continue " +
                             std::to_string(cursor));
    cursor = t.end;
  }
  if (cursor != text_len)
    throw OffsetsNotTiling("offsets end at " + std::to_string(cursor) + ", text length " +
                           std::to_string(text_len));

  auto overlaps = [](const Span& a, const Span& b) { return a.begin < b.end && b.begin < a.end; };
  std::vector<bool> mask;
  mask.reserve(token_offsets.size());
  for (const Span& t : token_offsets) {
    const bool in_supervised =
        std::any_of(supervised.begin(), supervised.end(), [&](const Span& s) { return overlaps(t, s); });
    const bool in_masked =
        std::any_of(masked.begin(), masked.end(), [&](const Span& s) { return overlaps(t, s); });
    mask.push_back(in_supervised && !in_masked);
  }
  return mask;
}

}  // namespace searchforge::reward
