#pragma once

#include <optional>
#include <string>
#include <vector>

#include "searchforge/errors.hpp"
#include "searchforge/modelclient.hpp"
#include "searchforge/treesearch.hpp"

namespace searchforge::reward {

SEARCHFORGE_ERROR(GroupTooSmall);
SEARCHFORGE_ERROR(LengthMismatch);
SEARCHFORGE_ERROR(NonFiniteLogProb);
SEARCHFORGE_ERROR(OffsetsNotTiling);

struct RewardConfig {
  double alpha = 0.9;     // accuracy weight in [0, 1]
  double clip_eps = 0.2;  // > 0
  double kl_beta = 0.0;   // >= 0
};

// 1 iff the text parses Valid (complete grammar, final answer) and every
// tool_call body validates; 0 otherwise.
int format_reward(const std::string& raw);

// 1 iff the judge verifies the extracted answer; a missing answer scores 0
// without a judge call, and an unparsable judge reply scores 0.
int accuracy_reward(const std::string& question, const std::string& golden,
                    const std::vector<std::string>& candidates,
                    const std::optional<std::string>& answer, modelclient::ModelClient& judge);

// alpha * r_acc + (1 - alpha) * r_fmt.
double combined_reward(int r_acc, int r_fmt, const RewardConfig& cfg);

// A_g = R_g - mean(R); needs G >= 2, sums to zero.
std::vector<double> group_advantages(const std::vector<double>& rewards);

struct TokenLogprobs {
  std::vector<double> theta;
  std::vector<double> old_policy;
  std::vector<double> ref;
};

struct ScoredRollout {
  std::string raw_text;
  int r_format = 0;
  int r_acc = 0;
  double reward = 0.0;
  TokenLogprobs logprobs;
  // Optional per-token inclusion mask (tool-response tokens excluded from
  // the ratio sums and the KL average). Empty = include everything.
  std::vector<char> token_mask;
};

struct RolloutGroup {
  std::string question_id;
  std::vector<ScoredRollout> rollouts;
  std::vector<double> advantages;  // computed from rewards when left empty
};

struct RolloutTerm {
  double ratio = 0.0;        // sequence-level exp(sum logpi_theta - sum logpi_old)
  double unclipped = 0.0;    // ratio * A
  double clipped = 0.0;      // clip(ratio, 1-eps, 1+eps) * A
  double kl = 0.0;           // token-mean of exp(r-t) - (r-t) - 1, always >= 0
  double value = 0.0;        // min(unclipped, clipped) - beta * kl
};

RolloutTerm grpo_rollout_term(const ScoredRollout& rollout, double advantage,
                              const RewardConfig& cfg);

struct GrpoResult {
  double objective = 0.0;  // mean of per-rollout values
  std::vector<double> advantages;
  std::vector<RolloutTerm> terms;
};

GrpoResult grpo_objective(const RolloutGroup& group, const RewardConfig& cfg);

struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;
};

// Token mask for the SFT loss: true iff the token overlaps a supervised span
// and no masked span. Tokens straddling a boundary come out masked. Offsets
// must tile [0, text_len) contiguously.
std::vector<bool> build_sft_mask(const std::vector<Span>& supervised,
                                 const std::vector<Span>& masked,
                                 const std::vector<Span>& token_offsets, std::size_t text_len);

}  // namespace searchforge::reward
