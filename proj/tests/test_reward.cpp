#include <doctest.h>

#include <cmath>

#include "searchforge/reward.hpp"
#include "searchforge/util.hpp"

using namespace searchforge;
using namespace searchforge::reward;

namespace {

ScoredRollout rollout_with(std::vector<double> theta, std::vector<double> old_policy,
                           std::vector<double> ref) {
  ScoredRollout r;
  r.logprobs.theta = std::move(theta);
  r.logprobs.old_policy = std::move(old_policy);
  r.logprobs.ref = std::move(ref);
  return r;
}

}  // namespace

TEST_CASE("format_reward is 1 exactly for valid complete trajectories with parsable calls") {
  CHECK(format_reward("<think>x</think>\n<answer>y</answer>") == 1);
  CHECK(format_reward("<think>x</think><answer>y</answer>") == 1);

  SUBCASE("missing closing answer tag") {
    CHECK(format_reward("<think>x</think><answer>y") == 0);
  }
  SUBCASE("incomplete trajectory (no final answer)") {
    CHECK(format_reward("<think>x</think>") == 0);
  }
  SUBCASE("valid tags but tool-call JSON lacking query_list") {
    CHECK(format_reward("<think>a</think>"
                        "<tool_call>{\"name\":\"text_search\",\"arguments\":{}}</tool_call>"
                        "<tool_response>r</tool_response>"
                        "<think>b</think><answer>c</answer>") == 0);
  }
  SUBCASE("full valid round with a parsable call") {
    CHECK(format_reward("<think>a</think>"
                        "<tool_call>{\"name\":\"text_search\",\"arguments\":"
                        "{\"query_list\":[\"q\"]}}</tool_call>"
                        "<tool_response>r</tool_response>"
                        "<think>b</think><answer>c</answer>") == 1);
  }
  SUBCASE("idempotence") {
    const std::string raw = "<think>x</think><answer>y</answer>";
    CHECK(format_reward(raw) == format_reward(raw));
  }
}

TEST_CASE("accuracy_reward maps judge verdicts to binary rewards") {
  modelclient::FunctionBackend yes(
      [](const std::vector<modelclient::ChatTurn>&) { return std::string("Yes"); });
  modelclient::FunctionBackend no(
      [](const std::vector<modelclient::ChatTurn>&) { return std::string("No"); });
  modelclient::FunctionBackend vague(
      [](const std::vector<modelclient::ChatTurn>&) { return std::string("hmm"); });

  CHECK(accuracy_reward("q", "g", {}, std::string("a"), yes) == 1);
  CHECK(accuracy_reward("q", "g", {}, std::string("a"), no) == 0);
  CHECK(accuracy_reward("q", "g", {}, std::string("a"), vague) == 0);

  SUBCASE("missing answer scores 0 without calling the judge") {
    int calls = 0;
    modelclient::FunctionBackend counting([&](const std::vector<modelclient::ChatTurn>&) {
      ++calls;
      return std::string("Yes");
    });
    CHECK(accuracy_reward("q", "g", {}, std::nullopt, counting) == 0);
    CHECK(calls == 0);
  }
}

TEST_CASE("combined_reward is the exact convex combination") {
  RewardConfig cfg;
  cfg.alpha = 1.0;
  CHECK(combined_reward(1, 0, cfg) == doctest::Approx(1.0));
  cfg.alpha = 0.9;
  CHECK(combined_reward(0, 1, cfg) == doctest::Approx(0.1));
  cfg.alpha = 0.5;
  CHECK(combined_reward(1, 1, cfg) == doctest::Approx(1.0));

  SUBCASE("bounded in [0,1] for all alpha and binary inputs") {
    for (double alpha : {0.0, 0.25, 0.5, 0.75, 1.0})
      for (int acc : {0, 1})
        for (int fmt : {0, 1}) {
          cfg.alpha = alpha;
          const double r = combined_reward(acc, fmt, cfg);
          CHECK(r >= 0.0);
          CHECK(r <= 1.0);
        }
  }
}

TEST_CASE("group_advantages subtracts the group mean") {
  SUBCASE("identical rewards force zero advantages") {
    const auto a = group_advantages({0.7, 0.7, 0.7});
    for (double v : a) CHECK(v == doctest::Approx(0.0));
  }
  SUBCASE("hand case: mean 0.6") {
    const auto a = group_advantages({1, 0, 0, 1, 1});
    CHECK(a[0] == doctest::Approx(0.4));
    CHECK(a[1] == doctest::Approx(-0.6));
    CHECK(a[2] == doctest::Approx(-0.6));
    CHECK(a[3] == doctest::Approx(0.4));
    CHECK(a[4] == doctest::Approx(0.4));
  }
  SUBCASE("zero-sum property on random groups") {
    Rng rng(123);
    for (int i = 0; i < 1000; ++i) {
      std::vector<double> rewards;
      const std::size_t g = 2 + rng.below(7);
      for (std::size_t k = 0; k < g; ++k) rewards.push_back(rng.unit());
      // independent mean computation
      double mean = 0.0;
      for (double r : rewards) mean += r;
      mean /= static_cast<double>(rewards.size());
      const auto a = group_advantages(rewards);
      double sum = 0.0;
      for (std::size_t k = 0; k < a.size(); ++k) {
        sum += a[k];
        CHECK(a[k] == doctest::Approx(rewards[k] - mean).epsilon(1e-12));
      }
      CHECK(std::fabs(sum) <= 1e-9);
    }
  }
  SUBCASE("groups below 2 are rejected") {
    CHECK_THROWS_AS(group_advantages({1.0}), GroupTooSmall);
  }
}

TEST_CASE("grpo per-rollout term: hand-computed clip cases") {
  RewardConfig cfg;
  cfg.clip_eps = 0.2;
  cfg.kl_beta = 0.0;
  // one token with logtheta - logold = ln 2 -> ratio 2
  const double ln2 = std::log(2.0);
  auto rollout = rollout_with({-1.0 + ln2}, {-1.0}, {-1.0 + ln2});

  SUBCASE("A=+1: clip binds at 1.2") {
    const auto term = grpo_rollout_term(rollout, +1.0, cfg);
    CHECK(std::fabs(term.ratio - 2.0) <= 1e-12);
    CHECK(std::fabs(term.value - 1.2) <= 1e-12);
  }
  SUBCASE("A=-1: clip does not protect, min takes -2") {
    const auto term = grpo_rollout_term(rollout, -1.0, cfg);
    CHECK(std::fabs(term.value - (-2.0)) <= 1e-12);
  }
  SUBCASE("ratio below the band with A=+1 takes the raw term") {
    auto shrunk = rollout_with({-1.0 - ln2}, {-1.0}, {-1.0 - ln2});
    const auto term = grpo_rollout_term(shrunk, +1.0, cfg);
    CHECK(std::fabs(term.ratio - 0.5) <= 1e-12);
    CHECK(std::fabs(term.value - 0.5) <= 1e-12);
  }
}

TEST_CASE("grpo objective collapses to zero when the three policies coincide") {
  RewardConfig cfg;
  Rng rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    RolloutGroup group;
    const std::size_t g = 2 + rng.below(5);
    for (std::size_t i = 0; i < g; ++i) {
      ScoredRollout r;
      r.reward = rng.unit();
      const std::size_t n = 1 + rng.below(40);
      for (std::size_t t = 0; t < n; ++t) {
        const double lp = -(0.05 + 3.0 * rng.unit());
        r.logprobs.theta.push_back(lp);
        r.logprobs.old_policy.push_back(lp);
        r.logprobs.ref.push_back(lp);
      }
      group.rollouts.push_back(std::move(r));
    }
    const auto result = grpo_objective(group, cfg);
    CHECK(std::fabs(result.objective) <= 1e-9);
    for (const auto& term : result.terms) {
      CHECK(term.ratio == doctest::Approx(1.0));
      CHECK(term.kl == doctest::Approx(0.0));
    }
  }
}

TEST_CASE("kl estimator is non-negative for every token") {
  Rng rng(55);
  for (int i = 0; i < 2000; ++i) {
    const double t = -(5.0 * rng.unit());
    const double r = -(5.0 * rng.unit());
    const double d = r - t;
    CHECK(std::exp(d) - d - 1.0 >= 0.0);
  }
  // and through the public API
  for (int i = 0; i < 200; ++i) {
    auto rollout = rollout_with({-(rng.unit() * 4)}, {-(rng.unit() * 4)}, {-(rng.unit() * 4)});
    const auto term = grpo_rollout_term(rollout, 0.5, RewardConfig{});
    CHECK(term.kl >= 0.0);
  }
}

TEST_CASE("kl penalty subtracts beta * KL from the term") {
  RewardConfig cfg;
  cfg.kl_beta = 0.5;
  // theta == old -> ratio 1; ref differs -> KL > 0
  auto rollout = rollout_with({-1.0, -2.0}, {-1.0, -2.0}, {-0.5, -2.5});
  const double d0 = -0.5 - (-1.0), d1 = -2.5 - (-2.0);
  const double kl = ((std::exp(d0) - d0 - 1.0) + (std::exp(d1) - d1 - 1.0)) / 2.0;
  const auto term = grpo_rollout_term(rollout, 1.0, cfg);
  CHECK(term.kl == doctest::Approx(kl).epsilon(1e-12));
  CHECK(term.value == doctest::Approx(1.0 - 0.5 * kl).epsilon(1e-12));
}

TEST_CASE("token mask excludes tool-response tokens from ratio and KL") {
  RewardConfig cfg;
  cfg.clip_eps = 10.0;  // keep the clip out of the way
  auto rollout = rollout_with({-1.0, -9.0, -1.0}, {-1.0, -1.0, -1.0}, {-1.0, -9.0, -1.0});
  rollout.token_mask = {1, 0, 1};  // token 1 is masked out
  const auto term = grpo_rollout_term(rollout, 1.0, cfg);
  CHECK(term.ratio == doctest::Approx(1.0));
  CHECK(term.kl == doctest::Approx(0.0));

  rollout.token_mask.clear();  // unmasked, the ratio collapses
  const auto full = grpo_rollout_term(rollout, 1.0, cfg);
  CHECK(full.ratio == doctest::Approx(std::exp(-8.0)));
}

TEST_CASE("grpo objective validates its inputs") {
  RewardConfig cfg;
  RolloutGroup group;
  group.rollouts.push_back(rollout_with({-1.0}, {-1.0}, {-1.0}));
  CHECK_THROWS_AS(grpo_objective(group, cfg), GroupTooSmall);

  group.rollouts.push_back(rollout_with({-1.0, -2.0}, {-1.0}, {-1.0}));
  CHECK_THROWS_AS(grpo_objective(group, cfg), LengthMismatch);

  group.rollouts[1] = rollout_with({std::numeric_limits<double>::infinity()}, {-1.0}, {-1.0});
  CHECK_THROWS_AS(grpo_objective(group, cfg), NonFiniteLogProb);

  group.rollouts[1] = rollout_with({-1.0}, {-1.0}, {-1.0});
  group.advantages = {0.5};  // wrong length
  CHECK_THROWS_AS(grpo_objective(group, cfg), LengthMismatch);
}

TEST_CASE("build_sft_mask marks supervised tokens and masks boundary-straddlers") {
  // text: 0....9 supervised [0,10), masked [10,20), supervised [20,30)
  const std::vector<Span> supervised = {{0, 10}, {20, 30}};
  const std::vector<Span> masked = {{10, 20}};

  SUBCASE("tokens strictly inside each region") {
    const std::vector<Span> offsets = {{0, 5}, {5, 10}, {10, 15}, {15, 20}, {20, 30}};
    const auto mask = build_sft_mask(supervised, masked, offsets, 30);
    CHECK(mask == std::vector<bool>{true, true, false, false, true});
  }
  SUBCASE("a token straddling the boundary is masked") {
    const std::vector<Span> offsets = {{0, 8}, {8, 12}, {12, 20}, {20, 30}};
    const auto mask = build_sft_mask(supervised, masked, offsets, 30);
    CHECK(mask == std::vector<bool>{true, false, false, true});
  }
  SUBCASE("zero masked spans gives an all-true mask") {
    const std::vector<Span> offsets = {{0, 15}, {15, 30}};
    const auto mask = build_sft_mask({{0, 30}}, {}, offsets, 30);
    CHECK(mask == std::vector<bool>{true, true});
  }
  SUBCASE("untiled offsets are rejected") {
    CHECK_THROWS_AS(build_sft_mask(supervised, masked, {{0, 10}, {12, 30}}, 30),
                    OffsetsNotTiling);
    CHECK_THROWS_AS(build_sft_mask(supervised, masked, {{0, 10}, {10, 20}}, 30),
                    OffsetsNotTiling);
  }
  SUBCASE("hand-enumerated 3-span fixture") {
    // supervised [0,4) masked [4,11) supervised [11,16)
    const std::vector<Span> sup = {{0, 4}, {11, 16}};
    const std::vector<Span> msk = {{4, 11}};
    const std::vector<Span> offsets = {{0, 2}, {2, 4}, {4, 6}, {6, 9}, {9, 11}, {11, 13}, {13, 16}};
    const auto mask = build_sft_mask(sup, msk, offsets, 16);
    CHECK(mask == std::vector<bool>{true, true, false, false, false, true, true});
  }
}
