#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <deque>
#include <filesystem>

#include "i2a/model/local_model.h"
#include "i2a/model/world_model.h"
#include "i2a/numerics/rng.h"
#include "i2a/sokoban/procgen.h"
#include "i2a/sokoban/sokoban.h"

namespace i2a {
namespace {

using sokoban::Action;
using sokoban::SokobanState;

std::vector<SokobanState> random_states(int count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<SokobanState> out;
  sokoban::GenParams params;
  params.width = 7;
  params.height = 7;
  params.num_boxes = 2;
  for (std::uint64_t s = 0; static_cast<int>(out.size()) < count; ++s) {
    const auto gen = sokoban::generate_level(params, seed * 1000 + s);
    if (!gen.ok()) continue;
    SokobanState st = gen.level->state;
    // Wander a little so boxes sit in varied places.
    const int walk = rng.uniform_int(15);
    for (int i = 0; i < walk && !sokoban::episode_over(st); ++i)
      st = sokoban::step(st, static_cast<Action>(rng.uniform_int(sokoban::kNumActions))).next;
    if (!sokoban::episode_over(st)) out.push_back(st);
  }
  return out;
}

// Every state reachable from `start`, explored breadth first.
std::vector<SokobanState> reachable(SokobanState start) {
  start.set_step_limit(1 << 20);
  std::vector<SokobanState> seen{start};
  std::deque<SokobanState> queue{start};
  while (!queue.empty()) {
    SokobanState s = queue.front();
    queue.pop_front();
    if (s.solved()) continue;
    for (int a = 0; a < sokoban::kNumActions; ++a) {
      SokobanState n = sokoban::step(s, static_cast<Action>(a)).next;
      n.set_steps_elapsed(0);
      bool known = false;
      for (const auto& k : seen) known |= k.same_board(n);
      if (!known) {
        seen.push_back(n);
        queue.push_back(n);
      }
    }
  }
  return seen;
}

TEST(PerfectModel, MatchesSimulatorOnRandomPairs) {
  SokobanPerfectModel model(7, 7);
  Rng rng(3);
  const auto states = random_states(1000, 1);
  for (std::size_t i = 0; i < states.size(); ++i) {
    const int a = rng.uniform_int(sokoban::kNumActions);
    const auto truth = sokoban::step(states[i], static_cast<Action>(a));
    const Prediction p = model.predict(states[i].observation(), a);
    ASSERT_EQ(p.next, truth.next.observation()) << "pair " << i;
    ASSERT_TRUE(p.reward.has_value());
    ASSERT_EQ(*p.reward, truth.reward);
    ASSERT_EQ(p.terminal, truth.events.solved);
    ASSERT_EQ(model.calls(), i + 1);
  }
}

TEST(PerfectModel, ExhaustiveSmallBoard) {
  const SokobanState start = sokoban::parse_level(
      "######\n"
      "#@   #\n"
      "# $$ #\n"
      "#  . #\n"
      "#  . #\n"
      "######\n");
  SokobanPerfectModel model(6, 6);
  const auto states = reachable(start);
  ASSERT_GT(states.size(), 100u);
  for (const auto& s : states) {
    if (s.solved()) continue;
    for (int a = 0; a < sokoban::kNumActions; ++a) {
      const auto truth = sokoban::step(s, static_cast<Action>(a));
      const Prediction p = model.predict(s.observation(), a);
      ASSERT_EQ(p.next, truth.next.observation());
      ASSERT_EQ(*p.reward, truth.reward);
    }
  }
}

TEST(PerfectModel, RejectsBadInput) {
  SokobanPerfectModel model(5, 3);
  const auto obs = sokoban::parse_level("#####\n#@$.#\n#####\n").observation();
  EXPECT_THROW(model.predict(std::vector<double>(3), 0), std::invalid_argument);
  EXPECT_THROW(model.predict(obs, 5), std::invalid_argument);
  auto broken = obs;
  broken[3 * 15 + 8] = 1.0;  // second player
  EXPECT_THROW(model.predict(broken, 0), std::invalid_argument);
  // Failed calls are still counted.
  EXPECT_EQ(model.calls(), 3u);
}

TEST(PerfectModel, SolvedInputIsAbsorbing) {
  SokobanPerfectModel model(5, 3);
  const auto solved = sokoban::parse_level("#####\n# @*#\n#####\n").observation();
  const Prediction p = model.predict(solved, 3);
  EXPECT_EQ(p.next, solved);
  EXPECT_EQ(*p.reward, 0.0);
  EXPECT_TRUE(p.terminal);
}

TEST(PerfectModel, RewardPredictionSwitch) {
  SokobanPerfectModel model(5, 3);
  model.set_reward_prediction(false);
  const auto obs = sokoban::parse_level("#####\n#@$.#\n#####\n").observation();
  EXPECT_FALSE(model.predict(obs, 3).reward.has_value());
}

TEST(CopyModel, ReturnsInputAndCounts) {
  CopyModel model({4, 3, 5}, 5);
  Rng rng(1);
  std::vector<double> f(60);
  for (double& x : f) x = rng.normal();
  const Prediction p = model.predict(f, 2);
  EXPECT_EQ(p.next, f);
  EXPECT_EQ(*p.reward, 0.0);
  const RolloutPolicy policy = [](std::span<const double>, Rng& r) { return r.uniform_int(5); };
  const Rollout r = rollout(model, f, 1, policy, 5, rng);
  ASSERT_EQ(r.length(), 5u);
  for (const auto& frame : r.frames) EXPECT_EQ(frame, f);
  EXPECT_EQ(model.calls(), 6u);
  model.reset_calls();
  EXPECT_EQ(model.calls(), 0u);
}

TEST(CorruptedModel, ZeroProbabilityIsPerfect) {
  auto corrupted = make_corrupted_sokoban_model(7, 7, 0.0, 5);
  SokobanPerfectModel perfect(7, 7);
  Rng rng(2);
  for (const auto& s : random_states(200, 2)) {
    const int a = rng.uniform_int(sokoban::kNumActions);
    const auto obs = s.observation();
    const Prediction c = corrupted->predict(obs, a);
    const Prediction p = perfect.predict(obs, a);
    ASSERT_EQ(c.next, p.next);
    ASSERT_EQ(c.reward, p.reward);
  }
}

TEST(CorruptedModel, FullProbabilityTogglesBoxPlane) {
  const int w = 7, h = 7, n = w * h;
  CorruptedModel model(std::make_unique<SokobanPerfectModel>(w, h, true), {1.0, {sokoban::kBoxPlane}, 9});
  SokobanPerfectModel perfect(w, h);
  for (const auto& s : random_states(20, 3)) {
    const auto obs = s.observation();
    const Prediction c = model.predict(obs, 1);
    const Prediction p = perfect.predict(obs, 1);
    for (int i = 0; i < 4 * n; ++i) {
      const bool box_plane = i / n == sokoban::kBoxPlane;
      ASSERT_EQ(c.next[i], box_plane ? 1.0 - p.next[i] : p.next[i]) << i;
    }
  }
}

TEST(CorruptedModel, RejectsBadProbability) {
  EXPECT_THROW(CorruptedModel(std::make_unique<CopyModel>(ObsShape{1, 2, 2}, 1), {1.5, {}, 0}),
               std::invalid_argument);
  EXPECT_THROW(CorruptedModel(std::make_unique<CopyModel>(ObsShape{1, 2, 2}, 1), {0.5, {3}, 0}),
               std::invalid_argument);
}

// Fraction of sprite cells touched by at least one flip within d calls
// should be 1 - (1 - p)^d.
TEST(CorruptedModel, CorruptionCompoundsWithDepth) {
  const double p = 0.1;
  const int depth = 5, w = 7, h = 7, n = w * h;
  auto model = make_corrupted_sokoban_model(w, h, p, 17);
  auto& corrupted = dynamic_cast<CorruptedModel&>(*model);
  const auto states = random_states(200, 4);
  Rng rng(5);
  std::vector<double> touched_total(depth, 0.0);
  double cells = 0.0;
  for (const auto& s : states) {
    std::vector<double> f = s.observation();
    std::vector<std::uint8_t> touched(2 * n, 0);
    for (int d = 0; d < depth; ++d) {
      f = model->predict(f, rng.uniform_int(sokoban::kNumActions)).next;
      const auto& flips = corrupted.last_flips();
      for (int i = 0; i < n; ++i) {
        touched[i] |= flips[sokoban::kBoxPlane * n + i];
        touched[n + i] |= flips[sokoban::kPlayerPlane * n + i];
      }
      for (std::uint8_t t : touched) touched_total[d] += t;
    }
    cells += 2 * n;
  }
  for (int d = 0; d < depth; ++d) {
    const double expected = 1.0 - std::pow(1.0 - p, d + 1);
    const double sigma = std::sqrt(expected * (1.0 - expected) / cells);
    EXPECT_NEAR(touched_total[d] / cells, expected, 3.0 * sigma) << "depth " << d + 1;
  }
}

TEST(Rollout, ExactCallCountAndFirstAction) {
  SokobanPerfectModel model(7, 7);
  Rng rng(6);
  const auto states = random_states(10, 5);
  const RolloutPolicy policy = [](std::span<const double>, Rng& r) { return r.uniform_int(sokoban::kNumActions); };
  for (int tau : {1, 3, 5}) {
    model.reset_calls();
    for (int a = 0; a < sokoban::kNumActions; ++a) {
      const Rollout r = rollout(model, states[0].observation(), a, policy, tau, rng);
      EXPECT_EQ(r.length(), static_cast<std::size_t>(tau));
      EXPECT_EQ(r.actions[0], a);
    }
    EXPECT_EQ(model.calls(), static_cast<std::uint64_t>(5 * tau));
  }
  EXPECT_THROW(rollout(model, states[0].observation(), 0, policy, 0, rng), std::invalid_argument);
}

TEST(Rollout, ScriptedPolicyMatchesSimulator) {
  SokobanPerfectModel model(7, 7);
  Rng rng(7);
  for (const auto& s : random_states(30, 6)) {
    const std::vector<int> script{3, 0, 2, 2, 1, 4, 3};
    std::size_t next = 1;
    const RolloutPolicy policy = [&](std::span<const double>, Rng&) { return script[next++]; };
    const Rollout r = rollout(model, s.observation(), script[0], policy, 7, rng);
    SokobanState sim = s;
    sim.set_step_limit(1 << 20);
    for (int t = 0; t < 7; ++t) {
      if (sim.solved()) {
        EXPECT_TRUE(r.terminal[t - 1]);
        break;
      }
      const auto out = sokoban::step(sim, static_cast<Action>(script[t]));
      sim = out.next;
      EXPECT_TRUE(sim.same_board(sokoban::decode_observation(r.frames[t], 7, 7)));
      EXPECT_EQ(r.rewards[t], out.reward);
    }
  }
}

std::vector<Transition> transitions_of(const std::vector<SokobanState>& states) {
  std::vector<Transition> data;
  for (const auto& s : states) {
    if (s.solved()) continue;
    for (int a = 0; a < sokoban::kNumActions; ++a) {
      const auto out = sokoban::step(s, static_cast<Action>(a));
      data.push_back({s.observation(), a, out.next.observation(), out.reward});
    }
  }
  return data;
}

TEST(LocalModel, CorridorIsReproducedExactly) {
  const SokobanState start = sokoban::parse_level(
      "#########\n"
      "#@ $   .#\n"
      "#########\n");
  const auto states = reachable(start);
  const auto data = transitions_of(states);
  const auto model = LocalTransitionModel::fit(9, 3, data, 1e-12);
  EXPECT_EQ(model.cell_accuracy(data), 1.0);
  for (const auto& t : data) {
    const Prediction p = model.predict_uncounted(t.features, t.action);
    ASSERT_EQ(p.next, t.next_features);
    ASSERT_NEAR(*p.reward, t.reward, 1e-9);
  }
}

TEST(LocalModel, SingleTransitionIsLearned) {
  const SokobanState s = sokoban::parse_level("######\n#@$ .#\n######\n");
  const auto out = sokoban::step(s, Action::kRight);
  const std::vector<Transition> data{{s.observation(), 3, out.next.observation(), out.reward}};
  auto model = LocalTransitionModel::fit(6, 3, data);
  const Prediction p = model.predict(s.observation(), 3);
  EXPECT_EQ(p.next, out.next.observation());
  EXPECT_NEAR(*p.reward, out.reward, 1e-6);
  EXPECT_EQ(model.calls(), 1u);
}

TEST(LocalModel, HeldOutAccuracyOnGeneratedLevels) {
  auto states = random_states(300, 8);
  std::vector<SokobanState> train(states.begin(), states.begin() + 240);
  std::vector<SokobanState> test(states.begin() + 240, states.end());
  const auto model = LocalTransitionModel::fit(7, 7, transitions_of(train));
  const double acc = model.cell_accuracy(transitions_of(test));
  EXPECT_GT(acc, 0.99);
  EXPECT_LE(acc, 1.0);
  const auto w = model.reward_weights();
  EXPECT_NEAR(w[0], sokoban::kStepPenalty, 1e-3);
  EXPECT_NEAR(w[1], 1.0, 1e-3);
  EXPECT_NEAR(w[2], sokoban::kSolveReward, 1e-2);
}

TEST(LocalModel, RejectsBadData) {
  EXPECT_THROW(LocalTransitionModel::fit(5, 3, {}), std::invalid_argument);
  Transition t{std::vector<double>(60), 0, std::vector<double>(59), 0.0};
  EXPECT_THROW(LocalTransitionModel::fit(5, 3, {t}), std::invalid_argument);
  t.next_features.resize(60);
  t.action = 7;
  EXPECT_THROW(LocalTransitionModel::fit(5, 3, {t}), std::invalid_argument);
}

TEST(LocalModel, SerializationRoundTrip) {
  const auto data = transitions_of(random_states(50, 9));
  const auto model = LocalTransitionModel::fit(7, 7, data);
  const auto copy = LocalTransitionModel::from_json(model.to_json());
  EXPECT_EQ(copy.context_count(), model.context_count());
  EXPECT_EQ(copy.to_json(), model.to_json());
  const auto path = std::filesystem::temp_directory_path() / "i2a_local_model_test.json";
  model.save(path.string());
  const auto loaded = LocalTransitionModel::load(path.string());
  std::filesystem::remove(path);
  for (const auto& t : data) {
    EXPECT_EQ(loaded.predict_uncounted(t.features, t.action).next,
              model.predict_uncounted(t.features, t.action).next);
  }
  EXPECT_ANY_THROW(LocalTransitionModel::from_json(R"({"format": "other"})"));
}

}  // namespace
}  // namespace i2a
