#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>

#include "i2a/model/world_model.h"
#include "i2a/numerics/optim.h"
#include "i2a/numerics/rng.h"
#include "i2a/planners/planners.h"
#include "i2a/sokoban/procgen.h"
#include "i2a/sokoban/sokoban.h"
#include "sokoban_oracle.h"
#include "test_util.h"

namespace i2a {
namespace {

using sokoban::Action;
using sokoban::SokobanState;

using testing::oracle_solution_length;
using testing::reachable_boards;

constexpr const char* kTwoBox =
    "#######\n"
    "#  @  #\n"
    "# $ $ #\n"
    "#  .. #\n"
    "#     #\n"
    "#######\n";

TEST(Heuristic, MatchingDistanceAndCorners) {
  const SokobanState s = sokoban::parse_level(kTwoBox);
  EXPECT_EQ(min_matching_distance(s), 2 + 1);
  EXPECT_EQ(corner_deadlocks(s), 0);
  const SokobanState corner = sokoban::parse_level("#####\n#$ @#\n#  .#\n#####\n");
  EXPECT_EQ(corner_deadlocks(corner), 1);
  const SokobanState on_target_corner = sokoban::parse_level("#####\n#* @#\n#   #\n#####\n");
  EXPECT_EQ(corner_deadlocks(on_target_corner), 0);
}

TEST(Heuristic, SolvedStateIsMaximal) {
  const auto boards = reachable_boards(sokoban::parse_level(kTwoBox));
  double best_solved = -1e300, best_unsolved = -1e300;
  for (const auto& b : boards) {
    (b.solved() ? best_solved : best_unsolved) = std::max(b.solved() ? best_solved : best_unsolved,
                                                          heuristic_value(b));
  }
  EXPECT_GT(best_solved, best_unsolved);
}

TEST(Heuristic, CornerDeadlocksAreUnsolvableAndRankedBelowLiveStates) {
  const auto boards = reachable_boards(sokoban::parse_level(kTwoBox));
  std::map<int, double> lowest_live;   // boxes on target -> min value of solvable states
  std::map<int, double> highest_dead;  // boxes on target -> max value of corner-deadlocked states
  int dead = 0;
  for (const auto& b : boards) {
    const int progress = b.boxes_on_target();
    const double v = heuristic_value(b);
    if (corner_deadlocks(b) > 0) {
      ++dead;
      EXPECT_EQ(oracle_solution_length(b), -1);
      highest_dead[progress] = highest_dead.contains(progress) ? std::max(highest_dead[progress], v) : v;
    } else if (oracle_solution_length(b) >= 0) {
      lowest_live[progress] = lowest_live.contains(progress) ? std::min(lowest_live[progress], v) : v;
    }
  }
  ASSERT_GT(dead, 0);
  for (const auto& [progress, v] : highest_dead) {
    if (lowest_live.contains(progress)) {
      EXPECT_LT(v, lowest_live[progress]) << progress;
    }
  }
}

TEST(Heuristic, MonotoneInBoxesOnTarget) {
  // Equal matching distance and no deadlocks; b has one box on a target.
  const SokobanState b = sokoban::parse_level("########\n#@ $ . #\n#    * #\n########\n");
  const SokobanState c = sokoban::parse_level("########\n#@  $. #\n#   $. #\n########\n");
  ASSERT_EQ(min_matching_distance(b), min_matching_distance(c));
  ASSERT_EQ(corner_deadlocks(b), corner_deadlocks(c));
  EXPECT_NEAR(heuristic_value(b) - heuristic_value(c), 1.0, 1e-12);
  const SokobanState a = sokoban::parse_level("########\n#@ $ . #\n#  $ . #\n########\n");
  EXPECT_GT(heuristic_value(b), heuristic_value(a));
}

// A model with a single action: every state steps to the next integer.
class ChainModel : public WorldModel {
 public:
  ObsShape shape() const override { return {1, 1, 1}; }
  int num_actions() const override { return 1; }
  std::string name() const override { return "chain"; }

 protected:
  Prediction do_predict(std::span<const double> f, int) override { return {{f[0] + 1.0}, 0.0, false}; }
};

TEST(Mcts, SingleActionRoot) {
  ChainModel model;
  for (int budget : {1, 7, 100}) {
    Mcts mcts(model, [](std::span<const double>) { return 0.0; }, {budget, 1.0, 1.0, 50, false});
    const auto r = mcts.search(std::vector<double>{0.0});
    ASSERT_TRUE(r.action.has_value());
    EXPECT_EQ(*r.action, 0);
  }
}

TEST(Mcts, UnvisitedActionsComeFirst) {
  const SokobanState s = sokoban::parse_level(kTwoBox);
  SokobanPerfectModel model(7, 6);
  Mcts mcts(model, sokoban_heuristic(7, 6), {sokoban::kNumActions, 1.0, 1.0, 120, false});
  const auto r = mcts.search(s.observation());
  EXPECT_EQ(r.visits, std::vector<int>(sokoban::kNumActions, 1));
  EXPECT_EQ(r.stats.model_calls, static_cast<std::uint64_t>(sokoban::kNumActions));
}

TEST(Mcts, TerminalRootHasNoAction) {
  const SokobanState s = sokoban::parse_level("#####\n#@ *#\n#####\n");
  SokobanPerfectModel model(5, 3);
  Mcts mcts(model, sokoban_heuristic(5, 3), {}, sokoban_solved(5, 3));
  const auto r = mcts.search(s.observation());
  EXPECT_FALSE(r.action.has_value());
  EXPECT_EQ(model.calls(), 0u);
}

TEST(Mcts, CorridorPicksOptimalAction) {
  // Every corridor of up to 6 floor cells with one box and one target.
  for (const char* level : {"######\n#@$ .#\n######\n", "#######\n#@ $ .#\n#######\n",
                            "########\n#.  $ @#\n########\n", "########\n#. $  @#\n########\n"}) {
    const SokobanState s = sokoban::parse_level(level);
    SokobanPerfectModel model(s.width(), 3);
    Mcts mcts(model, sokoban_heuristic(s.width(), 3), {100000, 1.0, 1.0, 10, false}, sokoban_solved(s.width(), 3));
    const auto r = mcts.search(s.observation());
    ASSERT_TRUE(r.action.has_value());
    const auto next = sokoban::step(s, static_cast<Action>(*r.action)).next;
    EXPECT_EQ(oracle_solution_length(next), oracle_solution_length(s) - 1) << level;
  }
}

TEST(Mcts, LargeBudgetIsOptimalOnSmallLevels) {
  sokoban::GenParams params;
  params.width = 5;
  params.height = 5;
  params.num_boxes = 1;
  int checked = 0;
  for (std::uint64_t seed = 0; checked < 30; ++seed) {
    const auto gen = sokoban::generate_level(params, seed);
    if (!gen.ok()) continue;
    const SokobanState& s = gen.level->state;
    const int optimal = oracle_solution_length(s);
    ASSERT_GT(optimal, 0);
    SokobanPerfectModel model(5, 5);
    Mcts mcts(model, sokoban_heuristic(5, 5), {100000, 1.0, 1.0, optimal + 2, false}, sokoban_solved(5, 5));
    const auto r = mcts.search(s.observation());
    ASSERT_TRUE(r.action.has_value());
    const auto next = sokoban::step(s, static_cast<Action>(*r.action)).next;
    EXPECT_EQ(oracle_solution_length(next), optimal - 1) << "seed " << seed;
    EXPECT_EQ(bfs_solution_length(s), optimal);
    ++checked;
  }
}

TEST(Mcts, NodeCountBoundedByDistinctDepthStates) {
  const SokobanState s = sokoban::parse_level(kTwoBox);
  const int max_depth = 3;
  // Distinct (depth, board) pairs reachable within max_depth steps.
  std::size_t distinct = 0;
  std::vector<SokobanState> layer{s};
  for (int d = 0; d <= max_depth; ++d) {
    distinct += layer.size();
    std::vector<SokobanState> next;
    std::set<std::pair<std::vector<std::uint8_t>, int>> seen;
    for (const auto& b : layer) {
      if (b.solved()) continue;
      for (int a = 0; a < sokoban::kNumActions; ++a) {
        SokobanState n = sokoban::step(b, static_cast<Action>(a)).next;
        if (seen.insert({n.cells(), n.player()}).second) next.push_back(n);
      }
    }
    layer = std::move(next);
  }
  SokobanPerfectModel model(7, 6);
  Mcts mcts(model, sokoban_heuristic(7, 6), {5000, 1.0, 1.0, max_depth, false});
  const auto r = mcts.search(s.observation());
  EXPECT_LE(mcts.node_count(), distinct);
  EXPECT_GT(r.stats.transposition_hits, 0u);
  // With a huge exploration constant the search covers the whole depth-3 tree.
  Mcts wide(model, sokoban_heuristic(7, 6), {20000, 100.0, 1.0, max_depth, false});
  wide.search(s.observation());
  EXPECT_EQ(wide.node_count(), distinct);
}

TEST(Mcts, ReportedCallsMatchCounter) {
  SokobanPerfectModel model(7, 6);
  Mcts mcts(model, sokoban_heuristic(7, 6), {300, 1.0, 1.0, 120, true}, sokoban_solved(7, 6));
  SokobanState s = sokoban::parse_level(kTwoBox);
  for (int t = 0; t < 5; ++t) {
    const auto before = model.calls();
    const auto r = mcts.search(s.observation(), t);
    EXPECT_EQ(model.calls() - before, r.stats.model_calls);
    EXPECT_LE(r.stats.model_calls, 300u);
    if (t > 0) {
      EXPECT_TRUE(r.stats.reused_root);
    }
    s = sokoban::step(s, static_cast<Action>(*r.action)).next;
  }
}

TEST(McSearch, ProbabilitiesFromReturns) {
  const auto uniform = mc_probabilities(std::vector<double>{2.0, 2.0, 2.0}, 0.7);
  for (double p : uniform) EXPECT_NEAR(p, 1.0 / 3.0, 1e-15);
  const auto two = mc_probabilities(std::vector<double>{1.0, 0.0}, 1.0);
  const double e = std::exp(1.0);
  EXPECT_NEAR(two[0], e / (e + 1.0), 1e-15);
  EXPECT_NEAR(two[1], 1.0 / (e + 1.0), 1e-15);
  const auto literal = mc_probabilities(std::vector<double>{1.0, 0.0}, 1.0, true);
  EXPECT_NEAR(literal[1], e / (e + 1.0), 1e-15);
  const auto sharp = mc_probabilities(std::vector<double>{0.3, 0.5, 0.1}, 1e-4);
  EXPECT_NEAR(sharp[1], 1.0, 1e-12);
  EXPECT_THROW(mc_probabilities(std::vector<double>{std::nan(""), 0.0}, 1.0), std::domain_error);
}

TEST(McSearch, ShiftInvariance) {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> r = testing::random_vector(rng, 5, 2.0);
    const double delta = 0.1 + std::abs(rng.normal());
    const auto p = mc_probabilities(r, delta);
    for (double& x : r) x += 37.5;
    const auto q = mc_probabilities(r, delta);
    for (int a = 0; a < 5; ++a) EXPECT_NEAR(p[a], q[a], 1e-12);
  }
}

TEST(McSearch, ReturnsMatchDirectFormula) {
  const SokobanState s = sokoban::parse_level(kTwoBox);
  SokobanPerfectModel model(7, 6);
  Rng rng(3);
  McSearchConfig cfg;
  cfg.depth = 4;
  cfg.gamma = 0.9;
  McSearchHead head = McSearchHead::create(s.observation().size(), sokoban::kNumActions, cfg, rng);
  const McDecision d = mc_search_act(s.observation(), model, head, rng);
  ASSERT_EQ(d.rollouts.size(), static_cast<std::size_t>(sokoban::kNumActions));
  EXPECT_EQ(d.model_calls, static_cast<std::uint64_t>(sokoban::kNumActions * cfg.depth));
  for (int a = 0; a < sokoban::kNumActions; ++a) {
    const Rollout& r = d.rollouts[a];
    EXPECT_EQ(r.actions[0], a);
    double expected = 0.0, discount = 1.0;
    bool ended = false;
    for (std::size_t t = 0; t < r.length(); ++t) {
      expected += discount * r.rewards[t];
      discount *= cfg.gamma;
      if (r.terminal[t]) {
        ended = true;
        break;
      }
    }
    if (!ended) expected += head.value(r.frames.back());
    EXPECT_NEAR(d.returns[a], expected, 1e-12);
  }
  const auto probs = mc_probabilities(d.returns, head.temperature());
  for (int a = 0; a < sokoban::kNumActions; ++a) EXPECT_NEAR(d.probs[a], probs[a], 1e-15);
}

TEST(McSearch, LogitGradientsMatchFiniteDifferences) {
  const SokobanState s = sokoban::parse_level(kTwoBox);
  SokobanPerfectModel model(7, 6);
  Rng rng(4);
  McSearchHead head = McSearchHead::create(s.observation().size(), sokoban::kNumActions, {}, rng);
  head.set_temperature(0.6);
  const McDecision d = mc_search_act(s.observation(), model, head, rng);
  const auto f = testing::tape_function([&](Tape& t) {
    Var logits = mc_logits(t, head, d.rollouts);
    return t.pick(t.log_softmax(logits), 2);
  });
  EXPECT_LT(grad_check(f, head.params(), 1e-6), 1e-5);
}

TEST(McSearch, TemperatureIsPositive) {
  Rng rng(5);
  McSearchHead head = McSearchHead::create(10, 3, {}, rng);
  EXPECT_NEAR(head.temperature(), 1.0, 1e-12);
  head.set_temperature(1e-3);
  EXPECT_NEAR(head.temperature(), 1e-3, 1e-12);
  EXPECT_THROW(head.set_temperature(0.0), std::invalid_argument);
}

// Two-state model: action 1 solves, action 0 does nothing.
class CoinModel : public WorldModel {
 public:
  ObsShape shape() const override { return {1, 1, 1}; }
  int num_actions() const override { return 2; }
  std::string name() const override { return "coin"; }

 protected:
  Prediction do_predict(std::span<const double> f, int a) override { return {{f[0]}, 0.0, a == 1}; }
};

TEST(Retries, FirstTrySuccessUsesOneRetry) {
  CoinModel model;
  Rng rng(1);
  const auto r = nested_retry_solve(std::vector<double>{0.0}, model,
                                    [](std::span<const double>, Rng&) { return 1; }, {10, 5}, rng);
  EXPECT_TRUE(r.solved);
  EXPECT_EQ(r.retries_used, 1);
  EXPECT_EQ(r.plan, std::vector<int>{1});
  EXPECT_EQ(r.model_calls, 1u);
}

TEST(Retries, FailureUsesEveryRetryAndCountsAllModels) {
  CoinModel model;
  CopyModel inner({1, 1, 1}, 2);
  Rng rng(1);
  const EpisodePolicy policy = [&](std::span<const double> f, Rng&) {
    inner.predict(f, 0);  // the policy runs its own model
    return 0;
  };
  WorldModel* extra[] = {&inner};
  const auto r = nested_retry_solve(std::vector<double>{0.0}, model, policy, {4, 3}, rng, extra);
  EXPECT_FALSE(r.solved);
  EXPECT_EQ(r.retries_used, 4);
  EXPECT_EQ(r.model_calls, 2u * 4u * 3u);
  EXPECT_THROW(nested_retry_solve(std::vector<double>{0.0}, model, policy, {17, 3}, rng), std::invalid_argument);
  EXPECT_THROW(nested_retry_solve(std::vector<double>{0.0}, model, policy, {0, 3}, rng), std::invalid_argument);
}

TEST(Retries, SuccessRateFollowsBernoulliLaw) {
  CoinModel model;
  Rng rng(9);
  const double q = 0.15;
  const EpisodePolicy policy = [&](std::span<const double>, Rng& r) { return r.bernoulli(q) ? 1 : 0; };
  const int trials = 4000;
  for (int retries : {1, 4, 10, 16}) {
    int solved = 0;
    for (int i = 0; i < trials; ++i)
      solved += nested_retry_solve(std::vector<double>{0.0}, model, policy, {retries, 1}, rng).solved;
    const double expected = 1.0 - std::pow(1.0 - q, retries);
    const double sigma = std::sqrt(expected * (1 - expected) / trials);
    EXPECT_NEAR(static_cast<double>(solved) / trials, expected, 3.5 * sigma) << retries;
  }
}

TEST(Retries, PerfectModelPlanSolvesTheRealLevel) {
  sokoban::GenParams params;
  params.width = 6;
  params.height = 6;
  params.num_boxes = 1;
  int solved = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto gen = sokoban::generate_level(params, seed);
    if (!gen.ok()) continue;
    SokobanPerfectModel model(6, 6);
    Rng rng(seed);
    const EpisodePolicy random = [](std::span<const double>, Rng& r) { return r.uniform_int(4); };
    const auto r = nested_retry_solve(gen.level->state.observation(), model, random, {16, 60}, rng);
    if (!r.solved) continue;
    ++solved;
    SokobanState s = gen.level->state;
    for (int a : r.plan) s = sokoban::step(s, static_cast<Action>(a)).next;
    EXPECT_TRUE(s.solved()) << "seed " << seed;
  }
  EXPECT_GT(solved, 0);
}

TEST(Bfs, MatchesOracle) {
  sokoban::GenParams params;
  params.width = 6;
  params.height = 6;
  params.num_boxes = 2;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto gen = sokoban::generate_level(params, seed);
    if (!gen.ok()) continue;
    EXPECT_EQ(bfs_solution_length(gen.level->state), oracle_solution_length(gen.level->state));
  }
  EXPECT_FALSE(bfs_solution_length(sokoban::parse_level("#####\n#$ @#\n#  .#\n#####\n")).has_value());
}

}  // namespace
}  // namespace i2a
