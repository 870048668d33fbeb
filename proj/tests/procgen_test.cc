#include <gtest/gtest.h>

#include <deque>
#include <set>

#include "i2a/numerics/rng.h"
#include "i2a/sokoban/procgen.h"
#include "i2a/sokoban/sokoban.h"

namespace i2a::sokoban {
namespace {

GenParams small_params(int boxes = 2) {
  GenParams p;
  p.width = 7;
  p.height = 7;
  p.num_boxes = boxes;
  return p;
}

int floor_components(const Topology& t) {
  std::vector<int> seen(t.wall.size(), 0);
  int components = 0;
  for (int start = 0; start < static_cast<int>(t.wall.size()); ++start) {
    if (t.wall[start] || seen[start]) continue;
    ++components;
    std::deque<int> queue{start};
    seen[start] = 1;
    while (!queue.empty()) {
      const int c = queue.front();
      queue.pop_front();
      const int r = c / t.width, col = c % t.width;
      const int nbrs[4][2] = {{r - 1, col}, {r + 1, col}, {r, col - 1}, {r, col + 1}};
      for (const auto& n : nbrs) {
        if (n[0] < 0 || n[1] < 0 || n[0] >= t.height || n[1] >= t.width) continue;
        const int k = n[0] * t.width + n[1];
        if (!t.wall[k] && !seen[k]) {
          seen[k] = 1;
          queue.push_back(k);
        }
      }
    }
  }
  return components;
}

TEST(Procgen, TopologyKeepsBorderAndIsConnected) {
  Rng rng(1);
  const GenParams params = small_params();
  for (int i = 0; i < 200; ++i) {
    const Topology t = generate_topology(params, rng);
    for (int c = 0; c < t.width; ++c) {
      EXPECT_TRUE(t.wall[c]);
      EXPECT_TRUE(t.wall[(t.height - 1) * t.width + c]);
    }
    for (int r = 0; r < t.height; ++r) {
      EXPECT_TRUE(t.wall[r * t.width]);
      EXPECT_TRUE(t.wall[r * t.width + t.width - 1]);
    }
    EXPECT_GT(t.empty_count(), 0);
    EXPECT_EQ(floor_components(t), 1);
  }
}

TEST(Procgen, PlacementIsDistinctAndOnFloor) {
  Rng rng(2);
  const Topology t = generate_topology(small_params(), rng);
  for (int i = 0; i < 100; ++i) {
    const auto p = place_entities(t, 3, rng);
    if (!p) {
      EXPECT_LT(t.empty_count(), 4);
      continue;
    }
    std::set<int> cells(p->targets.begin(), p->targets.end());
    cells.insert(p->player);
    EXPECT_EQ(cells.size(), 4u);
    for (int c : cells) EXPECT_FALSE(t.wall[c]);
  }
  Topology tiny{3, 3, {1, 1, 1, 1, 0, 1, 1, 1, 1}};
  EXPECT_FALSE(place_entities(tiny, 1, rng).has_value());
}

TEST(Procgen, GeneratedLevelsAreValidAndReplay) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto gen = generate_level(small_params(), seed);
    ASSERT_TRUE(gen.ok()) << "seed " << seed << ": " << gen.failure;
    const RoomCandidate& level = *gen.level;
    EXPECT_NO_THROW(level.state.validate());
    EXPECT_EQ(level.state.box_count(), 2);
    EXPECT_EQ(level.state.targets().size(), 2u);
    EXPECT_GT(level.score, 0);
    // A positive score means no box and no player on a target.
    EXPECT_EQ(level.state.boxes_on_target(), 0);
    EXPECT_FALSE(level.state.target(level.state.player()));
    EXPECT_FALSE(level.state.solved());
    EXPECT_TRUE(replay_solves(level.state, level.solution)) << "seed " << seed;
  }
}

TEST(Procgen, DeterministicInSeed) {
  const GenParams params = small_params();
  const auto a = generate_level(params, 77);
  const auto b = generate_level(params, 77);
  const auto c = generate_level(params, 78);
  ASSERT_TRUE(a.ok() && b.ok() && c.ok());
  EXPECT_EQ(a.level->state, b.level->state);
  EXPECT_EQ(a.level->solution, b.level->solution);
  EXPECT_EQ(a.level->score, b.level->score);
  EXPECT_FALSE(a.level->state.same_board(c.level->state) && a.level->solution == c.level->solution);
}

TEST(Procgen, ReverseSearchReportsBestScore) {
  Rng rng(5);
  const GenParams params = small_params(1);
  for (int i = 0; i < 30; ++i) {
    const Topology t = generate_topology(params, rng);
    const auto p = place_entities(t, 1, rng);
    if (!p) continue;
    ReverseSearchStats stats;
    const auto cand = reverse_play_search(t, *p, params, rng, &stats);
    EXPECT_LE(stats.max_depth_reached, params.max_depth);
    EXPECT_LE(stats.visited, params.max_visited);
    if (cand) {
      EXPECT_EQ(cand->score, stats.best_score);
      EXPECT_TRUE(replay_solves(cand->state, cand->solution));
      // One box: the score is swaps * distance, so it is a multiple of the distance.
      const int box = cand->state.boxes()[0];
      const int target = p->targets[0];
      const int dist = std::abs(box / t.width - target / t.width) + std::abs(box % t.width - target % t.width);
      ASSERT_GT(dist, 0);
      EXPECT_EQ(cand->score % dist, 0);
    } else {
      EXPECT_EQ(stats.best_score, 0);
    }
  }
}

TEST(Procgen, ReplayRejectsWrongSolutions) {
  const auto gen = generate_level(small_params(), 3);
  ASSERT_TRUE(gen.ok());
  auto solution = gen.level->solution;
  // Cut the trace just before the step that solves the level.
  SokobanState s = gen.level->state;
  s.set_step_limit(1 << 20);
  std::size_t solve_at = 0;
  while (!s.solved()) s = step(s, solution[solve_at++]).next;
  solution.resize(solve_at - 1);
  EXPECT_FALSE(replay_solves(gen.level->state, solution));
  EXPECT_FALSE(replay_solves(gen.level->state, {}));
}

TEST(Procgen, TraceCodecRoundTrip) {
  const std::vector<Action> trace{Action::kUp, Action::kDown, Action::kLeft, Action::kRight, Action::kNoOp,
                                  Action::kUp};
  EXPECT_EQ(encode_trace(trace), "udlrnu");
  EXPECT_EQ(decode_trace("udlrnu"), trace);
  EXPECT_TRUE(decode_trace("").empty());
  EXPECT_THROW(decode_trace("udx"), std::invalid_argument);
}

TEST(Procgen, LevelRecordCarriesTrace) {
  const auto gen = generate_level(small_params(), 9);
  ASSERT_TRUE(gen.ok());
  const LevelRecord rec = make_level_record(*gen.level, 9);
  const auto parsed = parse_level_file(render_level_record(rec));
  ASSERT_EQ(parsed.size(), 1u);
  EXPECT_EQ(parsed[0].meta("seed"), "9");
  const auto trace = decode_trace(*parsed[0].meta("trace"));
  EXPECT_TRUE(replay_solves(parsed[0].state, trace));
}

TEST(Procgen, ParamValidation) {
  GenParams p;
  p.width = 2;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = GenParams{};
  p.turn_prob = 1.5;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = GenParams{};
  EXPECT_EQ(p.effective_walk_steps(), 30);
}

}  // namespace
}  // namespace i2a::sokoban
