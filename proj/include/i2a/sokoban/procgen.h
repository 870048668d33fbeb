#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "i2a/numerics/rng.h"
#include "i2a/sokoban/sokoban.h"

namespace i2a::sokoban {

struct GenParams {
  int width = 10;
  int height = 10;
  // Negative means "1.5 * (width + height), rounded".
  int walk_steps = -1;
  double turn_prob = 0.35;
  int max_depth = 300;
  std::int64_t max_visited = 1'000'000;
  int topology_retries = 10;
  int placement_retries = 10;
  int num_boxes = 4;
  int step_limit = kDefaultStepLimit;

  int effective_walk_steps() const;
  // Throws std::invalid_argument on out-of-range values.
  void validate() const;
};

// Wall grid produced by the random walk: true = wall, row-major.
struct Topology {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> wall;

  int empty_count() const;
};

struct Placement {
  std::vector<int> targets;
  int player = -1;
};

struct RoomCandidate {
  SokobanState state;
  std::int64_t score = 0;
  // Forward solution: replaying these actions from `state` solves the level.
  std::vector<Action> solution;
  std::int64_t visited = 0;
  int max_depth_reached = 0;
};

struct ReverseSearchStats {
  std::int64_t visited = 0;
  int max_depth_reached = 0;
  std::int64_t best_score = 0;
};

Topology generate_topology(const GenParams& params, Rng& rng);

// Picks num_boxes target cells and a player cell, all distinct, uniformly
// among empty cells. nullopt if there are fewer than num_boxes + 1.
std::optional<Placement> place_entities(const Topology& topology, int num_boxes, Rng& rng);

// Depth-first reverse play from the solved configuration (boxes on their
// targets). Each of the 8 reverse actions (move, or move while pulling the box
// behind the player, in 4 directions) is tried in a fresh random order at
// every expansion. Configurations (box set, player cell) already seen are
// skipped. Every new configuration is scored
//   swaps * sum_i manhattan(box_i, target_i)
// and scored 0 if a box or the player is on a target. Returns the best one,
// or nullopt if no configuration scores above 0. `stats` (optional) receives
// search counters.
std::optional<RoomCandidate> reverse_play_search(const Topology& topology, const Placement& placement,
                                                 const GenParams& params, Rng& rng,
                                                 ReverseSearchStats* stats = nullptr);

struct GenerationResult {
  std::optional<RoomCandidate> level;
  int topologies_tried = 0;
  int placements_tried = 0;
  std::string failure;  // empty on success
  bool ok() const { return level.has_value(); }
};

// Up to topology_retries topologies x placement_retries placements until a
// candidate scores above 0. Deterministic in (params, seed).
GenerationResult generate_level(const GenParams& params, std::uint64_t seed);

// Replays `solution` from `start` with the step cap lifted; true iff the
// level ends solved exactly when the trace ends or earlier.
bool replay_solves(const SokobanState& start, const std::vector<Action>& solution);

// Trace as a compact string of u/d/l/r/n characters and back.
std::string encode_trace(const std::vector<Action>& trace);
std::vector<Action> decode_trace(std::string_view text);

// Fresh level record carrying generation metadata (seed, score, trace).
LevelRecord make_level_record(const RoomCandidate& level, std::uint64_t seed);

}  // namespace i2a::sokoban
