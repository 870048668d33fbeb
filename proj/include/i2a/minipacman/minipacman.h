#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace i2a::minipacman {

// Ghost headings, in the order ghost movement scans them.
enum class Direction : std::uint8_t { kDown = 0, kLeft = 1, kRight = 2, kUp = 3 };
inline constexpr std::array<Direction, 4> kScanOrder = {Direction::kDown, Direction::kLeft,
                                                        Direction::kRight, Direction::kUp};
Direction opposite(Direction d);
// (row, col) offset.
std::array<int, 2> delta(Direction d);

enum class Action : std::uint8_t { kUp = 0, kDown = 1, kLeft = 2, kRight = 3, kNoOp = 4 };
inline constexpr int kNumActions = 5;

inline constexpr int kPillDuration = 19;
inline constexpr int kPillsPerLevel = 2;

struct Maze {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> wall;

  bool is_wall(int row, int col) const;
  int index(int row, int col) const { return row * width + col; }
  std::vector<int> corridor_cells() const;

  // Text grid: '#' wall, anything else corridor. The border must be wall.
  static Maze parse(std::string_view text);
  // The 15 wide x 19 high layout shipped in data/minipacman_maze.txt.
  static std::shared_ptr<const Maze> default_maze();
};

// Event order used by reward vectors.
enum Event : int { kMoving = 0, kFood = 1, kPill = 2, kGhostEaten = 3, kEaten = 4 };
using EventVector = std::array<int, 5>;

enum class ClearRule { kAllFood, kFixed128Steps, kGhostsGoneOr80Steps, kAllPills };
const char* clear_rule_name(ClearRule r);
ClearRule parse_clear_rule(std::string_view name);

struct TaskSpec {
  std::string name;
  std::array<double, 5> w_rew{};
  ClearRule clear_rule = ClearRule::kAllFood;
};

// Regular, Avoid, Hunt, Ambush, Rush.
const std::vector<TaskSpec>& default_tasks();
const TaskSpec& task_by_name(std::string_view name);
// JSON object {"name": {"w_rew": [5 reals], "clear": "<rule>"}, ...}.
std::vector<TaskSpec> parse_task_table(std::string_view json_text);
double reward(const TaskSpec& task, const EventVector& events);

struct Ghost {
  int cell = -1;
  Direction dir = Direction::kDown;
};

struct MiniPacmanState {
  std::shared_ptr<const Maze> maze;
  std::vector<std::uint8_t> food;
  std::vector<std::uint8_t> pills;
  std::vector<Ghost> ghosts;
  int player = -1;
  int pill_timer = 0;
  int level = 1;
  int steps_in_level = 0;
  int episode_steps = 0;
  // 0 = no cap.
  int episode_step_limit = 0;
  bool over = false;
  std::uint64_t seed = 0;

  int food_count() const;
  int pill_count() const;
  int row_of(int cell) const { return cell / maze->width; }
  int col_of(int cell) const { return cell % maze->width; }
  bool operator==(const MiniPacmanState& o) const;
};

// 1 + floor((level - 1) / 2).
int ghost_count_for_level(int level);

// Fresh level: fixed walls, food on every corridor cell, then the player,
// 2 pills and the ghosts on distinct random corridor cells (pill and player
// cells carry no food). Ghost headings start random among open directions.
MiniPacmanState new_level(int level, std::uint64_t seed,
                          std::shared_ptr<const Maze> maze = Maze::default_maze());

// Ghost movement: straight corridors and bends follow the corridor without
// reversing; at intersections the reverse heading is dropped and the ghost
// picks the heading best aligned with (chasing) or against (fleeing, while a
// pill is active) the normalised offset to the player. Ties go to the
// earlier heading in kScanOrder. In a dead end the ghost reverses.
Direction move_ghost(const MiniPacmanState& s, const Ghost& ghost);

struct StepResult {
  MiniPacmanState next;
  double reward = 0.0;
  EventVector events{};
  bool done = false;
  bool truncated = false;
  bool level_cleared = false;
};

// Throws std::logic_error once the episode is over.
StepResult step(const MiniPacmanState& s, Action a, const TaskSpec& task);

inline constexpr int kNumPlanes = 6;  // wall, food, pill, ghost, player, pill timer
std::vector<double> observation(const MiniPacmanState& s);
std::string render(const MiniPacmanState& s);

}  // namespace i2a::minipacman
