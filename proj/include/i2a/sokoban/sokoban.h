#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace i2a::sokoban {

// Up, Down, Left, Right move the player one cell; NoOp leaves the board as
// it is but still costs a step. The game never names a fifth action, so
// NoOp is an assumption; kNumActions is the only place that fixes |A| = 5.
enum class Action : std::uint8_t { kUp = 0, kDown = 1, kLeft = 2, kRight = 3, kNoOp = 4 };
inline constexpr int kNumActions = 5;
inline constexpr int kDefaultStepLimit = 120;

inline constexpr double kStepPenalty = -0.1;
inline constexpr double kBoxOnTargetReward = 1.0;
inline constexpr double kBoxOffTargetPenalty = -1.0;
inline constexpr double kSolveReward = 10.0;

const char* action_name(Action a);
// Row/column offset of a move; {0,0} for NoOp.
std::array<int, 2> action_delta(Action a);
Action opposite(Action a);

// Board cell bit flags.
enum CellBits : std::uint8_t { kWall = 1, kTarget = 2, kBox = 4 };

// Observation plane order.
enum Plane : int { kWallPlane = 0, kTargetPlane = 1, kBoxPlane = 2, kPlayerPlane = 3 };
inline constexpr int kNumPlanes = 4;

class SokobanState {
 public:
  SokobanState() = default;
  // All-wall board of the given size; player and boxes are placed afterwards.
  SokobanState(int width, int height);

  int width() const { return width_; }
  int height() const { return height_; }
  int cell_count() const { return width_ * height_; }
  int index(int row, int col) const { return row * width_ + col; }
  int row_of(int cell) const { return cell / width_; }
  int col_of(int cell) const { return cell % width_; }
  bool in_bounds(int row, int col) const {
    return row >= 0 && col >= 0 && row < height_ && col < width_;
  }

  bool wall(int cell) const { return cells_[cell] & kWall; }
  bool target(int cell) const { return cells_[cell] & kTarget; }
  bool box(int cell) const { return cells_[cell] & kBox; }
  int player() const { return player_; }
  int steps_elapsed() const { return steps_elapsed_; }
  int step_limit() const { return step_limit_; }
  const std::vector<std::uint8_t>& cells() const { return cells_; }

  void set_wall(int cell, bool on);
  void set_target(int cell, bool on);
  void set_box(int cell, bool on);
  void set_player(int cell) { player_ = cell; }
  void set_steps_elapsed(int steps) { steps_elapsed_ = steps; }
  void set_step_limit(int limit) { step_limit_ = limit; }

  std::vector<int> boxes() const;
  std::vector<int> targets() const;
  int box_count() const;
  int boxes_on_target() const;
  bool solved() const;

  // Throws std::invalid_argument describing the first violated invariant.
  void validate() const;

  // One-hot planes (wall, target, box, player), plane-major, row-major.
  std::vector<double> observation() const;

  // Hash of the board and player position (not the step counter).
  std::uint64_t board_hash() const;
  bool same_board(const SokobanState& other) const {
    return width_ == other.width_ && height_ == other.height_ && player_ == other.player_ &&
           cells_ == other.cells_;
  }
  bool operator==(const SokobanState& other) const {
    return same_board(other) && steps_elapsed_ == other.steps_elapsed_ &&
           step_limit_ == other.step_limit_;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> cells_;
  int player_ = -1;
  int steps_elapsed_ = 0;
  int step_limit_ = kDefaultStepLimit;
};

struct StepEvents {
  bool pushed_on_target = false;
  bool pushed_off_target = false;
  bool solved = false;
};

struct StepOutcome {
  SokobanState next;
  double reward = 0.0;
  bool done = false;
  // Episode ended by the step cap rather than by solving; learners may
  // bootstrap from the value of `next`.
  bool truncated = false;
  StepEvents events;
};

// Throws std::logic_error if the episode is already over (solved or capped).
StepOutcome step(const SokobanState& s, Action a);
bool episode_over(const SokobanState& s);

// Reward for a set of events, exactly the shaped sum.
double shaped_reward(const StepEvents& e);

// Text levels: '#' wall, ' ' floor, '.' target, '$' box, '*' box on target,
// '@' player, '+' player on target. Rows must all have the same length.
// Errors carry a "row R, col C" position.
SokobanState parse_level(std::string_view text);
std::string render(const SokobanState& s);

struct LevelRecord {
  SokobanState state;
  // Metadata from ';'-prefixed lines: "; key: value" or "; key=value".
  std::vector<std::pair<std::string, std::string>> metadata;
  std::optional<std::string> meta(std::string_view key) const;
};

// Blank-line separated blocks; ';' lines attach metadata to the block.
std::vector<LevelRecord> parse_level_file(std::string_view text);
std::string render_level_record(const LevelRecord& record);

// Reads a level from the 4-plane observation layout. Throws
// std::invalid_argument if the planes are not a valid state (entries must be
// 0/1, exactly one player, boxes and player off walls, ...).
SokobanState decode_observation(std::span<const double> planes, int width, int height);

// Tolerant decode for imagined (possibly corrupted) frames: walls win over
// boxes and player, a box wins over the player, the first player cell in
// row-major order is kept. Returns nullopt when no player cell survives.
std::optional<SokobanState> decode_observation_lenient(std::span<const double> planes, int width,
                                                       int height);

}  // namespace i2a::sokoban
