#include "i2a/sokoban/sokoban.h"

#include <algorithm>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "i2a/numerics/rng.h"

namespace i2a::sokoban {

const char* action_name(Action a) {
  switch (a) {
    case Action::kUp: return "up";
    case Action::kDown: return "down";
    case Action::kLeft: return "left";
    case Action::kRight: return "right";
    case Action::kNoOp: return "noop";
  }
  return "?";
}

std::array<int, 2> action_delta(Action a) {
  switch (a) {
    case Action::kUp: return {-1, 0};
    case Action::kDown: return {1, 0};
    case Action::kLeft: return {0, -1};
    case Action::kRight: return {0, 1};
    case Action::kNoOp: return {0, 0};
  }
  return {0, 0};
}

Action opposite(Action a) {
  switch (a) {
    case Action::kUp: return Action::kDown;
    case Action::kDown: return Action::kUp;
    case Action::kLeft: return Action::kRight;
    case Action::kRight: return Action::kLeft;
    case Action::kNoOp: return Action::kNoOp;
  }
  return Action::kNoOp;
}

SokobanState::SokobanState(int width, int height)
    : width_(width), height_(height), cells_(static_cast<std::size_t>(width * height), kWall) {
  if (width < 1 || height < 1) throw std::invalid_argument("SokobanState: empty board");
}

void SokobanState::set_wall(int cell, bool on) {
  cells_[cell] = on ? (cells_[cell] | kWall) : (cells_[cell] & ~kWall);
}
void SokobanState::set_target(int cell, bool on) {
  cells_[cell] = on ? (cells_[cell] | kTarget) : (cells_[cell] & ~kTarget);
}
void SokobanState::set_box(int cell, bool on) {
  cells_[cell] = on ? (cells_[cell] | kBox) : (cells_[cell] & ~kBox);
}

std::vector<int> SokobanState::boxes() const {
  std::vector<int> out;
  for (int i = 0; i < cell_count(); ++i) {
    if (cells_[i] & kBox) out.push_back(i);
  }
  return out;
}

std::vector<int> SokobanState::targets() const {
  std::vector<int> out;
  for (int i = 0; i < cell_count(); ++i) {
    if (cells_[i] & kTarget) out.push_back(i);
  }
  return out;
}

int SokobanState::box_count() const {
  int n = 0;
  for (auto c : cells_) n += (c & kBox) ? 1 : 0;
  return n;
}

int SokobanState::boxes_on_target() const {
  int n = 0;
  for (auto c : cells_) n += ((c & kBox) && (c & kTarget)) ? 1 : 0;
  return n;
}

bool SokobanState::solved() const {
  bool any = false;
  for (auto c : cells_) {
    if (c & kBox) {
      if (!(c & kTarget)) return false;
      any = true;
    }
  }
  return any;
}

void SokobanState::validate() const {
  if (cells_.size() != static_cast<std::size_t>(width_ * height_) || cells_.empty()) {
    throw std::invalid_argument("SokobanState: board storage does not match dimensions");
  }
  for (int i = 0; i < cell_count(); ++i) {
    if ((cells_[i] & kWall) && (cells_[i] & (kBox | kTarget))) {
      throw std::invalid_argument("SokobanState: box or target on wall at row " +
                                  std::to_string(row_of(i)) + ", col " + std::to_string(col_of(i)));
    }
  }
  if (player_ < 0 || player_ >= cell_count()) throw std::invalid_argument("SokobanState: no player");
  if (cells_[player_] & (kWall | kBox)) {
    throw std::invalid_argument("SokobanState: player on wall or box");
  }
  if (box_count() == 0) throw std::invalid_argument("SokobanState: no boxes");
  if (steps_elapsed_ < 0 || steps_elapsed_ > step_limit_) {
    throw std::invalid_argument("SokobanState: steps_elapsed outside [0, step_limit]");
  }
}

std::vector<double> SokobanState::observation() const {
  const int n = cell_count();
  std::vector<double> obs(static_cast<std::size_t>(kNumPlanes * n), 0.0);
  for (int i = 0; i < n; ++i) {
    const auto c = cells_[i];
    if (c & kWall) obs[kWallPlane * n + i] = 1.0;
    if (c & kTarget) obs[kTargetPlane * n + i] = 1.0;
    if (c & kBox) obs[kBoxPlane * n + i] = 1.0;
  }
  if (player_ >= 0) obs[kPlayerPlane * n + player_] = 1.0;
  return obs;
}

std::uint64_t SokobanState::board_hash() const {
  std::uint64_t h = splitmix64(static_cast<std::uint64_t>(width_) << 32 | static_cast<std::uint32_t>(height_));
  h = splitmix64(h ^ static_cast<std::uint64_t>(player_ + 1));
  for (auto c : cells_) h = h * 0x100000001b3ULL ^ c;
  return splitmix64(h);
}

bool episode_over(const SokobanState& s) {
  return s.solved() || s.steps_elapsed() >= s.step_limit();
}

double shaped_reward(const StepEvents& e) {
  double r = kStepPenalty;
  if (e.pushed_on_target) r += kBoxOnTargetReward;
  if (e.pushed_off_target) r += kBoxOffTargetPenalty;
  if (e.solved) r += kSolveReward;
  return r;
}

StepOutcome step(const SokobanState& s, Action a) {
  if (episode_over(s)) throw std::logic_error("sokoban::step: episode is already over");
  StepOutcome out;
  out.next = s;
  SokobanState& n = out.next;
  const auto [dr, dc] = action_delta(a);
  if (a != Action::kNoOp) {
    const int pr = s.row_of(s.player()) + dr;
    const int pc = s.col_of(s.player()) + dc;
    if (s.in_bounds(pr, pc)) {
      const int dest = s.index(pr, pc);
      if (!s.wall(dest)) {
        if (!s.box(dest)) {
          n.set_player(dest);
        } else {
          const int br = pr + dr;
          const int bc = pc + dc;
          if (s.in_bounds(br, bc)) {
            const int beyond = s.index(br, bc);
            if (!s.wall(beyond) && !s.box(beyond)) {
              n.set_box(dest, false);
              n.set_box(beyond, true);
              n.set_player(dest);
              out.events.pushed_on_target = !s.target(dest) && s.target(beyond);
              out.events.pushed_off_target = s.target(dest) && !s.target(beyond);
            }
          }
        }
      }
    }
  }
  n.set_steps_elapsed(s.steps_elapsed() + 1);
  out.events.solved = n.solved();
  out.reward = shaped_reward(out.events);
  out.done = out.events.solved || n.steps_elapsed() >= n.step_limit();
  out.truncated = out.done && !out.events.solved;
  return out;
}

namespace {

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    if (end == text.size()) break;
    start = end + 1;
  }
  // A trailing newline does not introduce a row.
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

[[noreturn]] void parse_error(const std::string& what, int row, int col) {
  throw std::invalid_argument("parse_level: " + what + " at row " + std::to_string(row) + ", col " +
                              std::to_string(col));
}

}  // namespace

SokobanState parse_level(std::string_view text) {
  std::vector<std::string_view> rows;
  for (std::string_view line : split_lines(text)) {
    if (!line.empty() && line.front() == ';') continue;
    rows.push_back(line);
  }
  if (rows.empty()) throw std::invalid_argument("parse_level: empty level");
  const int height = static_cast<int>(rows.size());
  const int width = static_cast<int>(rows.front().size());
  if (width == 0) throw std::invalid_argument("parse_level: empty first row");
  SokobanState s(width, height);
  int player = -1;
  for (int r = 0; r < height; ++r) {
    if (static_cast<int>(rows[r].size()) != width) {
      parse_error("non-rectangular level (row length " + std::to_string(rows[r].size()) +
                      ", expected " + std::to_string(width) + ")",
                  r, static_cast<int>(std::min<std::size_t>(rows[r].size(), width)));
    }
    for (int c = 0; c < width; ++c) {
      const int i = s.index(r, c);
      const char ch = rows[r][c];
      s.set_wall(i, ch == '#');
      switch (ch) {
        case '#':
        case ' ':
          break;
        case '.': s.set_target(i, true); break;
        case '$': s.set_box(i, true); break;
        case '*':
          s.set_box(i, true);
          s.set_target(i, true);
          break;
        case '@':
        case '+':
          if (player >= 0) parse_error("multiple players", r, c);
          player = i;
          if (ch == '+') s.set_target(i, true);
          break;
        default:
          parse_error(std::string("unknown symbol '") + ch + "'", r, c);
      }
    }
  }
  if (player < 0) throw std::invalid_argument("parse_level: no player");
  s.set_player(player);
  if (s.box_count() == 0) throw std::invalid_argument("parse_level: no boxes");
  s.validate();
  return s;
}

std::string render(const SokobanState& s) {
  std::string out;
  out.reserve(static_cast<std::size_t>((s.width() + 1) * s.height()));
  for (int r = 0; r < s.height(); ++r) {
    for (int c = 0; c < s.width(); ++c) {
      const int i = s.index(r, c);
      char ch = ' ';
      if (s.wall(i)) {
        ch = '#';
      } else if (i == s.player()) {
        ch = s.target(i) ? '+' : '@';
      } else if (s.box(i)) {
        ch = s.target(i) ? '*' : '$';
      } else if (s.target(i)) {
        ch = '.';
      }
      out.push_back(ch);
    }
    out.push_back('\n');
  }
  return out;
}

std::optional<std::string> LevelRecord::meta(std::string_view key) const {
  for (const auto& [k, v] : metadata) {
    if (k == key) return v;
  }
  return std::nullopt;
}

namespace {

std::string trim(std::string_view s) {
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && (s[a] == ' ' || s[a] == '\t')) ++a;
  while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\t')) --b;
  return std::string(s.substr(a, b - a));
}

}  // namespace

std::vector<LevelRecord> parse_level_file(std::string_view text) {
  std::vector<LevelRecord> out;
  std::vector<std::pair<std::string, std::string>> meta;
  std::string block;
  auto flush = [&] {
    if (!block.empty()) {
      out.push_back({parse_level(block), std::move(meta)});
    }
    block.clear();
    meta.clear();
  };
  for (std::string_view line : split_lines(text)) {
    if (line.empty()) {
      flush();
      continue;
    }
    if (line.front() == ';') {
      std::string_view body = line.substr(1);
      std::size_t sep = body.find_first_of(":=");
      if (sep == std::string_view::npos) {
        meta.emplace_back(trim(body), "");
      } else {
        meta.emplace_back(trim(body.substr(0, sep)), trim(body.substr(sep + 1)));
      }
      continue;
    }
    block.append(line);
    block.push_back('\n');
  }
  flush();
  return out;
}

std::string render_level_record(const LevelRecord& record) {
  std::string out;
  for (const auto& [k, v] : record.metadata) out += "; " + k + ": " + v + "\n";
  out += render(record.state);
  return out;
}

SokobanState decode_observation(std::span<const double> planes, int width, int height) {
  const int n = width * height;
  if (planes.size() != static_cast<std::size_t>(kNumPlanes * n)) {
    throw std::invalid_argument("decode_observation: plane size mismatch");
  }
  SokobanState s(width, height);
  int player = -1;
  for (int i = 0; i < n; ++i) {
    for (int p = 0; p < kNumPlanes; ++p) {
      const double v = planes[p * n + i];
      if (v != 0.0 && v != 1.0) throw std::invalid_argument("decode_observation: non-binary plane entry");
    }
    s.set_wall(i, planes[kWallPlane * n + i] == 1.0);
    s.set_target(i, planes[kTargetPlane * n + i] == 1.0);
    s.set_box(i, planes[kBoxPlane * n + i] == 1.0);
    if (planes[kPlayerPlane * n + i] == 1.0) {
      if (player >= 0) throw std::invalid_argument("decode_observation: multiple players");
      player = i;
    }
  }
  if (player < 0) throw std::invalid_argument("decode_observation: no player");
  s.set_player(player);
  s.set_step_limit(std::numeric_limits<int>::max());
  s.validate();
  return s;
}

std::optional<SokobanState> decode_observation_lenient(std::span<const double> planes, int width,
                                                       int height) {
  const int n = width * height;
  if (planes.size() != static_cast<std::size_t>(kNumPlanes * n)) {
    throw std::invalid_argument("decode_observation_lenient: plane size mismatch");
  }
  SokobanState s(width, height);
  int player = -1;
  for (int i = 0; i < n; ++i) {
    const bool wall = planes[kWallPlane * n + i] > 0.5;
    s.set_wall(i, wall);
    if (wall) continue;
    s.set_target(i, planes[kTargetPlane * n + i] > 0.5);
    const bool box = planes[kBoxPlane * n + i] > 0.5;
    s.set_box(i, box);
    if (!box && player < 0 && planes[kPlayerPlane * n + i] > 0.5) player = i;
  }
  if (player < 0) return std::nullopt;
  s.set_player(player);
  s.set_step_limit(std::numeric_limits<int>::max());
  return s;
}

}  // namespace i2a::sokoban
