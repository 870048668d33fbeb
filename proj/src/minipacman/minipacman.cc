#include "i2a/minipacman/minipacman.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "i2a/numerics/rng.h"
#include "json.hpp"

namespace i2a::minipacman {
namespace {

// Must stay identical to data/minipacman_maze.txt.
constexpr std::string_view kDefaultMaze =
    "###############\n"
    "#.............#\n"
    "#.###.###.###.#\n"
    "#.............#\n"
    "#.#.##.#.##.#.#\n"
    "#.#....#....#.#\n"
    "#.#.##.#.##.#.#\n"
    "#.............#\n"
    "###.#.###.#.###\n"
    "###.........###\n"
    "###.#.###.#.###\n"
    "#.............#\n"
    "#.##.#####.##.#\n"
    "#....#...#....#\n"
    "##.#.#.#.#.#.##\n"
    "#.............#\n"
    "#.#####.#####.#\n"
    "#.............#\n"
    "###############\n";

}  // namespace

Direction opposite(Direction d) {
  switch (d) {
    case Direction::kDown: return Direction::kUp;
    case Direction::kUp: return Direction::kDown;
    case Direction::kLeft: return Direction::kRight;
    case Direction::kRight: return Direction::kLeft;
  }
  return d;
}

std::array<int, 2> delta(Direction d) {
  switch (d) {
    case Direction::kDown: return {1, 0};
    case Direction::kUp: return {-1, 0};
    case Direction::kLeft: return {0, -1};
    case Direction::kRight: return {0, 1};
  }
  return {0, 0};
}

bool Maze::is_wall(int row, int col) const {
  if (row < 0 || col < 0 || row >= height || col >= width) return true;
  return wall[index(row, col)] != 0;
}

std::vector<int> Maze::corridor_cells() const {
  std::vector<int> out;
  for (int i = 0; i < width * height; ++i) {
    if (!wall[i]) out.push_back(i);
  }
  return out;
}

Maze Maze::parse(std::string_view text) {
  std::vector<std::string_view> rows;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) rows.push_back(line);
    start = end + 1;
  }
  if (rows.empty()) throw std::invalid_argument("Maze::parse: empty maze");
  Maze m;
  m.height = static_cast<int>(rows.size());
  m.width = static_cast<int>(rows.front().size());
  m.wall.assign(static_cast<std::size_t>(m.width * m.height), 0);
  for (int r = 0; r < m.height; ++r) {
    if (static_cast<int>(rows[r].size()) != m.width) {
      throw std::invalid_argument("Maze::parse: non-rectangular maze at row " + std::to_string(r));
    }
    for (int c = 0; c < m.width; ++c) {
      const bool wall = rows[r][c] == '#';
      const bool border = r == 0 || c == 0 || r == m.height - 1 || c == m.width - 1;
      if (border && !wall) {
        throw std::invalid_argument("Maze::parse: open border cell at row " + std::to_string(r) +
                                    ", col " + std::to_string(c));
      }
      m.wall[m.index(r, c)] = wall ? 1 : 0;
    }
  }
  return m;
}

std::shared_ptr<const Maze> Maze::default_maze() {
  static const std::shared_ptr<const Maze> maze = std::make_shared<const Maze>(parse(kDefaultMaze));
  return maze;
}

const char* clear_rule_name(ClearRule r) {
  switch (r) {
    case ClearRule::kAllFood: return "all-food";
    case ClearRule::kFixed128Steps: return "fixed-128-steps";
    case ClearRule::kGhostsGoneOr80Steps: return "ghosts-or-80";
    case ClearRule::kAllPills: return "all-pills";
  }
  return "?";
}

ClearRule parse_clear_rule(std::string_view name) {
  for (ClearRule r : {ClearRule::kAllFood, ClearRule::kFixed128Steps, ClearRule::kGhostsGoneOr80Steps,
                      ClearRule::kAllPills}) {
    if (name == clear_rule_name(r)) return r;
  }
  throw std::invalid_argument("unknown clear rule: " + std::string(name));
}

const std::vector<TaskSpec>& default_tasks() {
  // Weights over (moving, food, pill, ghost eaten, eaten by ghost).
  static const std::vector<TaskSpec> tasks = {
      {"regular", {0.0, 1.0, 2.0, 5.0, 0.0}, ClearRule::kAllFood},
      {"avoid", {0.1, -0.1, -5.0, -10.0, -20.0}, ClearRule::kFixed128Steps},
      {"hunt", {0.0, 0.0, 1.0, 10.0, -20.0}, ClearRule::kGhostsGoneOr80Steps},
      {"ambush", {0.0, -0.1, 0.0, 10.0, -20.0}, ClearRule::kGhostsGoneOr80Steps},
      {"rush", {0.0, -0.1, 10.0, 0.0, 0.0}, ClearRule::kAllPills},
  };
  return tasks;
}

const TaskSpec& task_by_name(std::string_view name) {
  for (const TaskSpec& t : default_tasks()) {
    if (t.name == name) return t;
  }
  throw std::invalid_argument("unknown MiniPacman task: " + std::string(name));
}

std::vector<TaskSpec> parse_task_table(std::string_view json_text) {
  const auto j = nlohmann::json::parse(json_text);
  if (!j.is_object()) throw std::invalid_argument("task table must be a JSON object");
  std::vector<TaskSpec> out;
  for (const auto& [name, body] : j.items()) {
    TaskSpec t;
    t.name = name;
    const auto& w = body.at("w_rew");
    if (!w.is_array() || w.size() != 5) throw std::invalid_argument("task " + name + ": w_rew needs 5 entries");
    for (std::size_t i = 0; i < 5; ++i) {
      t.w_rew[i] = w[i].get<double>();
      if (!std::isfinite(t.w_rew[i])) throw std::invalid_argument("task " + name + ": non-finite weight");
    }
    t.clear_rule = parse_clear_rule(body.at("clear").get<std::string>());
    out.push_back(std::move(t));
  }
  return out;
}

double reward(const TaskSpec& task, const EventVector& events) {
  double r = 0.0;
  for (std::size_t i = 0; i < 5; ++i) r += task.w_rew[i] * events[i];
  return r;
}

int MiniPacmanState::food_count() const {
  return static_cast<int>(std::count(food.begin(), food.end(), std::uint8_t{1}));
}

int MiniPacmanState::pill_count() const {
  return static_cast<int>(std::count(pills.begin(), pills.end(), std::uint8_t{1}));
}

bool MiniPacmanState::operator==(const MiniPacmanState& o) const {
  if (ghosts.size() != o.ghosts.size()) return false;
  for (std::size_t i = 0; i < ghosts.size(); ++i) {
    if (ghosts[i].cell != o.ghosts[i].cell || ghosts[i].dir != o.ghosts[i].dir) return false;
  }
  return maze == o.maze && food == o.food && pills == o.pills && player == o.player &&
         pill_timer == o.pill_timer && level == o.level && steps_in_level == o.steps_in_level &&
         episode_steps == o.episode_steps && episode_step_limit == o.episode_step_limit &&
         over == o.over && seed == o.seed;
}

int ghost_count_for_level(int level) {
  if (level < 1) throw std::invalid_argument("level index must be >= 1");
  return 1 + (level - 1) / 2;
}

namespace {

bool can_move(const Maze& m, int cell, Direction d) {
  const auto [dr, dc] = delta(d);
  return !m.is_wall(cell / m.width + dr, cell % m.width + dc);
}

int moved(const Maze& m, int cell, Direction d) {
  const auto [dr, dc] = delta(d);
  return m.index(cell / m.width + dr, cell % m.width + dc);
}

std::uint64_t level_seed(std::uint64_t episode_seed, int level) {
  return splitmix64(episode_seed ^ splitmix64(static_cast<std::uint64_t>(level)));
}

}  // namespace

MiniPacmanState new_level(int level, std::uint64_t seed, std::shared_ptr<const Maze> maze) {
  const int ghosts = ghost_count_for_level(level);
  std::vector<int> cells = maze->corridor_cells();
  const int needed = 1 + kPillsPerLevel + ghosts;
  if (static_cast<int>(cells.size()) < needed) throw std::invalid_argument("new_level: maze too small");
  Rng rng(level_seed(seed, level));
  for (int i = 0; i < needed; ++i) {
    const int j = i + rng.uniform_int(static_cast<int>(cells.size()) - i);
    std::swap(cells[i], cells[j]);
  }
  MiniPacmanState s;
  s.maze = maze;
  const std::size_t n = static_cast<std::size_t>(maze->width * maze->height);
  s.food.assign(n, 0);
  s.pills.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) s.food[i] = maze->wall[i] ? 0 : 1;
  s.player = cells[0];
  s.food[s.player] = 0;
  for (int k = 0; k < kPillsPerLevel; ++k) {
    s.pills[cells[1 + k]] = 1;
    s.food[cells[1 + k]] = 0;
  }
  for (int g = 0; g < ghosts; ++g) {
    Ghost ghost;
    ghost.cell = cells[1 + kPillsPerLevel + g];
    std::vector<Direction> open;
    for (Direction d : kScanOrder) {
      if (can_move(*maze, ghost.cell, d)) open.push_back(d);
    }
    ghost.dir = open.empty() ? Direction::kDown : open[rng.uniform_int(static_cast<int>(open.size()))];
    s.ghosts.push_back(ghost);
  }
  s.level = level;
  s.seed = seed;
  return s;
}

Direction move_ghost(const MiniPacmanState& s, const Ghost& ghost) {
  const Maze& m = *s.maze;
  std::vector<Direction> allowed;
  for (Direction d : kScanOrder) {
    if (can_move(m, ghost.cell, d)) allowed.push_back(d);
  }
  if (allowed.empty()) return ghost.dir;
  if (allowed.size() == 1) return allowed.front();
  if (allowed.size() == 2) {
    if (std::find(allowed.begin(), allowed.end(), ghost.dir) != allowed.end()) return ghost.dir;
    if (opposite(ghost.dir) == allowed[0]) return allowed[1];
    return allowed[0];
  }
  // Ghosts do not turn around at intersections.
  std::erase(allowed, opposite(ghost.dir));
  double x = s.col_of(s.player) - s.col_of(ghost.cell);
  double y = s.row_of(s.player) - s.row_of(ghost.cell);
  const double norm = std::sqrt(x * x + y * y);
  if (norm > 0.0) {
    x /= norm;
    y /= norm;
  }
  const bool flee = s.pill_timer > 0;
  std::size_t best = 0;
  double best_dot = 0.0;
  for (std::size_t i = 0; i < allowed.size(); ++i) {
    const auto [dr, dc] = delta(allowed[i]);
    const double dot = x * dc + y * dr;
    if (i == 0 || (flee ? dot < best_dot : dot > best_dot)) {
      best = i;
      best_dot = dot;
    }
  }
  return allowed[best];
}

StepResult step(const MiniPacmanState& s, Action a, const TaskSpec& task) {
  if (s.over) throw std::logic_error("minipacman::step: episode is over");
  const Maze& m = *s.maze;
  StepResult out;
  out.next = s;
  MiniPacmanState& n = out.next;
  EventVector& ev = out.events;
  ev[kMoving] = 1;

  const bool powered = s.pill_timer > 0;

  // Ghost headings come from the pre-step state.
  std::vector<int> ghost_from(s.ghosts.size());
  std::vector<int> ghost_to(s.ghosts.size());
  for (std::size_t g = 0; g < s.ghosts.size(); ++g) {
    const Direction d = move_ghost(s, s.ghosts[g]);
    ghost_from[g] = s.ghosts[g].cell;
    ghost_to[g] = can_move(m, s.ghosts[g].cell, d) ? moved(m, s.ghosts[g].cell, d) : s.ghosts[g].cell;
    n.ghosts[g].dir = d;
    n.ghosts[g].cell = ghost_to[g];
  }

  // Player path: start cell followed by each cell entered this step. At
  // double speed a second square that is a wall is backed off.
  std::vector<int> path{s.player};
  if (a != Action::kNoOp) {
    static constexpr std::array<Direction, 4> kActionDir = {Direction::kUp, Direction::kDown,
                                                            Direction::kLeft, Direction::kRight};
    const Direction d = kActionDir[static_cast<int>(a)];
    const int speed = powered ? 2 : 1;
    for (int k = 0; k < speed; ++k) {
      if (!can_move(m, path.back(), d)) break;
      path.push_back(moved(m, path.back(), d));
    }
  }
  n.player = path.back();

  bool ate_pill = false;
  for (std::size_t i = 1; i < path.size(); ++i) {
    const int c = path[i];
    if (n.food[c]) {
      n.food[c] = 0;
      ++ev[kFood];
    }
    if (n.pills[c]) {
      n.pills[c] = 0;
      ++ev[kPill];
      ate_pill = true;
    }
  }

  // Cells occupied after / before each sub-move; a stationary player
  // occupies its start cell in both.
  const std::vector<int> after = path.size() > 1 ? std::vector<int>(path.begin() + 1, path.end()) : path;
  const std::vector<int> before = path.size() > 1 ? std::vector<int>(path.begin(), path.end() - 1) : path;
  auto contains = [](const std::vector<int>& v, int c) { return std::find(v.begin(), v.end(), c) != v.end(); };

  const bool edible = powered || ate_pill;
  std::vector<Ghost> survivors;
  for (std::size_t g = 0; g < n.ghosts.size(); ++g) {
    const bool meet = contains(after, ghost_to[g]) ||
                      (contains(after, ghost_from[g]) && contains(before, ghost_to[g]));
    if (!meet) {
      survivors.push_back(n.ghosts[g]);
      continue;
    }
    if (edible) {
      ++ev[kGhostEaten];
    } else {
      ev[kEaten] = 1;
      survivors.push_back(n.ghosts[g]);
    }
  }
  n.ghosts = std::move(survivors);

  if (ate_pill) {
    n.pill_timer = kPillDuration;
  } else if (powered) {
    n.pill_timer = s.pill_timer - 1;
  }
  ++n.steps_in_level;
  ++n.episode_steps;
  out.reward = reward(task, ev);

  if (ev[kEaten]) {
    n.over = true;
    out.done = true;
    return out;
  }

  bool cleared = false;
  switch (task.clear_rule) {
    case ClearRule::kAllFood: cleared = n.food_count() == 0; break;
    case ClearRule::kFixed128Steps: cleared = n.steps_in_level >= 128; break;
    case ClearRule::kGhostsGoneOr80Steps: cleared = n.ghosts.empty() || n.steps_in_level >= 80; break;
    case ClearRule::kAllPills: cleared = n.pill_count() == 0; break;
  }
  if (cleared) {
    out.level_cleared = true;
    MiniPacmanState fresh = new_level(n.level + 1, n.seed, n.maze);
    fresh.episode_steps = n.episode_steps;
    fresh.episode_step_limit = n.episode_step_limit;
    n = std::move(fresh);
  }
  if (n.episode_step_limit > 0 && n.episode_steps >= n.episode_step_limit) {
    n.over = true;
    out.done = true;
    out.truncated = true;
  }
  return out;
}

std::vector<double> observation(const MiniPacmanState& s) {
  const Maze& m = *s.maze;
  const int n = m.width * m.height;
  std::vector<double> obs(static_cast<std::size_t>(kNumPlanes * n), 0.0);
  const double timer = static_cast<double>(s.pill_timer) / kPillDuration;
  for (int i = 0; i < n; ++i) {
    obs[0 * n + i] = m.wall[i] ? 1.0 : 0.0;
    obs[1 * n + i] = s.food[i] ? 1.0 : 0.0;
    obs[2 * n + i] = s.pills[i] ? 1.0 : 0.0;
    obs[5 * n + i] = timer;
  }
  for (const Ghost& g : s.ghosts) obs[3 * n + g.cell] = 1.0;
  obs[4 * n + s.player] = 1.0;
  return obs;
}

std::string render(const MiniPacmanState& s) {
  const Maze& m = *s.maze;
  std::string out;
  for (int r = 0; r < m.height; ++r) {
    for (int c = 0; c < m.width; ++c) {
      const int i = m.index(r, c);
      char ch = ' ';
      if (m.wall[i]) ch = '#';
      else if (s.pills[i]) ch = 'o';
      else if (s.food[i]) ch = '.';
      for (const Ghost& g : s.ghosts) {
        if (g.cell == i) ch = 'G';
      }
      if (s.player == i) ch = 'P';
      out.push_back(ch);
    }
    out.push_back('\n');
  }
  return out;
}

}  // namespace i2a::minipacman
