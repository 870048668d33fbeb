#include "i2a/sokoban/procgen.h"

#include <absl/container/flat_hash_set.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <stdexcept>

namespace i2a::sokoban {

int GenParams::effective_walk_steps() const {
  if (walk_steps >= 0) return walk_steps;
  return static_cast<int>(std::lround(1.5 * (width + height)));
}

void GenParams::validate() const {
  if (width < 5 || height < 5) throw std::invalid_argument("GenParams: width and height must be >= 5");
  if (width * height > 256) throw std::invalid_argument("GenParams: at most 256 cells are supported");
  if (num_boxes < 1 || num_boxes > 7) throw std::invalid_argument("GenParams: num_boxes must lie in [1, 7]");
  if (!(turn_prob >= 0.0 && turn_prob <= 1.0)) throw std::invalid_argument("GenParams: turn_prob must lie in [0, 1]");
  if (max_depth < 1 || max_visited < 1 || topology_retries < 1 || placement_retries < 1 || step_limit < 1) {
    throw std::invalid_argument("GenParams: limits must be positive");
  }
}

int Topology::empty_count() const {
  return static_cast<int>(std::count(wall.begin(), wall.end(), std::uint8_t{0}));
}

namespace {

// Carve patterns as (row, col) offsets from the visited cell.
constexpr std::array<std::array<std::array<int, 2>, 4>, 4> kPatterns = {{
    {{{0, 0}, {0, 0}, {0, 0}, {0, 0}}},  // single cell
    {{{0, 0}, {0, 1}, {0, 0}, {0, 0}}},  // 1x2
    {{{0, 0}, {1, 0}, {0, 0}, {0, 0}}},  // 2x1
    {{{0, 0}, {0, 1}, {1, 0}, {1, 1}}},  // 2x2
}};

constexpr std::array<std::array<int, 2>, 4> kDirs = {{{-1, 0}, {1, 0}, {0, -1}, {0, 1}}};

// All 8! orderings of the reverse actions, so a permutation costs one draw.
const std::vector<std::array<std::uint8_t, 8>>& permutations8() {
  static const std::vector<std::array<std::uint8_t, 8>> table = [] {
    std::vector<std::array<std::uint8_t, 8>> t;
    std::array<std::uint8_t, 8> p{0, 1, 2, 3, 4, 5, 6, 7};
    do {
      t.push_back(p);
    } while (std::next_permutation(p.begin(), p.end()));
    return t;
  }();
  return table;
}

class ReversePlayer {
 public:
  ReversePlayer(const Topology& topo, const Placement& placement, const GenParams& params, Rng& rng)
      : topo_(topo), params_(params), rng_(rng), width_(topo.width) {
    const int n = topo.width * topo.height;
    is_target_.assign(n, 0);
    box_at_.assign(n, -1);
    for (std::size_t i = 0; i < placement.targets.size(); ++i) {
      const int t = placement.targets[i];
      is_target_[t] = 1;
      box_at_[t] = static_cast<std::int8_t>(i);
      box_pos_.push_back(t);
      target_of_.push_back(t);
    }
    player_ = placement.player;
    visited_.clear();
    path_.reserve(static_cast<std::size_t>(params.max_depth));
  }

  void run() { visit(0, 0, -1); }

  std::int64_t best_score() const { return best_score_; }
  std::int64_t visited() const { return static_cast<std::int64_t>(visited_.size()); }
  int max_depth_reached() const { return max_depth_reached_; }
  const std::vector<int>& best_boxes() const { return best_boxes_; }
  int best_player() const { return best_player_; }
  const std::vector<std::uint8_t>& best_path() const { return best_path_; }

 private:
  std::uint64_t key() const {
    std::array<std::uint8_t, 8> sorted{};
    const std::size_t nb = box_pos_.size();
    for (std::size_t i = 0; i < nb; ++i) sorted[i] = static_cast<std::uint8_t>(box_pos_[i]);
    std::sort(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(nb));
    std::uint64_t k = static_cast<std::uint8_t>(player_);
    for (std::size_t i = 0; i < nb; ++i) k |= static_cast<std::uint64_t>(sorted[i]) << (8 * (i + 1));
    return k;
  }

  std::int64_t score(int swaps) const {
    if (is_target_[player_]) return 0;
    std::int64_t displacement = 0;
    for (std::size_t i = 0; i < box_pos_.size(); ++i) {
      const int b = box_pos_[i];
      if (is_target_[b]) return 0;
      const int t = target_of_[i];
      displacement += std::abs(b / width_ - t / width_) + std::abs(b % width_ - t % width_);
    }
    return static_cast<std::int64_t>(swaps) * displacement;
  }

  void visit(int depth, int swaps, int last_pulled) {
    if (stopped_) return;
    if (!visited_.insert(key()).second) return;
    max_depth_reached_ = std::max(max_depth_reached_, depth);
    const std::int64_t s = score(swaps);
    if (s > best_score_) {
      best_score_ = s;
      best_boxes_ = box_pos_;
      best_player_ = player_;
      best_path_ = path_;
    }
    if (static_cast<std::int64_t>(visited_.size()) >= params_.max_visited) {
      stopped_ = true;
      return;
    }
    if (depth >= params_.max_depth) return;

    const auto& perms = permutations8();
    const auto& order = perms[rng_.uniform_int(static_cast<std::uint64_t>(perms.size()))];
    for (std::uint8_t action : order) {
      if (stopped_) return;
      const int dir = action & 3;
      const bool pull = action >= 4;
      const int row = player_ / width_;
      const int col = player_ % width_;
      const int nr = row + kDirs[dir][0];
      const int nc = col + kDirs[dir][1];
      if (nr < 0 || nc < 0 || nr >= topo_.height || nc >= width_) continue;
      const int next = nr * width_ + nc;
      if (topo_.wall[next] || box_at_[next] >= 0) continue;
      int pulled = -1;
      int from = -1;
      if (pull) {
        const int br = row - kDirs[dir][0];
        const int bc = col - kDirs[dir][1];
        if (br < 0 || bc < 0 || br >= topo_.height || bc >= width_) continue;
        from = br * width_ + bc;
        pulled = box_at_[from];
        if (pulled < 0) continue;
      }

      const int old_player = player_;
      player_ = next;
      int next_swaps = swaps;
      int next_last = last_pulled;
      if (pull) {
        box_at_[from] = -1;
        box_at_[old_player] = static_cast<std::int8_t>(pulled);
        box_pos_[pulled] = old_player;
        if (pulled != last_pulled) ++next_swaps;
        next_last = pulled;
      }
      path_.push_back(action);
      visit(depth + 1, next_swaps, next_last);
      path_.pop_back();
      if (pull) {
        box_at_[old_player] = -1;
        box_at_[from] = static_cast<std::int8_t>(pulled);
        box_pos_[pulled] = from;
      }
      player_ = old_player;
    }
  }

  const Topology& topo_;
  const GenParams& params_;
  Rng& rng_;
  int width_;
  std::vector<std::uint8_t> is_target_;
  std::vector<std::int8_t> box_at_;
  std::vector<int> box_pos_;
  std::vector<int> target_of_;
  int player_ = -1;
  std::vector<std::uint8_t> path_;

  static thread_local absl::flat_hash_set<std::uint64_t> visited_;
  bool stopped_ = false;
  std::int64_t best_score_ = 0;
  int max_depth_reached_ = 0;
  std::vector<int> best_boxes_;
  int best_player_ = -1;
  std::vector<std::uint8_t> best_path_;
};

thread_local absl::flat_hash_set<std::uint64_t> ReversePlayer::visited_;

Action dir_action(int dir) {
  static constexpr std::array<Action, 4> kMap = {Action::kUp, Action::kDown, Action::kLeft, Action::kRight};
  return kMap[dir];
}

}  // namespace

Topology generate_topology(const GenParams& params, Rng& rng) {
  Topology t{params.width, params.height,
             std::vector<std::uint8_t>(static_cast<std::size_t>(params.width * params.height), 1)};
  const int steps = params.effective_walk_steps();
  int row = 1 + rng.uniform_int(params.height - 2);
  int col = 1 + rng.uniform_int(params.width - 2);
  int dir = rng.uniform_int(4);
  for (int s = 0; s < steps; ++s) {
    const auto& pattern = kPatterns[rng.uniform_int(static_cast<int>(kPatterns.size()))];
    for (const auto& [dr, dc] : pattern) {
      const int r = row + dr;
      const int c = col + dc;
      // The outer ring always stays wall.
      if (r >= 1 && c >= 1 && r <= params.height - 2 && c <= params.width - 2) {
        t.wall[r * params.width + c] = 0;
      }
    }
    if (rng.bernoulli(params.turn_prob)) dir = rng.uniform_int(4);
    row = std::clamp(row + kDirs[dir][0], 1, params.height - 2);
    col = std::clamp(col + kDirs[dir][1], 1, params.width - 2);
  }
  return t;
}

std::optional<Placement> place_entities(const Topology& topology, int num_boxes, Rng& rng) {
  std::vector<int> empty;
  for (int i = 0; i < static_cast<int>(topology.wall.size()); ++i) {
    if (!topology.wall[i]) empty.push_back(i);
  }
  const int needed = num_boxes + 1;
  if (num_boxes < 1 || static_cast<int>(empty.size()) < needed) return std::nullopt;
  // Partial Fisher-Yates: the first `needed` entries become a uniform sample.
  for (int i = 0; i < needed; ++i) {
    const int j = i + rng.uniform_int(static_cast<int>(empty.size()) - i);
    std::swap(empty[i], empty[j]);
  }
  Placement p;
  p.targets.assign(empty.begin(), empty.begin() + num_boxes);
  p.player = empty[num_boxes];
  return p;
}

std::optional<RoomCandidate> reverse_play_search(const Topology& topology, const Placement& placement,
                                                 const GenParams& params, Rng& rng,
                                                 ReverseSearchStats* stats) {
  if (placement.targets.empty() || placement.targets.size() > 7) {
    throw std::invalid_argument("reverse_play_search: need between 1 and 7 targets");
  }
  if (topology.width * topology.height > 256) {
    throw std::invalid_argument("reverse_play_search: at most 256 cells are supported");
  }
  ReversePlayer player(topology, placement, params, rng);
  player.run();
  if (stats) {
    stats->visited = player.visited();
    stats->max_depth_reached = player.max_depth_reached();
    stats->best_score = player.best_score();
  }
  if (player.best_score() <= 0) return std::nullopt;

  RoomCandidate out;
  SokobanState s(topology.width, topology.height);
  for (int i = 0; i < s.cell_count(); ++i) s.set_wall(i, topology.wall[i] != 0);
  for (int t : placement.targets) s.set_target(t, true);
  for (int b : player.best_boxes()) s.set_box(b, true);
  s.set_player(player.best_player());
  s.set_step_limit(params.step_limit);
  out.state = std::move(s);
  out.score = player.best_score();
  out.visited = player.visited();
  out.max_depth_reached = player.max_depth_reached();
  const auto& path = player.best_path();
  out.solution.reserve(path.size());
  for (auto it = path.rbegin(); it != path.rend(); ++it) {
    out.solution.push_back(opposite(dir_action(*it & 3)));
  }
  return out;
}

GenerationResult generate_level(const GenParams& params, std::uint64_t seed) {
  params.validate();
  Rng rng(seed);
  GenerationResult result;
  for (int t = 0; t < params.topology_retries; ++t) {
    ++result.topologies_tried;
    const Topology topo = generate_topology(params, rng);
    for (int p = 0; p < params.placement_retries; ++p) {
      ++result.placements_tried;
      auto placement = place_entities(topo, params.num_boxes, rng);
      if (!placement) break;  // the topology is too small; no placement can succeed
      auto candidate = reverse_play_search(topo, *placement, params, rng);
      if (candidate) {
        result.level = std::move(candidate);
        return result;
      }
    }
  }
  result.failure = "no configuration with positive score after " + std::to_string(result.topologies_tried) +
                   " topologies and " + std::to_string(result.placements_tried) + " placements";
  return result;
}

bool replay_solves(const SokobanState& start, const std::vector<Action>& solution) {
  SokobanState s = start;
  s.set_steps_elapsed(0);
  s.set_step_limit(std::numeric_limits<int>::max());
  if (s.solved()) return true;
  for (Action a : solution) {
    StepOutcome o = step(s, a);
    s = std::move(o.next);
    if (o.events.solved) return true;
  }
  return false;
}

std::string encode_trace(const std::vector<Action>& trace) {
  std::string out;
  out.reserve(trace.size());
  for (Action a : trace) out.push_back("udlrn"[static_cast<int>(a)]);
  return out;
}

std::vector<Action> decode_trace(std::string_view text) {
  std::vector<Action> out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case 'u': out.push_back(Action::kUp); break;
      case 'd': out.push_back(Action::kDown); break;
      case 'l': out.push_back(Action::kLeft); break;
      case 'r': out.push_back(Action::kRight); break;
      case 'n': out.push_back(Action::kNoOp); break;
      default: throw std::invalid_argument(std::string("decode_trace: bad symbol '") + c + "'");
    }
  }
  return out;
}

LevelRecord make_level_record(const RoomCandidate& level, std::uint64_t seed) {
  LevelRecord r{level.state, {}};
  r.metadata.emplace_back("seed", std::to_string(seed));
  r.metadata.emplace_back("score", std::to_string(level.score));
  r.metadata.emplace_back("trace_length", std::to_string(level.solution.size()));
  r.metadata.emplace_back("trace", encode_trace(level.solution));
  return r;
}

}  // namespace i2a::sokoban
