#include "i2a/planners/planners.h"

#include <algorithm>
#include <cstring>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>

#include <absl/container/flat_hash_set.h>

namespace i2a {

using sokoban::SokobanState;

int min_matching_distance(const SokobanState& s) {
  const auto boxes = s.boxes();
  const auto targets = s.targets();
  if (boxes.empty()) return 0;
  if (targets.size() < boxes.size() || targets.size() > 16) {
    throw std::invalid_argument("min_matching_distance: unsupported box/target counts");
  }
  // dp[mask] over assigned targets, boxes taken in order.
  const std::size_t full = std::size_t{1} << targets.size();
  constexpr int kInf = std::numeric_limits<int>::max() / 2;
  std::vector<int> dp(full, kInf);
  dp[0] = 0;
  for (std::size_t mask = 0; mask < full; ++mask) {
    if (dp[mask] >= kInf) continue;
    const int b = __builtin_popcountll(mask);
    if (b >= static_cast<int>(boxes.size())) continue;
    for (std::size_t t = 0; t < targets.size(); ++t) {
      if (mask & (std::size_t{1} << t)) continue;
      const int d = std::abs(s.row_of(boxes[b]) - s.row_of(targets[t])) +
                    std::abs(s.col_of(boxes[b]) - s.col_of(targets[t]));
      auto& next = dp[mask | (std::size_t{1} << t)];
      next = std::min(next, dp[mask] + d);
    }
  }
  int best = kInf;
  for (std::size_t mask = 0; mask < full; ++mask) {
    if (__builtin_popcountll(mask) == static_cast<int>(boxes.size())) best = std::min(best, dp[mask]);
  }
  return best;
}

int corner_deadlocks(const SokobanState& s) {
  auto blocked = [&](int r, int c) { return !s.in_bounds(r, c) || s.wall(s.index(r, c)); };
  int dead = 0;
  for (int b : s.boxes()) {
    if (s.target(b)) continue;
    const int r = s.row_of(b), c = s.col_of(b);
    const bool vertical = blocked(r - 1, c) || blocked(r + 1, c);
    const bool horizontal = blocked(r, c - 1) || blocked(r, c + 1);
    if (vertical && horizontal) ++dead;
  }
  return dead;
}

double heuristic_value(const SokobanState& s) {
  const int b = s.box_count();
  const double penalty = 0.1 * b * (s.width() + s.height()) + 1.0;
  return s.boxes_on_target() + (s.solved() ? 10.0 : 0.0) - 0.1 * min_matching_distance(s) -
         penalty * corner_deadlocks(s);
}

ValueFunction sokoban_heuristic(int width, int height) {
  return [width, height](std::span<const double> f) {
    auto s = sokoban::decode_observation_lenient(f, width, height);
    if (!s || s->box_count() > static_cast<int>(s->targets().size())) return 0.0;
    return heuristic_value(*s);
  };
}

TerminalFunction sokoban_solved(int width, int height) {
  return [width, height](std::span<const double> f) {
    auto s = sokoban::decode_observation_lenient(f, width, height);
    return s && s->solved();
  };
}

std::uint64_t feature_hash(std::span<const double> features, int depth) {
  std::uint64_t h = splitmix64(static_cast<std::uint64_t>(depth) + 0x51ed27u);
  std::uint64_t word = 0;
  int bits = 0;
  for (double v : features) {
    // Features are overwhelmingly 0/1; anything else is folded in by value.
    if (v == 0.0 || v == 1.0) {
      word = (word << 1) | (v == 1.0 ? 1u : 0u);
    } else {
      std::uint64_t raw;
      std::memcpy(&raw, &v, sizeof raw);
      h = splitmix64(h ^ raw);
    }
    if (++bits == 64) {
      h = splitmix64(h ^ word);
      word = 0;
      bits = 0;
    }
  }
  return splitmix64(h ^ word ^ (static_cast<std::uint64_t>(bits) << 58));
}

Mcts::Mcts(WorldModel& model, ValueFunction value, MctsConfig config, TerminalFunction terminal)
    : model_(model),
      value_(std::move(value)),
      terminal_(std::move(terminal)),
      config_(config),
      num_actions_(model.num_actions()) {
  if (config_.budget < 1) throw std::invalid_argument("Mcts: budget must be >= 1");
  if (config_.max_depth < 1) throw std::invalid_argument("Mcts: max_depth must be >= 1");
  if (!value_) throw std::invalid_argument("Mcts: missing value function");
}

void Mcts::clear() {
  nodes_.clear();
  table_.clear();
}

int Mcts::find_or_add(std::span<const double> features, int depth, bool terminal, bool* hit) {
  const std::uint64_t key = feature_hash(features, depth);
  auto& bucket = table_[key];
  for (int id : bucket) {
    const Node& n = nodes_[id];
    if (n.depth == depth && std::equal(features.begin(), features.end(), n.features.begin(), n.features.end())) {
      if (hit) *hit = true;
      return id;
    }
  }
  if (hit) *hit = false;
  Node n;
  n.features.assign(features.begin(), features.end());
  n.depth = depth;
  n.terminal = terminal;
  n.value = terminal ? 0.0 : value_(features);
  n.child.assign(num_actions_, -1);
  n.reward.assign(num_actions_, 0.0);
  n.n.assign(num_actions_, 0);
  nodes_.push_back(std::move(n));
  const int id = static_cast<int>(nodes_.size()) - 1;
  bucket.push_back(id);
  return id;
}

double Mcts::mean_value(const Node& node) const {
  return node.return_count > 0 ? node.return_sum / node.return_count : node.value;
}

double Mcts::edge_q(const Node& node, int a) const {
  return node.reward[a] + config_.gamma * mean_value(nodes_[node.child[a]]);
}

int Mcts::select(const Node& node) const {
  for (int a = 0; a < num_actions_; ++a) {
    if (node.n[a] == 0) return a;
  }
  const double log_n = std::log(static_cast<double>(node.visits));
  int best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < num_actions_; ++a) {
    const double bonus = std::sqrt(log_n / nodes_[node.child[a]].return_count);
    const double score = edge_q(node, a) + config_.exploration * bonus;
    if (score > best_score) {
      best_score = score;
      best = a;
    }
  }
  return best;
}

void Mcts::simulate(int root, MctsStats& stats) {
  std::vector<std::pair<int, int>> path;
  int id = root;
  const int root_depth = nodes_[root].depth;
  double leaf = 0.0;
  while (true) {
    const Node& node = nodes_[id];
    if (node.terminal || node.depth - root_depth >= config_.max_depth) {
      leaf = node.value;
      break;
    }
    const int a = select(node);
    path.emplace_back(id, a);
    if (nodes_[id].child[a] < 0) {
      Prediction p = model_.predict(nodes_[id].features, a);
      ++stats.expansions;
      bool hit = false;
      const int child = find_or_add(p.next, nodes_[id].depth + 1, p.terminal, &hit);
      if (hit) ++stats.transposition_hits;
      nodes_[id].child[a] = child;
      nodes_[id].reward[a] = p.reward.value_or(0.0);
      id = child;
      leaf = nodes_[child].value;
      break;
    }
    id = nodes_[id].child[a];
  }
  // `id` is the leaf: an expanded child, a terminal or a depth-limited node.
  double g = leaf;
  nodes_[id].return_sum += g;
  nodes_[id].return_count += 1;
  for (auto it = path.rbegin(); it != path.rend(); ++it) {
    Node& node = nodes_[it->first];
    g = node.reward[it->second] + config_.gamma * g;
    node.n[it->second] += 1;
    node.visits += 1;
    node.return_sum += g;
    node.return_count += 1;
  }
}

MctsResult Mcts::search(std::span<const double> root_features, int depth) {
  MctsResult result;
  result.q.assign(num_actions_, 0.0);
  result.visits.assign(num_actions_, 0);
  if (terminal_ && terminal_(root_features)) return result;
  if (!config_.reuse_tree) clear();
  const std::uint64_t calls_before = model_.calls();
  bool hit = false;
  const int root = find_or_add(root_features, depth, false, &hit);
  result.stats.reused_root = hit;
  for (int i = 0; i < config_.budget; ++i) {
    simulate(root, result.stats);
    ++result.stats.simulations;
  }
  const Node& node = nodes_[root];
  int best = -1;
  for (int a = 0; a < num_actions_; ++a) {
    result.visits[a] = node.n[a];
    if (node.n[a] == 0) continue;
    result.q[a] = edge_q(node, a);
    if (best < 0 || result.q[a] > result.q[best] ||
        (result.q[a] == result.q[best] && node.n[a] > node.n[best])) {
      best = a;
    }
  }
  result.action = best;
  result.stats.nodes = nodes_.size();
  result.stats.model_calls = model_.calls() - calls_before;
  return result;
}

McSearchHead McSearchHead::create(std::size_t feature_dim, int num_actions, const McSearchConfig& config,
                                  Rng& rng) {
  if (config.depth < 1) throw std::invalid_argument("McSearchHead: depth must be >= 1");
  if (num_actions < 2) throw std::invalid_argument("McSearchHead: need at least 2 actions");
  McSearchHead h;
  h.config_ = config;
  h.num_actions_ = num_actions;
  const std::size_t hidden = static_cast<std::size_t>(config.hidden);
  h.value_hidden_ = DenseLayer::create(h.params_, "mc_value_hidden", feature_dim, hidden);
  h.value_out_ = DenseLayer::create(h.params_, "mc_value_out", hidden, 1);
  h.policy_hidden_ = DenseLayer::create(h.params_, "mc_rollout_hidden", feature_dim, hidden);
  h.policy_out_ = DenseLayer::create(h.params_, "mc_rollout_out", hidden, static_cast<std::size_t>(num_actions));
  h.delta_raw_ = h.params_.add("mc_delta_raw", 1);
  h.params_.init_glorot(rng);
  h.set_temperature(1.0);
  return h;
}

double McSearchHead::temperature() const {
  const double x = params_.view(delta_raw_)[0];
  return x > 30.0 ? x : std::log1p(std::exp(x));
}

void McSearchHead::set_temperature(double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("McSearchHead: temperature must be positive");
  params_.view(delta_raw_)[0] = delta > 30.0 ? delta : std::log(std::expm1(delta));
}

Var McSearchHead::value(Tape& tape, Var features) const {
  return value_out_(tape, tape.relu(value_hidden_(tape, features)));
}

Var McSearchHead::rollout_logits(Tape& tape, Var features) const {
  return policy_out_(tape, tape.relu(policy_hidden_(tape, features)));
}

Var McSearchHead::temperature(Tape& tape) const { return tape.softplus(tape.param(delta_raw_)); }

double McSearchHead::value(std::span<const double> features) const {
  Tape tape(params_);
  return tape.scalar_value(value(tape, tape.constant(features)));
}

std::vector<double> McSearchHead::rollout_logits(std::span<const double> features) const {
  Tape tape(params_);
  return tape.value_copy(rollout_logits(tape, tape.constant(features)));
}

RolloutPolicy McSearchHead::rollout_policy() const {
  return [this](std::span<const double> f, Rng& rng) {
    const auto p = softmax(rollout_logits(f));
    return rng.categorical(p);
  };
}

namespace {

// Number of rewards that count toward R, and whether V of the last frame is
// added (not for a terminal frame).
std::pair<std::size_t, bool> effective_length(const Rollout& r) {
  for (std::size_t t = 0; t < r.length(); ++t) {
    if (r.terminal[t]) return {t + 1, false};
  }
  return {r.length(), true};
}

}  // namespace

std::vector<double> mc_returns(const McSearchHead& head, const std::vector<Rollout>& rollouts) {
  std::vector<double> out;
  out.reserve(rollouts.size());
  for (const Rollout& r : rollouts) {
    const auto [len, bootstrap] = effective_length(r);
    double g = 0.0;
    double discount = 1.0;
    for (std::size_t t = 0; t < len; ++t) {
      g += discount * r.rewards[t];
      discount *= head.config().gamma;
    }
    if (bootstrap) g += head.value(r.frames[len - 1]);
    if (!std::isfinite(g)) throw std::domain_error("mc_returns: non-finite return");
    out.push_back(g);
  }
  return out;
}

Var mc_returns(Tape& tape, const McSearchHead& head, const std::vector<Rollout>& rollouts) {
  std::vector<Var> parts;
  parts.reserve(rollouts.size());
  for (const Rollout& r : rollouts) {
    const auto [len, bootstrap] = effective_length(r);
    double g = 0.0;
    double discount = 1.0;
    for (std::size_t t = 0; t < len; ++t) {
      g += discount * r.rewards[t];
      discount *= head.config().gamma;
    }
    Var ret = tape.scalar(g);
    if (bootstrap) ret = tape.add(ret, head.value(tape, tape.constant(r.frames[len - 1])));
    parts.push_back(ret);
  }
  Var all = tape.concat(parts);
  tape.check_finite(all, "mc_returns");
  return all;
}

Var mc_logits(Tape& tape, const McSearchHead& head, const std::vector<Rollout>& rollouts) {
  Var r = mc_returns(tape, head, rollouts);
  if (head.config().literal_sign) r = tape.neg(r);
  return tape.div(r, head.temperature(tape));
}

std::vector<double> mc_probabilities(std::span<const double> returns, double delta, bool literal_sign) {
  if (!(delta > 0.0)) throw std::invalid_argument("mc_probabilities: temperature must be positive");
  std::vector<double> logits(returns.begin(), returns.end());
  for (double& x : logits) {
    if (!std::isfinite(x)) throw std::domain_error("mc_probabilities: non-finite return");
    x = (literal_sign ? -x : x) / delta;
  }
  return softmax(logits);
}

McDecision mc_search_act(std::span<const double> features, WorldModel& model, const McSearchHead& head,
                         Rng& rng) {
  McDecision d;
  const std::uint64_t before = model.calls();
  const RolloutPolicy policy = head.rollout_policy();
  for (int a = 0; a < head.num_actions(); ++a) {
    d.rollouts.push_back(rollout(model, features, a, policy, head.config().depth, rng));
  }
  d.model_calls = model.calls() - before;
  d.returns = mc_returns(head, d.rollouts);
  d.probs = mc_probabilities(d.returns, head.temperature(), head.config().literal_sign);
  d.action = rng.categorical(d.probs);
  return d;
}

RetryResult nested_retry_solve(std::span<const double> features, WorldModel& model, const EpisodePolicy& policy,
                               const RetryConfig& config, Rng& rng, std::span<WorldModel* const> also_count) {
  if (config.max_retries < 1 || config.max_retries > 16) {
    throw std::invalid_argument("nested_retry_solve: max_retries must lie in [1, 16]");
  }
  auto total_calls = [&] {
    std::uint64_t n = model.calls();
    for (const WorldModel* m : also_count) n += m->calls();
    return n;
  };
  const std::uint64_t before = total_calls();
  RetryResult result;
  for (int attempt = 1; attempt <= config.max_retries && !result.solved; ++attempt) {
    result.retries_used = attempt;
    std::vector<double> f(features.begin(), features.end());
    std::vector<int> plan;
    for (int t = 0; t < config.max_steps; ++t) {
      const int a = policy(f, rng);
      plan.push_back(a);
      Prediction p = model.predict(f, a);
      if (p.terminal) {
        result.solved = true;
        result.plan = std::move(plan);
        break;
      }
      f = std::move(p.next);
    }
  }
  result.model_calls = total_calls() - before;
  return result;
}

std::optional<int> bfs_solution_length(const SokobanState& start, std::size_t max_states) {
  if (start.solved()) return 0;
  struct Item {
    SokobanState s;
    int d;
  };
  absl::flat_hash_set<std::uint64_t> seen;
  std::deque<Item> queue;
  SokobanState root = start;
  root.set_step_limit(std::numeric_limits<int>::max());
  root.set_steps_elapsed(0);
  seen.insert(root.board_hash());
  queue.push_back({root, 0});
  while (!queue.empty() && seen.size() < max_states) {
    Item item = std::move(queue.front());
    queue.pop_front();
    for (int a = 0; a < 4; ++a) {
      auto o = sokoban::step(item.s, static_cast<sokoban::Action>(a));
      if (o.next.solved()) return item.d + 1;
      if (!seen.insert(o.next.board_hash()).second) continue;
      queue.push_back({std::move(o.next), item.d + 1});
    }
  }
  return std::nullopt;
}

}  // namespace i2a
