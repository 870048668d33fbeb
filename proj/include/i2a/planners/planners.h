#pragma once

#include <absl/container/flat_hash_map.h>

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "i2a/model/world_model.h"
#include "i2a/numerics/layers.h"
#include "i2a/numerics/param_vector.h"
#include "i2a/numerics/rng.h"
#include "i2a/numerics/tape.h"
#include "i2a/sokoban/sokoban.h"

namespace i2a {

// Hand-written leaf evaluation for Sokoban:
//
//   V(s) = on_target + 10 * solved - 0.1 * D - P * dead
//
// where D is the minimum total Manhattan distance over box-to-target
// matchings, dead counts boxes off target wedged into a wall corner, and
// P = 0.1 * B * (w + h) + 1 exceeds the largest possible 0.1 * D, so any
// corner deadlock scores below every live state with as many boxes on target.
double heuristic_value(const sokoban::SokobanState& s);
int min_matching_distance(const sokoban::SokobanState& s);
int corner_deadlocks(const sokoban::SokobanState& s);

using ValueFunction = std::function<double(std::span<const double> features)>;
using TerminalFunction = std::function<bool(std::span<const double> features)>;

// heuristic_value on leniently decoded features; 0 if nothing decodes.
ValueFunction sokoban_heuristic(int width, int height);
TerminalFunction sokoban_solved(int width, int height);

struct MctsConfig {
  // Simulations per search; each expands at most one edge (one model call).
  int budget = 1000;
  double exploration = 1.0;
  double gamma = 1.0;
  // Tree depth limit, counted from the search root.
  int max_depth = 120;
  // Keep nodes between searches so the subtree under the real next state is
  // picked up again through the transposition table.
  bool reuse_tree = true;
};

struct MctsStats {
  std::uint64_t model_calls = 0;
  int simulations = 0;
  int expansions = 0;
  std::size_t nodes = 0;
  std::size_t transposition_hits = 0;
  bool reused_root = false;
};

struct MctsResult {
  std::optional<int> action;  // nullopt for a terminal root
  std::vector<double> q;      // r(a) + gamma * child mean, 0 where N(a) = 0
  std::vector<int> visits;
  MctsStats stats;
};

// UCT search over a WorldModel with a depth-wise transposition table: nodes
// are shared between paths reaching the same features at the same absolute
// depth. Unvisited actions are tried first (lowest index first); otherwise
// selection maximises Q(a) + c * sqrt(ln N / N(child)). Both terms use the
// child node's statistics rather than the edge's: Q(a) = r(a) + gamma * mean
// return backed up through the child and N(child) counts those backups, so
// edges into a shared node agree on its value and share its visits. Leaves
// are scored by the value function, never by random playouts. The root
// action is argmax Q.
class Mcts {
 public:
  Mcts(WorldModel& model, ValueFunction value, MctsConfig config, TerminalFunction terminal = nullptr);

  // depth is the absolute depth of the root (e.g. the external step count).
  MctsResult search(std::span<const double> root_features, int depth = 0);
  void clear();
  std::size_t node_count() const { return nodes_.size(); }
  const MctsConfig& config() const { return config_; }

 private:
  struct Node {
    std::vector<double> features;
    int depth = 0;
    bool terminal = false;
    double value = 0.0;
    int visits = 0;
    // Sum and count of returns backed up through this node from any parent.
    double return_sum = 0.0;
    int return_count = 0;
    std::vector<int> child;
    std::vector<double> reward;
    std::vector<int> n;
  };

  double mean_value(const Node& node) const;
  double edge_q(const Node& node, int a) const;

  int find_or_add(std::span<const double> features, int depth, bool terminal, bool* hit);
  int select(const Node& node) const;
  void simulate(int root, MctsStats& stats);

  WorldModel& model_;
  ValueFunction value_;
  TerminalFunction terminal_;
  MctsConfig config_;
  int num_actions_;
  std::vector<Node> nodes_;
  absl::flat_hash_map<std::uint64_t, std::vector<int>> table_;
};

std::uint64_t feature_hash(std::span<const double> features, int depth);

// Monte-Carlo search head: value V, rollout policy pi_hat and a temperature
// delta = softplus(raw) > 0. These are the only trained parts of the
// MC-search agent.
struct McSearchConfig {
  int depth = 3;
  double gamma = 0.99;
  int hidden = 32;
  // Sample actions with p ~ exp(-R / delta), as literally printed, instead
  // of exp(R / delta).
  bool literal_sign = false;
};

class McSearchHead {
 public:
  static McSearchHead create(std::size_t feature_dim, int num_actions, const McSearchConfig& config,
                             Rng& rng);

  ParamVector& params() { return params_; }
  const ParamVector& params() const { return params_; }
  const McSearchConfig& config() const { return config_; }
  int num_actions() const { return num_actions_; }
  double temperature() const;
  void set_temperature(double delta);

  Var value(Tape& tape, Var features) const;
  Var rollout_logits(Tape& tape, Var features) const;
  Var temperature(Tape& tape) const;
  double value(std::span<const double> features) const;
  std::vector<double> rollout_logits(std::span<const double> features) const;
  RolloutPolicy rollout_policy() const;

 private:
  ParamVector params_;
  McSearchConfig config_;
  int num_actions_ = 0;
  DenseLayer value_hidden_, value_out_, policy_hidden_, policy_out_;
  std::size_t delta_raw_ = 0;
};

struct McDecision {
  std::vector<Rollout> rollouts;
  std::vector<double> returns;
  std::vector<double> probs;
  int action = 0;
  std::uint64_t model_calls = 0;
};

// Imagines one rollout per action (rollout a starts with action a) and
// samples an action with probability proportional to exp(R_a / delta), where
//   R_a = sum_t gamma^t r_{a,t} + V(x_{a,T})
// over the imagined rewards, with V taken at the last imagined frame. A
// rollout stops contributing at a terminal frame, which has V = 0.
McDecision mc_search_act(std::span<const double> features, WorldModel& model, const McSearchHead& head,
                         Rng& rng);

// R_a for the rollouts, with gradients into V.
Var mc_returns(Tape& tape, const McSearchHead& head, const std::vector<Rollout>& rollouts);
// Logits R_a / delta (or -R_a / delta), with gradients into V and delta.
Var mc_logits(Tape& tape, const McSearchHead& head, const std::vector<Rollout>& rollouts);
// Value-only versions.
std::vector<double> mc_returns(const McSearchHead& head, const std::vector<Rollout>& rollouts);
std::vector<double> mc_probabilities(std::span<const double> returns, double delta, bool literal_sign = false);

// A policy for whole imagined episodes. It may run its own searches on any
// model ("a model within a model").
using EpisodePolicy = std::function<int(std::span<const double> features, Rng& rng)>;

struct RetryConfig {
  int max_retries = 10;  // at most 16
  int max_steps = 120;   // per imagined episode
};

struct RetryResult {
  bool solved = false;
  int retries_used = 0;
  std::vector<int> plan;
  // Calls on the outer model plus every model listed in also_count.
  std::uint64_t model_calls = 0;
};

// Plays up to max_retries whole episodes inside the model and returns the
// first action sequence whose imagined episode reaches a terminal (solved)
// frame. Throws for max_retries outside [1, 16].
RetryResult nested_retry_solve(std::span<const double> features, WorldModel& model, const EpisodePolicy& policy,
                               const RetryConfig& config, Rng& rng,
                               std::span<WorldModel* const> also_count = {});

// Shortest solution length by breadth-first search (nullopt if none within
// max_states expansions). The test oracle for planners.
std::optional<int> bfs_solution_length(const sokoban::SokobanState& s, std::size_t max_states = 2000000);

}  // namespace i2a
