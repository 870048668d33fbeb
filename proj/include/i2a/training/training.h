#pragma once

#include <cstdint>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "i2a/agent/agent.h"
#include "i2a/numerics/optim.h"
#include "i2a/numerics/tape.h"
#include "i2a/training/env.h"

namespace i2a {

// One environment's unroll. values[t] = V(o_t); next_values[t] = V(o_{t+1}),
// read only where a window is cut off by the unroll end or by truncation.
struct TrajectoryBatch {
  std::vector<double> rewards;
  std::vector<std::uint8_t> done;       // episode ended after step t
  std::vector<std::uint8_t> truncated;  // ... by a step cap (bootstrap next_values[t])
  std::vector<double> values;
  std::vector<double> next_values;
  int k = 5;
  double gamma = 0.99;

  std::size_t size() const { return rewards.size(); }
  void validate() const;
};

// A_t = sum_{t'=t}^{t+k} gamma^{t'-t} r_{t'} + gamma^{k+1} V(o_{t+k+1}) - V(o_t).
// The window stops early at episode end (bootstrap 0 when terminal, V of the
// capped observation when truncated) and at the end of the unroll
// (bootstrap next_values of the last step).
std::vector<double> kstep_advantage(const TrajectoryBatch& batch);

struct LossConfig {
  double lambda_ent = 1e-2;
  double lambda_dist = 1e-2;
  // Use +sum pi log pi_hat, as printed, instead of the cross-entropy.
  bool literal_dist_sign = false;
  // log pi_hat is floored at log(this).
  double dist_clip = 1e-12;
};

struct LossBreakdown {
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;       // sum_a pi log pi
  double distillation = 0.0;  // -sum_a pi log pi_hat
  double total = 0.0;         // policy + value + lambda_ent*entropy + lambda_dist*distillation

  LossBreakdown& operator+=(const LossBreakdown& o);
};

struct LossVars {
  Var policy, value, entropy, distillation, total;
};

// Per-step surrogate. advantage and target_return are constants:
//   policy = -log pi(a) * A,  value = 0.5 * (R - V)^2,
//   entropy = sum pi log pi,  distillation = -sum stop(pi) log pi_hat.
// rollout_logits may be invalid, in which case the distillation term is 0.
// Throws std::domain_error if pi(a) underflows to 0.
LossVars actor_critic_loss(Tape& tape, Var logits, Var value, Var rollout_logits, int action, double advantage,
                           double target_return, const LossConfig& config);
LossBreakdown loss_values(const Tape& tape, const LossVars& vars);

// Value-only distillation term and KL(pi || pi_hat).
double distill_loss(std::span<const double> pi, std::span<const double> pi_hat, const LossConfig& config);
double kl_divergence(std::span<const double> p, std::span<const double> q, double clip = 1e-12);

struct TrainConfig {
  int num_envs = 8;
  int k = 5;
  int unroll = 6;
  double gamma = 0.99;
  LossConfig loss;
  RmsPropConfig optimizer{7e-4, 0.99, 1e-5};
  double grad_clip = 40.0;
  std::int64_t total_steps = 100000;  // environment steps over all envs
  std::int64_t eval_every = 10000;
  int eval_episodes = 50;
  std::uint64_t seed = 1;

  void validate() const;
};

struct EvalResult {
  int episodes = 0;
  double solve_rate = 0.0;
  double mean_return = 0.0;
  double mean_length = 0.0;
  std::uint64_t model_calls = 0;
  // KL(pi || pi_hat) averaged over the episodes' states, when available.
  double distill_kl = 0.0;
};

// Plays episodes with actions sampled from the policy (greedy picks argmax).
EvalResult evaluate(Agent& agent, const EnvFactory& make_env, int episodes, std::uint64_t seed,
                    bool greedy = false);

struct TrainMetrics {
  std::int64_t steps = 0;
  int updates = 0;
  int episodes = 0;
  double solve_rate = 0.0;  // over episodes finished since the last record
  double mean_return = 0.0;
  double entropy = 0.0;     // mean policy entropy over the same window
  std::uint64_t model_calls = 0;
  LossBreakdown loss;       // mean per step over the window
  bool has_eval = false;
  EvalResult eval;

  std::string to_json() const;
};

struct TrainResult {
  std::vector<TrainMetrics> history;
  bool diverged = false;
  std::string diagnostic;
};

// Synchronous advantage actor-critic. E environments step in lockstep for
// `unroll` steps; per-step losses are summed in environment order, the
// gradient is clipped and applied with RMSprop. Non-finite loss or gradient
// halts training with diverged = true (the caller can still checkpoint).
// When eval_every > 0 an evaluation on eval_factory runs at that interval
// and at the end.
TrainResult train(Agent& agent, const EnvFactory& make_env, const TrainConfig& config,
                  const EnvFactory& eval_factory = nullptr,
                  const std::function<void(const TrainMetrics&)>& on_record = nullptr);

}  // namespace i2a
