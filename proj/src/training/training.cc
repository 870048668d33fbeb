#include "i2a/training/training.h"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>

#include "json.hpp"

namespace i2a {

void TrajectoryBatch::validate() const {
  if (k < 0) throw std::invalid_argument("kstep_advantage: k must be >= 0");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("kstep_advantage: gamma must lie in (0, 1]");
  const std::size_t n = rewards.size();
  if (done.size() != n || truncated.size() != n || values.size() != n || next_values.size() != n) {
    throw std::invalid_argument("kstep_advantage: ragged batch");
  }
  for (double r : rewards) {
    if (!std::isfinite(r)) throw std::domain_error("kstep_advantage: non-finite reward");
  }
}

std::vector<double> kstep_advantage(const TrajectoryBatch& b) {
  b.validate();
  const std::size_t n = b.size();
  std::vector<double> adv(n);
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t last = std::min(n - 1, t + static_cast<std::size_t>(b.k));
    double g = 0.0;
    double discount = 1.0;
    double bootstrap = 0.0;
    bool ended = false;
    for (std::size_t j = t; j <= last; ++j) {
      g += discount * b.rewards[j];
      discount *= b.gamma;
      if (b.done[j]) {
        bootstrap = b.truncated[j] ? discount * b.next_values[j] : 0.0;
        ended = true;
        break;
      }
    }
    if (!ended) bootstrap = discount * b.next_values[last];
    adv[t] = g + bootstrap - b.values[t];
  }
  return adv;
}

LossBreakdown& LossBreakdown::operator+=(const LossBreakdown& o) {
  policy += o.policy;
  value += o.value;
  entropy += o.entropy;
  distillation += o.distillation;
  total += o.total;
  return *this;
}

LossVars actor_critic_loss(Tape& tape, Var logits, Var value, Var rollout_logits, int action, double advantage,
                           double target_return, const LossConfig& config) {
  if (action < 0 || static_cast<std::size_t>(action) >= tape.size(logits)) {
    throw std::invalid_argument("actor_critic_loss: action out of range");
  }
  LossVars v;
  Var logp = tape.log_softmax(logits);
  Var chosen = tape.pick(logp, static_cast<std::size_t>(action));
  if (std::exp(tape.scalar_value(chosen)) == 0.0) {
    throw std::domain_error("actor_critic_loss: chosen action has zero probability");
  }
  Var pi = tape.softmax(logits);
  v.policy = tape.scale(chosen, -advantage);
  v.value = tape.scale(tape.square(tape.add_scalar(tape.neg(value), target_return)), 0.5);
  v.entropy = tape.dot(pi, logp);
  Var total = tape.add(tape.add(v.policy, v.value), tape.scale(v.entropy, config.lambda_ent));
  if (rollout_logits.valid()) {
    Var cross = tape.dot(tape.stop_gradient(pi), tape.log_softmax(rollout_logits));
    v.distillation = config.literal_dist_sign ? cross : tape.neg(cross);
    total = tape.add(total, tape.scale(v.distillation, config.lambda_dist));
  } else {
    v.distillation = tape.scalar(0.0);
  }
  v.total = total;
  return v;
}

LossBreakdown loss_values(const Tape& tape, const LossVars& v) {
  return {tape.scalar_value(v.policy), tape.scalar_value(v.value), tape.scalar_value(v.entropy),
          tape.scalar_value(v.distillation), tape.scalar_value(v.total)};
}

double distill_loss(std::span<const double> pi, std::span<const double> pi_hat, const LossConfig& config) {
  if (pi.size() != pi_hat.size()) throw std::invalid_argument("distill_loss: size mismatch");
  const double floor = std::log(config.dist_clip);
  double cross = 0.0;
  for (std::size_t a = 0; a < pi.size(); ++a) {
    const double lq = pi_hat[a] > 0.0 ? std::max(std::log(pi_hat[a]), floor) : floor;
    cross += pi[a] * lq;
  }
  return config.lambda_dist * (config.literal_dist_sign ? cross : -cross);
}

double kl_divergence(std::span<const double> p, std::span<const double> q, double clip) {
  if (p.size() != q.size()) throw std::invalid_argument("kl_divergence: size mismatch");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    kl += p[i] * (std::log(p[i]) - std::log(std::max(q[i], clip)));
  }
  return kl;
}

void TrainConfig::validate() const {
  if (num_envs < 1) throw std::invalid_argument("train: num_envs must be >= 1");
  if (k < 0) throw std::invalid_argument("train: k must be >= 0");
  if (unroll < 1) throw std::invalid_argument("train: unroll must be >= 1");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("train: gamma must lie in (0, 1]");
  if (!(optimizer.learning_rate > 0.0)) throw std::invalid_argument("train: learning rate must be positive");
  if (!(optimizer.decay > 0.0 && optimizer.decay < 1.0)) throw std::invalid_argument("train: decay must lie in (0, 1)");
  if (total_steps < 1) throw std::invalid_argument("train: total_steps must be >= 1");
}

namespace {

int argmax(std::span<const double> v) {
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

double entropy_of(std::span<const double> p) {
  double h = 0.0;
  for (double x : p) h -= x > 0.0 ? x * std::log(x) : 0.0;
  return h;
}

}  // namespace

EvalResult evaluate(Agent& agent, const EnvFactory& make_env, int episodes, std::uint64_t seed, bool greedy) {
  EvalResult r;
  auto env = make_env(seed);
  Rng rng = Rng(seed).split("eval-actions");
  WorldModel* model = agent.model();
  const std::uint64_t calls_before = model ? model->calls() : 0;
  double kl_sum = 0.0;
  std::int64_t kl_count = 0;
  std::int64_t steps = 0;
  for (int ep = 0; ep < episodes; ++ep) {
    auto obs = env->reset();
    double ret = 0.0;
    while (true) {
      AgentOutput out = agent.forward(obs, rng);
      const auto pi = softmax(out.logits);
      if (!out.rollout_logits.empty()) {
        kl_sum += kl_divergence(pi, softmax(out.rollout_logits));
        ++kl_count;
      }
      const int a = greedy ? argmax(pi) : rng.categorical(pi);
      EnvStep s = env->step(a);
      ret += s.reward;
      ++steps;
      if (s.done) {
        r.solve_rate += s.success ? 1.0 : 0.0;
        break;
      }
      obs = std::move(s.obs);
    }
    r.mean_return += ret;
  }
  r.episodes = episodes;
  if (episodes > 0) {
    r.solve_rate /= episodes;
    r.mean_return /= episodes;
    r.mean_length = static_cast<double>(steps) / episodes;
  }
  r.model_calls = model ? model->calls() - calls_before : 0;
  r.distill_kl = kl_count > 0 ? kl_sum / static_cast<double>(kl_count) : 0.0;
  return r;
}

std::string TrainMetrics::to_json() const {
  nlohmann::json j = {{"steps", steps},
                      {"updates", updates},
                      {"episodes", episodes},
                      {"solve_rate", solve_rate},
                      {"mean_return", mean_return},
                      {"entropy", entropy},
                      {"model_calls", model_calls},
                      {"loss",
                       {{"policy", loss.policy},
                        {"value", loss.value},
                        {"entropy", loss.entropy},
                        {"distillation", loss.distillation},
                        {"total", loss.total}}}};
  if (has_eval) {
    j["eval"] = {{"episodes", eval.episodes},       {"solve_rate", eval.solve_rate},
                 {"mean_return", eval.mean_return}, {"mean_length", eval.mean_length},
                 {"model_calls", eval.model_calls}, {"distill_kl", eval.distill_kl}};
  }
  return j.dump();
}

TrainResult train(Agent& agent, const EnvFactory& make_env, const TrainConfig& config, const EnvFactory& eval_factory,
                  const std::function<void(const TrainMetrics&)>& on_record) {
  config.validate();
  TrainResult result;
  const int num_envs = config.num_envs;
  const Rng root(config.seed);
  std::vector<std::unique_ptr<Env>> envs;
  std::vector<Rng> rngs;
  std::vector<std::vector<double>> obs;
  std::vector<double> episode_return(num_envs, 0.0);
  for (int e = 0; e < num_envs; ++e) {
    envs.push_back(make_env(root.split("env").split(static_cast<std::uint64_t>(e)).seed()));
    rngs.push_back(root.split("actions").split(static_cast<std::uint64_t>(e)));
    obs.push_back(envs.back()->reset());
  }
  RmsProp optimizer(config.optimizer);
  ParamVector& params = agent.params();
  WorldModel* model = agent.model();

  TrainMetrics window;
  int window_steps = 0;
  double window_solved = 0.0;
  std::int64_t steps = 0;
  std::int64_t next_record = config.eval_every > 0 ? config.eval_every : config.total_steps;

  auto emit = [&](bool final_record) {
    TrainMetrics m = window;
    m.steps = steps;
    if (m.episodes > 0) {
      m.solve_rate = window_solved / m.episodes;
      m.mean_return /= m.episodes;
    }
    if (window_steps > 0) {
      m.entropy /= window_steps;
      m.loss.policy /= window_steps;
      m.loss.value /= window_steps;
      m.loss.entropy /= window_steps;
      m.loss.distillation /= window_steps;
      m.loss.total /= window_steps;
    }
    m.model_calls = model ? model->calls() : 0;
    if (eval_factory && (config.eval_every > 0 || final_record)) {
      m.eval = evaluate(agent, eval_factory, config.eval_episodes, root.split("eval").seed());
      m.has_eval = true;
    }
    result.history.push_back(m);
    if (on_record) on_record(m);
    const int updates = window.updates;
    window = TrainMetrics{};
    window.updates = updates;
    window_steps = 0;
    window_solved = 0.0;
  };

  struct StepRecord {
    std::unique_ptr<Tape> tape;
    AgentGraph graph;
    int action = 0;
  };

  while (steps < config.total_steps) {
    std::vector<std::vector<StepRecord>> records(num_envs);
    std::vector<TrajectoryBatch> batches(num_envs);
    for (auto& b : batches) {
      b.k = config.k;
      b.gamma = config.gamma;
    }
    try {
      for (int t = 0; t < config.unroll; ++t) {
        for (int e = 0; e < num_envs; ++e) {
          StepRecord rec;
          rec.tape = std::make_unique<Tape>(params);
          rec.graph = agent.build(*rec.tape, obs[e], rngs[e]);
          const auto pi = softmax(rec.tape->value(rec.graph.logits));
          rec.action = rngs[e].categorical(pi);
          window.entropy += entropy_of(pi);
          EnvStep s = envs[e]->step(rec.action);
          TrajectoryBatch& b = batches[e];
          b.rewards.push_back(s.reward);
          b.done.push_back(s.done ? 1 : 0);
          b.truncated.push_back(s.truncated ? 1 : 0);
          b.values.push_back(rec.tape->scalar_value(rec.graph.value));
          b.next_values.push_back(0.0);
          episode_return[e] += s.reward;
          if (s.done) {
            if (s.truncated) b.next_values.back() = agent.forward(s.obs, rngs[e]).value;
            window.episodes += 1;
            window.mean_return += episode_return[e];
            window_solved += s.success ? 1.0 : 0.0;
            episode_return[e] = 0.0;
            obs[e] = envs[e]->reset();
          } else {
            obs[e] = std::move(s.obs);
          }
          records[e].push_back(std::move(rec));
          ++steps;
          ++window_steps;
        }
      }
      for (int e = 0; e < num_envs; ++e) {
        TrajectoryBatch& b = batches[e];
        const std::size_t n = b.size();
        for (std::size_t t = 0; t + 1 < n; ++t) {
          if (!b.done[t]) b.next_values[t] = b.values[t + 1];
        }
        if (!b.done[n - 1]) b.next_values[n - 1] = agent.forward(obs[e], rngs[e]).value;
      }

      std::vector<double> grad(params.size(), 0.0);
      const double scale = 1.0 / static_cast<double>(num_envs * config.unroll);
      for (int e = 0; e < num_envs; ++e) {
        const auto adv = kstep_advantage(batches[e]);
        for (std::size_t t = 0; t < adv.size(); ++t) {
          StepRecord& rec = records[e][t];
          Tape& tape = *rec.tape;
          LossVars vars = actor_critic_loss(tape, rec.graph.logits, rec.graph.value, rec.graph.rollout_logits,
                                            rec.action, adv[t], adv[t] + batches[e].values[t], config.loss);
          const LossBreakdown lb = loss_values(tape, vars);
          if (!std::isfinite(lb.total)) throw std::domain_error("non-finite loss");
          window.loss += lb;
          tape.accumulate_gradient(vars.total, grad, scale);
        }
      }
      if (config.grad_clip > 0.0) clip_global_norm(grad, config.grad_clip);
      if (!optimizer.step(params, grad)) throw std::domain_error("non-finite gradient");
      window.updates += 1;
    } catch (const std::domain_error& err) {
      result.diverged = true;
      result.diagnostic = err.what();
      emit(true);
      return result;
    }
    if (steps >= next_record || steps >= config.total_steps) {
      emit(steps >= config.total_steps);
      next_record += config.eval_every > 0 ? config.eval_every : config.total_steps;
    }
  }
  return result;
}

}  // namespace i2a
