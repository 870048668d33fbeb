#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "i2a/agent/agent.h"
#include "i2a/numerics/layers.h"
#include "i2a/numerics/optim.h"
#include "i2a/training/env.h"
#include "i2a/training/training.h"
#include "test_util.h"

namespace i2a {
namespace {

// Direct transcription of the advantage sum, one term at a time.
std::vector<double> advantage_oracle(const TrajectoryBatch& b) {
  const int n = static_cast<int>(b.size());
  std::vector<double> out(n);
  for (int t = 0; t < n; ++t) {
    double sum = 0.0;
    int j = t;
    double tail = 0.0;
    for (;; ++j) {
      sum += std::pow(b.gamma, j - t) * b.rewards[j];
      if (b.done[j]) {
        tail = b.truncated[j] ? std::pow(b.gamma, j - t + 1) * b.next_values[j] : 0.0;
        break;
      }
      if (j == t + b.k || j == n - 1) {
        tail = std::pow(b.gamma, j - t + 1) * b.next_values[j];
        break;
      }
    }
    out[t] = sum + tail - b.values[t];
  }
  return out;
}

TrajectoryBatch random_batch(Rng& rng) {
  TrajectoryBatch b;
  const int n = 1 + rng.uniform_int(12);
  b.k = rng.uniform_int(7);
  b.gamma = 0.5 + 0.5 * rng.uniform();
  for (int t = 0; t < n; ++t) {
    b.rewards.push_back(rng.normal());
    const bool done = rng.uniform() < 0.2;
    b.done.push_back(done);
    b.truncated.push_back(done && rng.uniform() < 0.5);
    b.values.push_back(rng.normal());
    b.next_values.push_back(rng.normal());
  }
  return b;
}

TrajectoryBatch single_window(std::vector<double> rewards, double bootstrap, int k, double gamma) {
  TrajectoryBatch b;
  const std::size_t n = rewards.size();
  b.rewards = std::move(rewards);
  b.done.assign(n, 0);
  b.truncated.assign(n, 0);
  b.values.assign(n, 0.0);
  b.next_values.assign(n, 0.0);
  b.next_values.back() = bootstrap;
  b.k = k;
  b.gamma = gamma;
  return b;
}

TEST(KStepAdvantage, ZeroHorizon) {
  const auto a = kstep_advantage(single_window({1.0}, 0.0, 0, 1.0));
  EXPECT_DOUBLE_EQ(a[0], 1.0);
}

TEST(KStepAdvantage, OneStepWithBootstrap) {
  const auto a = kstep_advantage(single_window({1.0, 2.0}, 4.0, 1, 0.5));
  EXPECT_DOUBLE_EQ(a[0], 3.0);
}

TEST(KStepAdvantage, TerminalBootstrapsZeroTruncatedBootstrapsValue) {
  TrajectoryBatch b = single_window({1.0, 1.0}, 5.0, 3, 1.0);
  b.done[0] = 1;
  b.next_values[0] = 100.0;
  EXPECT_DOUBLE_EQ(kstep_advantage(b)[0], 1.0);
  b.truncated[0] = 1;
  EXPECT_DOUBLE_EQ(kstep_advantage(b)[0], 101.0);
}

TEST(KStepAdvantage, MatchesOracleOnRandomBatches) {
  Rng rng(1);
  for (int trial = 0; trial < 500; ++trial) {
    const TrajectoryBatch b = random_batch(rng);
    const auto got = kstep_advantage(b);
    const auto want = advantage_oracle(b);
    for (std::size_t t = 0; t < got.size(); ++t) ASSERT_NEAR(got[t], want[t], 1e-12) << trial << " " << t;
  }
}

TEST(KStepAdvantage, RejectsBadBatches) {
  TrajectoryBatch b = single_window({1.0}, 0.0, 0, 1.0);
  b.k = -1;
  EXPECT_THROW(kstep_advantage(b), std::invalid_argument);
  b.k = 0;
  b.gamma = 0.0;
  EXPECT_THROW(kstep_advantage(b), std::invalid_argument);
  b.gamma = 1.0;
  b.rewards[0] = std::nan("");
  EXPECT_THROW(kstep_advantage(b), std::domain_error);
  b.rewards = {1.0, 2.0};
  EXPECT_THROW(kstep_advantage(b), std::invalid_argument);
}

// logits, value and rollout logits as raw parameters.
ParamVector head_params(int n, std::uint64_t seed) {
  ParamVector p;
  p.add("logits", n);
  p.add("value", 1);
  p.add("rollout", n);
  Rng rng(seed);
  for (double& v : p.values()) v = rng.normal();
  return p;
}

struct StepSpec {
  int action;
  double advantage;
  double target;
};

Var batch_loss(Tape& tape, const std::vector<StepSpec>& steps, const LossConfig& cfg) {
  Var total = tape.scalar(0.0);
  for (const StepSpec& s : steps) {
    // Each step sees a differently scaled copy of the same parameters.
    const double k = 1.0 + 0.3 * s.action;
    Var logits = tape.scale(tape.param(0), k);
    Var value = tape.scale(tape.param(1), k);
    Var rollout = tape.scale(tape.param(2), k);
    total = tape.add(total, actor_critic_loss(tape, logits, value, rollout, s.action, s.advantage, s.target, cfg).total);
  }
  return total;
}

TEST(ActorCriticLoss, GradCheckOnThreeStepBatch) {
  LossConfig cfg;
  cfg.lambda_ent = 0.3;
  cfg.lambda_dist = 0.0;
  const std::vector<StepSpec> steps = {{0, 1.5, 2.0}, {2, -0.7, -1.0}, {3, 0.2, 0.4}};
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    ParamVector p = head_params(4, seed);
    EXPECT_LT(grad_check(testing::tape_function([&](Tape& t) { return batch_loss(t, steps, cfg); }), p), 1e-6);
  }
}

TEST(ActorCriticLoss, ZeroAdvantageGivesZeroPolicyAndValueGradients) {
  ParamVector p = head_params(3, 2);
  Tape tape(p);
  LossConfig cfg;
  const double v = p[p.slice("value").offset];
  LossVars vars = actor_critic_loss(tape, tape.param(0), tape.param(1), tape.param(2), 1, 0.0, v, cfg);
  for (double g : tape.gradient(vars.policy)) EXPECT_EQ(g, 0.0);
  for (double g : tape.gradient(vars.value)) EXPECT_EQ(g, 0.0);
}

TEST(ActorCriticLoss, GradientsMatchTheStatedRules) {
  // d policy / d logits = -A (onehot - pi); d value / d V = -(R - V).
  ParamVector p = head_params(4, 3);
  Tape tape(p);
  LossConfig cfg;
  const double adv = 0.8, ret = 2.5;
  LossVars vars = actor_critic_loss(tape, tape.param(0), tape.param(1), tape.param(2), 2, adv, ret, cfg);
  const auto pi = softmax(p.view("logits"));
  const auto gp = tape.gradient(vars.policy);
  for (int a = 0; a < 4; ++a) EXPECT_NEAR(gp[a], -adv * ((a == 2 ? 1.0 : 0.0) - pi[a]), 1e-14);
  const auto gv = tape.gradient(vars.value);
  EXPECT_NEAR(gv[4], -(ret - p[4]), 1e-14);
}

TEST(ActorCriticLoss, UniformPolicyEntropyTerm) {
  ParamVector p = head_params(5, 4);
  for (double& v : p.view("logits")) v = 0.25;
  Tape tape(p);
  LossConfig cfg;
  LossVars vars = actor_critic_loss(tape, tape.param(0), tape.param(1), tape.param(2), 0, 1.0, 0.0, cfg);
  EXPECT_NEAR(loss_values(tape, vars).entropy, -std::log(5.0), 1e-14);
  EXPECT_DOUBLE_EQ(cfg.lambda_ent, 1e-2);
  // Uniform maximises entropy, so the regulariser's gradient vanishes there.
  for (double g : tape.gradient(vars.entropy)) EXPECT_NEAR(g, 0.0, 1e-15);
  // Away from uniform, a descent step on the entropy term raises entropy.
  p.view("logits")[0] = 2.0;
  Tape t2(p);
  LossVars v2 = actor_critic_loss(t2, t2.param(0), t2.param(1), t2.param(2), 0, 1.0, 0.0, cfg);
  const auto g = t2.gradient(v2.entropy);
  const double before = loss_values(t2, v2).entropy;
  ParamVector q = p;
  for (std::size_t i = 0; i < q.size(); ++i) q[i] -= 0.1 * g[i];
  Tape t3(q);
  LossVars v3 = actor_critic_loss(t3, t3.param(0), t3.param(1), t3.param(2), 0, 1.0, 0.0, cfg);
  EXPECT_LT(loss_values(t3, v3).entropy, before);
}

TEST(ActorCriticLoss, TotalIsTheWeightedSumOfTerms) {
  ParamVector p = head_params(4, 5);
  Tape tape(p);
  LossConfig cfg;
  cfg.lambda_dist = 0.3;
  LossVars v = actor_critic_loss(tape, tape.param(0), tape.param(1), tape.param(2), 3, -1.2, 0.5, cfg);
  const LossBreakdown lb = loss_values(tape, v);
  EXPECT_NEAR(lb.total, lb.policy + lb.value + cfg.lambda_ent * lb.entropy + cfg.lambda_dist * lb.distillation,
              1e-14);
  const auto gt = tape.gradient(v.total);
  const auto g1 = tape.gradient(v.policy), g2 = tape.gradient(v.value), g3 = tape.gradient(v.entropy),
             g4 = tape.gradient(v.distillation);
  for (std::size_t i = 0; i < gt.size(); ++i) {
    EXPECT_NEAR(gt[i], g1[i] + g2[i] + cfg.lambda_ent * g3[i] + cfg.lambda_dist * g4[i], 1e-14);
  }
}

TEST(ActorCriticLoss, RejectsImpossibleAction) {
  ParamVector p = head_params(3, 6);
  p.view("logits")[1] = -1e6;
  Tape tape(p);
  LossConfig cfg;
  EXPECT_THROW(actor_critic_loss(tape, tape.param(0), tape.param(1), tape.param(2), 1, 1.0, 0.0, cfg),
               std::domain_error);
  EXPECT_THROW(actor_critic_loss(tape, tape.param(0), tape.param(1), tape.param(2), 3, 1.0, 0.0, cfg),
               std::invalid_argument);
}

TEST(Distillation, NoGradientIntoThePolicy) {
  ParamVector p = head_params(4, 7);
  LossConfig cfg;
  Tape tape(p);
  LossVars v = actor_critic_loss(tape, tape.param(0), tape.param(1), tape.param(2), 0, 0.0, 0.0, cfg);
  const auto g = tape.gradient(v.distillation);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(g[i], 0.0);

  // Into pi_hat it is the cross-entropy gradient with pi frozen.
  const auto pi = softmax(p.view("logits"));
  auto frozen = testing::tape_function([&](Tape& t) {
    return t.neg(t.dot(t.constant(pi), t.log_softmax(t.param(2))));
  });
  EXPECT_LT(grad_check(frozen, p), 1e-6);
  std::vector<double> want(p.size(), 0.0);
  frozen(p, &want);
  for (std::size_t i = 5; i < p.size(); ++i) EXPECT_NEAR(g[i], want[i], 1e-14);
}

TEST(Distillation, LiteralSignFlipsTheTerm) {
  ParamVector p = head_params(4, 8);
  LossConfig std_cfg, lit_cfg;
  lit_cfg.literal_dist_sign = true;
  Tape tape(p);
  const double a = loss_values(tape, actor_critic_loss(tape, tape.param(0), tape.param(1), tape.param(2), 0, 0.0,
                                                        0.0, std_cfg)).distillation;
  const double b = loss_values(tape, actor_critic_loss(tape, tape.param(0), tape.param(1), tape.param(2), 0, 0.0,
                                                        0.0, lit_cfg)).distillation;
  EXPECT_GT(a, 0.0);
  EXPECT_DOUBLE_EQ(a, -b);
}

TEST(DistillLoss, Identities) {
  LossConfig cfg;
  cfg.lambda_dist = 0.5;
  const std::vector<double> pi = {0.2, 0.3, 0.5};
  double h = 0.0;
  for (double x : pi) h -= x * std::log(x);
  EXPECT_NEAR(distill_loss(pi, pi, cfg), 0.5 * h, 1e-15);
  const std::vector<double> onehot = {0.0, 1.0, 0.0};
  EXPECT_EQ(distill_loss(onehot, onehot, cfg), 0.0);
  // Zero mass under pi_hat is clipped, not infinite.
  const std::vector<double> miss = {1.0, 0.0, 0.0};
  EXPECT_NEAR(distill_loss(onehot, miss, cfg), -0.5 * std::log(cfg.dist_clip), 1e-9);
  EXPECT_THROW(distill_loss(pi, std::vector<double>{1.0}, cfg), std::invalid_argument);
  EXPECT_NEAR(kl_divergence(pi, pi), 0.0, 1e-15);
  EXPECT_GT(kl_divergence(pi, onehot), 0.0);
}

AgentConfig bandit_config() {
  AgentConfig c;
  c.obs = {1, 1, 1};
  c.num_actions = 2;
  c.mf_embed = 4;
  c.fc = 4;
  return c;
}

TrainConfig bandit_train(std::uint64_t seed) {
  TrainConfig t;
  t.num_envs = 4;
  t.k = 0;
  t.unroll = 1;
  t.total_steps = 4000;
  t.eval_every = 1000;
  t.eval_episodes = 20;
  t.optimizer.learning_rate = 1e-2;
  t.seed = seed;
  return t;
}

EnvFactory bandit_factory() {
  return [](std::uint64_t) { return std::make_unique<BanditEnv>(std::vector<double>{1.0, 0.0}); };
}

TEST(Train, BanditConvergesToTheBestArm) {
  Rng rng(1);
  BaselineAgent agent(bandit_config(), false, rng);
  const TrainResult r = train(agent, bandit_factory(), bandit_train(1), bandit_factory());
  ASSERT_FALSE(r.diverged) << r.diagnostic;
  Rng probe(2);
  const auto pi = softmax(agent.forward(std::vector<double>{1.0}, probe).logits);
  EXPECT_GE(pi[0], 0.95);
  ASSERT_FALSE(r.history.empty());
  EXPECT_TRUE(r.history.back().has_eval);
  EXPECT_GE(r.history.back().eval.solve_rate, 0.9);
}

TEST(Train, SameSeedGivesIdenticalMetricStreams) {
  auto run = [](std::uint64_t seed) {
    Rng rng(seed);
    BaselineAgent agent(bandit_config(), false, rng);
    TrainConfig t = bandit_train(seed);
    t.total_steps = 800;
    t.eval_every = 200;
    std::string lines;
    train(agent, bandit_factory(), t, bandit_factory(), [&](const TrainMetrics& m) { lines += m.to_json() + "\n"; });
    return lines;
  };
  const std::string a = run(3);
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, run(3));
  EXPECT_NE(a, run(4));
}

TEST(Train, RejectsBadConfig) {
  TrainConfig t;
  t.num_envs = 0;
  EXPECT_THROW(t.validate(), std::invalid_argument);
  t = TrainConfig{};
  t.gamma = 1.5;
  EXPECT_THROW(t.validate(), std::invalid_argument);
}

TEST(Env, BanditPaysTheArmReward) {
  BanditEnv env({0.5, -1.0});
  EXPECT_EQ(env.reset(), std::vector<double>{1.0});
  const EnvStep s = env.step(1);
  EXPECT_EQ(s.reward, -1.0);
  EXPECT_TRUE(s.done);
  EXPECT_THROW(env.step(2), std::invalid_argument);
}

}  // namespace
}  // namespace i2a
