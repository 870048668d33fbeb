#include "i2a/bench/experiments.h"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "i2a/minipacman/minipacman.h"
#include "i2a/model/local_model.h"
#include "i2a/planners/planners.h"

namespace i2a::bench {

using nlohmann::json;
using sokoban::SokobanState;

namespace {

template <typename E, std::size_t N>
const char* name_of(E value, const std::pair<E, const char*> (&table)[N]) {
  for (const auto& [v, n] : table) {
    if (v == value) return n;
  }
  return "?";
}

template <typename E, std::size_t N>
E parse_name(const std::string& name, const std::pair<E, const char*> (&table)[N], const char* what) {
  for (const auto& [v, n] : table) {
    if (name == n) return v;
  }
  throw std::invalid_argument(std::string("unknown ") + what + " '" + name + "'");
}

constexpr std::pair<AgentKind, const char*> kAgentNames[] = {
    {AgentKind::kI2a, "i2a"},
    {AgentKind::kCopyModel, "copy-model"},
    {AgentKind::kBaseline, "baseline"},
    {AgentKind::kBaselineLarge, "baseline-large"},
    {AgentKind::kMcSearch, "mc-search"},
};

constexpr std::pair<ModelKind, const char*> kModelNames[] = {
    {ModelKind::kPerfect, "perfect"},
    {ModelKind::kCorrupted, "corrupted"},
    {ModelKind::kCopy, "copy"},
    {ModelKind::kLearned, "learned"},
};

// Reads j[key] into out when present; records the key as known.
class Reader {
 public:
  Reader(const json& j, std::string section) : j_(j), section_(std::move(section)) {
    if (!j_.is_object()) throw std::invalid_argument("config: '" + section_ + "' must be an object");
  }
  template <typename T>
  void operator()(const char* key, T& out) {
    known_.insert(key);
    if (j_.contains(key)) out = j_.at(key).get<T>();
  }
  void allow(const char* key) { known_.insert(key); }
  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!known_.count(key)) throw std::invalid_argument("config: unknown key '" + section_ + "." + key + "'");
    }
  }

 private:
  const json& j_;
  std::string section_;
  std::set<std::string> known_;
};

}  // namespace

const char* agent_kind_name(AgentKind k) { return name_of(k, kAgentNames); }
AgentKind parse_agent_kind(const std::string& name) { return parse_name(name, kAgentNames, "agent kind"); }
const char* model_kind_name(ModelKind k) { return name_of(k, kModelNames); }
ModelKind parse_model_kind(const std::string& name) { return parse_name(name, kModelNames, "model kind"); }

json ExperimentConfig::to_json() const {
  const auto& g = env.sokoban.gen;
  json j;
  j["kind"] = kind;
  j["seed"] = seed;
  j["out"] = out;
  j["env"] = {{"kind", env.kind},
              {"levels_file", env.sokoban.levels_file},
              {"width", g.width},
              {"height", g.height},
              {"boxes", g.num_boxes},
              {"step_limit", g.step_limit},
              {"walk_steps", g.walk_steps},
              {"turn_prob", g.turn_prob},
              {"max_depth", g.max_depth},
              {"max_visited", g.max_visited},
              {"pool_size", env.sokoban.pool_size},
              {"pool_seed", env.sokoban.pool_seed},
              {"minipacman_task", env.minipacman_task},
              {"minipacman_step_limit", env.minipacman_step_limit},
              {"bandit_rewards", env.bandit_rewards}};
  j["agent"] = {{"kind", agent_kind_name(agent.kind)},
                {"tau", agent.tau},
                {"mf_embed", agent.mf_embed},
                {"fc", agent.fc},
                {"frame_embed", agent.frame_embed},
                {"lstm", agent.lstm},
                {"rollout_hidden", agent.rollout_hidden},
                {"reverse_encoder", agent.reverse_encoder},
                {"mc_gamma", agent.mc_gamma},
                {"mc_literal_sign", agent.mc_literal_sign}};
  j["model"] = {{"kind", model_kind_name(model.kind)},
                {"flip_prob", model.flip_prob},
                {"reward_prediction", model.reward_prediction},
                {"learned_path", model.learned_path}};
  j["train"] = {{"num_envs", train.num_envs},
                {"k", train.k},
                {"unroll", train.unroll},
                {"gamma", train.gamma},
                {"lambda_ent", train.loss.lambda_ent},
                {"lambda_dist", train.loss.lambda_dist},
                {"literal_dist_sign", train.loss.literal_dist_sign},
                {"lr", train.optimizer.learning_rate},
                {"decay", train.optimizer.decay},
                {"epsilon", train.optimizer.epsilon},
                {"grad_clip", train.grad_clip},
                {"total_steps", train.total_steps},
                {"eval_every", train.eval_every},
                {"eval_episodes", train.eval_episodes}};
  return j;
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig c;
  Reader top(j, "config");
  top("kind", c.kind);
  top("seed", c.seed);
  top("out", c.out);
  if (j.contains("env")) {
    Reader r(j.at("env"), "env");
    auto& g = c.env.sokoban.gen;
    r("kind", c.env.kind);
    r("levels_file", c.env.sokoban.levels_file);
    r("width", g.width);
    r("height", g.height);
    r("boxes", g.num_boxes);
    r("step_limit", g.step_limit);
    r("walk_steps", g.walk_steps);
    r("turn_prob", g.turn_prob);
    r("max_depth", g.max_depth);
    r("max_visited", g.max_visited);
    r("pool_size", c.env.sokoban.pool_size);
    r("pool_seed", c.env.sokoban.pool_seed);
    r("minipacman_task", c.env.minipacman_task);
    r("minipacman_step_limit", c.env.minipacman_step_limit);
    r("bandit_rewards", c.env.bandit_rewards);
    r.finish();
  }
  if (j.contains("agent")) {
    Reader r(j.at("agent"), "agent");
    std::string kind = agent_kind_name(c.agent.kind);
    r("kind", kind);
    c.agent.kind = parse_agent_kind(kind);
    r("tau", c.agent.tau);
    r("mf_embed", c.agent.mf_embed);
    r("fc", c.agent.fc);
    r("frame_embed", c.agent.frame_embed);
    r("lstm", c.agent.lstm);
    r("rollout_hidden", c.agent.rollout_hidden);
    r("reverse_encoder", c.agent.reverse_encoder);
    r("mc_gamma", c.agent.mc_gamma);
    r("mc_literal_sign", c.agent.mc_literal_sign);
    r.finish();
  }
  if (j.contains("model")) {
    Reader r(j.at("model"), "model");
    std::string kind = model_kind_name(c.model.kind);
    r("kind", kind);
    c.model.kind = parse_model_kind(kind);
    r("flip_prob", c.model.flip_prob);
    r("reward_prediction", c.model.reward_prediction);
    r("learned_path", c.model.learned_path);
    r.finish();
  }
  if (j.contains("train")) {
    Reader r(j.at("train"), "train");
    auto& t = c.train;
    r("num_envs", t.num_envs);
    r("k", t.k);
    r("unroll", t.unroll);
    r("gamma", t.gamma);
    r("lambda_ent", t.loss.lambda_ent);
    r("lambda_dist", t.loss.lambda_dist);
    r("literal_dist_sign", t.loss.literal_dist_sign);
    r("lr", t.optimizer.learning_rate);
    r("decay", t.optimizer.decay);
    r("epsilon", t.optimizer.epsilon);
    r("grad_clip", t.grad_clip);
    r("total_steps", t.total_steps);
    r("eval_every", t.eval_every);
    r("eval_episodes", t.eval_episodes);
    r.finish();
  }
  for (const char* section : {"env", "agent", "model", "train"}) top.allow(section);
  top.finish();
  c.train.seed = c.seed;
  c.train.validate();
  c.env.sokoban.gen.validate();
  return c;
}

std::string ExperimentConfig::hash() const {
  json j = to_json();
  j.erase("out");
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(j.dump())));
  return buf;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config " + path);
  return ExperimentConfig::from_json(json::parse(in));
}

std::vector<SokobanState> load_levels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read levels " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  std::vector<SokobanState> out;
  for (auto& rec : sokoban::parse_level_file(ss.str())) out.push_back(std::move(rec.state));
  if (out.empty()) throw std::invalid_argument(path + ": no levels");
  return out;
}

std::vector<SokobanState> generate_pool(const sokoban::GenParams& params, int count, std::uint64_t seed) {
  std::vector<SokobanState> out;
  for (std::uint64_t i = 0; static_cast<int>(out.size()) < count; ++i) {
    if (i > static_cast<std::uint64_t>(count) * 100 + 100) throw std::runtime_error("generate_pool: generator keeps failing");
    auto r = sokoban::generate_level(params, seed + i);
    if (r.ok()) out.push_back(r.level->state);
  }
  return out;
}

ObsShape env_shape(const EnvSpec& spec) {
  if (spec.kind == "sokoban") {
    if (!spec.sokoban.levels_file.empty()) {
      const auto levels = load_levels(spec.sokoban.levels_file);
      return {sokoban::kNumPlanes, levels[0].height(), levels[0].width()};
    }
    return {sokoban::kNumPlanes, spec.sokoban.gen.height, spec.sokoban.gen.width};
  }
  if (spec.kind == "minipacman") return MiniPacmanEnv(minipacman::task_by_name(spec.minipacman_task), 0).shape();
  if (spec.kind == "bandit") return {1, 1, 1};
  throw std::invalid_argument("unknown env kind '" + spec.kind + "'");
}

int env_actions(const EnvSpec& spec) {
  if (spec.kind == "bandit") return static_cast<int>(spec.bandit_rewards.size());
  env_shape(spec);
  return 5;
}

EnvFactory make_env_factory(const EnvSpec& spec) {
  if (spec.kind == "sokoban") {
    const SokobanSource& src = spec.sokoban;
    if (!src.levels_file.empty() || src.pool_size > 0) {
      auto pool = !src.levels_file.empty() ? load_levels(src.levels_file)
                                           : generate_pool(src.gen, src.pool_size, src.pool_seed);
      return [pool](std::uint64_t seed) { return std::unique_ptr<Env>(new SokobanEnv(pool, seed)); };
    }
    return [gen = src.gen](std::uint64_t seed) { return std::unique_ptr<Env>(new SokobanEnv(gen, seed)); };
  }
  if (spec.kind == "minipacman") {
    const auto task = minipacman::task_by_name(spec.minipacman_task);
    const int limit = spec.minipacman_step_limit;
    return [task, limit](std::uint64_t seed) { return std::unique_ptr<Env>(new MiniPacmanEnv(task, seed, limit)); };
  }
  if (spec.kind == "bandit") {
    return [r = spec.bandit_rewards](std::uint64_t) { return std::unique_ptr<Env>(new BanditEnv(r)); };
  }
  throw std::invalid_argument("unknown env kind '" + spec.kind + "'");
}

std::unique_ptr<WorldModel> make_model(const ModelSpec& spec, const EnvSpec& env, std::uint64_t seed) {
  const ObsShape shape = env_shape(env);
  std::unique_ptr<WorldModel> m;
  if (spec.kind == ModelKind::kCopy) {
    m = std::make_unique<CopyModel>(shape, env_actions(env));
  } else if (env.kind != "sokoban") {
    throw std::invalid_argument("only the copy model is available for env '" + env.kind + "'");
  } else if (spec.kind == ModelKind::kPerfect) {
    m = std::make_unique<SokobanPerfectModel>(shape.width, shape.height);
  } else if (spec.kind == ModelKind::kCorrupted) {
    m = make_corrupted_sokoban_model(shape.width, shape.height, spec.flip_prob, Rng(seed).split("corruption").seed());
  } else {
    auto learned = std::make_unique<LocalTransitionModel>(LocalTransitionModel::load(spec.learned_path));
    if (learned->shape() != shape) throw std::invalid_argument("learned model shape does not match the env");
    m = std::move(learned);
  }
  m->set_reward_prediction(spec.reward_prediction);
  return m;
}

AgentConfig agent_config(const AgentSpec& spec, const EnvSpec& env) {
  AgentConfig c;
  c.obs = env_shape(env);
  c.num_actions = env_actions(env);
  c.tau = spec.tau;
  c.mf_embed = spec.mf_embed;
  c.fc = spec.fc;
  c.frame_embed = spec.frame_embed;
  c.lstm = spec.lstm;
  c.rollout_hidden = spec.rollout_hidden;
  c.reverse_encoder = spec.reverse_encoder;
  c.validate();
  return c;
}

std::unique_ptr<Agent> make_agent(const AgentSpec& spec, const EnvSpec& env, WorldModel* model, Rng& rng) {
  const AgentConfig c = agent_config(spec, env);
  switch (spec.kind) {
    case AgentKind::kBaseline:
      return std::make_unique<BaselineAgent>(c, false, rng);
    case AgentKind::kBaselineLarge:
      return std::make_unique<BaselineAgent>(c, true, rng);
    case AgentKind::kCopyModel:
      return std::make_unique<CopyModelAgent>(c, rng);
    case AgentKind::kI2a:
      if (!model) throw std::invalid_argument("i2a agent needs a model");
      return std::make_unique<I2aAgent>(c, *model, rng);
    case AgentKind::kMcSearch: {
      if (!model) throw std::invalid_argument("mc-search agent needs a model");
      McSearchConfig mc;
      mc.depth = spec.tau;
      mc.gamma = spec.mc_gamma;
      mc.hidden = spec.rollout_hidden;
      mc.literal_sign = spec.mc_literal_sign;
      return std::make_unique<McSearchAgent>(c, *model, mc, rng);
    }
  }
  throw std::invalid_argument("unknown agent kind");
}

EnvSpec toy_env() {
  EnvSpec e;
  e.kind = "sokoban";
  e.sokoban.gen.width = 6;
  e.sokoban.gen.height = 6;
  e.sokoban.gen.num_boxes = 1;
  e.sokoban.gen.step_limit = 20;
  e.sokoban.pool_size = 100;
  e.sokoban.pool_seed = 1000;
  return e;
}

TrainConfig toy_train_config(std::uint64_t seed) {
  TrainConfig t;
  t.num_envs = 16;
  t.k = 5;
  t.unroll = 6;
  t.gamma = 0.99;
  t.loss.lambda_ent = 1e-2;
  t.loss.lambda_dist = 1.0;
  t.optimizer = {3e-3, 0.99, 1e-5};
  t.grad_clip = 40.0;
  t.total_steps = 300000;
  t.eval_every = 30000;
  t.eval_episodes = 100;
  t.seed = seed;
  return t;
}

ToyRun run_toy(AgentKind agent_kind, const ModelSpec& model_spec, int tau, std::uint64_t seed,
               std::optional<std::int64_t> total_steps) {
  const EnvSpec env = toy_env();
  TrainConfig tc = toy_train_config(seed);
  if (total_steps) {
    tc.total_steps = *total_steps;
    tc.eval_every = std::max<std::int64_t>(1, *total_steps / 10);
  }
  AgentSpec spec;
  spec.kind = agent_kind;
  spec.tau = tau;
  Rng rng = Rng(seed).split("init");
  std::unique_ptr<WorldModel> model;
  if (agent_kind == AgentKind::kI2a || agent_kind == AgentKind::kMcSearch) model = make_model(model_spec, env, seed);
  auto agent = make_agent(spec, env, model.get(), rng);
  const EnvFactory factory = make_env_factory(env);

  // Start states of levels outside the training pool.
  std::vector<std::vector<double>> heldout;
  for (const auto& level : generate_pool(env.sokoban.gen, 50, env.sokoban.pool_seed + 7919)) {
    heldout.push_back(level.observation());
  }
  std::vector<double> heldout_kl;
  std::uint64_t probe_calls = 0;
  auto probe = [&](const TrainMetrics& m) {
    if (!m.has_eval) return;
    const std::uint64_t before = model ? model->calls() : 0;
    Rng r = Rng(seed).split("heldout");
    double sum = 0.0;
    int count = 0;
    for (const auto& obs : heldout) {
      const AgentOutput o = agent->forward(obs, r);
      if (o.rollout_logits.empty()) continue;
      sum += kl_divergence(softmax(o.logits), softmax(o.rollout_logits));
      ++count;
    }
    heldout_kl.push_back(count > 0 ? sum / count : 0.0);
    if (model) probe_calls += model->calls() - before;
  };
  TrainResult r = train(*agent, factory, tc, factory, probe);
  ToyRun out;
  out.agent = agent_kind_name(agent_kind);
  out.model = model ? model_kind_name(model_spec.kind) : "none";
  out.seed = seed;
  out.diverged = r.diverged;
  for (const TrainMetrics& m : r.history) {
    if (!m.has_eval) continue;
    out.eval_solve_rates.push_back(m.eval.solve_rate);
    out.distill_kl.push_back(m.eval.distill_kl);
  }
  out.heldout_kl = std::move(heldout_kl);
  out.final_solve_rate = out.eval_solve_rates.empty() ? 0.0 : out.eval_solve_rates.back();
  out.model_calls = model ? model->calls() - probe_calls : 0;
  return out;
}

json EfficiencyRecord::to_json() const {
  return {{"level", level},       {"agent", agent},         {"solved", solved},          {"steps", steps},
          {"model_calls", model_calls}, {"decisions", decisions}, {"outer_calls", outer_calls}};
}

SolverOutcome play_agent(Agent& agent, const SokobanState& level, Rng& rng) {
  SolverOutcome out;
  WorldModel* model = agent.model();
  const std::uint64_t before = model ? model->calls() : 0;
  SokobanState s = level;
  s.set_steps_elapsed(0);
  while (!sokoban::episode_over(s)) {
    const auto pi = softmax(agent.forward(s.observation(), rng).logits);
    s = sokoban::step(s, static_cast<sokoban::Action>(rng.categorical(pi))).next;
    ++out.steps;
  }
  out.solved = s.solved();
  out.model_calls = model ? model->calls() - before : 0;
  return out;
}

SolverOutcome play_mcts(const SokobanState& level, int budget, double c, int max_depth) {
  SokobanPerfectModel model(level.width(), level.height());
  MctsConfig cfg;
  cfg.budget = budget;
  cfg.exploration = c;
  cfg.max_depth = max_depth > 0 ? max_depth : level.step_limit();
  Mcts mcts(model, sokoban_heuristic(level.width(), level.height()), cfg,
            sokoban_solved(level.width(), level.height()));
  SolverOutcome out;
  SokobanState s = level;
  s.set_steps_elapsed(0);
  while (!sokoban::episode_over(s)) {
    const MctsResult r = mcts.search(s.observation(), out.steps);
    if (!r.action) break;
    s = sokoban::step(s, static_cast<sokoban::Action>(*r.action)).next;
    ++out.steps;
  }
  out.solved = s.solved();
  out.model_calls = model.calls();
  return out;
}

namespace {

// Executes a plan in the real environment; returns false if the plan ran
// out or the episode ended unsolved.
bool execute(SokobanState& s, const std::vector<int>& plan, int& steps) {
  for (int a : plan) {
    if (sokoban::episode_over(s)) break;
    s = sokoban::step(s, static_cast<sokoban::Action>(a)).next;
    ++steps;
  }
  return s.solved();
}

}  // namespace

std::vector<EfficiencyRecord> run_efficiency_bench(const std::vector<SokobanState>& levels, Agent* agent,
                                                   const EfficiencyOptions& options) {
  std::vector<EfficiencyRecord> out;
  const Rng root(options.seed);
  for (std::size_t li = 0; li < levels.size(); ++li) {
    const SokobanState& level = levels[li];
    Rng rng = root.split(static_cast<std::uint64_t>(li));
    if (agent) {
      EfficiencyRecord rec;
      rec.level = static_cast<int>(li);
      rec.agent = agent->kind();
      Rng r = rng.split("agent");
      const SolverOutcome o = play_agent(*agent, level, r);
      rec.solved = o.solved;
      rec.steps = o.steps;
      rec.model_calls = o.model_calls;
      rec.decisions = static_cast<std::uint64_t>(o.steps);
      out.push_back(rec);
    }
    if (agent && options.retries > 0) {
      EfficiencyRecord rec;
      rec.level = static_cast<int>(li);
      rec.agent = agent->kind() + "+retry" + std::to_string(options.retries);
      Rng r = rng.split("retry");
      SokobanPerfectModel outer(level.width(), level.height());
      WorldModel* inner = agent->model();
      const std::uint64_t inner_before = inner ? inner->calls() : 0;
      std::uint64_t decisions = 0;
      EpisodePolicy policy = [&](std::span<const double> f, Rng& g) {
        ++decisions;
        return g.categorical(softmax(agent->forward(f, g).logits));
      };
      SokobanState s = level;
      s.set_steps_elapsed(0);
      while (!sokoban::episode_over(s)) {
        RetryConfig rc;
        rc.max_retries = options.retries;
        rc.max_steps = s.step_limit() - s.steps_elapsed();
        const RetryResult res = nested_retry_solve(s.observation(), outer, policy, rc, r);
        if (res.solved && execute(s, res.plan, rec.steps)) break;
        s = sokoban::step(s, static_cast<sokoban::Action>(policy(s.observation(), r))).next;
        ++rec.steps;
      }
      rec.solved = s.solved();
      rec.outer_calls = outer.calls();
      rec.decisions = decisions;
      rec.model_calls = outer.calls() + (inner ? inner->calls() - inner_before : 0);
      out.push_back(rec);
    }
    for (int budget : options.mcts_budgets) {
      EfficiencyRecord rec;
      rec.level = static_cast<int>(li);
      rec.agent = "mcts@" + std::to_string(budget);
      const SolverOutcome o = play_mcts(level, budget, options.mcts_c);
      rec.solved = o.solved;
      rec.steps = o.steps;
      rec.model_calls = o.model_calls;
      rec.decisions = static_cast<std::uint64_t>(o.steps);
      out.push_back(rec);
    }
    if (options.random_search) {
      EfficiencyRecord rec;
      rec.level = static_cast<int>(li);
      rec.agent = "random";
      Rng r = rng.split("random");
      SokobanPerfectModel model(level.width(), level.height());
      EpisodePolicy uniform = [](std::span<const double>, Rng& g) { return g.uniform_int(sokoban::kNumActions); };
      SokobanState s = level;
      s.set_steps_elapsed(0);
      while (!sokoban::episode_over(s)) {
        RetryConfig rc;
        rc.max_retries = 16;
        rc.max_steps = std::min(options.random_rollout_length, s.step_limit() - s.steps_elapsed());
        const RetryResult res = nested_retry_solve(s.observation(), model, uniform, rc, r);
        ++rec.decisions;
        if (res.solved && execute(s, res.plan, rec.steps)) break;
        s = sokoban::step(s, static_cast<sokoban::Action>(r.uniform_int(sokoban::kNumActions))).next;
        ++rec.steps;
      }
      rec.solved = s.solved();
      rec.model_calls = model.calls();
      rec.outer_calls = model.calls();
      out.push_back(rec);
    }
  }
  return out;
}

std::vector<GeneralizationRow> run_generalization(Agent* agent, const std::string& solver, int levels_per_cell,
                                                  const sokoban::GenParams& base, std::uint64_t seed, int mcts_budget,
                                                  int min_boxes, int max_boxes) {
  if (solver != "mcts" && solver != "agent") throw std::invalid_argument("unknown solver '" + solver + "'");
  if (solver == "agent" && !agent) throw std::invalid_argument("solver 'agent' needs a checkpoint");
  std::vector<GeneralizationRow> rows;
  const Rng root(seed);
  for (int boxes = min_boxes; boxes <= max_boxes; ++boxes) {
    GeneralizationRow row;
    row.boxes = boxes;
    row.requested = levels_per_cell;
    sokoban::GenParams p = base;
    p.num_boxes = boxes;
    const Rng cell = root.split(static_cast<std::uint64_t>(boxes));
    for (int i = 0; i < levels_per_cell; ++i) {
      const auto gen = sokoban::generate_level(p, cell.split(static_cast<std::uint64_t>(i)).seed());
      if (!gen.ok()) {
        ++row.generation_failures;
        continue;
      }
      ++row.generated;
      bool solved = false;
      if (solver == "mcts") {
        solved = play_mcts(gen.level->state, mcts_budget, 1.0).solved;
      } else {
        Rng r = cell.split("play").split(static_cast<std::uint64_t>(i));
        solved = play_agent(*agent, gen.level->state, r).solved;
      }
      row.solved += solved ? 1 : 0;
    }
    rows.push_back(row);
  }
  return rows;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

json RobustnessReport::to_json() const {
  json runs_json = json::array();
  for (const ToyRun& r : runs) {
    runs_json.push_back({{"agent", r.agent},
                         {"model", r.model},
                         {"seed", r.seed},
                         {"final_solve_rate", r.final_solve_rate},
                         {"eval_solve_rates", r.eval_solve_rates},
                         {"heldout_kl", r.heldout_kl},
                         {"diverged", r.diverged},
                         {"model_calls", r.model_calls}});
  }
  return {{"runs", runs_json},
          {"median",
           {{"i2a_perfect", i2a_perfect},
            {"i2a_corrupted", i2a_corrupted},
            {"mc_perfect", mc_perfect},
            {"mc_corrupted", mc_corrupted}}},
          {"i2a_drop", i2a_drop()},
          {"mc_drop", mc_drop()},
          {"i2a_retention", i2a_retention()},
          {"direction_holds", mc_drop() > i2a_drop()}};
}

RobustnessReport run_robustness(double flip_prob, const std::vector<std::uint64_t>& seeds, int tau,
                                std::optional<std::int64_t> total_steps) {
  RobustnessReport rep;
  ModelSpec perfect;
  ModelSpec corrupted;
  corrupted.kind = ModelKind::kCorrupted;
  corrupted.flip_prob = flip_prob;
  std::vector<double> ip, ic, mp, mcr;
  for (std::uint64_t seed : seeds) {
    for (AgentKind kind : {AgentKind::kI2a, AgentKind::kMcSearch}) {
      ToyRun a = run_toy(kind, perfect, tau, seed, total_steps);
      ToyRun b = run_toy(kind, corrupted, tau, seed, total_steps);
      (kind == AgentKind::kI2a ? ip : mp).push_back(a.final_solve_rate);
      (kind == AgentKind::kI2a ? ic : mcr).push_back(b.final_solve_rate);
      rep.runs.push_back(std::move(a));
      rep.runs.push_back(std::move(b));
    }
  }
  rep.i2a_perfect = median(ip);
  rep.i2a_corrupted = median(ic);
  rep.mc_perfect = median(mp);
  rep.mc_corrupted = median(mcr);
  return rep;
}

}  // namespace i2a::bench
