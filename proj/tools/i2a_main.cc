// Command-line front end: level generation, training, evaluation, planning
// and the benchmark sweeps. Every JSONL record carries the config hash and
// seed of the run that produced it.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "i2a/bench/experiments.h"
#include "i2a/model/local_model.h"
#include "i2a/planners/planners.h"
#include "i2a/sokoban/procgen.h"
#include "json.hpp"

namespace {

using namespace i2a;
using nlohmann::json;

// Thrown when a checked invariant fails; maps to exit code 2.
struct InvariantViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string hash_of(const json& j) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(j.dump())));
  return buf;
}

// Writes to a file, or stdout for "" / "-".
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty() && path != "-") {
      file_.open(path);
      if (!file_) throw std::runtime_error("cannot write " + path);
    }
  }
  std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

 private:
  std::ofstream file_;
};

void emit(Output& out, json record, const std::string& hash, std::uint64_t seed) {
  record["config_hash"] = hash;
  record["seed"] = seed;
  out.stream() << record.dump() << '\n';
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- gen -------------------------------------------------------------------

struct GenArgs {
  sokoban::GenParams params;
  int count = 10;
  std::uint64_t seed = 1;
  std::string out;
};

int run_gen(const GenArgs& a) {
  a.params.validate();
  Output out(a.out);
  const auto t0 = std::chrono::steady_clock::now();
  int failures = 0;
  int replay_failures = 0;
  for (int i = 0; i < a.count; ++i) {
    const std::uint64_t level_seed = splitmix64(a.seed + static_cast<std::uint64_t>(i));
    const auto r = sokoban::generate_level(a.params, level_seed);
    if (!r.ok()) {
      ++failures;
      continue;
    }
    if (!sokoban::replay_solves(r.level->state, r.level->solution)) ++replay_failures;
    out.stream() << sokoban::render_level_record(sokoban::make_level_record(*r.level, level_seed)) << '\n';
  }
  std::cerr << "generated " << a.count - failures << "/" << a.count << " levels in " << seconds_since(t0)
            << "s; generation failures " << failures << ", replay failures " << replay_failures << "\n";
  if (replay_failures > 0) throw InvariantViolation("recorded solution does not solve its level");
  return 0;
}

// ---- train -----------------------------------------------------------------

int run_train(bench::ExperimentConfig cfg) {
  if (cfg.out.empty()) throw std::invalid_argument("train: --out directory required");
  std::filesystem::create_directories(cfg.out);
  const std::string hash = cfg.hash();
  {
    std::ofstream f(cfg.out + "/config.json");
    f << cfg.to_json().dump(2) << '\n';
  }
  Rng rng = Rng(cfg.seed).split("init");
  auto model = bench::make_model(cfg.model, cfg.env, cfg.seed);
  const bool uses_model = cfg.agent.kind == bench::AgentKind::kI2a || cfg.agent.kind == bench::AgentKind::kMcSearch;
  auto agent = bench::make_agent(cfg.agent, cfg.env, uses_model ? model.get() : nullptr, rng);
  const EnvFactory factory = bench::make_env_factory(cfg.env);
  Output metrics(cfg.out + "/metrics.jsonl");
  const auto t0 = std::chrono::steady_clock::now();
  TrainResult r = train(*agent, factory, cfg.train, factory, [&](const TrainMetrics& m) {
    json rec = json::parse(m.to_json());
    rec["elapsed_s"] = seconds_since(t0);
    emit(metrics, rec, hash, cfg.seed);
    metrics.stream().flush();
    std::cerr << "steps " << m.steps << " solve " << m.solve_rate;
    if (m.has_eval) std::cerr << " eval " << m.eval.solve_rate;
    std::cerr << "\n";
  });
  const json extra = {{"experiment", cfg.to_json()}, {"config_hash", hash}};
  save_checkpoint(*agent, cfg.out + "/checkpoint.json", extra.dump());
  if (r.diverged) throw InvariantViolation("training diverged: " + r.diagnostic);
  return 0;
}

// ---- checkpoint loading ----------------------------------------------------

struct LoadedAgent {
  bench::ExperimentConfig cfg;
  std::unique_ptr<WorldModel> model;
  std::unique_ptr<Agent> agent;
};

LoadedAgent load_agent(const std::string& path, const std::string& model_override, std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  const json j = json::parse(in);
  LoadedAgent la;
  la.cfg = bench::ExperimentConfig::from_json(j.at("extra").at("experiment"));
  if (!model_override.empty()) la.cfg.model.kind = bench::parse_model_kind(model_override);
  const auto kind = la.cfg.agent.kind;
  if (kind == bench::AgentKind::kI2a || kind == bench::AgentKind::kMcSearch) {
    la.model = bench::make_model(la.cfg.model, la.cfg.env, seed);
  }
  Rng rng(0);
  la.agent = bench::make_agent(la.cfg.agent, la.cfg.env, la.model.get(), rng);
  load_params(la.agent->params(), path);
  return la;
}

// ---- eval ------------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint;
  std::string model;
  std::string levels;
  int episodes = 100;
  bool greedy = false;
  std::uint64_t seed = 1;
  std::string out;
  std::string diagnostics;
  int diagnostics_count = 10;
};

int run_eval(const EvalArgs& a) {
  LoadedAgent la = load_agent(a.checkpoint, a.model, a.seed);
  if (!a.levels.empty()) {
    la.cfg.env.sokoban.levels_file = a.levels;
    la.cfg.env.sokoban.pool_size = 0;
  }
  const json cfg = {{"command", "eval"},   {"checkpoint_config", la.cfg.hash()}, {"levels", a.levels},
                    {"episodes", a.episodes}, {"greedy", a.greedy}, {"model", bench::model_kind_name(la.cfg.model.kind)}};
  const std::string hash = hash_of(cfg);
  const EnvFactory factory = bench::make_env_factory(la.cfg.env);
  if (!a.diagnostics.empty()) {
    Output diag(a.diagnostics);
    auto env = factory(a.seed);
    Rng rng = Rng(a.seed).split("diagnostics");
    auto obs = env->reset();
    for (int i = 0; i < a.diagnostics_count; ++i) {
      const AgentOutput o = la.agent->forward(obs, rng);
      diag.stream() << diagnostics_jsonl(o) << '\n';
      EnvStep s = env->step(rng.categorical(softmax(o.logits)));
      obs = s.done ? env->reset() : s.obs;
    }
  }
  const EvalResult r = evaluate(*la.agent, factory, a.episodes, a.seed, a.greedy);
  Output out(a.out);
  emit(out,
       {{"agent", la.agent->kind()},
        {"episodes", r.episodes},
        {"solve_rate", r.solve_rate},
        {"mean_return", r.mean_return},
        {"mean_length", r.mean_length},
        {"model_calls", r.model_calls},
        {"distill_kl", r.distill_kl}},
       hash, a.seed);
  return 0;
}

// ---- plan ------------------------------------------------------------------

struct PlanArgs {
  std::string levels;
  int budget = 1000;
  double c = 1.0;
  std::uint64_t seed = 1;
  std::string report;
};

int run_plan(const PlanArgs& a) {
  const auto levels = bench::load_levels(a.levels);
  const json cfg = {{"command", "plan"}, {"levels", a.levels}, {"budget", a.budget}, {"c", a.c}};
  const std::string hash = hash_of(cfg);
  Output out(a.report);
  int solved = 0;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const auto o = bench::play_mcts(levels[i], a.budget, a.c);
    solved += o.solved ? 1 : 0;
    emit(out, {{"level", i}, {"solved", o.solved}, {"steps", o.steps}, {"model_calls", o.model_calls}}, hash, a.seed);
  }
  std::cerr << "solved " << solved << "/" << levels.size() << "\n";
  return 0;
}

// ---- bench-efficiency ------------------------------------------------------

struct EfficiencyArgs {
  std::string levels;
  int count = 20;
  int boxes = 4;
  std::string checkpoint;
  std::vector<int> budgets;
  int retries = 0;
  bool random = false;
  std::uint64_t seed = 1;
  std::string out;
};

int run_efficiency(const EfficiencyArgs& a) {
  std::vector<sokoban::SokobanState> levels;
  if (!a.levels.empty()) {
    levels = bench::load_levels(a.levels);
  } else {
    sokoban::GenParams p;
    p.num_boxes = a.boxes;
    levels = bench::generate_pool(p, a.count, a.seed);
  }
  LoadedAgent la;
  if (!a.checkpoint.empty()) la = load_agent(a.checkpoint, "", a.seed);
  const json cfg = {{"command", "bench-efficiency"}, {"levels", a.levels}, {"count", a.count},
                    {"boxes", a.boxes},              {"checkpoint", a.checkpoint}, {"budgets", a.budgets},
                    {"retries", a.retries},          {"random", a.random}};
  const std::string hash = hash_of(cfg);
  bench::EfficiencyOptions opt;
  opt.mcts_budgets = a.budgets;
  opt.retries = a.retries;
  opt.random_search = a.random;
  opt.seed = a.seed;
  const auto records = bench::run_efficiency_bench(levels, la.agent.get(), opt);
  Output out(a.out);
  struct Summary {
    int levels = 0, solved = 0;
    std::uint64_t calls_solved = 0;
  };
  std::map<std::string, Summary> summary;
  for (const auto& rec : records) {
    emit(out, rec.to_json(), hash, a.seed);
    auto& s = summary[rec.agent];
    ++s.levels;
    if (rec.solved) {
      ++s.solved;
      s.calls_solved += rec.model_calls;
    }
    // Plain agent decisions consult the model exactly n * tau times each.
    if (la.agent && rec.agent == la.agent->kind() && la.agent->model()) {
      const auto per = static_cast<std::uint64_t>(la.agent->num_actions() * la.agent->config().tau);
      if (rec.model_calls != rec.decisions * per) throw InvariantViolation("model-call accounting mismatch");
    }
  }
  std::printf("%-20s %8s %10s %22s\n", "agent", "levels", "solved", "mean calls per solved");
  for (const auto& [name, s] : summary) {
    std::printf("%-20s %8d %9.1f%% %22.0f\n", name.c_str(), s.levels, 100.0 * s.solved / s.levels,
                s.solved ? static_cast<double>(s.calls_solved) / s.solved : 0.0);
  }
  return 0;
}

// ---- bench-generalize ------------------------------------------------------

struct GeneralizeArgs {
  std::string checkpoint;
  std::string solver = "agent";
  int levels_per_cell = 20;
  int min_boxes = 1;
  int max_boxes = 7;
  int budget = 1000;
  std::uint64_t seed = 1;
  std::string out;
};

int run_generalize(const GeneralizeArgs& a) {
  LoadedAgent la;
  sokoban::GenParams base;
  if (a.solver == "agent") {
    if (a.checkpoint.empty()) throw std::invalid_argument("bench-generalize: --checkpoint required for solver 'agent'");
    la = load_agent(a.checkpoint, "", a.seed);
    base = la.cfg.env.sokoban.gen;
  }
  const json cfg = {{"command", "bench-generalize"}, {"checkpoint", a.checkpoint}, {"solver", a.solver},
                    {"levels_per_cell", a.levels_per_cell}, {"min_boxes", a.min_boxes},
                    {"max_boxes", a.max_boxes}, {"budget", a.budget}};
  const std::string hash = hash_of(cfg);
  const auto rows = bench::run_generalization(la.agent.get(), a.solver, a.levels_per_cell, base, a.seed, a.budget,
                                              a.min_boxes, a.max_boxes);
  Output out(a.out);
  std::printf("%6s %10s %10s %10s\n", "boxes", "levels", "excluded", "solved");
  for (const auto& r : rows) {
    emit(out,
         {{"boxes", r.boxes},
          {"requested", r.requested},
          {"generated", r.generated},
          {"generation_failures", r.generation_failures},
          {"solved", r.solved},
          {"solve_rate", r.solve_rate()}},
         hash, a.seed);
    std::printf("%6d %10d %10d %9.1f%%\n", r.boxes, r.generated, r.generation_failures, 100.0 * r.solve_rate());
  }
  return 0;
}

// ---- bench-robustness ------------------------------------------------------

struct RobustnessArgs {
  std::vector<std::uint64_t> seeds{1, 2, 3};
  double flip_prob = 0.2;
  int tau = 3;
  std::int64_t steps = 0;
  std::string out;
};

int run_robustness(const RobustnessArgs& a) {
  const json cfg = {{"command", "bench-robustness"}, {"seeds", a.seeds}, {"flip_prob", a.flip_prob},
                    {"tau", a.tau}, {"steps", a.steps}};
  const std::string hash = hash_of(cfg);
  const auto rep = bench::run_robustness(a.flip_prob, a.seeds, a.tau,
                                         a.steps > 0 ? std::optional<std::int64_t>(a.steps) : std::nullopt);
  Output out(a.out);
  emit(out, rep.to_json(), hash, a.seeds.empty() ? 0 : a.seeds.front());
  std::printf("%-10s %10s %10s %8s\n", "agent", "perfect", "corrupted", "drop");
  std::printf("%-10s %10.3f %10.3f %8.3f\n", "i2a", rep.i2a_perfect, rep.i2a_corrupted, rep.i2a_drop());
  std::printf("%-10s %10.3f %10.3f %8.3f\n", "mc-search", rep.mc_perfect, rep.mc_corrupted, rep.mc_drop());
  for (const auto& r : rep.runs) {
    if (r.diverged) std::printf("diverged: %s/%s seed %llu\n", r.agent.c_str(), r.model.c_str(),
                                static_cast<unsigned long long>(r.seed));
  }
  return 0;
}

// ---- fit-model -------------------------------------------------------------

struct FitArgs {
  std::string levels;
  int count = 200;
  int boxes = 4;
  int width = 10;
  int height = 10;
  int episodes_per_level = 4;
  std::uint64_t seed = 1;
  std::string out;
};

int run_fit(const FitArgs& a) {
  std::vector<sokoban::SokobanState> levels;
  if (!a.levels.empty()) {
    levels = bench::load_levels(a.levels);
  } else {
    sokoban::GenParams p;
    p.width = a.width;
    p.height = a.height;
    p.num_boxes = a.boxes;
    levels = bench::generate_pool(p, a.count, a.seed);
  }
  // Transitions from a uniform-random behaviour policy; 80/20 split by level.
  Rng rng = Rng(a.seed).split("fit");
  std::vector<Transition> train, held_out;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    auto& bucket = (i % 5 == 4) ? held_out : train;
    for (int e = 0; e < a.episodes_per_level; ++e) {
      sokoban::SokobanState s = levels[i];
      while (!sokoban::episode_over(s)) {
        const int act = rng.uniform_int(sokoban::kNumActions);
        auto o = sokoban::step(s, static_cast<sokoban::Action>(act));
        bucket.push_back({s.observation(), act, o.next.observation(), o.reward});
        s = std::move(o.next);
      }
    }
  }
  const auto model = LocalTransitionModel::fit(levels[0].width(), levels[0].height(), train);
  const double acc_train = model.cell_accuracy(train);
  const double acc_held = held_out.empty() ? 0.0 : model.cell_accuracy(held_out);
  if (!a.out.empty()) model.save(a.out);
  const json cfg = {{"command", "fit-model"}, {"levels", a.levels}, {"count", a.count}, {"boxes", a.boxes},
                    {"width", a.width}, {"height", a.height}, {"episodes_per_level", a.episodes_per_level}};
  Output out("-");
  emit(out,
       {{"train_transitions", train.size()},
        {"held_out_transitions", held_out.size()},
        {"contexts", model.context_count()},
        {"train_cell_accuracy", acc_train},
        {"held_out_cell_accuracy", acc_held},
        {"reward_weights", model.reward_weights()}},
       hash_of(cfg), a.seed);
  return 0;
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stoi(item));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Imagination-augmented agents on Sokoban and MiniPacman"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate Sokoban levels");
  gen_cmd->add_option("--width", gen.params.width);
  gen_cmd->add_option("--height", gen.params.height);
  gen_cmd->add_option("--boxes", gen.params.num_boxes);
  gen_cmd->add_option("--walk-steps", gen.params.walk_steps);
  gen_cmd->add_option("--turn-prob", gen.params.turn_prob);
  gen_cmd->add_option("--max-depth", gen.params.max_depth);
  gen_cmd->add_option("--step-limit", gen.params.step_limit);
  gen_cmd->add_option("--count", gen.count);
  gen_cmd->add_option("--seed", gen.seed);
  gen_cmd->add_option("--out", gen.out, "Level file (default stdout)");

  std::string train_config;
  std::uint64_t train_seed = 0;
  std::string train_out;
  auto* train_cmd = app.add_subcommand("train", "Train an agent");
  train_cmd->add_option("--config", train_config, "Experiment JSON")->required();
  train_cmd->add_option("--seed", train_seed, "Overrides the config seed");
  train_cmd->add_option("--out", train_out, "Output directory");

  EvalArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval_cmd->add_option("--checkpoint", ev.checkpoint)->required();
  eval_cmd->add_option("--model", ev.model, "Override the model kind (perfect, corrupted, copy, learned)");
  eval_cmd->add_option("--levels", ev.levels, "Level file instead of the training source");
  eval_cmd->add_option("--episodes", ev.episodes);
  eval_cmd->add_flag("--greedy", ev.greedy);
  eval_cmd->add_option("--seed", ev.seed);
  eval_cmd->add_option("--out", ev.out);
  eval_cmd->add_option("--diagnostics", ev.diagnostics, "JSONL file for per-decision embeddings");

  PlanArgs plan;
  auto* plan_cmd = app.add_subcommand("plan", "Solve levels with MCTS over the perfect model");
  plan_cmd->add_option("--levels", plan.levels)->required();
  plan_cmd->add_option("--budget", plan.budget);
  plan_cmd->add_option("--c", plan.c);
  plan_cmd->add_option("--seed", plan.seed);
  plan_cmd->add_option("--report,--out", plan.report);

  EfficiencyArgs eff;
  std::string budgets = "100,1000";
  auto* eff_cmd = app.add_subcommand("bench-efficiency", "Model calls per solved level");
  eff_cmd->add_option("--levels", eff.levels);
  eff_cmd->add_option("--count", eff.count);
  eff_cmd->add_option("--boxes", eff.boxes);
  eff_cmd->add_option("--checkpoint", eff.checkpoint);
  eff_cmd->add_option("--budgets", budgets, "Comma-separated MCTS budgets");
  eff_cmd->add_option("--retries", eff.retries);
  eff_cmd->add_flag("--random", eff.random);
  eff_cmd->add_option("--seed", eff.seed);
  eff_cmd->add_option("--out", eff.out);

  GeneralizeArgs gz;
  auto* gz_cmd = app.add_subcommand("bench-generalize", "Solve rate by box count");
  gz_cmd->add_option("--checkpoint", gz.checkpoint);
  gz_cmd->add_option("--solver", gz.solver, "agent or mcts");
  gz_cmd->add_option("--levels-per-cell", gz.levels_per_cell);
  gz_cmd->add_option("--min-boxes", gz.min_boxes);
  gz_cmd->add_option("--max-boxes", gz.max_boxes);
  gz_cmd->add_option("--budget", gz.budget);
  gz_cmd->add_option("--seed", gz.seed);
  gz_cmd->add_option("--out", gz.out);

  RobustnessArgs rb;
  std::string seeds = "1,2,3";
  auto* rb_cmd = app.add_subcommand("bench-robustness", "Perfect vs corrupted model, I2A vs MC search");
  rb_cmd->add_option("--seeds", seeds);
  rb_cmd->add_option("--flip-prob", rb.flip_prob);
  rb_cmd->add_option("--tau", rb.tau);
  rb_cmd->add_option("--steps", rb.steps, "Training steps per run (default: toy-task setting)");
  rb_cmd->add_option("--out", rb.out);

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit-model", "Fit the local transition model from random-play transitions");
  fit_cmd->add_option("--levels", fit.levels);
  fit_cmd->add_option("--count", fit.count);
  fit_cmd->add_option("--boxes", fit.boxes);
  fit_cmd->add_option("--width", fit.width);
  fit_cmd->add_option("--height", fit.height);
  fit_cmd->add_option("--episodes-per-level", fit.episodes_per_level);
  fit_cmd->add_option("--seed", fit.seed);
  fit_cmd->add_option("--out", fit.out);

  // Option values can also come from a TOML/INI file.
  for (auto* cmd : {gen_cmd, eval_cmd, plan_cmd, eff_cmd, gz_cmd, rb_cmd, fit_cmd}) {
    cmd->set_config("--config", "", "TOML/INI file with option values");
  }

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen_cmd->parsed()) {
      return run_gen(gen);
    }
    if (train_cmd->parsed()) {
      auto cfg = bench::load_config(train_config);
      if (train_seed != 0) {
        cfg.seed = train_seed;
        cfg.train.seed = train_seed;
      }
      if (!train_out.empty()) cfg.out = train_out;
      return run_train(cfg);
    }
    if (eval_cmd->parsed()) return run_eval(ev);
    if (plan_cmd->parsed()) return run_plan(plan);
    if (eff_cmd->parsed()) {
      eff.budgets = parse_int_list(budgets);
      return run_efficiency(eff);
    }
    if (gz_cmd->parsed()) return run_generalize(gz);
    if (rb_cmd->parsed()) {
      rb.seeds.clear();
      for (int s : parse_int_list(seeds)) rb.seeds.push_back(static_cast<std::uint64_t>(s));
      return run_robustness(rb);
    }
    if (fit_cmd->parsed()) return run_fit(fit);
  } catch (const InvariantViolation& e) {
    std::cerr << "invariant violated: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
