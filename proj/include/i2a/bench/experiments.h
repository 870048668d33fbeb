#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "i2a/agent/agent.h"
#include "i2a/model/world_model.h"
#include "i2a/sokoban/procgen.h"
#include "i2a/training/training.h"
#include "json.hpp"

namespace i2a::bench {

// ---- specs -----------------------------------------------------------------

enum class AgentKind { kI2a, kCopyModel, kBaseline, kBaselineLarge, kMcSearch };
enum class ModelKind { kPerfect, kCorrupted, kCopy, kLearned };

const char* agent_kind_name(AgentKind k);
AgentKind parse_agent_kind(const std::string& name);
const char* model_kind_name(ModelKind k);
ModelKind parse_model_kind(const std::string& name);

struct ModelSpec {
  ModelKind kind = ModelKind::kPerfect;
  double flip_prob = 0.2;
  bool reward_prediction = true;
  std::string learned_path;
};

struct AgentSpec {
  AgentKind kind = AgentKind::kI2a;
  int tau = 5;
  int mf_embed = 32;
  int fc = 64;
  int frame_embed = 8;
  int lstm = 16;
  int rollout_hidden = 16;
  bool reverse_encoder = true;
  double mc_gamma = 0.99;
  bool mc_literal_sign = false;
};

// A Sokoban level source: a text file, a fixed generated pool, or fresh
// generator output per episode.
struct SokobanSource {
  std::string levels_file;
  sokoban::GenParams gen;
  int pool_size = 0;  // 0 = fresh levels every episode
  std::uint64_t pool_seed = 1000;
};

struct EnvSpec {
  std::string kind = "sokoban";  // sokoban | minipacman | bandit
  SokobanSource sokoban;
  std::string minipacman_task = "regular";
  int minipacman_step_limit = 0;
  std::vector<double> bandit_rewards{1.0, 0.0};
};

// Fully resolved experiment description; every field has a default so the
// JSON form round-trips and hashes deterministically.
struct ExperimentConfig {
  std::string kind = "train";
  EnvSpec env;
  AgentSpec agent;
  ModelSpec model;
  TrainConfig train;
  std::uint64_t seed = 1;
  std::string out;

  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
  // FNV-1a of the canonical JSON (without `out`), as 16 hex digits.
  std::string hash() const;
};

ExperimentConfig load_config(const std::string& path);

// ---- construction ----------------------------------------------------------

std::vector<sokoban::SokobanState> load_levels(const std::string& path);
std::vector<sokoban::SokobanState> generate_pool(const sokoban::GenParams& params, int count, std::uint64_t seed);
ObsShape env_shape(const EnvSpec& spec);
int env_actions(const EnvSpec& spec);
EnvFactory make_env_factory(const EnvSpec& spec);

std::unique_ptr<WorldModel> make_model(const ModelSpec& spec, const EnvSpec& env, std::uint64_t seed);
AgentConfig agent_config(const AgentSpec& spec, const EnvSpec& env);
// model may be null for model-free agents.
std::unique_ptr<Agent> make_agent(const AgentSpec& spec, const EnvSpec& env, WorldModel* model, Rng& rng);

// ---- the toy task ----------------------------------------------------------

// 6x6, one box, 20-step cap, a fixed pool of 100 generated levels used for
// both training and evaluation.
EnvSpec toy_env();
// Hyperparameters for toy-task training (300k environment steps).
TrainConfig toy_train_config(std::uint64_t seed);

struct ToyRun {
  std::string agent;
  std::string model;
  std::uint64_t seed = 0;
  double final_solve_rate = 0.0;
  std::vector<double> eval_solve_rates;
  std::vector<double> distill_kl;  // per evaluation, states visited on the training pool
  std::vector<double> heldout_kl;  // per evaluation, start states of 50 levels outside the pool
  bool diverged = false;
  std::uint64_t model_calls = 0;
};

ToyRun run_toy(AgentKind agent, const ModelSpec& model, int tau, std::uint64_t seed,
               std::optional<std::int64_t> total_steps = std::nullopt);

// ---- benchmarks ------------------------------------------------------------

struct EfficiencyRecord {
  int level = 0;
  std::string agent;
  bool solved = false;
  int steps = 0;
  std::uint64_t model_calls = 0;  // inner + outer
  std::uint64_t decisions = 0;    // agent decisions that consulted the model
  std::uint64_t outer_calls = 0;  // nested-retry outer loop
  nlohmann::json to_json() const;
};

struct EfficiencyOptions {
  std::vector<int> mcts_budgets;
  double mcts_c = 1.0;
  int retries = 0;  // 0 disables nested retries for the I2A agent
  bool random_search = false;
  int random_rollout_length = 30;
  std::uint64_t seed = 1;
};

// Plays every level with each configured solver: the I2A checkpoint (if
// given, with and without nested retries), MCTS at each budget and the
// uniform-random rollout solver. All counts are exact counter deltas.
std::vector<EfficiencyRecord> run_efficiency_bench(const std::vector<sokoban::SokobanState>& levels,
                                                   Agent* i2a_agent, const EfficiencyOptions& options);

struct SolverOutcome {
  bool solved = false;
  int steps = 0;
  std::uint64_t model_calls = 0;
};

// One real episode with an agent sampling from its policy.
SolverOutcome play_agent(Agent& agent, const sokoban::SokobanState& level, Rng& rng);
// One real episode with MCTS acting at every step (fresh tree per level).
SolverOutcome play_mcts(const sokoban::SokobanState& level, int budget, double c, int max_depth = 0);

struct GeneralizationRow {
  int boxes = 0;
  int requested = 0;
  int generated = 0;
  int generation_failures = 0;
  int solved = 0;
  double solve_rate() const { return generated > 0 ? static_cast<double>(solved) / generated : 0.0; }
};

// solver: "mcts" (uses mcts_budget) or "agent" (uses the given agent).
std::vector<GeneralizationRow> run_generalization(Agent* agent, const std::string& solver, int levels_per_cell,
                                                  const sokoban::GenParams& base, std::uint64_t seed,
                                                  int mcts_budget = 1000, int min_boxes = 1, int max_boxes = 7);

struct RobustnessReport {
  std::vector<ToyRun> runs;
  double i2a_perfect = 0.0, i2a_corrupted = 0.0, mc_perfect = 0.0, mc_corrupted = 0.0;  // medians
  double i2a_drop() const { return i2a_perfect - i2a_corrupted; }
  double mc_drop() const { return mc_perfect - mc_corrupted; }
  double i2a_retention() const { return i2a_perfect > 0.0 ? i2a_corrupted / i2a_perfect : 0.0; }
  nlohmann::json to_json() const;
};

RobustnessReport run_robustness(double flip_prob, const std::vector<std::uint64_t>& seeds, int tau = 3,
                                std::optional<std::int64_t> total_steps = std::nullopt);

double median(std::vector<double> v);

}  // namespace i2a::bench
