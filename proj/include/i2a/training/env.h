#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "i2a/minipacman/minipacman.h"
#include "i2a/model/world_model.h"
#include "i2a/numerics/rng.h"
#include "i2a/sokoban/procgen.h"
#include "i2a/sokoban/sokoban.h"

namespace i2a {

struct EnvStep {
  std::vector<double> obs;
  double reward = 0.0;
  bool done = false;
  // Ended by a step cap; the learner bootstraps from obs.
  bool truncated = false;
  bool success = false;
};

class Env {
 public:
  virtual ~Env() = default;
  virtual ObsShape shape() const = 0;
  virtual int num_actions() const = 0;
  // Starts a new episode. Episodes are drawn from a stream owned by the env.
  virtual std::vector<double> reset() = 0;
  virtual EnvStep step(int action) = 0;
  virtual std::string render() const { return {}; }
};

using EnvFactory = std::function<std::unique_ptr<Env>(std::uint64_t seed)>;

// Multi-armed bandit: one step per episode, constant observation [1].
class BanditEnv : public Env {
 public:
  explicit BanditEnv(std::vector<double> arm_rewards);
  ObsShape shape() const override { return {1, 1, 1}; }
  int num_actions() const override { return static_cast<int>(rewards_.size()); }
  std::vector<double> reset() override { return {1.0}; }
  EnvStep step(int action) override;

 private:
  std::vector<double> rewards_;
};

// Sokoban over a level source: either a fixed pool (cycled in a seeded
// shuffled order) or fresh generator output per episode.
class SokobanEnv : public Env {
 public:
  SokobanEnv(std::vector<sokoban::SokobanState> pool, std::uint64_t seed);
  SokobanEnv(sokoban::GenParams params, std::uint64_t seed);
  ObsShape shape() const override;
  int num_actions() const override { return sokoban::kNumActions; }
  std::vector<double> reset() override;
  EnvStep step(int action) override;
  std::string render() const override { return sokoban::render(state_); }
  const sokoban::SokobanState& state() const { return state_; }

 private:
  std::vector<sokoban::SokobanState> pool_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  std::optional<sokoban::GenParams> params_;
  Rng rng_;
  sokoban::SokobanState state_;
  int width_ = 0;
  int height_ = 0;
};

class MiniPacmanEnv : public Env {
 public:
  MiniPacmanEnv(minipacman::TaskSpec task, std::uint64_t seed, int episode_step_limit = 0);
  ObsShape shape() const override;
  int num_actions() const override { return 5; }
  std::vector<double> reset() override;
  EnvStep step(int action) override;
  std::string render() const override { return minipacman::render(state_); }

 private:
  minipacman::TaskSpec task_;
  Rng rng_;
  int limit_;
  minipacman::MiniPacmanState state_;
};

}  // namespace i2a
