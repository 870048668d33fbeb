#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "i2a/numerics/rng.h"

namespace i2a {

struct ObsShape {
  int planes = 0;
  int height = 0;
  int width = 0;
  std::size_t size() const { return static_cast<std::size_t>(planes) * height * width; }
  bool operator==(const ObsShape&) const = default;
};

struct Prediction {
  std::vector<double> next;
  // nullopt when the model does not predict rewards.
  std::optional<double> reward;
  // The predicted next state is absorbing (e.g. a solved level).
  bool terminal = false;
};

// Environment model: (features, action) -> next features and, optionally, a
// reward. Every predict() call bumps an atomic call counter, whether or not it
// succeeds.
class WorldModel {
 public:
  WorldModel() = default;
  virtual ~WorldModel() = default;

  Prediction predict(std::span<const double> features, int action);

  std::uint64_t calls() const { return calls_.load(std::memory_order_relaxed); }
  void reset_calls() { calls_.store(0, std::memory_order_relaxed); }

  // Ablation switch: with reward prediction off, predictions carry no reward.
  void set_reward_prediction(bool on) { reward_prediction_ = on; }
  bool reward_prediction() const { return reward_prediction_; }

  virtual ObsShape shape() const = 0;
  virtual int num_actions() const = 0;
  virtual std::string name() const = 0;

 protected:
  // Copies start with a fresh call counter.
  WorldModel(const WorldModel& other) : reward_prediction_(other.reward_prediction_) {}
  WorldModel& operator=(const WorldModel& other) {
    reward_prediction_ = other.reward_prediction_;
    return *this;
  }

  virtual Prediction do_predict(std::span<const double> features, int action) = 0;
  void check_input(std::span<const double> features, int action) const;

 private:
  std::atomic<std::uint64_t> calls_{0};
  bool reward_prediction_ = true;
};

// Simulator-backed Sokoban model. Strict mode rejects features that do not
// decode to a valid state; lenient mode (used under corruption) repairs them
// the way decode_observation_lenient does and, if no player survives, returns
// the input unchanged with the step penalty. A solved input is absorbing:
// same features, reward 0, terminal.
class SokobanPerfectModel : public WorldModel {
 public:
  SokobanPerfectModel(int width, int height, bool lenient = false);

  ObsShape shape() const override { return shape_; }
  int num_actions() const override;
  std::string name() const override { return lenient_ ? "sokoban-lenient" : "sokoban-perfect"; }

 protected:
  Prediction do_predict(std::span<const double> features, int action) override;

 private:
  ObsShape shape_;
  bool lenient_;
};

// Returns its input; reward prediction 0.
class CopyModel : public WorldModel {
 public:
  CopyModel(ObsShape shape, int num_actions) : shape_(shape), num_actions_(num_actions) {}
  ObsShape shape() const override { return shape_; }
  int num_actions() const override { return num_actions_; }
  std::string name() const override { return "copy"; }

 protected:
  Prediction do_predict(std::span<const double> features, int action) override;

 private:
  ObsShape shape_;
  int num_actions_;
};

struct CorruptionParams {
  double flip_prob = 0.0;
  // Planes subject to corruption; empty means every plane.
  std::vector<int> planes;
  std::uint64_t seed = 0;
};

// Runs the inner model, then toggles each cell of the selected planes
// independently with probability flip_prob: set cells are deleted, clear
// cells gain a duplicate sprite. Fed back through rollouts, errors compound.
class CorruptedModel : public WorldModel {
 public:
  CorruptedModel(std::unique_ptr<WorldModel> inner, CorruptionParams params);

  ObsShape shape() const override { return inner_->shape(); }
  int num_actions() const override { return inner_->num_actions(); }
  std::string name() const override { return "corrupted(" + inner_->name() + ")"; }
  const CorruptionParams& params() const { return params_; }
  WorldModel& inner() { return *inner_; }
  // Per-entry flip mask of the most recent prediction, in feature layout.
  const std::vector<std::uint8_t>& last_flips() const { return last_flips_; }

 protected:
  Prediction do_predict(std::span<const double> features, int action) override;

 private:
  std::unique_ptr<WorldModel> inner_;
  CorruptionParams params_;
  Rng rng_;
  std::vector<std::uint8_t> plane_selected_;
  std::vector<std::uint8_t> last_flips_;
};

// The default corruption targets: box and player planes ("sprites").
std::unique_ptr<WorldModel> make_corrupted_sokoban_model(int width, int height, double flip_prob,
                                                         std::uint64_t seed);

// One imagined trajectory of length tau.
struct Rollout {
  std::vector<std::vector<double>> frames;  // predicted features f_{t+1..t+tau}
  std::vector<double> rewards;              // predicted rewards (0 when the model has none)
  std::vector<int> actions;                 // action taken into each frame
  std::vector<std::uint8_t> terminal;
  std::size_t length() const { return frames.size(); }
};

using RolloutPolicy = std::function<int(std::span<const double> features, Rng& rng)>;

// First transition uses first_action; later ones sample the rollout policy on
// the imagined features. Exactly tau model calls. Throws for tau < 1.
Rollout rollout(WorldModel& model, std::span<const double> features, int first_action,
                const RolloutPolicy& policy, int depth, Rng& rng);

}  // namespace i2a
