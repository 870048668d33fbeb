#pragma once

#include <absl/container/flat_hash_map.h>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "i2a/model/world_model.h"

namespace i2a {

struct Transition {
  std::vector<double> features;
  int action = 0;
  std::vector<double> next_features;
  double reward = 0.0;
};

// Learned Sokoban model built from observed transitions.
//
// Each cell's next one-hot code (its 4 plane bits) is predicted from the
// action and the codes of the 5 cells on the action's axis centred on it
// (offsets -2..+2 along the move direction; NoOp sees only the cell
// itself), by maximum likelihood over a count table. Contexts never seen in
// training keep the cell unchanged. Reward is a least-squares fit on
// [1, change in boxes on target, next state solved]. A solved input is
// absorbing, as for the simulator.
class LocalTransitionModel : public WorldModel {
 public:
  static constexpr int kFormatVersion = 1;

  LocalTransitionModel(int width, int height);

  // Throws std::invalid_argument on empty data or inconsistent shapes.
  static LocalTransitionModel fit(int width, int height, const std::vector<Transition>& data,
                                  double ridge = 1e-6);

  ObsShape shape() const override { return shape_; }
  int num_actions() const override;
  std::string name() const override { return "sokoban-local"; }

  // Fraction of cells whose full code is predicted exactly.
  double cell_accuracy(const std::vector<Transition>& data) const;
  std::size_t context_count() const { return table_.size(); }
  const std::array<double, 3>& reward_weights() const { return reward_weights_; }

  std::string to_json() const;
  static LocalTransitionModel from_json(const std::string& text);
  void save(const std::string& path) const;
  static LocalTransitionModel load(const std::string& path);

  // Deterministic prediction without touching the call counter.
  Prediction predict_uncounted(std::span<const double> features, int action) const;

 protected:
  Prediction do_predict(std::span<const double> features, int action) override {
    return predict_uncounted(features, action);
  }

 private:
  using Counts = std::array<std::uint32_t, 16>;

  std::uint64_t context_key(const std::vector<std::uint8_t>& codes, int cell, int action) const;
  std::vector<std::uint8_t> cell_codes(std::span<const double> features) const;
  std::vector<std::uint8_t> predict_codes(const std::vector<std::uint8_t>& codes, int action) const;
  double predict_reward(const std::vector<std::uint8_t>& before, const std::vector<std::uint8_t>& after) const;

  ObsShape shape_;
  absl::flat_hash_map<std::uint64_t, Counts> table_;
  std::array<double, 3> reward_weights_{};
};

}  // namespace i2a
