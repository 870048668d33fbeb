#include "i2a/model/world_model.h"

#include <stdexcept>

#include "i2a/sokoban/sokoban.h"

namespace i2a {

Prediction WorldModel::predict(std::span<const double> features, int action) {
  calls_.fetch_add(1, std::memory_order_relaxed);
  check_input(features, action);
  Prediction p = do_predict(features, action);
  if (!reward_prediction_) p.reward.reset();
  return p;
}

void WorldModel::check_input(std::span<const double> features, int action) const {
  if (features.size() != shape().size()) {
    throw std::invalid_argument(name() + ": expected " + std::to_string(shape().size()) +
                                " features, got " + std::to_string(features.size()));
  }
  if (action < 0 || action >= num_actions()) {
    throw std::invalid_argument(name() + ": action " + std::to_string(action) + " out of range");
  }
}

SokobanPerfectModel::SokobanPerfectModel(int width, int height, bool lenient)
    : shape_{sokoban::kNumPlanes, height, width}, lenient_(lenient) {}

int SokobanPerfectModel::num_actions() const { return sokoban::kNumActions; }

Prediction SokobanPerfectModel::do_predict(std::span<const double> features, int action) {
  std::optional<sokoban::SokobanState> state;
  if (lenient_) {
    state = sokoban::decode_observation_lenient(features, shape_.width, shape_.height);
    if (!state) return {{features.begin(), features.end()}, sokoban::kStepPenalty, false};
  } else {
    state = sokoban::decode_observation(features, shape_.width, shape_.height);
  }
  if (state->solved()) return {{features.begin(), features.end()}, 0.0, true};
  sokoban::StepOutcome o = sokoban::step(*state, static_cast<sokoban::Action>(action));
  return {o.next.observation(), o.reward, o.events.solved};
}

Prediction CopyModel::do_predict(std::span<const double> features, int) {
  return {{features.begin(), features.end()}, 0.0, false};
}

CorruptedModel::CorruptedModel(std::unique_ptr<WorldModel> inner, CorruptionParams params)
    : inner_(std::move(inner)), params_(std::move(params)), rng_(params_.seed) {
  if (!inner_) throw std::invalid_argument("CorruptedModel: null inner model");
  if (!(params_.flip_prob >= 0.0 && params_.flip_prob <= 1.0)) {
    throw std::invalid_argument("CorruptedModel: flip_prob must lie in [0, 1]");
  }
  const ObsShape s = inner_->shape();
  plane_selected_.assign(static_cast<std::size_t>(s.planes), params_.planes.empty() ? 1 : 0);
  for (int p : params_.planes) {
    if (p < 0 || p >= s.planes) throw std::invalid_argument("CorruptedModel: plane index out of range");
    plane_selected_[p] = 1;
  }
}

Prediction CorruptedModel::do_predict(std::span<const double> features, int action) {
  Prediction p = inner_->predict(features, action);
  const ObsShape s = shape();
  const std::size_t plane_size = static_cast<std::size_t>(s.height) * s.width;
  last_flips_.assign(p.next.size(), 0);
  if (params_.flip_prob <= 0.0) return p;
  for (int plane = 0; plane < s.planes; ++plane) {
    if (!plane_selected_[plane]) continue;
    for (std::size_t i = 0; i < plane_size; ++i) {
      if (!rng_.bernoulli(params_.flip_prob)) continue;
      double& v = p.next[plane * plane_size + i];
      v = v > 0.5 ? 0.0 : 1.0;
      last_flips_[plane * plane_size + i] = 1;
    }
  }
  return p;
}

std::unique_ptr<WorldModel> make_corrupted_sokoban_model(int width, int height, double flip_prob,
                                                         std::uint64_t seed) {
  CorruptionParams params{flip_prob, {sokoban::kBoxPlane, sokoban::kPlayerPlane}, seed};
  return std::make_unique<CorruptedModel>(std::make_unique<SokobanPerfectModel>(width, height, true),
                                          std::move(params));
}

Rollout rollout(WorldModel& model, std::span<const double> features, int first_action,
                const RolloutPolicy& policy, int depth, Rng& rng) {
  if (depth < 1) throw std::invalid_argument("rollout: depth must be >= 1");
  Rollout r;
  r.frames.reserve(depth);
  std::vector<double> current(features.begin(), features.end());
  int action = first_action;
  for (int t = 0; t < depth; ++t) {
    if (t > 0) action = policy(current, rng);
    Prediction p = model.predict(current, action);
    r.actions.push_back(action);
    r.rewards.push_back(p.reward.value_or(0.0));
    r.terminal.push_back(p.terminal ? 1 : 0);
    current = p.next;
    r.frames.push_back(std::move(p.next));
  }
  return r;
}

}  // namespace i2a
