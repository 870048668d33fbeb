#include "i2a/training/env.h"

#include <stdexcept>

namespace i2a {

BanditEnv::BanditEnv(std::vector<double> arm_rewards) : rewards_(std::move(arm_rewards)) {
  if (rewards_.size() < 2) throw std::invalid_argument("BanditEnv: need at least 2 arms");
}

EnvStep BanditEnv::step(int action) {
  if (action < 0 || action >= num_actions()) throw std::invalid_argument("BanditEnv: action out of range");
  EnvStep s;
  s.obs = {1.0};
  s.reward = rewards_[action];
  s.done = true;
  s.success = s.reward > 0.0;
  return s;
}

SokobanEnv::SokobanEnv(std::vector<sokoban::SokobanState> pool, std::uint64_t seed)
    : pool_(std::move(pool)), rng_(seed) {
  if (pool_.empty()) throw std::invalid_argument("SokobanEnv: empty level pool");
  width_ = pool_[0].width();
  height_ = pool_[0].height();
  for (const auto& s : pool_) {
    s.validate();
    if (s.width() != width_ || s.height() != height_) throw std::invalid_argument("SokobanEnv: mixed level sizes");
  }
  order_.resize(pool_.size());
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
  rng_.shuffle(order_);
}

SokobanEnv::SokobanEnv(sokoban::GenParams params, std::uint64_t seed) : params_(params), rng_(seed) {
  params.validate();
  width_ = params.width;
  height_ = params.height;
}

ObsShape SokobanEnv::shape() const { return {sokoban::kNumPlanes, height_, width_}; }

std::vector<double> SokobanEnv::reset() {
  if (params_) {
    // Generation can fail; draw seeds until one succeeds.
    for (int attempt = 0; attempt < 1000; ++attempt) {
      auto r = sokoban::generate_level(*params_, rng_.next_u64());
      if (r.ok()) {
        state_ = r.level->state;
        return state_.observation();
      }
    }
    throw std::runtime_error("SokobanEnv: level generation keeps failing");
  }
  if (cursor_ == order_.size()) {
    rng_.shuffle(order_);
    cursor_ = 0;
  }
  state_ = pool_[order_[cursor_++]];
  state_.set_steps_elapsed(0);
  return state_.observation();
}

EnvStep SokobanEnv::step(int action) {
  auto o = sokoban::step(state_, static_cast<sokoban::Action>(action));
  state_ = std::move(o.next);
  EnvStep s;
  s.obs = state_.observation();
  s.reward = o.reward;
  s.done = o.done;
  s.truncated = o.truncated;
  s.success = o.events.solved;
  return s;
}

MiniPacmanEnv::MiniPacmanEnv(minipacman::TaskSpec task, std::uint64_t seed, int episode_step_limit)
    : task_(std::move(task)), rng_(seed), limit_(episode_step_limit) {}

ObsShape MiniPacmanEnv::shape() const {
  const auto maze = minipacman::Maze::default_maze();
  return {minipacman::kNumPlanes, maze->height, maze->width};
}

std::vector<double> MiniPacmanEnv::reset() {
  state_ = minipacman::new_level(1, rng_.next_u64());
  state_.episode_step_limit = limit_;
  return minipacman::observation(state_);
}

EnvStep MiniPacmanEnv::step(int action) {
  auto r = minipacman::step(state_, static_cast<minipacman::Action>(action), task_);
  state_ = std::move(r.next);
  EnvStep s;
  s.obs = minipacman::observation(state_);
  s.reward = r.reward;
  s.done = r.done;
  s.truncated = r.truncated;
  s.success = r.level_cleared;
  return s;
}

}  // namespace i2a
