#include "i2a/model/local_model.h"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "i2a/numerics/optim.h"
#include "i2a/sokoban/sokoban.h"
#include "json.hpp"

namespace i2a {
namespace {

constexpr std::uint8_t kOutside = 16;

bool code_box(std::uint8_t c) { return c & (1u << sokoban::kBoxPlane); }
bool code_target(std::uint8_t c) { return c & (1u << sokoban::kTargetPlane); }

int boxes_on_target(const std::vector<std::uint8_t>& codes) {
  int n = 0;
  for (auto c : codes) n += (code_box(c) && code_target(c)) ? 1 : 0;
  return n;
}

bool solved(const std::vector<std::uint8_t>& codes) {
  bool any = false;
  for (auto c : codes) {
    if (code_box(c)) {
      if (!code_target(c)) return false;
      any = true;
    }
  }
  return any;
}

std::array<double, 3> reward_features(const std::vector<std::uint8_t>& before,
                                      const std::vector<std::uint8_t>& after) {
  return {1.0, static_cast<double>(boxes_on_target(after) - boxes_on_target(before)),
          solved(after) ? 1.0 : 0.0};
}

}  // namespace

LocalTransitionModel::LocalTransitionModel(int width, int height)
    : shape_{sokoban::kNumPlanes, height, width} {}

int LocalTransitionModel::num_actions() const { return sokoban::kNumActions; }

std::vector<std::uint8_t> LocalTransitionModel::cell_codes(std::span<const double> features) const {
  const std::size_t n = static_cast<std::size_t>(shape_.height) * shape_.width;
  std::vector<std::uint8_t> codes(n, 0);
  for (int p = 0; p < shape_.planes; ++p) {
    for (std::size_t i = 0; i < n; ++i) {
      if (features[p * n + i] > 0.5) codes[i] |= static_cast<std::uint8_t>(1u << p);
    }
  }
  return codes;
}

std::uint64_t LocalTransitionModel::context_key(const std::vector<std::uint8_t>& codes, int cell,
                                                int action) const {
  const auto [dr, dc] = sokoban::action_delta(static_cast<sokoban::Action>(action));
  const int row = cell / shape_.width;
  const int col = cell % shape_.width;
  std::uint64_t key = static_cast<std::uint64_t>(action);
  for (int k = -2; k <= 2; ++k) {
    const int r = row + k * dr;
    const int c = col + k * dc;
    std::uint8_t code = kOutside;
    if (r >= 0 && c >= 0 && r < shape_.height && c < shape_.width) code = codes[r * shape_.width + c];
    key = (key << 5) | code;
  }
  return key;
}

std::vector<std::uint8_t> LocalTransitionModel::predict_codes(const std::vector<std::uint8_t>& codes,
                                                              int action) const {
  std::vector<std::uint8_t> out(codes.size());
  for (std::size_t i = 0; i < codes.size(); ++i) {
    auto it = table_.find(context_key(codes, static_cast<int>(i), action));
    if (it == table_.end()) {
      out[i] = codes[i];
      continue;
    }
    const Counts& counts = it->second;
    // Ties resolve towards "unchanged", then the lowest code.
    std::uint8_t best = codes[i];
    for (std::uint8_t c = 0; c < 16; ++c) {
      if (counts[c] > counts[best]) best = c;
    }
    out[i] = best;
  }
  return out;
}

double LocalTransitionModel::predict_reward(const std::vector<std::uint8_t>& before,
                                            const std::vector<std::uint8_t>& after) const {
  const auto f = reward_features(before, after);
  return reward_weights_[0] * f[0] + reward_weights_[1] * f[1] + reward_weights_[2] * f[2];
}

LocalTransitionModel LocalTransitionModel::fit(int width, int height, const std::vector<Transition>& data,
                                               double ridge) {
  if (data.empty()) throw std::invalid_argument("LocalTransitionModel::fit: no transitions");
  LocalTransitionModel m(width, height);
  const std::size_t expected = m.shape_.size();
  std::array<double, 9> xtx{};
  std::array<double, 3> xty{};
  for (const Transition& t : data) {
    if (t.features.size() != expected || t.next_features.size() != expected) {
      throw std::invalid_argument("LocalTransitionModel::fit: transition shape mismatch");
    }
    if (t.action < 0 || t.action >= sokoban::kNumActions) {
      throw std::invalid_argument("LocalTransitionModel::fit: action out of range");
    }
    const auto before = m.cell_codes(t.features);
    const auto after = m.cell_codes(t.next_features);
    for (std::size_t i = 0; i < before.size(); ++i) {
      Counts& counts = m.table_[m.context_key(before, static_cast<int>(i), t.action)];
      ++counts[after[i]];
    }
    const auto f = reward_features(before, after);
    for (int a = 0; a < 3; ++a) {
      xty[a] += f[a] * t.reward;
      for (int b = 0; b < 3; ++b) xtx[a * 3 + b] += f[a] * f[b];
    }
  }
  const auto w = solve_spd(xtx, xty, ridge);
  std::copy(w.begin(), w.end(), m.reward_weights_.begin());
  return m;
}

Prediction LocalTransitionModel::predict_uncounted(std::span<const double> features, int action) const {
  const auto codes = cell_codes(features);
  if (solved(codes)) return {{features.begin(), features.end()}, 0.0, true};
  const auto next = predict_codes(codes, action);
  Prediction p;
  const std::size_t n = next.size();
  p.next.assign(shape_.size(), 0.0);
  for (int plane = 0; plane < shape_.planes; ++plane) {
    for (std::size_t i = 0; i < n; ++i) p.next[plane * n + i] = (next[i] >> plane) & 1u ? 1.0 : 0.0;
  }
  p.reward = predict_reward(codes, next);
  p.terminal = solved(next);
  return p;
}

double LocalTransitionModel::cell_accuracy(const std::vector<Transition>& data) const {
  std::size_t right = 0;
  std::size_t total = 0;
  for (const Transition& t : data) {
    const auto before = cell_codes(t.features);
    const auto truth = cell_codes(t.next_features);
    const auto guess = predict_codes(before, t.action);
    for (std::size_t i = 0; i < truth.size(); ++i) right += guess[i] == truth[i] ? 1 : 0;
    total += truth.size();
  }
  return total == 0 ? 0.0 : static_cast<double>(right) / static_cast<double>(total);
}

std::string LocalTransitionModel::to_json() const {
  nlohmann::json j;
  j["format"] = "i2a-local-model";
  j["version"] = kFormatVersion;
  j["shape"] = {{"planes", shape_.planes}, {"height", shape_.height}, {"width", shape_.width}};
  j["reward_weights"] = reward_weights_;
  // Sorted so the file is a deterministic function of the model.
  std::vector<std::pair<std::uint64_t, Counts>> entries(table_.begin(), table_.end());
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  auto& table = j["table"] = nlohmann::json::array();
  for (const auto& [key, counts] : entries) table.push_back({key, counts});
  return j.dump();
}

LocalTransitionModel LocalTransitionModel::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  if (j.value("format", "") != "i2a-local-model") throw std::invalid_argument("not a local model file");
  if (j.at("version").get<int>() != kFormatVersion) throw std::invalid_argument("unsupported local model version");
  const auto& s = j.at("shape");
  if (s.at("planes").get<int>() != sokoban::kNumPlanes) throw std::invalid_argument("local model: plane count mismatch");
  LocalTransitionModel m(s.at("width").get<int>(), s.at("height").get<int>());
  m.reward_weights_ = j.at("reward_weights").get<std::array<double, 3>>();
  for (const auto& entry : j.at("table")) {
    m.table_[entry.at(0).get<std::uint64_t>()] = entry.at(1).get<Counts>();
  }
  return m;
}

void LocalTransitionModel::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << to_json() << '\n';
}

LocalTransitionModel LocalTransitionModel::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

}  // namespace i2a
