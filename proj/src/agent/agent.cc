#include "i2a/agent/agent.h"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace i2a {

using nlohmann::json;

void AgentConfig::validate() const {
  if (obs.size() == 0) throw std::invalid_argument("AgentConfig: empty observation shape");
  if (num_actions < 2) throw std::invalid_argument("AgentConfig: need at least 2 actions");
  if (tau < 1) throw std::invalid_argument("AgentConfig: tau must be >= 1");
  if (mf_embed < 1 || fc < 1 || frame_embed < 1 || lstm < 1 || rollout_hidden < 1) {
    throw std::invalid_argument("AgentConfig: layer widths must be positive");
  }
}

AgentOutput Agent::forward(std::span<const double> obs, Rng& rng) {
  Tape tape(params());
  AgentGraph g = build(tape, obs, rng);
  AgentOutput out;
  out.logits = tape.value_copy(g.logits);
  out.value = tape.scalar_value(g.value);
  if (g.rollout_logits.valid()) out.rollout_logits = tape.value_copy(g.rollout_logits);
  if (g.c_mf.valid()) out.c_mf = tape.value_copy(g.c_mf);
  if (g.c_ia.valid()) out.c_ia = tape.value_copy(g.c_ia);
  for (Var e : g.embeddings) out.embeddings.push_back(tape.value_copy(e));
  out.model_calls = g.model_calls;
  return out;
}

namespace {

void check_obs(const AgentConfig& c, std::span<const double> obs) {
  if (obs.size() != c.obs_size()) {
    throw std::invalid_argument("agent: expected " + std::to_string(c.obs_size()) + " observation entries, got " +
                                std::to_string(obs.size()));
  }
}

void check_outputs(Tape& tape, const AgentGraph& g) {
  tape.check_finite(g.logits, "policy logits");
  tape.check_finite(g.value, "value");
}

}  // namespace

BaselineAgent::BaselineAgent(const AgentConfig& config, bool large, Rng& rng) : config_(config), large_(large) {
  config_.validate();
  const std::size_t scale = large ? 2 : 1;
  const std::size_t embed = scale * config_.mf_embed;
  const std::size_t fc = scale * config_.fc;
  embed_ = DenseLayer::create(params_, "mf_embed", config_.obs_size(), embed);
  fc_ = DenseLayer::create(params_, "mf_fc", embed, fc);
  pi_ = DenseLayer::create(params_, "pi", fc, config_.num_actions);
  value_ = DenseLayer::create(params_, "value", fc, 1);
  params_.init_glorot(rng);
}

AgentGraph BaselineAgent::build(Tape& tape, std::span<const double> obs, Rng&) {
  check_obs(config_, obs);
  AgentGraph g;
  Var x = tape.constant(obs);
  g.c_mf = tape.relu(embed_(tape, x));
  tape.check_finite(g.c_mf, "model-free embedding");
  Var h = tape.relu(fc_(tape, g.c_mf));
  g.logits = pi_(tape, h);
  g.value = value_(tape, h);
  check_outputs(tape, g);
  return g;
}

ImaginationNet::ImaginationNet(const AgentConfig& config, Rng& rng) : config_(config) {
  config_.validate();
  const std::size_t n = config_.num_actions;
  embed_ = DenseLayer::create(params_, "mf_embed", config_.obs_size(), config_.mf_embed);
  fc_ = DenseLayer::create(params_, "mf_fc", config_.mf_embed, config_.fc);
  pi_ = DenseLayer::create(params_, "pi", config_.fc, n);
  value_ = DenseLayer::create(params_, "value", config_.fc, 1);
  ia_weight_ = params_.add("ia_fc_w", config_.fc, n * config_.lstm);
  frame_ = DenseLayer::create(params_, "enc_frame", config_.obs_size(), config_.frame_embed);
  lstm_ = LstmCell::create(params_, "enc_lstm", config_.frame_embed + 1, config_.lstm);
  rollout_hidden_ = DenseLayer::create(params_, "rp_hidden", config_.obs_size(), config_.rollout_hidden);
  rollout_out_ = DenseLayer::create(params_, "rp_out", config_.rollout_hidden, n);
  params_.init_glorot(rng);
}

Var ImaginationNet::model_free(Tape& tape, Var obs) const { return tape.relu(embed_(tape, obs)); }

Var ImaginationNet::rollout_logits(Tape& tape, Var obs) const {
  return rollout_out_(tape, tape.relu(rollout_hidden_(tape, obs)));
}

std::vector<double> ImaginationNet::rollout_logits(std::span<const double> obs) const {
  Tape tape(params_);
  return tape.value_copy(rollout_logits(tape, tape.constant(obs)));
}

RolloutPolicy ImaginationNet::rollout_policy() const {
  return [this](std::span<const double> f, Rng& rng) { return rng.categorical(softmax(rollout_logits(f))); };
}

Var ImaginationNet::encode(Tape& tape, const Rollout& r) const {
  if (r.length() == 0) throw std::invalid_argument("encode: empty rollout");
  LstmCell::State s = lstm_.zero_state(tape);
  const std::size_t n = r.length();
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t t = config_.reverse_encoder ? n - 1 - k : k;
    if (r.frames[t].size() != config_.obs_size()) throw std::invalid_argument("encode: frame shape mismatch");
    Var f = tape.relu(frame_(tape, tape.constant(r.frames[t])));
    const Var parts[] = {f, tape.scalar(r.rewards[t])};
    s = lstm_.step(tape, tape.concat(parts), s);
  }
  return s.h;
}

AgentGraph ImaginationNet::head(Tape& tape, Var obs, const std::vector<Rollout>& rollouts) const {
  if (rollouts.size() != static_cast<std::size_t>(config_.num_actions)) {
    throw std::invalid_argument("head: expected one rollout per action");
  }
  AgentGraph g;
  g.c_mf = model_free(tape, obs);
  tape.check_finite(g.c_mf, "model-free embedding");
  for (const Rollout& r : rollouts) g.embeddings.push_back(encode(tape, r));
  g.c_ia = tape.concat(g.embeddings);
  tape.check_finite(g.c_ia, "imagination code");
  Var h = tape.relu(tape.add(fc_(tape, g.c_mf), tape.matvec(ia_weight_, g.c_ia)));
  g.logits = pi_(tape, h);
  g.value = value_(tape, h);
  g.rollout_logits = rollout_logits(tape, obs);
  check_outputs(tape, g);
  return g;
}

std::vector<Rollout> imagine(std::span<const double> obs, WorldModel& model, const RolloutPolicy& policy,
                             int num_actions, int tau, Rng& rng) {
  std::vector<Rollout> out;
  out.reserve(num_actions);
  for (int a = 0; a < num_actions; ++a) out.push_back(rollout(model, obs, a, policy, tau, rng));
  return out;
}

I2aAgent::I2aAgent(const AgentConfig& config, WorldModel& model, Rng& rng) : net_(config, rng), model_(&model) {
  set_model(model);
}

void I2aAgent::set_model(WorldModel& model) {
  if (model.shape().size() != net_.config().obs_size() || model.num_actions() != net_.config().num_actions) {
    throw std::invalid_argument("I2aAgent: model shape does not match agent config");
  }
  model_ = &model;
}

AgentGraph I2aAgent::build(Tape& tape, std::span<const double> obs, Rng& rng) {
  check_obs(net_.config(), obs);
  const std::uint64_t before = model_->calls();
  const auto rollouts = imagine(obs, *model_, net_.rollout_policy(), net_.config().num_actions, net_.config().tau, rng);
  AgentGraph g = net_.head(tape, tape.constant(obs), rollouts);
  g.model_calls = model_->calls() - before;
  return g;
}

CopyModelAgent::CopyModelAgent(const AgentConfig& config, Rng& rng) : net_(config, rng) {}

AgentGraph CopyModelAgent::build(Tape& tape, std::span<const double> obs, Rng&) {
  check_obs(net_.config(), obs);
  const AgentConfig& c = net_.config();
  std::vector<Rollout> rollouts(c.num_actions);
  for (int a = 0; a < c.num_actions; ++a) {
    Rollout& r = rollouts[a];
    r.frames.assign(c.tau, std::vector<double>(obs.begin(), obs.end()));
    r.rewards.assign(c.tau, 0.0);
    r.actions.assign(c.tau, a);
    r.terminal.assign(c.tau, 0);
  }
  return net_.head(tape, tape.constant(obs), rollouts);
}

McSearchAgent::McSearchAgent(const AgentConfig& config, WorldModel& model, const McSearchConfig& mc, Rng& rng)
    : config_(config), head_(McSearchHead::create(config.obs_size(), config.num_actions, mc, rng)), model_(&model) {
  config_.validate();
  config_.tau = mc.depth;
}

AgentGraph McSearchAgent::build(Tape& tape, std::span<const double> obs, Rng& rng) {
  check_obs(config_, obs);
  const std::uint64_t before = model_->calls();
  const auto rollouts = imagine(obs, *model_, head_.rollout_policy(), config_.num_actions, head_.config().depth, rng);
  AgentGraph g;
  g.model_calls = model_->calls() - before;
  Var x = tape.constant(obs);
  g.logits = mc_logits(tape, head_, rollouts);
  g.value = head_.value(tape, x);
  g.rollout_logits = head_.rollout_logits(tape, x);
  check_outputs(tape, g);
  return g;
}

namespace {

json config_to_json(const AgentConfig& c) {
  return {{"planes", c.obs.planes},     {"height", c.obs.height},
          {"width", c.obs.width},       {"num_actions", c.num_actions},
          {"tau", c.tau},               {"mf_embed", c.mf_embed},
          {"fc", c.fc},                 {"frame_embed", c.frame_embed},
          {"lstm", c.lstm},             {"rollout_hidden", c.rollout_hidden},
          {"reverse_encoder", c.reverse_encoder}};
}

AgentConfig config_from_json(const json& j) {
  AgentConfig c;
  c.obs = {j.at("planes").get<int>(), j.at("height").get<int>(), j.at("width").get<int>()};
  c.num_actions = j.at("num_actions").get<int>();
  c.tau = j.at("tau").get<int>();
  c.mf_embed = j.at("mf_embed").get<int>();
  c.fc = j.at("fc").get<int>();
  c.frame_embed = j.at("frame_embed").get<int>();
  c.lstm = j.at("lstm").get<int>();
  c.rollout_hidden = j.at("rollout_hidden").get<int>();
  c.reverse_encoder = j.at("reverse_encoder").get<bool>();
  return c;
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  json j = json::parse(in);
  if (j.value("format", "") != "i2a-checkpoint") throw std::invalid_argument(path + ": not a checkpoint");
  if (j.at("version").get<int>() != kCheckpointVersion) {
    throw std::invalid_argument(path + ": unsupported checkpoint version");
  }
  return j;
}

}  // namespace

std::string checkpoint_json(const Agent& agent, const std::string& extra_json) {
  json j;
  j["format"] = "i2a-checkpoint";
  j["version"] = kCheckpointVersion;
  j["kind"] = agent.kind();
  j["config"] = config_to_json(agent.config());
  j["extra"] = json::parse(extra_json);
  json params = json::array();
  const ParamVector& p = agent.params();
  for (const ParamSlice& s : p.layout()) {
    auto v = p.values().subspan(s.offset, s.size());
    params.push_back({{"name", s.name}, {"rows", s.rows}, {"cols", s.cols}, {"values", std::vector<double>(v.begin(), v.end())}});
  }
  j["params"] = std::move(params);
  return j.dump();
}

void save_checkpoint(const Agent& agent, const std::string& path, const std::string& extra_json) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << checkpoint_json(agent, extra_json) << '\n';
}

AgentConfig checkpoint_config(const std::string& path) { return config_from_json(read_json(path).at("config")); }

std::string checkpoint_kind(const std::string& path) { return read_json(path).at("kind").get<std::string>(); }

void load_params(ParamVector& params, const std::string& path) {
  const json j = read_json(path);
  const auto& slices = j.at("params");
  if (slices.size() != params.layout().size()) throw std::invalid_argument(path + ": parameter layout mismatch");
  for (std::size_t i = 0; i < slices.size(); ++i) {
    const ParamSlice& s = params.slice(i);
    const auto& e = slices[i];
    if (e.at("name").get<std::string>() != s.name || e.at("rows").get<std::size_t>() != s.rows ||
        e.at("cols").get<std::size_t>() != s.cols) {
      throw std::invalid_argument(path + ": slice " + s.name + " does not match");
    }
    const auto values = e.at("values").get<std::vector<double>>();
    std::copy(values.begin(), values.end(), params.view(i).begin());
  }
  params.validate();
}

std::string diagnostics_jsonl(const AgentOutput& out) {
  json j = {{"logits", out.logits}, {"value", out.value},        {"c_mf", out.c_mf},
            {"c_ia", out.c_ia},     {"embeddings", out.embeddings}, {"model_calls", out.model_calls}};
  return j.dump();
}

}  // namespace i2a
