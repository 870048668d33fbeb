#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "i2a/model/world_model.h"
#include "i2a/numerics/layers.h"
#include "i2a/numerics/param_vector.h"
#include "i2a/numerics/rng.h"
#include "i2a/numerics/tape.h"
#include "i2a/planners/planners.h"

namespace i2a {

struct AgentConfig {
  ObsShape obs;
  int num_actions = 0;
  int tau = 5;
  int mf_embed = 32;     // c_mf width
  int fc = 64;           // shared hidden layer before the heads
  int frame_embed = 8;   // per-frame embedding fed to the encoder
  int lstm = 16;         // encoder width; c_ia has num_actions * lstm entries
  int rollout_hidden = 16;
  // Encoder consumes f_{t+tau} .. f_{t+1} when true, f_{t+1} .. f_{t+tau}
  // otherwise.
  bool reverse_encoder = true;

  void validate() const;
  std::size_t obs_size() const { return obs.size(); }
};

// Handles to one decision recorded on a tape.
struct AgentGraph {
  Var logits;
  Var value;
  // Rollout-policy logits at the real observation (distillation target
  // input); invalid for agents without a rollout policy.
  Var rollout_logits;
  Var c_mf;
  Var c_ia;
  std::vector<Var> embeddings;
  std::uint64_t model_calls = 0;
};

struct AgentOutput {
  std::vector<double> logits;
  double value = 0.0;
  std::vector<double> rollout_logits;
  std::vector<double> c_mf;
  std::vector<double> c_ia;
  std::vector<std::vector<double>> embeddings;
  std::uint64_t model_calls = 0;
};

class Agent {
 public:
  virtual ~Agent() = default;

  virtual std::string kind() const = 0;
  virtual ParamVector& params() = 0;
  virtual const ParamVector& params() const = 0;
  virtual const AgentConfig& config() const = 0;
  // The model consulted during forward passes, if any.
  virtual WorldModel* model() { return nullptr; }

  // Records a full decision on the tape, which must have been created over
  // params(). rng drives rollout-policy sampling.
  virtual AgentGraph build(Tape& tape, std::span<const double> obs, Rng& rng) = 0;

  AgentOutput forward(std::span<const double> obs, Rng& rng);
  int num_actions() const { return config().num_actions; }
};

// embed -> FC -> (logits, V). The shared slice names (mf_embed, mf_fc, pi,
// value) are the same in every agent, so copy_shared_from moves the
// model-free path between them.
class BaselineAgent : public Agent {
 public:
  // large doubles the embedding and FC widths.
  BaselineAgent(const AgentConfig& config, bool large, Rng& rng);
  std::string kind() const override { return large_ ? "baseline-large" : "baseline"; }
  ParamVector& params() override { return params_; }
  const ParamVector& params() const override { return params_; }
  const AgentConfig& config() const override { return config_; }
  AgentGraph build(Tape& tape, std::span<const double> obs, Rng& rng) override;

 private:
  AgentConfig config_;
  bool large_;
  ParamVector params_;
  DenseLayer embed_, fc_, pi_, value_;
};

// Parameters and layers shared by the imagination agents.
class ImaginationNet {
 public:
  ImaginationNet(const AgentConfig& config, Rng& rng);

  ParamVector& params() { return params_; }
  const ParamVector& params() const { return params_; }
  const AgentConfig& config() const { return config_; }

  Var model_free(Tape& tape, Var obs) const;
  Var rollout_logits(Tape& tape, Var obs) const;
  std::vector<double> rollout_logits(std::span<const double> obs) const;
  RolloutPolicy rollout_policy() const;
  // Runs the encoder over one rollout and returns its final hidden state.
  Var encode(Tape& tape, const Rollout& r) const;
  // Aggregates the per-action embeddings and applies the two-path head.
  AgentGraph head(Tape& tape, Var obs, const std::vector<Rollout>& rollouts) const;

 private:
  AgentConfig config_;
  ParamVector params_;
  DenseLayer embed_, fc_, pi_, value_;
  std::size_t ia_weight_ = 0;
  DenseLayer frame_;
  LstmCell lstm_;
  DenseLayer rollout_hidden_, rollout_out_;
};

// n rollouts of depth tau from the real observation; rollout i starts with
// action i and continues under the rollout policy.
std::vector<Rollout> imagine(std::span<const double> obs, WorldModel& model, const RolloutPolicy& policy,
                             int num_actions, int tau, Rng& rng);

// Imagination-augmented agent. Policy head input is
//   relu(W_fc c_mf + b_fc + W_ia c_ia)
// so zeroing W_ia leaves exactly the baseline computation.
class I2aAgent : public Agent {
 public:
  I2aAgent(const AgentConfig& config, WorldModel& model, Rng& rng);
  std::string kind() const override { return "i2a"; }
  ParamVector& params() override { return net_.params(); }
  const ParamVector& params() const override { return net_.params(); }
  const AgentConfig& config() const override { return net_.config(); }
  WorldModel* model() override { return model_; }
  void set_model(WorldModel& model);
  AgentGraph build(Tape& tape, std::span<const double> obs, Rng& rng) override;
  const ImaginationNet& net() const { return net_; }

 private:
  ImaginationNet net_;
  WorldModel* model_;
};

// The I2A architecture with imagination replaced by repetition of the
// current observation (reward 0); consumes no model calls.
class CopyModelAgent : public Agent {
 public:
  CopyModelAgent(const AgentConfig& config, Rng& rng);
  std::string kind() const override { return "copy-model"; }
  ParamVector& params() override { return net_.params(); }
  const ParamVector& params() const override { return net_.params(); }
  const AgentConfig& config() const override { return net_.config(); }
  AgentGraph build(Tape& tape, std::span<const double> obs, Rng& rng) override;

 private:
  ImaginationNet net_;
};

// Monte-Carlo search agent: pi = softmax(R / delta), V from the head.
class McSearchAgent : public Agent {
 public:
  McSearchAgent(const AgentConfig& config, WorldModel& model, const McSearchConfig& mc, Rng& rng);
  std::string kind() const override { return "mc-search"; }
  ParamVector& params() override { return head_.params(); }
  const ParamVector& params() const override { return head_.params(); }
  const AgentConfig& config() const override { return config_; }
  WorldModel* model() override { return model_; }
  void set_model(WorldModel& model) { model_ = &model; }
  AgentGraph build(Tape& tape, std::span<const double> obs, Rng& rng) override;
  const McSearchHead& head() const { return head_; }

 private:
  AgentConfig config_;
  McSearchHead head_;
  WorldModel* model_;
};

// Checkpoint: {"format", "version", "kind", "config", "params": [{name, rows,
// cols, values}]}. load_params checks the layout against the target vector.
inline constexpr int kCheckpointVersion = 1;
std::string checkpoint_json(const Agent& agent, const std::string& extra_json = "{}");
void save_checkpoint(const Agent& agent, const std::string& path, const std::string& extra_json = "{}");
AgentConfig checkpoint_config(const std::string& path);
std::string checkpoint_kind(const std::string& path);
void load_params(ParamVector& params, const std::string& path);

// One JSON line with the decision diagnostics (c_mf, c_ia, e_i, logits, V).
std::string diagnostics_jsonl(const AgentOutput& out);

}  // namespace i2a
