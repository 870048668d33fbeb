#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "i2a/numerics/param_vector.h"
#include "i2a/numerics/tape.h"

namespace i2a {

// Numerically stable softmax. Throws std::domain_error on non-finite input
// and std::invalid_argument on empty input.
std::vector<double> softmax(std::span<const double> logits);
std::vector<double> log_softmax(std::span<const double> logits);

// y = W x + b.
struct DenseLayer {
  std::size_t weight = 0;
  std::size_t bias = 0;
  std::size_t in = 0;
  std::size_t out = 0;

  static DenseLayer create(ParamVector& params, const std::string& name, std::size_t in,
                           std::size_t out);
  Var operator()(Tape& tape, Var x) const { return tape.affine(weight, x, bias); }
};

struct LstmState {
  std::vector<double> hidden;
  std::vector<double> cell;
};

// Standard LSTM cell, gate order (input, forget, candidate, output):
//   z = Wx x + Wh h + b
//   c' = sigmoid(z_f) * c + sigmoid(z_i) * tanh(z_g)
//   h' = sigmoid(z_o) * tanh(c')
struct LstmCell {
  std::size_t input_weight = 0;
  std::size_t hidden_weight = 0;
  std::size_t bias = 0;
  std::size_t in = 0;
  std::size_t hidden = 0;

  struct State {
    Var h;
    Var c;
  };

  static LstmCell create(ParamVector& params, const std::string& name, std::size_t in,
                         std::size_t hidden);
  State zero_state(Tape& tape) const;
  State step(Tape& tape, Var x, State s) const;
};

// Value-only LSTM step. Throws std::invalid_argument on dimension mismatch.
LstmState lstm_step(const ParamVector& params, const LstmCell& cell, std::span<const double> input,
                    const LstmState& state);

}  // namespace i2a
