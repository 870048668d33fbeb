#include "i2a/numerics/layers.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace i2a {
namespace {

void require_finite(std::span<const double> v, const char* what) {
  if (v.empty()) throw std::invalid_argument(std::string(what) + ": empty input");
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      throw std::domain_error(std::string(what) + ": non-finite logit at index " + std::to_string(i));
    }
  }
}

}  // namespace

std::vector<double> softmax(std::span<const double> logits) {
  require_finite(logits, "softmax");
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += (p[i] = std::exp(logits[i] - m));
  for (double& x : p) x /= s;
  return p;
}

std::vector<double> log_softmax(std::span<const double> logits) {
  require_finite(logits, "log_softmax");
  const double m = *std::max_element(logits.begin(), logits.end());
  double s = 0.0;
  for (double x : logits) s += std::exp(x - m);
  const double lse = m + std::log(s);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

DenseLayer DenseLayer::create(ParamVector& params, const std::string& name, std::size_t in,
                              std::size_t out) {
  DenseLayer l;
  l.in = in;
  l.out = out;
  l.weight = params.add(name + "_w", out, in);
  l.bias = params.add(name + "_b", out, 1);
  return l;
}

LstmCell LstmCell::create(ParamVector& params, const std::string& name, std::size_t in,
                          std::size_t hidden) {
  LstmCell l;
  l.in = in;
  l.hidden = hidden;
  l.input_weight = params.add(name + "_wx", 4 * hidden, in);
  l.hidden_weight = params.add(name + "_wh", 4 * hidden, hidden);
  l.bias = params.add(name + "_b", 4 * hidden, 1);
  return l;
}

LstmCell::State LstmCell::zero_state(Tape& tape) const {
  std::vector<double> zeros(hidden, 0.0);
  return {tape.constant(zeros), tape.constant(zeros)};
}

LstmCell::State LstmCell::step(Tape& tape, Var x, State s) const {
  Var z = tape.add(tape.affine(input_weight, x, bias), tape.matvec(hidden_weight, s.h));
  Var i = tape.sigmoid(tape.slice(z, 0, hidden));
  Var f = tape.sigmoid(tape.slice(z, hidden, hidden));
  Var g = tape.tanh(tape.slice(z, 2 * hidden, hidden));
  Var o = tape.sigmoid(tape.slice(z, 3 * hidden, hidden));
  Var c = tape.add(tape.mul(f, s.c), tape.mul(i, g));
  Var h = tape.mul(o, tape.tanh(c));
  return {h, c};
}

LstmState lstm_step(const ParamVector& params, const LstmCell& cell, std::span<const double> input,
                    const LstmState& state) {
  if (input.size() != cell.in) {
    throw std::invalid_argument("lstm_step: input length " + std::to_string(input.size()) +
                                " does not match cell input " + std::to_string(cell.in));
  }
  if (state.hidden.size() != cell.hidden || state.cell.size() != cell.hidden) {
    throw std::invalid_argument("lstm_step: state length does not match hidden size");
  }
  Tape tape(params);
  LstmCell::State s{tape.constant(state.hidden), tape.constant(state.cell)};
  LstmCell::State next = cell.step(tape, tape.constant(input), s);
  return {tape.value_copy(next.h), tape.value_copy(next.c)};
}

}  // namespace i2a
