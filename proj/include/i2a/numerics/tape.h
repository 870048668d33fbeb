#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "i2a/numerics/param_vector.h"

namespace i2a {

// Handle to a vector-valued node on a Tape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

// Reverse-accumulation record over vector-valued primitive ops.
//
// Every op saves what its backward rule needs (its output value and input
// ids); gradient() replays the record in reverse and accumulates exactly one
// gradient entry per ParamVector coordinate. Parameter slices enter the tape
// through param()/matvec()/affine() and are read from the ParamVector the
// tape was created with, which must outlive the tape.
//
// Spans returned by value() are invalidated by the next op that creates a node.
class Tape {
 public:
  explicit Tape(const ParamVector& params);

  const ParamVector& params() const { return *params_; }

  Var constant(std::span<const double> v);
  Var scalar(double x);
  Var param(std::size_t slice);
  // W x for a rows x cols slice W and a length-cols x.
  Var matvec(std::size_t w_slice, Var x);
  Var affine(std::size_t w_slice, Var x, std::size_t b_slice);

  // Elementwise binary ops. Either operand may be a length-1 scalar, which is
  // broadcast.
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var div(Var a, Var b);

  Var scale(Var a, double c);
  Var add_scalar(Var a, double c);
  Var neg(Var a) { return scale(a, -1.0); }
  Var relu(Var a);
  Var tanh(Var a);
  Var sigmoid(Var a);
  Var softplus(Var a);
  Var square(Var a);
  Var exp(Var a);
  Var log(Var a);

  Var concat(std::span<const Var> parts);
  Var slice(Var a, std::size_t offset, std::size_t length);
  Var pick(Var a, std::size_t index) { return slice(a, index, 1); }
  Var sum(Var a);
  Var dot(Var a, Var b);
  Var log_softmax(Var a);
  Var softmax(Var a);
  // Identity in the forward pass; blocks gradient flow in the backward pass.
  Var stop_gradient(Var a);

  std::span<const double> value(Var v) const;
  std::vector<double> value_copy(Var v) const;
  double scalar_value(Var v) const;
  std::size_t size(Var v) const;
  std::size_t node_count() const { return nodes_.size(); }

  // Throws std::domain_error naming `label` if any entry of v is non-finite.
  void check_finite(Var v, std::string_view label) const;

  // d root / d params for a length-1 root.
  std::vector<double> gradient(Var root) const;
  // Adds seed * d root / d params into grad (length params().size()).
  void accumulate_gradient(Var root, std::span<double> grad, double seed = 1.0) const;

 private:
  enum class Op {
    kConstant, kParam, kMatVec, kAffine, kAdd, kSub, kMul, kDiv, kScale,
    kAddScalar, kRelu, kTanh, kSigmoid, kSoftplus, kSquare, kExp, kLog,
    kConcat, kSlice, kSum, kDot, kLogSoftmax, kSoftmax, kStopGradient,
  };
  struct Node {
    Op op;
    int a = -1;
    int b = -1;
    std::size_t slice_a = 0;
    std::size_t slice_b = 0;
    std::size_t offset = 0;  // into values_
    std::size_t length = 0;
    std::size_t aux = 0;     // slice offset, or first index into concat_inputs_
    std::size_t aux_count = 0;
    double c = 0.0;
  };

  Var push(Node node);
  Var binary(Op op, Var a, Var b);
  Var unary(Op op, Var a);
  const Node& node(Var v) const;
  double* out(const Node& n) { return values_.data() + n.offset; }
  const double* in(int id) const { return values_.data() + nodes_[id].offset; }

  const ParamVector* params_;
  std::vector<Node> nodes_;
  std::vector<double> values_;
  std::vector<int> concat_inputs_;
};

}  // namespace i2a
