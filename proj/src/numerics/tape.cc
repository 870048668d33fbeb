#include "i2a/numerics/tape.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace i2a {
namespace {

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

}  // namespace

Tape::Tape(const ParamVector& params) : params_(&params) {
  nodes_.reserve(256);
  values_.reserve(4096);
}

Var Tape::push(Node n) {
  n.offset = values_.size();
  values_.resize(values_.size() + n.length, 0.0);
  nodes_.push_back(n);
  return Var{static_cast<int>(nodes_.size() - 1)};
}

const Tape::Node& Tape::node(Var v) const {
  if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) {
    throw std::out_of_range("Tape: invalid Var");
  }
  return nodes_[v.id];
}

Var Tape::constant(std::span<const double> v) {
  Node n{Op::kConstant};
  n.length = v.size();
  Var r = push(n);
  std::copy(v.begin(), v.end(), values_.begin() + nodes_[r.id].offset);
  return r;
}

Var Tape::scalar(double x) { return constant(std::span<const double>(&x, 1)); }

Var Tape::param(std::size_t slice) {
  const ParamSlice& s = params_->slice(slice);
  Node n{Op::kParam};
  n.slice_a = slice;
  n.length = s.size();
  Var r = push(n);
  auto src = params_->view(slice);
  std::copy(src.begin(), src.end(), values_.begin() + nodes_[r.id].offset);
  return r;
}

Var Tape::matvec(std::size_t w_slice, Var x) {
  const ParamSlice& s = params_->slice(w_slice);
  if (size(x) != s.cols) {
    throw std::invalid_argument("Tape::matvec: " + s.name + " expects input of length " +
                                std::to_string(s.cols) + ", got " + std::to_string(size(x)));
  }
  Node n{Op::kMatVec};
  n.a = x.id;
  n.slice_a = w_slice;
  n.length = s.rows;
  Var r = push(n);
  const double* w = params_->values().data() + s.offset;
  const double* xv = in(x.id);
  double* y = values_.data() + nodes_[r.id].offset;
  for (std::size_t i = 0; i < s.rows; ++i) {
    double acc = 0.0;
    const double* row = w + i * s.cols;
    for (std::size_t j = 0; j < s.cols; ++j) acc += row[j] * xv[j];
    y[i] = acc;
  }
  return r;
}

Var Tape::affine(std::size_t w_slice, Var x, std::size_t b_slice) {
  const ParamSlice& s = params_->slice(w_slice);
  const ParamSlice& bs = params_->slice(b_slice);
  if (bs.size() != s.rows) throw std::invalid_argument("Tape::affine: bias shape mismatch for " + s.name);
  if (size(x) != s.cols) {
    throw std::invalid_argument("Tape::affine: " + s.name + " expects input of length " +
                                std::to_string(s.cols) + ", got " + std::to_string(size(x)));
  }
  Node n{Op::kAffine};
  n.a = x.id;
  n.slice_a = w_slice;
  n.slice_b = b_slice;
  n.length = s.rows;
  Var r = push(n);
  const double* w = params_->values().data() + s.offset;
  const double* b = params_->values().data() + bs.offset;
  const double* xv = in(x.id);
  double* y = values_.data() + nodes_[r.id].offset;
  for (std::size_t i = 0; i < s.rows; ++i) {
    double acc = 0.0;
    const double* row = w + i * s.cols;
    for (std::size_t j = 0; j < s.cols; ++j) acc += row[j] * xv[j];
    y[i] = acc + b[i];
  }
  return r;
}

Var Tape::binary(Op op, Var a, Var b) {
  const std::size_t la = size(a);
  const std::size_t lb = size(b);
  if (la != lb && la != 1 && lb != 1) {
    throw std::invalid_argument("Tape: operand lengths " + std::to_string(la) + " and " +
                                std::to_string(lb) + " do not broadcast");
  }
  Node n{op};
  n.a = a.id;
  n.b = b.id;
  n.length = std::max(la, lb);
  Var r = push(n);
  const double* av = in(a.id);
  const double* bv = in(b.id);
  double* y = values_.data() + nodes_[r.id].offset;
  for (std::size_t i = 0; i < n.length; ++i) {
    const double x1 = av[la == 1 ? 0 : i];
    const double x2 = bv[lb == 1 ? 0 : i];
    switch (op) {
      case Op::kAdd: y[i] = x1 + x2; break;
      case Op::kSub: y[i] = x1 - x2; break;
      case Op::kMul: y[i] = x1 * x2; break;
      case Op::kDiv: y[i] = x1 / x2; break;
      default: throw std::logic_error("Tape::binary: bad op");
    }
  }
  return r;
}

Var Tape::add(Var a, Var b) { return binary(Op::kAdd, a, b); }
Var Tape::sub(Var a, Var b) { return binary(Op::kSub, a, b); }
Var Tape::mul(Var a, Var b) { return binary(Op::kMul, a, b); }
Var Tape::div(Var a, Var b) { return binary(Op::kDiv, a, b); }

Var Tape::unary(Op op, Var a) {
  Node n{op};
  n.a = a.id;
  n.length = size(a);
  Var r = push(n);
  const double* x = in(a.id);
  double* y = values_.data() + nodes_[r.id].offset;
  for (std::size_t i = 0; i < n.length; ++i) {
    switch (op) {
      case Op::kRelu: y[i] = x[i] > 0.0 ? x[i] : 0.0; break;
      case Op::kTanh: y[i] = std::tanh(x[i]); break;
      case Op::kSigmoid: y[i] = stable_sigmoid(x[i]); break;
      case Op::kSoftplus: y[i] = stable_softplus(x[i]); break;
      case Op::kSquare: y[i] = x[i] * x[i]; break;
      case Op::kExp: y[i] = std::exp(x[i]); break;
      case Op::kLog: y[i] = std::log(x[i]); break;
      case Op::kStopGradient: y[i] = x[i]; break;
      default: throw std::logic_error("Tape::unary: bad op");
    }
  }
  return r;
}

Var Tape::scale(Var a, double c) {
  Node n{Op::kScale};
  n.a = a.id;
  n.length = size(a);
  n.c = c;
  Var r = push(n);
  const double* x = in(a.id);
  double* y = values_.data() + nodes_[r.id].offset;
  for (std::size_t i = 0; i < n.length; ++i) y[i] = c * x[i];
  return r;
}

Var Tape::add_scalar(Var a, double c) {
  Node n{Op::kAddScalar};
  n.a = a.id;
  n.length = size(a);
  n.c = c;
  Var r = push(n);
  const double* x = in(a.id);
  double* y = values_.data() + nodes_[r.id].offset;
  for (std::size_t i = 0; i < n.length; ++i) y[i] = x[i] + c;
  return r;
}

Var Tape::relu(Var a) { return unary(Op::kRelu, a); }
Var Tape::tanh(Var a) { return unary(Op::kTanh, a); }
Var Tape::sigmoid(Var a) { return unary(Op::kSigmoid, a); }
Var Tape::softplus(Var a) { return unary(Op::kSoftplus, a); }
Var Tape::square(Var a) { return unary(Op::kSquare, a); }
Var Tape::exp(Var a) { return unary(Op::kExp, a); }
Var Tape::log(Var a) { return unary(Op::kLog, a); }
Var Tape::stop_gradient(Var a) { return unary(Op::kStopGradient, a); }

Var Tape::concat(std::span<const Var> parts) {
  Node n{Op::kConcat};
  n.aux = concat_inputs_.size();
  n.aux_count = parts.size();
  for (Var p : parts) {
    n.length += size(p);
    concat_inputs_.push_back(p.id);
  }
  Var r = push(n);
  double* y = values_.data() + nodes_[r.id].offset;
  for (Var p : parts) {
    const Node& pn = nodes_[p.id];
    std::copy_n(values_.data() + pn.offset, pn.length, y);
    y += pn.length;
  }
  return r;
}

Var Tape::slice(Var a, std::size_t offset, std::size_t length) {
  if (offset + length > size(a)) throw std::out_of_range("Tape::slice: range exceeds operand");
  Node n{Op::kSlice};
  n.a = a.id;
  n.aux = offset;
  n.length = length;
  Var r = push(n);
  std::copy_n(in(a.id) + offset, length, values_.data() + nodes_[r.id].offset);
  return r;
}

Var Tape::sum(Var a) {
  Node n{Op::kSum};
  n.a = a.id;
  n.length = 1;
  Var r = push(n);
  const double* x = in(a.id);
  double acc = 0.0;
  for (std::size_t i = 0; i < nodes_[a.id].length; ++i) acc += x[i];
  values_[nodes_[r.id].offset] = acc;
  return r;
}

Var Tape::dot(Var a, Var b) {
  if (size(a) != size(b)) throw std::invalid_argument("Tape::dot: length mismatch");
  Node n{Op::kDot};
  n.a = a.id;
  n.b = b.id;
  n.length = 1;
  Var r = push(n);
  const double* x = in(a.id);
  const double* z = in(b.id);
  double acc = 0.0;
  for (std::size_t i = 0; i < nodes_[a.id].length; ++i) acc += x[i] * z[i];
  values_[nodes_[r.id].offset] = acc;
  return r;
}

Var Tape::log_softmax(Var a) {
  Node n{Op::kLogSoftmax};
  n.a = a.id;
  n.length = size(a);
  if (n.length == 0) throw std::invalid_argument("Tape::log_softmax: empty input");
  Var r = push(n);
  const double* x = in(a.id);
  double* y = values_.data() + nodes_[r.id].offset;
  const double m = *std::max_element(x, x + n.length);
  double s = 0.0;
  for (std::size_t i = 0; i < n.length; ++i) s += std::exp(x[i] - m);
  const double lse = m + std::log(s);
  for (std::size_t i = 0; i < n.length; ++i) y[i] = x[i] - lse;
  return r;
}

Var Tape::softmax(Var a) {
  Node n{Op::kSoftmax};
  n.a = a.id;
  n.length = size(a);
  if (n.length == 0) throw std::invalid_argument("Tape::softmax: empty input");
  Var r = push(n);
  const double* x = in(a.id);
  double* y = values_.data() + nodes_[r.id].offset;
  const double m = *std::max_element(x, x + n.length);
  double s = 0.0;
  for (std::size_t i = 0; i < n.length; ++i) s += (y[i] = std::exp(x[i] - m));
  for (std::size_t i = 0; i < n.length; ++i) y[i] /= s;
  return r;
}

std::span<const double> Tape::value(Var v) const {
  const Node& n = node(v);
  return std::span<const double>(values_.data() + n.offset, n.length);
}

std::vector<double> Tape::value_copy(Var v) const {
  auto s = value(v);
  return {s.begin(), s.end()};
}

double Tape::scalar_value(Var v) const {
  const Node& n = node(v);
  if (n.length != 1) throw std::invalid_argument("Tape::scalar_value: node is not a scalar");
  return values_[n.offset];
}

std::size_t Tape::size(Var v) const { return node(v).length; }

void Tape::check_finite(Var v, std::string_view label) const {
  for (double x : value(v)) {
    if (!std::isfinite(x)) {
      throw std::domain_error("non-finite activation in " + std::string(label));
    }
  }
}

std::vector<double> Tape::gradient(Var root) const {
  std::vector<double> grad(params_->size(), 0.0);
  accumulate_gradient(root, grad, 1.0);
  return grad;
}

void Tape::accumulate_gradient(Var root, std::span<double> grad, double seed) const {
  if (grad.size() != params_->size()) throw std::invalid_argument("Tape: gradient buffer size mismatch");
  if (node(root).length != 1) throw std::invalid_argument("Tape: gradient root must be a scalar");
  std::vector<double> adj(values_.size(), 0.0);
  adj[nodes_[root.id].offset] = seed;
  const std::span<const double> pv = params_->values();

  for (int id = root.id; id >= 0; --id) {
    const Node& n = nodes_[id];
    const double* g = adj.data() + n.offset;
    const double* y = values_.data() + n.offset;
    bool any = false;
    for (std::size_t i = 0; i < n.length; ++i) {
      if (g[i] != 0.0) {
        any = true;
        break;
      }
    }
    if (!any) continue;

    auto adj_of = [&](int input) { return adj.data() + nodes_[input].offset; };
    switch (n.op) {
      case Op::kConstant:
      case Op::kStopGradient:
        break;
      case Op::kParam: {
        const std::size_t off = params_->slice(n.slice_a).offset;
        for (std::size_t i = 0; i < n.length; ++i) grad[off + i] += g[i];
        break;
      }
      case Op::kMatVec:
      case Op::kAffine: {
        const ParamSlice& s = params_->slice(n.slice_a);
        const double* w = pv.data() + s.offset;
        const double* x = in(n.a);
        double* dx = adj_of(n.a);
        double* dw = grad.data() + s.offset;
        for (std::size_t r = 0; r < s.rows; ++r) {
          const double gr = g[r];
          if (gr == 0.0) continue;
          const double* row = w + r * s.cols;
          double* drow = dw + r * s.cols;
          for (std::size_t c = 0; c < s.cols; ++c) {
            drow[c] += gr * x[c];
            dx[c] += gr * row[c];
          }
        }
        if (n.op == Op::kAffine) {
          const std::size_t boff = params_->slice(n.slice_b).offset;
          for (std::size_t r = 0; r < s.rows; ++r) grad[boff + r] += g[r];
        }
        break;
      }
      case Op::kAdd:
      case Op::kSub:
      case Op::kMul:
      case Op::kDiv: {
        const std::size_t la = nodes_[n.a].length;
        const std::size_t lb = nodes_[n.b].length;
        const double* av = in(n.a);
        const double* bv = in(n.b);
        double* da = adj_of(n.a);
        double* db = adj_of(n.b);
        for (std::size_t i = 0; i < n.length; ++i) {
          const std::size_t ia = la == 1 ? 0 : i;
          const std::size_t ib = lb == 1 ? 0 : i;
          switch (n.op) {
            case Op::kAdd: da[ia] += g[i]; db[ib] += g[i]; break;
            case Op::kSub: da[ia] += g[i]; db[ib] -= g[i]; break;
            case Op::kMul: da[ia] += g[i] * bv[ib]; db[ib] += g[i] * av[ia]; break;
            case Op::kDiv:
              da[ia] += g[i] / bv[ib];
              db[ib] -= g[i] * av[ia] / (bv[ib] * bv[ib]);
              break;
            default: break;
          }
        }
        break;
      }
      case Op::kScale: {
        double* da = adj_of(n.a);
        for (std::size_t i = 0; i < n.length; ++i) da[i] += n.c * g[i];
        break;
      }
      case Op::kAddScalar: {
        double* da = adj_of(n.a);
        for (std::size_t i = 0; i < n.length; ++i) da[i] += g[i];
        break;
      }
      case Op::kRelu:
      case Op::kTanh:
      case Op::kSigmoid:
      case Op::kSoftplus:
      case Op::kSquare:
      case Op::kExp:
      case Op::kLog: {
        const double* x = in(n.a);
        double* da = adj_of(n.a);
        for (std::size_t i = 0; i < n.length; ++i) {
          double d = 0.0;
          switch (n.op) {
            case Op::kRelu: d = x[i] > 0.0 ? 1.0 : 0.0; break;
            case Op::kTanh: d = 1.0 - y[i] * y[i]; break;
            case Op::kSigmoid: d = y[i] * (1.0 - y[i]); break;
            case Op::kSoftplus: d = stable_sigmoid(x[i]); break;
            case Op::kSquare: d = 2.0 * x[i]; break;
            case Op::kExp: d = y[i]; break;
            case Op::kLog: d = 1.0 / x[i]; break;
            default: break;
          }
          da[i] += g[i] * d;
        }
        break;
      }
      case Op::kConcat: {
        std::size_t pos = 0;
        for (std::size_t k = 0; k < n.aux_count; ++k) {
          const int input = concat_inputs_[n.aux + k];
          const std::size_t len = nodes_[input].length;
          double* da = adj_of(input);
          for (std::size_t i = 0; i < len; ++i) da[i] += g[pos + i];
          pos += len;
        }
        break;
      }
      case Op::kSlice: {
        double* da = adj_of(n.a);
        for (std::size_t i = 0; i < n.length; ++i) da[n.aux + i] += g[i];
        break;
      }
      case Op::kSum: {
        double* da = adj_of(n.a);
        for (std::size_t i = 0; i < nodes_[n.a].length; ++i) da[i] += g[0];
        break;
      }
      case Op::kDot: {
        const std::size_t len = nodes_[n.a].length;
        const double* av = in(n.a);
        const double* bv = in(n.b);
        double* da = adj_of(n.a);
        double* db = adj_of(n.b);
        for (std::size_t i = 0; i < len; ++i) {
          da[i] += g[0] * bv[i];
          db[i] += g[0] * av[i];
        }
        break;
      }
      case Op::kLogSoftmax: {
        double gsum = 0.0;
        for (std::size_t i = 0; i < n.length; ++i) gsum += g[i];
        double* da = adj_of(n.a);
        for (std::size_t i = 0; i < n.length; ++i) da[i] += g[i] - std::exp(y[i]) * gsum;
        break;
      }
      case Op::kSoftmax: {
        double gy = 0.0;
        for (std::size_t i = 0; i < n.length; ++i) gy += g[i] * y[i];
        double* da = adj_of(n.a);
        for (std::size_t i = 0; i < n.length; ++i) da[i] += y[i] * (g[i] - gy);
        break;
      }
    }
  }
}

}  // namespace i2a
