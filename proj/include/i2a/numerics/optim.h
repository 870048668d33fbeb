#pragma once

#include <functional>
#include <span>
#include <vector>

#include "i2a/numerics/param_vector.h"

namespace i2a {

struct RmsPropConfig {
  double learning_rate = 1e-3;
  double decay = 0.99;
  double epsilon = 1e-8;
};

// Per coordinate:  m <- decay*m + (1-decay)*g^2 ;  p <- p - lr*g/sqrt(m+eps).
class RmsProp {
 public:
  explicit RmsProp(RmsPropConfig config = {});

  // Returns false, leaving both params and accumulator untouched, if any
  // gradient entry is non-finite. Throws on shape mismatch.
  bool step(ParamVector& params, std::span<const double> grad);

  const RmsPropConfig& config() const { return config_; }
  std::span<const double> accumulator() const { return mean_square_; }

 private:
  RmsPropConfig config_;
  std::vector<double> mean_square_;
};

// Rescales grad in place so its L2 norm is at most max_norm. Returns the
// original norm.
double clip_global_norm(std::span<double> grad, double max_norm);

// A scalar function of the parameters that also reports its analytic gradient
// (written into `grad`, which arrives sized and zeroed) when grad is non-null.
using ScalarFunction = std::function<double(const ParamVector&, std::vector<double>* grad)>;

// max_i |analytic_i - numeric_i| / max(1, |analytic_i|), with numeric_i from
// central differences of step eps. Throws if f(p) is non-finite or eps is
// outside [1e-8, 1e-3].
double grad_check(const ScalarFunction& f, const ParamVector& p, double eps = 1e-6);

// Solves (A + ridge*I) x = b for a small dense symmetric positive
// (semi-)definite A given row-major, by Cholesky factorisation.
std::vector<double> solve_spd(std::span<const double> a, std::span<const double> b,
                              double ridge = 0.0);

}  // namespace i2a
