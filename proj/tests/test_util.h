#pragma once

#include <functional>
#include <vector>

#include "i2a/numerics/optim.h"
#include "i2a/numerics/tape.h"

namespace i2a::testing {

// Wraps a tape builder as a ScalarFunction for grad_check.
inline ScalarFunction tape_function(std::function<Var(Tape&)> build) {
  return [build = std::move(build)](const ParamVector& p, std::vector<double>* grad) {
    Tape tape(p);
    Var root = build(tape);
    if (grad) tape.accumulate_gradient(root, *grad);
    return tape.scalar_value(root);
  };
}

inline std::vector<double> random_vector(Rng& rng, std::size_t n, double scale = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = scale * rng.normal();
  return v;
}

}  // namespace i2a::testing
