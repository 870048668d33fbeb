#include "i2a/numerics/optim.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace i2a {

RmsProp::RmsProp(RmsPropConfig config) : config_(config) {
  if (!(config_.learning_rate > 0.0)) throw std::invalid_argument("RmsProp: learning rate must be positive");
  if (!(config_.decay > 0.0 && config_.decay < 1.0)) throw std::invalid_argument("RmsProp: decay must lie in (0,1)");
  if (config_.epsilon < 0.0) throw std::invalid_argument("RmsProp: epsilon must be non-negative");
}

bool RmsProp::step(ParamVector& params, std::span<const double> grad) {
  if (grad.size() != params.size()) throw std::invalid_argument("RmsProp: gradient size mismatch");
  for (double g : grad) {
    if (!std::isfinite(g)) return false;
  }
  if (mean_square_.size() != params.size()) mean_square_.assign(params.size(), 0.0);
  auto p = params.values();
  for (std::size_t i = 0; i < grad.size(); ++i) {
    const double g = grad[i];
    double& m = mean_square_[i];
    m = config_.decay * m + (1.0 - config_.decay) * g * g;
    if (g != 0.0) p[i] -= config_.learning_rate * g / std::sqrt(m + config_.epsilon);
  }
  return true;
}

double clip_global_norm(std::span<double> grad, double max_norm) {
  double sq = 0.0;
  for (double g : grad) sq += g * g;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double s = max_norm / norm;
    for (double& g : grad) g *= s;
  }
  return norm;
}

double grad_check(const ScalarFunction& f, const ParamVector& p, double eps) {
  if (!(eps >= 1e-8 && eps <= 1e-3)) throw std::invalid_argument("grad_check: eps must lie in [1e-8, 1e-3]");
  std::vector<double> analytic(p.size(), 0.0);
  const double f0 = f(p, &analytic);
  if (!std::isfinite(f0)) throw std::domain_error("grad_check: f(p) is not finite");

  ParamVector probe = p;
  double worst = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double x = p[i];
    probe[i] = x + eps;
    const double fp = f(probe, nullptr);
    probe[i] = x - eps;
    const double fm = f(probe, nullptr);
    probe[i] = x;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw std::domain_error("grad_check: f is not finite near coordinate " + std::to_string(i));
    }
    const double numeric = (fp - fm) / (2.0 * eps);
    const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i]));
    worst = std::max(worst, err);
  }
  return worst;
}

std::vector<double> solve_spd(std::span<const double> a, std::span<const double> b, double ridge) {
  const std::size_t n = b.size();
  if (a.size() != n * n) throw std::invalid_argument("solve_spd: matrix/vector size mismatch");
  std::vector<double> l(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double s = a[i * n + j] + (i == j ? ridge : 0.0);
      for (std::size_t k = 0; k < j; ++k) s -= l[i * n + k] * l[j * n + k];
      if (i == j) {
        if (s <= 0.0) throw std::domain_error("solve_spd: matrix is not positive definite");
        l[i * n + i] = std::sqrt(s);
      } else {
        l[i * n + j] = s / l[j * n + j];
      }
    }
  }
  std::vector<double> y(n), x(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= l[i * n + k] * y[k];
    y[i] = s / l[i * n + i];
  }
  for (std::size_t i = n; i-- > 0;) {
    double s = y[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= l[k * n + i] * x[k];
    x[i] = s / l[i * n + i];
  }
  return x;
}

}  // namespace i2a
