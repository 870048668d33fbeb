#include "i2a/numerics/param_vector.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "i2a/numerics/rng.h"

namespace i2a {

std::size_t ParamVector::add(std::string name, std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0) throw std::invalid_argument("ParamVector::add: empty slice " + name);
  if (has(name)) throw std::invalid_argument("ParamVector::add: duplicate slice " + name);
  layout_.push_back({std::move(name), values_.size(), rows, cols});
  values_.resize(values_.size() + rows * cols, 0.0);
  return layout_.size() - 1;
}

const ParamSlice& ParamVector::slice(std::string_view name) const {
  return layout_[index_of(name)];
}

bool ParamVector::has(std::string_view name) const {
  return std::any_of(layout_.begin(), layout_.end(),
                     [&](const ParamSlice& s) { return s.name == name; });
}

std::size_t ParamVector::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < layout_.size(); ++i) {
    if (layout_[i].name == name) return i;
  }
  throw std::out_of_range("ParamVector: no slice named " + std::string(name));
}

std::span<double> ParamVector::view(std::size_t index) {
  const ParamSlice& s = layout_.at(index);
  return std::span<double>(values_).subspan(s.offset, s.size());
}

std::span<const double> ParamVector::view(std::size_t index) const {
  const ParamSlice& s = layout_.at(index);
  return std::span<const double>(values_).subspan(s.offset, s.size());
}

void ParamVector::init_glorot(Rng& rng) {
  for (const ParamSlice& s : layout_) {
    auto v = std::span<double>(values_).subspan(s.offset, s.size());
    if (s.cols == 1 && s.name.ends_with("_b")) {
      std::fill(v.begin(), v.end(), 0.0);
      continue;
    }
    const double limit = std::sqrt(6.0 / static_cast<double>(s.rows + s.cols));
    for (double& x : v) x = rng.uniform(-limit, limit);
  }
}

void ParamVector::validate() const {
  std::size_t expected = 0;
  for (const ParamSlice& s : layout_) {
    if (s.offset != expected) throw std::logic_error("ParamVector: layout gap or overlap at " + s.name);
    expected += s.size();
  }
  if (expected != values_.size()) throw std::logic_error("ParamVector: layout does not cover values");
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      throw std::domain_error("ParamVector: non-finite value at index " + std::to_string(i));
    }
  }
}

std::size_t ParamVector::copy_shared_from(const ParamVector& other) {
  std::size_t copied = 0;
  for (std::size_t i = 0; i < layout_.size(); ++i) {
    const ParamSlice& s = layout_[i];
    if (!other.has(s.name)) continue;
    const ParamSlice& o = other.slice(s.name);
    if (o.rows != s.rows || o.cols != s.cols) continue;
    auto src = other.view(other.index_of(s.name));
    std::copy(src.begin(), src.end(), view(i).begin());
    ++copied;
  }
  return copied;
}

}  // namespace i2a
