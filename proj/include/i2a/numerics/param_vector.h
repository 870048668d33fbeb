#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace i2a {

class Rng;

// A named, row-major block of a ParamVector.
struct ParamSlice {
  std::string name;
  std::size_t offset = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t size() const { return rows * cols; }
};

// Flat parameter storage. Slices are appended back to back, so the layout
// always covers the value array exactly with no overlap.
class ParamVector {
 public:
  // Appends a zero-initialised rows x cols slice and returns its index.
  std::size_t add(std::string name, std::size_t rows, std::size_t cols = 1);

  std::size_t size() const { return values_.size(); }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  const std::vector<ParamSlice>& layout() const { return layout_; }
  const ParamSlice& slice(std::size_t index) const { return layout_.at(index); }
  const ParamSlice& slice(std::string_view name) const;
  bool has(std::string_view name) const;
  std::size_t index_of(std::string_view name) const;

  std::span<double> view(std::size_t index);
  std::span<const double> view(std::size_t index) const;
  std::span<double> view(std::string_view name) { return view(index_of(name)); }
  std::span<const double> view(std::string_view name) const { return view(index_of(name)); }

  // Glorot-uniform for matrices, zero for vectors (cols == 1 slices whose
  // name ends in "_b" or that are explicitly biases).
  void init_glorot(Rng& rng);

  // Throws if any value is non-finite or the layout is inconsistent.
  void validate() const;

  // Copies every slice that exists in both vectors with the same shape.
  // Returns the number of slices copied.
  std::size_t copy_shared_from(const ParamVector& other);

 private:
  std::vector<double> values_;
  std::vector<ParamSlice> layout_;
};

}  // namespace i2a
