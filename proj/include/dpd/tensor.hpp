#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace dpd {

// Dense row-major array of 64-bit reals. Entries are validated to be finite
// at construction; a scalar is represented as shape {1}.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor scalar(double v);
  static Tensor from_vector(std::vector<double> v);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool is_scalar() const { return data_.size() == 1; }

  // Rank-2 accessors.
  std::size_t rows() const;
  std::size_t cols() const;

  double& at(std::size_t i) { return data_[i]; }
  double at(std::size_t i) const { return data_[i]; }
  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  double item() const;

 private:
  std::vector<std::size_t> shape_{};
  std::vector<double> data_{};
};

// Named collection of tensors; std::map gives deterministic lexicographic
// iteration order.
using ParamTree = std::map<std::string, Tensor>;

bool same_shape(const Tensor& a, const Tensor& b);
std::string shape_str(const std::vector<std::size_t>& shape);
bool same_structure(const ParamTree& a, const ParamTree& b);

}  // namespace dpd
