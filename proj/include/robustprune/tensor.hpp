// Copyright 2026 The robustprune Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef ROBUSTPRUNE_TENSOR_HPP_
#define ROBUSTPRUNE_TENSOR_HPP_

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace robustprune {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

// Dense row-major array of doubles with an optional gradient slot of the
// same length. product(shape) == data.size() always holds.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double v) { return Tensor({1}, std::vector<double>{v}); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t numel() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  const std::vector<double>& storage() const { return data_; }

  bool has_grad() const { return grad_.has_value(); }
  // Allocates a zeroed gradient slot if absent.
  std::span<double> grad();
  std::span<const double> grad() const;
  void zero_grad();
  void drop_grad() { grad_.reset(); }

  // Same data, new shape with equal element count.
  Tensor reshaped(Shape shape) const;
  bool all_finite() const;

  // Compares shape and data only; the gradient slot is ignored.
  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<double> data_;
  std::optional<std::vector<double>> grad_;
};

}  // namespace robustprune

#endif  // ROBUSTPRUNE_TENSOR_HPP_
