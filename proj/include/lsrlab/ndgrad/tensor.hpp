#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace lsrlab::ndgrad {

/// Dense row-major float64 array. Rank 0 is a scalar with one element.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() : data(1, 0.0) {}
  Tensor(std::vector<std::size_t> shape_, double fill = 0.0);
  Tensor(std::vector<std::size_t> shape_, std::vector<double> data_);

  static Tensor scalar(double v) { return Tensor({}, std::vector<double>{v}); }
  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::initializer_list<double> values);

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }
  bool is_scalar() const { return data.size() == 1 && shape.size() <= 2; }

  /// 2-D view: rank 0 -> 1x1, rank 1 -> 1xN.
  std::size_t rows() const;
  std::size_t cols() const;

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }
  double item() const { return data.front(); }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }
  bool all_finite() const;
  std::string shape_string() const;

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape == b.shape && a.data == b.data;
  }
};

std::size_t shape_product(const std::vector<std::size_t>& shape);

}  // namespace lsrlab::ndgrad
