#include "lsrlab/ndgrad/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>

#include "lsrlab/error.hpp"

namespace lsrlab::ndgrad {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor(std::vector<std::size_t> shape_, double fill)
    : shape(std::move(shape_)), data(shape_product(shape), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape_, std::vector<double> data_)
    : shape(std::move(shape_)), data(std::move(data_)) {
  if (shape_product(shape) != data.size()) {
    throw Error(ErrorCode::ShapeMismatch,
                "shape " + shape_string() + " does not hold " + std::to_string(data.size()) +
                    " elements");
  }
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values) {
  return Tensor({rows, cols}, std::vector<double>(values));
}

std::size_t Tensor::rows() const {
  if (shape.size() < 2) return 1;
  return shape[0];
}

std::size_t Tensor::cols() const {
  if (shape.empty()) return 1;
  if (shape.size() == 1) return shape[0];
  return shape[1];
}

bool Tensor::all_finite() const {
  for (double x : data) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

std::string Tensor::shape_string() const {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

}  // namespace lsrlab::ndgrad
