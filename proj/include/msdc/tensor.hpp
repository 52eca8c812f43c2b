#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace msdc {

// Extents of a rank-4 (batch, channel, height, width) array.
struct Shape {
  std::size_t n = 0;
  std::size_t c = 0;
  std::size_t h = 0;
  std::size_t w = 0;

  constexpr std::size_t size() const { return n * c * h * w; }
  constexpr std::size_t plane() const { return h * w; }
  friend constexpr bool operator==(const Shape&, const Shape&) = default;
  std::string str() const;
};

// Dense row-major double tensor. Value semantic; the gradient buffer exists
// only while requires_grad() is set and always matches the data extents.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double v) { return Tensor(Shape{1, 1, 1, 1}, v); }
  // A single-slice [1, 1, rows, cols] tensor, the carrier for plain matrices.
  static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) {
    return Tensor(Shape{1, 1, rows, cols}, fill);
  }
  static Tensor like(const Tensor& t, double fill = 0.0) { return Tensor(t.shape(), fill); }

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  const std::vector<double>& vec() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
    return data_[((n * shape_.c + c) * shape_.h + h) * shape_.w + w];
  }
  double at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return data_[((n * shape_.c + c) * shape_.h + h) * shape_.w + w];
  }
  // Matrix view of a single-slice tensor.
  double& operator()(std::size_t r, std::size_t col) { return data_[r * shape_.w + col]; }
  double operator()(std::size_t r, std::size_t col) const { return data_[r * shape_.w + col]; }

  // Value of a one-element tensor.
  double item() const;

  bool requires_grad() const { return requires_grad_; }
  void set_requires_grad(bool on);
  std::span<double> grad() { return grad_; }
  std::span<const double> grad() const { return grad_; }
  void zero_grad();

  // Same data, reinterpreted under another shape with identical element count.
  Tensor reshaped(Shape s) const;
  // Slice `i` along the batch axis as a [1, c, h, w] tensor.
  Tensor batch_item(std::size_t i) const;

  bool all_finite() const;

 private:
  Shape shape_{};
  std::vector<double> data_;
  bool requires_grad_ = false;
  std::vector<double> grad_;
};

// Euclidean norm of the flattened data.
double norm2(const Tensor& t);
// Largest absolute elementwise difference; shapes must agree.
double max_abs_diff(const Tensor& a, const Tensor& b);

// Deterministic standard-normal fill scaled by `stddev`.
Tensor randn(Shape shape, std::uint64_t seed, double stddev = 1.0);
// Deterministic uniform fill on [lo, hi).
Tensor rand_uniform(Shape shape, std::uint64_t seed, double lo = 0.0, double hi = 1.0);

}  // namespace msdc
