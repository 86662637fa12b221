#pragma once

#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace convtn {

using Index = std::int64_t;
using Shape = std::vector<Index>;

Index shape_numel(std::span<const Index> shape);
std::string to_string(std::span<const Index> shape);

/// Dense row-major array of doubles. An empty shape denotes a scalar.
///
/// All shape-changing operations return new tensors; inputs are never
/// modified, so a tensor may be shared read-only between threads.
class Tensor {
 public:
  Tensor();
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor full(Shape shape, double value);
  static Tensor ones(Shape shape) { return full(std::move(shape), 1.0); }
  static Tensor scalar(double value);

  const Shape& shape() const noexcept { return shape_; }
  Index rank() const noexcept { return static_cast<Index>(shape_.size()); }
  Index numel() const noexcept { return static_cast<Index>(data_.size()); }
  Index size(Index axis) const;

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  Index offset(std::span<const Index> index) const;
  double at(std::span<const Index> index) const { return data_[offset(index)]; }
  double& at(std::span<const Index> index) { return data_[offset(index)]; }
  double at(std::initializer_list<Index> index) const {
    return at(std::span<const Index>(index.begin(), index.size()));
  }
  double& at(std::initializer_list<Index> index) {
    return at(std::span<const Index>(index.begin(), index.size()));
  }

  Tensor reshape(Shape new_shape) const;
  Tensor permute(std::span<const Index> axes) const;
  Tensor permute(std::initializer_list<Index> axes) const {
    return permute(std::span<const Index>(axes.begin(), axes.size()));
  }
  Tensor narrow(Index axis, Index start, Index length) const;
  Tensor index_select(Index axis, std::span<const Index> indices) const;
  /// Sums over the listed axes and drops them from the shape.
  Tensor sum(std::span<const Index> axes) const;

  Tensor& operator+=(const Tensor& other);
  Tensor& operator-=(const Tensor& other);
  Tensor& operator*=(double factor);

  friend bool operator==(const Tensor& a, const Tensor& b) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

Tensor operator+(Tensor a, const Tensor& b);
Tensor operator-(Tensor a, const Tensor& b);
Tensor operator*(Tensor a, double factor);
Tensor operator*(double factor, Tensor a);
Tensor hadamard(const Tensor& a, const Tensor& b);

/// |a_i - b_i| <= abs_tol + rel_tol * |b_i| for every element.
bool allclose(const Tensor& a, const Tensor& b, double rel_tol, double abs_tol);

/// max_i |actual_i - expected_i| / max_i |expected_i|; 0 when both are zero.
double relative_error(const Tensor& actual, const Tensor& expected);

double inner(const Tensor& a, const Tensor& b);
double norm(const Tensor& t);
double max_abs(const Tensor& t);

/// (B, M, K) x (B, K, N) -> (B, M, N).
Tensor batched_matmul(const Tensor& a, const Tensor& b);

}  // namespace convtn
