#include "convtn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "convtn/error.hpp"

namespace convtn {

namespace {

void check_positive(const Shape& shape) {
  for (Index n : shape) {
    if (n <= 0) throw Error(ErrorCode::ShapeMismatch, "axis lengths must be positive, got " + to_string(shape));
  }
}

Shape row_major_strides(const Shape& shape) {
  Shape strides(shape.size(), 1);
  for (Index k = static_cast<Index>(shape.size()) - 2; k >= 0; --k) strides[k] = strides[k + 1] * shape[k + 1];
  return strides;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw Error(ErrorCode::ShapeMismatch,
                std::string(what) + ": " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
}

Index normalize_axis(Index axis, Index rank) {
  if (axis < 0 || axis >= rank) {
    throw Error(ErrorCode::OutOfBounds, "axis " + std::to_string(axis) + " out of range for rank " + std::to_string(rank));
  }
  return axis;
}

}  // namespace

Index shape_numel(std::span<const Index> shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

std::string to_string(std::span<const Index> shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t k = 0; k < shape.size(); ++k) os << (k ? "," : "") << shape[k];
  os << ']';
  return os.str();
}

Tensor::Tensor() : data_(1, 0.0) {}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
  check_positive(shape_);
  data_.assign(shape_numel(shape_), 0.0);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  check_positive(shape_);
  if (shape_numel(shape_) != static_cast<Index>(data_.size())) {
    throw Error(ErrorCode::ShapeMismatch, "shape " + to_string(shape_) + " needs " +
                                              std::to_string(shape_numel(shape_)) + " elements, got " +
                                              std::to_string(data_.size()));
  }
}

Tensor Tensor::full(Shape shape, double value) {
  Tensor t(std::move(shape));
  std::fill(t.data_.begin(), t.data_.end(), value);
  return t;
}

Tensor Tensor::scalar(double value) { return Tensor({}, {value}); }

Index Tensor::size(Index axis) const { return shape_[normalize_axis(axis, rank())]; }

Index Tensor::offset(std::span<const Index> index) const {
  if (static_cast<Index>(index.size()) != rank()) {
    throw Error(ErrorCode::ShapeMismatch, "index rank " + std::to_string(index.size()) + " vs tensor rank " +
                                              std::to_string(rank()));
  }
  Index flat = 0;
  for (std::size_t k = 0; k < index.size(); ++k) {
    if (index[k] < 0 || index[k] >= shape_[k]) {
      throw Error(ErrorCode::OutOfBounds, "index " + to_string(index) + " outside " + to_string(shape_));
    }
    flat = flat * shape_[k] + index[k];
  }
  return flat;
}

Tensor Tensor::reshape(Shape new_shape) const {
  check_positive(new_shape);
  if (shape_numel(new_shape) != numel()) {
    throw Error(ErrorCode::ShapeMismatch, "cannot reshape " + to_string(shape_) + " into " + to_string(new_shape));
  }
  return Tensor(std::move(new_shape), data_);
}

Tensor Tensor::permute(std::span<const Index> axes) const {
  const Index n = rank();
  if (static_cast<Index>(axes.size()) != n) {
    throw Error(ErrorCode::ShapeMismatch, "permutation of length " + std::to_string(axes.size()) +
                                              " for rank " + std::to_string(n));
  }
  std::vector<bool> seen(n, false);
  for (Index a : axes) {
    normalize_axis(a, n);
    if (seen[a]) throw Error(ErrorCode::ShapeMismatch, "permutation repeats axis " + std::to_string(a));
    seen[a] = true;
  }
  bool identity = true;
  for (Index k = 0; k < n; ++k) identity = identity && axes[k] == k;
  if (identity) return *this;

  const Shape in_strides = row_major_strides(shape_);
  Shape out_shape(n), src_strides(n);
  for (Index k = 0; k < n; ++k) {
    out_shape[k] = shape_[axes[k]];
    src_strides[k] = in_strides[axes[k]];
  }
  Tensor out(out_shape);
  Shape counter(n, 0);
  Index src = 0;
  const Index total = numel();
  for (Index flat = 0; flat < total; ++flat) {
    out.data_[flat] = data_[src];
    for (Index k = n - 1; k >= 0; --k) {
      if (++counter[k] < out_shape[k]) {
        src += src_strides[k];
        break;
      }
      src -= src_strides[k] * (out_shape[k] - 1);
      counter[k] = 0;
    }
  }
  return out;
}

Tensor Tensor::narrow(Index axis, Index start, Index length) const {
  normalize_axis(axis, rank());
  if (start < 0 || length <= 0 || start + length > shape_[axis]) {
    throw Error(ErrorCode::OutOfBounds, "narrow [" + std::to_string(start) + ", " + std::to_string(start + length) +
                                            ") on axis of length " + std::to_string(shape_[axis]));
  }
  std::vector<Index> indices(length);
  std::iota(indices.begin(), indices.end(), start);
  return index_select(axis, indices);
}

Tensor Tensor::index_select(Index axis, std::span<const Index> indices) const {
  normalize_axis(axis, rank());
  for (Index i : indices) {
    if (i < 0 || i >= shape_[axis]) {
      throw Error(ErrorCode::OutOfBounds, "index " + std::to_string(i) + " on axis of length " +
                                              std::to_string(shape_[axis]));
    }
  }
  Shape out_shape = shape_;
  out_shape[axis] = static_cast<Index>(indices.size());
  Tensor out(out_shape);
  const Index outer = shape_numel(std::span(shape_).first(axis));
  const Index inner = shape_numel(std::span(shape_).subspan(axis + 1));
  auto dst = out.data_.begin();
  for (Index o = 0; o < outer; ++o) {
    for (Index i : indices) {
      auto src = data_.begin() + (o * shape_[axis] + i) * inner;
      dst = std::copy(src, src + inner, dst);
    }
  }
  return out;
}

Tensor Tensor::sum(std::span<const Index> axes) const {
  const Index n = rank();
  std::vector<bool> drop(n, false);
  for (Index a : axes) drop[normalize_axis(a, n)] = true;
  Shape out_shape;
  for (Index k = 0; k < n; ++k) {
    if (!drop[k]) out_shape.push_back(shape_[k]);
  }
  Tensor out(out_shape);
  // Strides into the output for every input axis (0 for reduced axes).
  Shape out_strides_full(n, 0);
  {
    const Shape os = row_major_strides(out_shape);
    Index j = 0;
    for (Index k = 0; k < n; ++k) {
      if (!drop[k]) out_strides_full[k] = os[j++];
    }
  }
  Shape counter(n, 0);
  Index dst = 0;
  for (double v : data_) {
    out.data_[dst] += v;
    for (Index k = n - 1; k >= 0; --k) {
      if (++counter[k] < shape_[k]) {
        dst += out_strides_full[k];
        break;
      }
      dst -= out_strides_full[k] * (shape_[k] - 1);
      counter[k] = 0;
    }
  }
  return out;
}

Tensor& Tensor::operator+=(const Tensor& other) {
  require_same_shape(*this, other, "add");
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] += other.data_[k];
  return *this;
}

Tensor& Tensor::operator-=(const Tensor& other) {
  require_same_shape(*this, other, "subtract");
  for (std::size_t k = 0; k < data_.size(); ++k) data_[k] -= other.data_[k];
  return *this;
}

Tensor& Tensor::operator*=(double factor) {
  for (double& v : data_) v *= factor;
  return *this;
}

Tensor operator+(Tensor a, const Tensor& b) { return a += b; }
Tensor operator-(Tensor a, const Tensor& b) { return a -= b; }
Tensor operator*(Tensor a, double factor) { return a *= factor; }
Tensor operator*(double factor, Tensor a) { return a *= factor; }

Tensor hadamard(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "hadamard");
  Tensor out = a;
  auto dst = out.data();
  auto src = b.data();
  for (std::size_t k = 0; k < dst.size(); ++k) dst[k] *= src[k];
  return out;
}

bool allclose(const Tensor& a, const Tensor& b, double rel_tol, double abs_tol) {
  require_same_shape(a, b, "allclose");
  auto x = a.data();
  auto y = b.data();
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (!(std::abs(x[k] - y[k]) <= abs_tol + rel_tol * std::abs(y[k]))) return false;
  }
  return true;
}

double relative_error(const Tensor& actual, const Tensor& expected) {
  require_same_shape(actual, expected, "relative_error");
  auto x = actual.data();
  auto y = expected.data();
  double diff = 0.0;
  double scale = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double d = std::abs(x[k] - y[k]);
    diff = std::isnan(d) ? d : std::max(diff, d);
    scale = std::max(scale, std::abs(y[k]));
  }
  if (std::isnan(diff)) return diff;
  if (scale == 0.0) return diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return diff / scale;
}

double inner(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "inner");
  auto x = a.data();
  auto y = b.data();
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) s += x[k] * y[k];
  return s;
}

double norm(const Tensor& t) { return std::sqrt(inner(t, t)); }

double max_abs(const Tensor& t) {
  double m = 0.0;
  for (double v : t.data()) m = std::max(m, std::abs(v));
  return m;
}

Tensor batched_matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 3 || b.rank() != 3 || a.size(0) != b.size(0) || a.size(2) != b.size(1)) {
    throw Error(ErrorCode::ShapeMismatch, "batched_matmul " + to_string(a.shape()) + " x " + to_string(b.shape()));
  }
  const Index batch = a.size(0), m = a.size(1), k = a.size(2), n = b.size(2);
  Tensor out({batch, m, n});
  auto pa = a.data();
  auto pb = b.data();
  auto pc = out.data();
  for (Index t = 0; t < batch; ++t) {
    const double* at = pa.data() + t * m * k;
    const double* bt = pb.data() + t * k * n;
    double* ct = pc.data() + t * m * n;
    for (Index i = 0; i < m; ++i) {
      double* crow = ct + i * n;
      for (Index l = 0; l < k; ++l) {
        const double av = at[i * k + l];
        const double* brow = bt + l * n;
        for (Index j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  }
  return out;
}

}  // namespace convtn
