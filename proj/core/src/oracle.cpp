#include "convtn/oracle.hpp"

#include <Eigen/Dense>
#include <array>

#include "convtn/error.hpp"

namespace convtn::oracle {

namespace {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<Matrix>;
using ConstMatrixMap = Eigen::Map<const Matrix>;

// Convolution geometry with 1d specs padded to 2d by a trivial second axis.
struct Geometry {
  Index N, G, Cin, Cout, cin_g, cout_g;
  std::array<DimSpec, 2> d;
  std::array<Index, 2> I, K, O;

  explicit Geometry(const ConvSpec& s)
      : N(s.batch), G(s.groups), Cin(s.in_channels), Cout(s.out_channels), cin_g(s.in_per_group()),
        cout_g(s.out_per_group()) {
    s.validate();
    d = {s.dims[0], s.dims.size() > 1 ? s.dims[1] : DimSpec{}};
    for (int j = 0; j < 2; ++j) {
      I[j] = d[j].input_size;
      K[j] = d[j].kernel_size;
      O[j] = output_size(d[j]);
    }
  }

  Index pos(int j, Index o, Index k) const { return k * d[j].dilation + o * d[j].stride - d[j].padding; }
  bool inside(int j, Index i) const { return i >= 0 && i < I[j]; }
  Index spatial_in() const { return I[0] * I[1]; }
  Index spatial_out() const { return O[0] * O[1]; }
  Index kernel() const { return K[0] * K[1]; }

  Index x(Index n, Index c, Index i1, Index i2) const { return ((n * Cin + c) * I[0] + i1) * I[1] + i2; }
  Index w(Index co, Index ci, Index k1, Index k2) const { return ((co * cin_g + ci) * K[0] + k1) * K[1] + k2; }
  Index y(Index n, Index co, Index o1, Index o2) const { return ((n * Cout + co) * O[0] + o1) * O[1] + o2; }

  // Calls f(o1, o2, k1, k2, i1, i2) for every in-bounds placement.
  template <class F>
  void placements(F&& f) const {
    for (Index o1 = 0; o1 < O[0]; ++o1)
      for (Index o2 = 0; o2 < O[1]; ++o2)
        for (Index k1 = 0; k1 < K[0]; ++k1) {
          const Index i1 = pos(0, o1, k1);
          if (!inside(0, i1)) continue;
          for (Index k2 = 0; k2 < K[1]; ++k2) {
            const Index i2 = pos(1, o2, k2);
            if (inside(1, i2)) f(o1, o2, k1, k2, i1, i2);
          }
        }
  }
};

void expect_shape(const Tensor& t, const Shape& shape, const char* what) {
  if (t.shape() != shape) {
    throw Error(ErrorCode::ShapeMismatch,
                std::string(what) + " has shape " + to_string(t.shape()) + ", expected " + to_string(shape));
  }
}

Shape columns_shape(Index columns, const ConvSpec& spec) {
  Shape s{columns};
  for (Index v : spec.output_shape()) s.push_back(v);
  return s;
}

Tensor block_gram(const Tensor& patches, Index groups, double scale) {
  const Index N = patches.size(0), rows = patches.size(1), cols = patches.size(2), block = rows / groups;
  Tensor out({groups, block, block});
  for (Index g = 0; g < groups; ++g) {
    MatrixMap target(out.data().data() + g * block * block, block, block);
    for (Index n = 0; n < N; ++n) {
      ConstMatrixMap p(patches.data().data() + n * rows * cols, rows, cols);
      target.noalias() += p.middleRows(g * block, block) * p.middleRows(g * block, block).transpose();
    }
    target *= scale;
  }
  return out;
}

Tensor block_gram_of_sums(const Tensor& patches, Index groups, double scale) {
  const Index N = patches.size(0), rows = patches.size(1), cols = patches.size(2);
  Tensor sums({N, rows, 1});
  for (Index n = 0; n < N; ++n) {
    ConstMatrixMap p(patches.data().data() + n * rows * cols, rows, cols);
    MatrixMap(sums.data().data() + n * rows, rows, 1) = p.rowwise().sum();
  }
  return block_gram(sums, groups, scale);
}

}  // namespace

Tensor direct_conv(const ConvSpec& spec, const Tensor& x, const Tensor& w, const std::optional<Tensor>& bias) {
  const Geometry g(spec);
  expect_shape(x, spec.input_shape(), "input");
  expect_shape(w, spec.kernel_shape(), "kernel");
  if (bias) expect_shape(*bias, {spec.out_channels}, "bias");
  Tensor y(spec.output_shape());
  auto yd = y.data();
  const auto xd = x.data(), wd = w.data();
  for (Index n = 0; n < g.N; ++n)
    for (Index co = 0; co < g.Cout; ++co) {
      const Index group = co / g.cout_g;
      for (Index o1 = 0; o1 < g.O[0]; ++o1)
        for (Index o2 = 0; o2 < g.O[1]; ++o2) {
          double acc = bias ? bias->data()[co] : 0.0;
          for (Index ci = 0; ci < g.cin_g; ++ci)
            for (Index k1 = 0; k1 < g.K[0]; ++k1) {
              const Index i1 = g.pos(0, o1, k1);
              if (!g.inside(0, i1)) continue;
              for (Index k2 = 0; k2 < g.K[1]; ++k2) {
                const Index i2 = g.pos(1, o2, k2);
                if (!g.inside(1, i2)) continue;
                acc += xd[g.x(n, group * g.cin_g + ci, i1, i2)] * wd[g.w(co, ci, k1, k2)];
              }
            }
          yd[g.y(n, co, o1, o2)] = acc;
        }
    }
  return y;
}

Tensor direct_unfold(const ConvSpec& spec, const Tensor& x) {
  const Geometry g(spec);
  expect_shape(x, spec.input_shape(), "input");
  Tensor out(spec.unfolded_shape());
  const Index rows = g.Cin * g.kernel(), cols = g.spatial_out();
  for (Index n = 0; n < g.N; ++n)
    for (Index c = 0; c < g.Cin; ++c)
      g.placements([&](Index o1, Index o2, Index k1, Index k2, Index i1, Index i2) {
        const Index row = (c * g.K[0] + k1) * g.K[1] + k2;
        out.data()[(n * rows + row) * cols + o1 * g.O[1] + o2] = x.data()[g.x(n, c, i1, i2)];
      });
  return out;
}

Tensor direct_unfold_adjoint(const ConvSpec& spec, const Tensor& v) {
  const Geometry g(spec);
  expect_shape(v, spec.unfolded_shape(), "unfolded input");
  Tensor out(spec.input_shape());
  const Index rows = g.Cin * g.kernel(), cols = g.spatial_out();
  for (Index n = 0; n < g.N; ++n)
    for (Index c = 0; c < g.Cin; ++c)
      g.placements([&](Index o1, Index o2, Index k1, Index k2, Index i1, Index i2) {
        const Index row = (c * g.K[0] + k1) * g.K[1] + k2;
        out.data()[g.x(n, c, i1, i2)] += v.data()[(n * rows + row) * cols + o1 * g.O[1] + o2];
      });
  return out;
}

Tensor direct_transpose_unfold(const ConvSpec& spec, const Tensor& y) {
  const Geometry g(spec);
  expect_shape(y, spec.output_shape(), "output");
  const Index rows = g.Cout * g.kernel(), cols = g.spatial_in();
  Tensor out({g.N, rows, cols});
  for (Index n = 0; n < g.N; ++n)
    for (Index c = 0; c < g.Cout; ++c)
      g.placements([&](Index o1, Index o2, Index k1, Index k2, Index i1, Index i2) {
        const Index row = (c * g.K[0] + k1) * g.K[1] + k2;
        out.data()[(n * rows + row) * cols + i1 * g.I[1] + i2] += y.data()[g.y(n, c, o1, o2)];
      });
  return out;
}

Tensor direct_fold(const ConvSpec& spec, const Tensor& y_like) {
  const Geometry g(spec);
  Shape shape{spec.batch, spec.in_channels};
  for (Index o : spec.output_sizes()) shape.push_back(o);
  expect_shape(y_like, shape, "folded operand");
  Tensor out(spec.input_shape());
  for (Index n = 0; n < g.N; ++n)
    for (Index c = 0; c < g.Cin; ++c)
      g.placements([&](Index o1, Index o2, Index, Index, Index i1, Index i2) {
        out.data()[g.x(n, c, i1, i2)] += y_like.data()[((n * g.Cin + c) * g.O[0] + o1) * g.O[1] + o2];
      });
  return out;
}

Tensor direct_per_sample_weight_vjp(const ConvSpec& spec, const Tensor& x, const Tensor& v_y) {
  const Geometry g(spec);
  expect_shape(x, spec.input_shape(), "input");
  expect_shape(v_y, spec.output_shape(), "output cotangent");
  Shape shape{spec.batch};
  for (Index s : spec.kernel_shape()) shape.push_back(s);
  Tensor out(shape);
  const Index wsize = shape_numel(spec.kernel_shape());
  for (Index n = 0; n < g.N; ++n)
    for (Index co = 0; co < g.Cout; ++co) {
      const Index group = co / g.cout_g;
      for (Index ci = 0; ci < g.cin_g; ++ci)
        g.placements([&](Index o1, Index o2, Index k1, Index k2, Index i1, Index i2) {
          out.data()[n * wsize + g.w(co, ci, k1, k2)] +=
              x.data()[g.x(n, group * g.cin_g + ci, i1, i2)] * v_y.data()[g.y(n, co, o1, o2)];
        });
    }
  return out;
}

Tensor direct_weight_vjp(const ConvSpec& spec, const Tensor& x, const Tensor& v_y) {
  const std::vector<Index> batch{0};
  return direct_per_sample_weight_vjp(spec, x, v_y).sum(batch);
}

Tensor direct_input_vjp(const ConvSpec& spec, const Tensor& w, const Tensor& v_y) {
  const Geometry g(spec);
  expect_shape(w, spec.kernel_shape(), "kernel");
  expect_shape(v_y, spec.output_shape(), "output cotangent");
  Tensor out(spec.input_shape());
  for (Index n = 0; n < g.N; ++n)
    for (Index co = 0; co < g.Cout; ++co) {
      const Index group = co / g.cout_g;
      for (Index ci = 0; ci < g.cin_g; ++ci)
        g.placements([&](Index o1, Index o2, Index k1, Index k2, Index i1, Index i2) {
          out.data()[g.x(n, group * g.cin_g + ci, i1, i2)] +=
              w.data()[g.w(co, ci, k1, k2)] * v_y.data()[g.y(n, co, o1, o2)];
        });
    }
  return out;
}

Tensor toeplitz(const ConvSpec& spec, const Tensor& w) {
  const Geometry g(spec);
  expect_shape(w, spec.kernel_shape(), "kernel");
  const Index rows = g.Cout * g.spatial_out(), cols = g.Cin * g.spatial_in();
  Tensor a({rows, cols});
  for (Index co = 0; co < g.Cout; ++co) {
    const Index group = co / g.cout_g;
    for (Index ci = 0; ci < g.cin_g; ++ci)
      g.placements([&](Index o1, Index o2, Index k1, Index k2, Index i1, Index i2) {
        const Index r = co * g.spatial_out() + o1 * g.O[1] + o2;
        const Index c = (group * g.cin_g + ci) * g.spatial_in() + i1 * g.I[1] + i2;
        a.data()[r * cols + c] += w.data()[g.w(co, ci, k1, k2)];
      });
  }
  return a;
}

Tensor finite_difference_vjp(const std::function<double(const Tensor&)>& f, const Tensor& t, double h) {
  Tensor grad(t.shape());
  Tensor probe = t;
  for (Index e = 0; e < t.numel(); ++e) {
    const double saved = probe.data()[e];
    probe.data()[e] = saved + h;
    const double up = f(probe);
    probe.data()[e] = saved - h;
    const double down = f(probe);
    probe.data()[e] = saved;
    grad.data()[e] = (up - down) / (2.0 * h);
  }
  return grad;
}

Tensor weight_jacobian(const ConvSpec& spec, const Tensor& x) {
  const Index rows = shape_numel(spec.output_shape()), cols = shape_numel(spec.kernel_shape());
  Tensor jac({rows, cols});
  Tensor basis(spec.kernel_shape());
  for (Index col = 0; col < cols; ++col) {
    basis.data()[col] = 1.0;
    const Tensor y = direct_conv(spec, x, basis);
    basis.data()[col] = 0.0;
    for (Index r = 0; r < rows; ++r) jac.data()[r * cols + col] = y.data()[r];
  }
  return jac;
}

GgnExplicit ggn_explicit(const ConvSpec& spec, const Tensor& x, const Tensor& s_y) {
  const Index P = shape_numel(spec.kernel_shape());
  if (P > kMaxExplicitWeights) {
    throw Error(ErrorCode::Unsupported, "explicit GGN limited to " + std::to_string(kMaxExplicitWeights) + " weights");
  }
  if (s_y.rank() < 1) throw Error(ErrorCode::ShapeMismatch, "factorization needs a column axis");
  const Index C = s_y.size(0), N = spec.batch;
  expect_shape(s_y, columns_shape(C, spec), "factorization");
  const Tensor jac = weight_jacobian(spec, x);
  const Index M = jac.size(0), per_sample = M / N;

  // S^(W)[w, (c, n)] = sum over sample n's outputs of J * S_Y[c, n].
  Matrix sw = Matrix::Zero(P, C * N);
  ConstMatrixMap j(jac.data().data(), M, P);
  for (Index c = 0; c < C; ++c)
    for (Index n = 0; n < N; ++n) {
      Eigen::Map<const Eigen::VectorXd> col(s_y.data().data() + (c * N + n) * per_sample, per_sample);
      sw.col(c * N + n) = j.middleRows(n * per_sample, per_sample).transpose() * col;
    }

  GgnExplicit out;
  out.ggn = Tensor({P, P});
  MatrixMap(out.ggn.data().data(), P, P) = sw * sw.transpose();
  out.gram = Tensor({C * N, C * N});
  MatrixMap(out.gram.data().data(), C * N, C * N) = sw.transpose() * sw;
  out.diagonal = Tensor(spec.kernel_shape());
  Shape ps{N};
  for (Index s : spec.kernel_shape()) ps.push_back(s);
  out.per_sample_diagonal = Tensor(ps);
  for (Index p = 0; p < P; ++p) {
    for (Index c = 0; c < C; ++c)
      for (Index n = 0; n < N; ++n) {
        const double v = sw(p, c * N + n);
        out.diagonal.data()[p] += v * v;
        out.per_sample_diagonal.data()[n * P + p] += v * v;
      }
  }
  return out;
}

Tensor hesscale_weight_explicit(const ConvSpec& spec, const Tensor& x, const Tensor& d_y) {
  expect_shape(d_y, spec.output_shape(), "diagonal");
  const Tensor jac = weight_jacobian(spec, x);
  const Index M = jac.size(0), P = jac.size(1);
  Tensor out(spec.kernel_shape());
  for (Index m = 0; m < M; ++m)
    for (Index p = 0; p < P; ++p) {
      const double v = jac.data()[m * P + p];
      out.data()[p] += d_y.data()[m] * v * v;
    }
  return out;
}

Tensor hesscale_input_explicit(const ConvSpec& spec, const Tensor& w, const Tensor& d_y) {
  expect_shape(d_y, spec.output_shape(), "diagonal");
  const Tensor a = toeplitz(spec, w);
  const Index rows = a.size(0), cols = a.size(1);
  Tensor out(spec.input_shape());
  for (Index n = 0; n < spec.batch; ++n)
    for (Index r = 0; r < rows; ++r) {
      const double d = d_y.data()[n * rows + r];
      for (Index c = 0; c < cols; ++c) {
        const double v = a.data()[r * cols + c];
        out.data()[n * cols + c] += d * v * v;
      }
    }
  return out;
}

Tensor kfac_expand(const ConvSpec& spec, const Tensor& x, Index* materialized) {
  const Tensor patches = direct_unfold(spec, x);
  if (materialized) *materialized = patches.numel();
  return block_gram(patches, spec.groups, 1.0 / static_cast<double>(spec.batch));
}

Tensor kfac_reduce(const ConvSpec& spec, const Tensor& x, Index* materialized) {
  const Tensor patches = direct_unfold(spec, x);
  if (materialized) *materialized = patches.numel();
  const double O = static_cast<double>(shape_numel(spec.output_sizes()));
  return block_gram_of_sums(patches, spec.groups, 1.0 / (static_cast<double>(spec.batch) * O * O));
}

Tensor kfac_expand_transpose(const ConvSpec& spec, const Tensor& y) {
  return block_gram(direct_transpose_unfold(spec, y), spec.groups, 1.0 / static_cast<double>(spec.batch));
}

Tensor kfac_reduce_transpose(const ConvSpec& spec, const Tensor& y) {
  const double I = static_cast<double>(shape_numel(spec.input_sizes()));
  return block_gram_of_sums(direct_transpose_unfold(spec, y), spec.groups,
                            1.0 / (static_cast<double>(spec.batch) * I * I));
}

double sym_eig_min(const Tensor& matrix) {
  if (matrix.rank() != 2 || matrix.size(0) != matrix.size(1)) {
    throw Error(ErrorCode::ShapeMismatch, "expected a square matrix, got " + to_string(matrix.shape()));
  }
  const Index n = matrix.size(0);
  ConstMatrixMap m(matrix.data().data(), n, n);
  Eigen::SelfAdjointEigenSolver<Matrix> solver(m, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

}  // namespace convtn::oracle
