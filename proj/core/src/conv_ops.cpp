#include "convtn/conv_ops.hpp"

#include <array>
#include <sstream>

#include "convtn/error.hpp"
#include "convtn/index_pattern.hpp"
#include "convtn/simplify.hpp"

namespace convtn {

namespace {

constexpr std::array kOps{
    Op::Forward,          Op::UnfoldInput,         Op::UnfoldKernel,        Op::FoldOutput,
    Op::TransposeUnfold,  Op::WeightVjp,           Op::PerSampleWeightVjp,  Op::InputVjp,
    Op::WeightJvp,        Op::InputJvp,            Op::Im2colVjp,           Op::Im2colJvp,
    Op::KfacExpand,       Op::KfacReduce,          Op::KfacExpandTranspose, Op::KfacReduceTranspose,
    Op::GgnGram,          Op::GgnDiagonal,         Op::PerSampleGgnDiagonal, Op::HesscaleWeightDiag,
    Op::HesscaleInputDiag,
};

// "i1 i2" (with an optional suffix on every name).
std::string ids(std::size_t dims, char base, const std::string& suffix = "") {
  std::string out;
  for (std::size_t j = 1; j <= dims; ++j) {
    if (j > 1) out += ' ';
    out += base + std::to_string(j) + suffix;
  }
  return out;
}

// "(o1 o2)" in 2d, "o1" in 1d.
std::string grouped(std::size_t dims, char base, const std::string& suffix = "") {
  return dims == 1 ? ids(dims, base, suffix) : "(" + ids(dims, base, suffix) + ")";
}

class Builder {
 public:
  Builder(const ConvSpec& spec) : spec_(spec), dims_(spec.dims.size()) {}

  std::size_t dims() const { return dims_; }

  void add(std::string term, Tensor tensor, std::optional<PatternRole> role = {}) {
    terms_.push_back(std::move(term));
    tensors_.push_back(std::move(tensor));
    roles_.push_back(role);
  }

  void patterns(const std::string& si, const std::string& so, const std::string& sk) {
    for (std::size_t j = 0; j < dims_; ++j) {
      const std::string n = std::to_string(j + 1);
      add("i" + n + si + " o" + n + so + " k" + n + sk, pattern(spec_.dims[j])->table,
          PatternRole{spec_.dims[j], false});
    }
  }

  void averaged_patterns(const std::string& si, const std::string& sk) {
    for (std::size_t j = 0; j < dims_; ++j) {
      const std::string n = std::to_string(j + 1);
      add("i" + n + si + " k" + n + sk, averaged_pattern(spec_.dims[j]), PatternRole{spec_.dims[j], true});
    }
  }

  TensorNetwork finish(const std::string& output, double scale = 1.0) {
    std::ostringstream eq;
    for (std::size_t t = 0; t < terms_.size(); ++t) eq << (t ? ", " : "") << terms_[t];
    eq << " -> " << output;
    return make_network(eq.str(), std::move(tensors_), std::move(roles_), {{"g", spec_.groups}}, scale);
  }

 private:
  const ConvSpec& spec_;
  std::size_t dims_;
  std::vector<std::string> terms_;
  std::vector<Tensor> tensors_;
  std::vector<std::optional<PatternRole>> roles_;
};

Shape with_leading(Index lead, const Shape& rest) {
  Shape s{lead};
  s.insert(s.end(), rest.begin(), rest.end());
  return s;
}

Index product(const std::vector<Index>& v) { return shape_numel(v); }

std::size_t arity(Op op) {
  switch (op) {
    case Op::UnfoldInput:
    case Op::UnfoldKernel:
    case Op::FoldOutput:
    case Op::TransposeUnfold:
    case Op::Im2colVjp:
    case Op::Im2colJvp:
    case Op::KfacExpand:
    case Op::KfacReduce:
    case Op::KfacExpandTranspose:
    case Op::KfacReduceTranspose:
      return 1;
    default:
      return 2;
  }
}

bool uses_columns(Op op) { return op == Op::GgnGram || op == Op::GgnDiagonal || op == Op::PerSampleGgnDiagonal; }

void check_inputs(Op op, const ConvSpec& spec, std::span<const Tensor> inputs) {
  if (inputs.size() != arity(op)) {
    throw Error(ErrorCode::ShapeMismatch, std::string(op_name(op)) + " takes " + std::to_string(arity(op)) +
                                              " tensors, got " + std::to_string(inputs.size()));
  }
  const Index columns = uses_columns(op) && inputs[1].rank() > 0 ? inputs[1].size(0) : 2;
  const auto expected = input_shapes(op, spec, columns);
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    if (inputs[t].shape() != expected[t]) {
      throw Error(ErrorCode::ShapeMismatch, std::string(op_name(op)) + " input " + std::to_string(t) +
                                                " has shape " + to_string(inputs[t].shape()) + ", expected " +
                                                to_string(expected[t]));
    }
  }
}

void add_bias(const ConvSpec& spec, Tensor& y, const Tensor& bias) {
  if (bias.shape() != Shape{spec.out_channels}) {
    throw Error(ErrorCode::ShapeMismatch, "bias has shape " + to_string(bias.shape()));
  }
  const Index plane = shape_numel(spec.output_sizes());
  auto data = y.data();
  for (Index n = 0; n < spec.batch; ++n) {
    for (Index c = 0; c < spec.out_channels; ++c) {
      const Index base = (n * spec.out_channels + c) * plane;
      for (Index p = 0; p < plane; ++p) data[base + p] += bias.data()[c];
    }
  }
}

}  // namespace

const char* op_name(Op op) noexcept {
  switch (op) {
    case Op::Forward: return "forward";
    case Op::UnfoldInput: return "unfold_input";
    case Op::UnfoldKernel: return "unfold_kernel";
    case Op::FoldOutput: return "fold_output";
    case Op::TransposeUnfold: return "transpose_unfold";
    case Op::WeightVjp: return "weight_vjp";
    case Op::PerSampleWeightVjp: return "per_sample_weight_vjp";
    case Op::InputVjp: return "input_vjp";
    case Op::WeightJvp: return "weight_jvp";
    case Op::InputJvp: return "input_jvp";
    case Op::Im2colVjp: return "im2col_vjp";
    case Op::Im2colJvp: return "im2col_jvp";
    case Op::KfacExpand: return "kfac_expand";
    case Op::KfacReduce: return "kfac_reduce";
    case Op::KfacExpandTranspose: return "kfac_expand_transpose";
    case Op::KfacReduceTranspose: return "kfac_reduce_transpose";
    case Op::GgnGram: return "ggn_gram";
    case Op::GgnDiagonal: return "ggn_diagonal";
    case Op::PerSampleGgnDiagonal: return "per_sample_ggn_diagonal";
    case Op::HesscaleWeightDiag: return "hesscale_weight_diag";
    case Op::HesscaleInputDiag: return "hesscale_input_diag";
  }
  return "unknown";
}

std::optional<Op> op_from_name(std::string_view name) {
  for (Op op : kOps) {
    if (name == op_name(op)) return op;
  }
  return std::nullopt;
}

std::span<const Op> all_ops() { return kOps; }

std::vector<Shape> input_shapes(Op op, const ConvSpec& spec, Index columns) {
  spec.validate();
  const Shape x = spec.input_shape(), w = spec.kernel_shape(), y = spec.output_shape();
  switch (op) {
    case Op::Forward: return {x, w};
    case Op::UnfoldInput: return {x};
    case Op::UnfoldKernel: return {w};
    case Op::FoldOutput: {
      Shape s{spec.batch, spec.in_channels};
      for (Index o : spec.output_sizes()) s.push_back(o);
      return {s};
    }
    case Op::TransposeUnfold: return {y};
    case Op::WeightVjp:
    case Op::PerSampleWeightVjp: return {x, y};
    case Op::InputVjp: return {w, y};
    case Op::WeightJvp: return {x, w};
    case Op::InputJvp: return {w, x};
    case Op::Im2colVjp: return {spec.unfolded_shape()};
    case Op::Im2colJvp: return {x};
    case Op::KfacExpand:
    case Op::KfacReduce: return {x};
    case Op::KfacExpandTranspose:
    case Op::KfacReduceTranspose: return {y};
    case Op::GgnGram:
    case Op::GgnDiagonal:
    case Op::PerSampleGgnDiagonal: return {x, with_leading(columns, y)};
    case Op::HesscaleWeightDiag: return {x, y};
    case Op::HesscaleInputDiag: return {w, y};
  }
  return {};
}

Shape result_shape(Op op, const ConvSpec& spec, Index columns) {
  spec.validate();
  const Index K = product(spec.kernel_sizes()), I = product(spec.input_sizes()), O = product(spec.output_sizes());
  switch (op) {
    case Op::Forward:
    case Op::WeightJvp:
    case Op::InputJvp: return spec.output_shape();
    case Op::UnfoldInput:
    case Op::Im2colJvp: return spec.unfolded_shape();
    case Op::UnfoldKernel: return {spec.out_channels * O, spec.in_channels * I};
    case Op::FoldOutput:
    case Op::InputVjp:
    case Op::Im2colVjp:
    case Op::HesscaleInputDiag: return spec.input_shape();
    case Op::TransposeUnfold: return {spec.batch, spec.out_channels * K, I};
    case Op::WeightVjp:
    case Op::GgnDiagonal:
    case Op::HesscaleWeightDiag: return spec.kernel_shape();
    case Op::PerSampleWeightVjp:
    case Op::PerSampleGgnDiagonal: return with_leading(spec.batch, spec.kernel_shape());
    case Op::KfacExpand:
    case Op::KfacReduce: return {spec.groups, spec.in_per_group() * K, spec.in_per_group() * K};
    case Op::KfacExpandTranspose:
    case Op::KfacReduceTranspose: return {spec.groups, spec.out_per_group() * K, spec.out_per_group() * K};
    case Op::GgnGram: return {columns * spec.batch, columns * spec.batch};
  }
  return {};
}

std::vector<Tensor> random_inputs(Op op, const ConvSpec& spec, Rng& rng, Index columns) {
  std::vector<Tensor> out;
  const auto shapes = input_shapes(op, spec, columns);
  for (std::size_t t = 0; t < shapes.size(); ++t) {
    const bool nonnegative = t == 1 && (op == Op::HesscaleWeightDiag || op == Op::HesscaleInputDiag);
    out.push_back(nonnegative ? random_uniform(shapes[t], rng) : random_normal(shapes[t], rng));
  }
  return out;
}

TensorNetwork build_network(Op op, const ConvSpec& spec, std::span<const Tensor> inputs) {
  check_inputs(op, spec, inputs);
  Builder b(spec);
  const std::size_t d = b.dims();
  const std::string I = ids(d, 'i'), O = ids(d, 'o'), K = ids(d, 'k');
  const std::string I_ = ids(d, 'i', "_"), O_ = ids(d, 'o', "_"), K_ = ids(d, 'k', "_");
  const std::string x_term = "n (g c_in) " + I;
  const std::string w_term = "(g c_out) c_in " + K;
  const std::string y_term = "n (g c_out) " + O;
  const double inv_n = 1.0 / static_cast<double>(spec.batch);

  switch (op) {
    case Op::Forward:
    case Op::WeightJvp:
      b.add(x_term, inputs[0]);
      b.patterns("", "", "");
      b.add(w_term, inputs[1]);
      return b.finish(y_term);
    case Op::InputJvp:
      b.add(w_term, inputs[0]);
      b.patterns("", "", "");
      b.add(x_term, inputs[1]);
      return b.finish(y_term);
    case Op::UnfoldInput:
      b.add("n c_in " + I, inputs[0]);
      b.patterns("", "", "");
      return b.finish("n (c_in " + K + ") " + grouped(d, 'o'));
    case Op::UnfoldKernel:
      if (spec.groups != 1) throw Error(ErrorCode::Unsupported, "unfold_kernel requires a single group");
      b.patterns("", "", "");
      b.add("c_out c_in " + K, inputs[0]);
      return b.finish("(c_out " + O + ") (c_in " + I + ")");
    case Op::FoldOutput:
      b.add("n c_in " + O, inputs[0]);
      b.patterns("", "", "");
      return b.finish("n c_in " + I);
    case Op::TransposeUnfold:
      b.add("n c_out " + O, inputs[0]);
      b.patterns("", "", "");
      return b.finish("n (c_out " + K + ") " + grouped(d, 'i'));
    case Op::WeightVjp:
    case Op::PerSampleWeightVjp:
      b.add(x_term, inputs[0]);
      b.patterns("", "", "");
      b.add(y_term, inputs[1]);
      return b.finish(op == Op::WeightVjp ? w_term : "n " + w_term);
    case Op::InputVjp:
      b.add(w_term, inputs[0]);
      b.patterns("", "", "");
      b.add(y_term, inputs[1]);
      return b.finish(x_term);
    case Op::Im2colVjp:
      b.patterns("", "", "");
      b.add("n (c_in " + K + ") " + grouped(d, 'o'), inputs[0]);
      return b.finish("n c_in " + I);
    case Op::Im2colJvp:
      b.patterns("", "", "");
      b.add("n c_in " + I, inputs[0]);
      return b.finish("n (c_in " + K + ") " + grouped(d, 'o'));
    case Op::KfacExpand:
      b.add(x_term, inputs[0]);
      b.patterns("", "", "");
      b.add("n (g c_in_) " + I_, inputs[0]);
      b.patterns("_", "", "_");
      return b.finish("g (c_in " + K + ") (c_in_ " + K_ + ")", inv_n);
    case Op::KfacReduce:
      b.add(x_term, inputs[0]);
      b.averaged_patterns("", "");
      b.add("n (g c_in_) " + I_, inputs[0]);
      b.averaged_patterns("_", "_");
      return b.finish("g (c_in " + K + ") (c_in_ " + K_ + ")", inv_n);
    case Op::KfacExpandTranspose:
    case Op::KfacReduceTranspose: {
      const bool reduce = op == Op::KfacReduceTranspose;
      b.add(y_term, inputs[0]);
      b.patterns("", "", "");
      b.add("n (g c_out_) " + O_, inputs[0]);
      b.patterns(reduce ? "_" : "", "_", "_");
      const double spatial = static_cast<double>(product(spec.input_sizes()));
      return b.finish("g (c_out " + K + ") (c_out_ " + K_ + ")", reduce ? inv_n / (spatial * spatial) : inv_n);
    }
    case Op::GgnGram:
      b.add(x_term, inputs[0]);
      b.patterns("", "", "");
      b.add("c n (g c_out) " + O, inputs[1]);
      b.add("n_ (g c_in) " + I_, inputs[0]);
      b.patterns("_", "_", "");
      b.add("c_ n_ (g c_out) " + O_, inputs[1]);
      return b.finish("(c n) (c_ n_)");
    case Op::GgnDiagonal:
    case Op::PerSampleGgnDiagonal:
      b.add(x_term, inputs[0]);
      b.patterns("", "", "");
      b.add("c n (g c_out) " + O, inputs[1]);
      b.add("n (g c_in) " + I_, inputs[0]);
      b.patterns("_", "_", "");
      b.add("c n (g c_out) " + O_, inputs[1]);
      return b.finish(op == Op::GgnDiagonal ? w_term : "n " + w_term);
    case Op::HesscaleWeightDiag:
      b.add(x_term, inputs[0]);
      b.patterns("", "", "");
      b.add(y_term, inputs[1]);
      b.add("n (g c_in) " + I_, inputs[0]);
      b.patterns("_", "", "");
      return b.finish(w_term);
    case Op::HesscaleInputDiag:
      b.add(w_term, inputs[0]);
      b.patterns("", "", "");
      b.add(y_term, inputs[1]);
      b.add("(g c_out) c_in " + K_, inputs[0]);
      b.patterns("", "", "_");
      return b.finish(x_term);
  }
  throw Error(ErrorCode::Unsupported, "unknown operation");
}

Tensor run(Op op, const ConvSpec& spec, std::span<const Tensor> inputs, const EvalOptions& options) {
  std::optional<Tensor> bias;
  if (op == Op::Forward && inputs.size() == 3) {
    bias = inputs[2];
    inputs = inputs.first(2);
  }
  TensorNetwork net = build_network(op, spec, inputs);
  if (options.before_contract) options.before_contract(net);
  if (options.simplify) net = simplify(net).network;
  Tensor out = evaluate(net);
  if (bias) add_bias(spec, out, *bias);
  return out;
}

ConvSpec TransposeConvSpec::reference() const {
  ConvSpec conv{batch, groups, out_channels, in_channels, {}, false};
  for (const auto& d : dims) {
    conv.dims.push_back(DimSpec{
        input_size_from_output(d.input_size, d.kernel_size, d.stride, d.padding, d.dilation, d.output_padding),
        d.kernel_size, d.stride, d.padding, d.dilation});
  }
  conv.validate();
  return conv;
}

TransposeConvSpec TransposeConvSpec::from_reference(const ConvSpec& conv) {
  TransposeConvSpec t{conv.batch, conv.groups, conv.out_channels, conv.in_channels, {}};
  for (const auto& d : conv.dims) {
    t.dims.push_back({output_size(d), d.kernel_size, d.stride, d.padding, d.dilation, output_padding_of(d)});
  }
  return t;
}

Tensor conv_forward(const ConvSpec& spec, const Tensor& x, const Tensor& w, const std::optional<Tensor>& bias,
                    const EvalOptions& options) {
  if (bias) {
    std::vector<Tensor> in{x, w, *bias};
    return run(Op::Forward, spec, in, options);
  }
  std::vector<Tensor> in{x, w};
  return run(Op::Forward, spec, in, options);
}

#define CONVTN_UNARY(fn, op, arg)                                                    \
  Tensor fn(const ConvSpec& spec, const Tensor& arg, const EvalOptions& options) {   \
    return run(op, spec, std::span<const Tensor>(&arg, 1), options);                 \
  }
#define CONVTN_BINARY(fn, op, a, b)                                                                 \
  Tensor fn(const ConvSpec& spec, const Tensor& a, const Tensor& b, const EvalOptions& options) { \
    std::vector<Tensor> in{a, b};                                                                   \
    return run(op, spec, in, options);                                                              \
  }

CONVTN_UNARY(unfold_input, Op::UnfoldInput, x)
CONVTN_UNARY(unfold_kernel, Op::UnfoldKernel, w)
CONVTN_UNARY(fold_output, Op::FoldOutput, y_like)
CONVTN_UNARY(transpose_unfold, Op::TransposeUnfold, y)
CONVTN_UNARY(im2col_vjp, Op::Im2colVjp, v_unfolded)
CONVTN_UNARY(im2col_jvp, Op::Im2colJvp, v_x)
CONVTN_UNARY(kfac_expand_factor, Op::KfacExpand, x)
CONVTN_UNARY(kfac_reduce_factor, Op::KfacReduce, x)
CONVTN_BINARY(per_sample_weight_vjp, Op::PerSampleWeightVjp, x, v_y)
CONVTN_BINARY(input_vjp, Op::InputVjp, w, v_y)
CONVTN_BINARY(weight_jvp, Op::WeightJvp, x, v_w)
CONVTN_BINARY(input_jvp, Op::InputJvp, w, v_x)
CONVTN_BINARY(ggn_gram, Op::GgnGram, x, s_y)
CONVTN_BINARY(ggn_diagonal, Op::GgnDiagonal, x, s_y)
CONVTN_BINARY(per_sample_ggn_diagonal, Op::PerSampleGgnDiagonal, x, s_y)
CONVTN_BINARY(hesscale_weight_diag, Op::HesscaleWeightDiag, x, d_y)
CONVTN_BINARY(hesscale_input_diag, Op::HesscaleInputDiag, w, d_y)

#undef CONVTN_UNARY
#undef CONVTN_BINARY

WeightGradient weight_vjp(const ConvSpec& spec, const Tensor& x, const Tensor& v_y, const EvalOptions& options) {
  std::vector<Tensor> in{x, v_y};
  WeightGradient grad{run(Op::WeightVjp, spec, in, options), std::nullopt};
  if (spec.has_bias) {
    std::vector<Index> axes{0};
    for (Index j = 0; j < spec.spatial_rank(); ++j) axes.push_back(2 + j);
    grad.bias = v_y.sum(axes);
  }
  return grad;
}

Tensor kfac_expand_transpose(const TransposeConvSpec& spec, const Tensor& y, const EvalOptions& options) {
  return run(Op::KfacExpandTranspose, spec.reference(), std::span<const Tensor>(&y, 1), options);
}

Tensor kfac_reduce_transpose(const TransposeConvSpec& spec, const Tensor& y, const EvalOptions& options) {
  return run(Op::KfacReduceTranspose, spec.reference(), std::span<const Tensor>(&y, 1), options);
}

}  // namespace convtn
