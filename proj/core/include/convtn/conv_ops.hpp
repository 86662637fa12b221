#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "convtn/conv_spec.hpp"
#include "convtn/network.hpp"
#include "convtn/random.hpp"

namespace convtn {

/// Convolution operations expressed as tensor networks. Each operation takes
/// a fixed list of tensors, listed next to its enumerator.
enum class Op {
  Forward,               // X, W
  UnfoldInput,           // X
  UnfoldKernel,          // W (G = 1)
  FoldOutput,            // Y-like (N, C_in, O...)
  TransposeUnfold,       // Y (N, C_out, O...)
  WeightVjp,             // X, V_Y
  PerSampleWeightVjp,    // X, V_Y
  InputVjp,              // W, V_Y
  WeightJvp,             // X, V_W
  InputJvp,              // W, V_X
  Im2colVjp,             // V (N, C_in K..., O...)
  Im2colJvp,             // V_X
  KfacExpand,            // X
  KfacReduce,            // X
  KfacExpandTranspose,   // Y
  KfacReduceTranspose,   // Y
  GgnGram,               // X, S_Y (C, N, C_out, O...)
  GgnDiagonal,           // X, S_Y
  PerSampleGgnDiagonal,  // X, S_Y
  HesscaleWeightDiag,    // X, D_Y
  HesscaleInputDiag,     // W, D_Y
};

const char* op_name(Op op) noexcept;
std::optional<Op> op_from_name(std::string_view name);
std::span<const Op> all_ops();

/// Expected input shapes; `columns` is the leading axis of S_Y.
std::vector<Shape> input_shapes(Op op, const ConvSpec& spec, Index columns = 2);
Shape result_shape(Op op, const ConvSpec& spec, Index columns = 2);

/// Random inputs of the right shapes. D_Y is drawn nonnegative.
std::vector<Tensor> random_inputs(Op op, const ConvSpec& spec, Rng& rng, Index columns = 2);

/// The tensor network of `op`, with index patterns as marked operands and the
/// scale factor attached. Bias terms are not part of any network.
TensorNetwork build_network(Op op, const ConvSpec& spec, std::span<const Tensor> inputs);

struct EvalOptions {
  bool simplify = true;
  /// Called on the built network before simplification.
  std::function<void(TensorNetwork&)> before_contract;
};

/// Builds, optionally simplifies, plans and contracts.
Tensor run(Op op, const ConvSpec& spec, std::span<const Tensor> inputs, const EvalOptions& options = {});

/// Transpose convolution described by its own input sizes; output_padding
/// resolves the input size of the convolution it inverts.
struct TransposeDimSpec {
  Index input_size = 1;
  Index kernel_size = 1;
  Index stride = 1;
  Index padding = 0;
  Index dilation = 1;
  Index output_padding = 0;
};

struct TransposeConvSpec {
  Index batch = 1;
  Index groups = 1;
  Index in_channels = 1;
  Index out_channels = 1;
  std::vector<TransposeDimSpec> dims;

  /// The convolution whose input VJP this transpose convolution is.
  ConvSpec reference() const;
  static TransposeConvSpec from_reference(const ConvSpec& conv);
};

Tensor conv_forward(const ConvSpec& spec, const Tensor& x, const Tensor& w, const std::optional<Tensor>& bias = {},
                    const EvalOptions& options = {});
Tensor unfold_input(const ConvSpec& spec, const Tensor& x, const EvalOptions& options = {});
Tensor unfold_kernel(const ConvSpec& spec, const Tensor& w, const EvalOptions& options = {});
Tensor fold_output(const ConvSpec& spec, const Tensor& y_like, const EvalOptions& options = {});
Tensor transpose_unfold(const ConvSpec& spec, const Tensor& y, const EvalOptions& options = {});

struct WeightGradient {
  Tensor weight;
  std::optional<Tensor> bias;
};

WeightGradient weight_vjp(const ConvSpec& spec, const Tensor& x, const Tensor& v_y, const EvalOptions& options = {});
Tensor per_sample_weight_vjp(const ConvSpec& spec, const Tensor& x, const Tensor& v_y,
                             const EvalOptions& options = {});
Tensor input_vjp(const ConvSpec& spec, const Tensor& w, const Tensor& v_y, const EvalOptions& options = {});
Tensor weight_jvp(const ConvSpec& spec, const Tensor& x, const Tensor& v_w, const EvalOptions& options = {});
Tensor input_jvp(const ConvSpec& spec, const Tensor& w, const Tensor& v_x, const EvalOptions& options = {});
Tensor im2col_vjp(const ConvSpec& spec, const Tensor& v_unfolded, const EvalOptions& options = {});
Tensor im2col_jvp(const ConvSpec& spec, const Tensor& v_x, const EvalOptions& options = {});

/// (G, C_in/G * K..., C_in/G * K...)
Tensor kfac_expand_factor(const ConvSpec& spec, const Tensor& x, const EvalOptions& options = {});
Tensor kfac_reduce_factor(const ConvSpec& spec, const Tensor& x, const EvalOptions& options = {});
/// (G, C_in'/G * K..., C_in'/G * K...) where C_in' are the transpose
/// convolution's input channels.
Tensor kfac_expand_transpose(const TransposeConvSpec& spec, const Tensor& y, const EvalOptions& options = {});
Tensor kfac_reduce_transpose(const TransposeConvSpec& spec, const Tensor& y, const EvalOptions& options = {});

/// (C N, C N)
Tensor ggn_gram(const ConvSpec& spec, const Tensor& x, const Tensor& s_y, const EvalOptions& options = {});
Tensor ggn_diagonal(const ConvSpec& spec, const Tensor& x, const Tensor& s_y, const EvalOptions& options = {});
Tensor per_sample_ggn_diagonal(const ConvSpec& spec, const Tensor& x, const Tensor& s_y,
                               const EvalOptions& options = {});
Tensor hesscale_weight_diag(const ConvSpec& spec, const Tensor& x, const Tensor& d_y,
                            const EvalOptions& options = {});
Tensor hesscale_input_diag(const ConvSpec& spec, const Tensor& w, const Tensor& d_y,
                           const EvalOptions& options = {});

}  // namespace convtn
