#pragma once

#include <functional>
#include <optional>

#include "convtn/conv_spec.hpp"
#include "convtn/tensor.hpp"

// Loop-based reference implementations for tests. Nothing here touches the
// einsum engine or the index patterns.
namespace convtn::oracle {

Tensor direct_conv(const ConvSpec& spec, const Tensor& x, const Tensor& w, const std::optional<Tensor>& bias = {});

/// Patch matrix (N, C_in K..., O...) with zero fill for padding.
Tensor direct_unfold(const ConvSpec& spec, const Tensor& x);
/// Adjoint of direct_unfold: scatters (N, C_in K..., O...) back to X's shape.
Tensor direct_unfold_adjoint(const ConvSpec& spec, const Tensor& v);
/// (N, C_out K..., I...): for every input pixel, the outputs it feeds.
Tensor direct_transpose_unfold(const ConvSpec& spec, const Tensor& y);
/// (N, C_in, O...) -> (N, C_in, I...), summing every placement.
Tensor direct_fold(const ConvSpec& spec, const Tensor& y_like);

Tensor direct_weight_vjp(const ConvSpec& spec, const Tensor& x, const Tensor& v_y);
Tensor direct_per_sample_weight_vjp(const ConvSpec& spec, const Tensor& x, const Tensor& v_y);
Tensor direct_input_vjp(const ConvSpec& spec, const Tensor& w, const Tensor& v_y);

/// Dense (C_out O..., C_in I...) matrix with flatten(conv(x)) == A x.
Tensor toeplitz(const ConvSpec& spec, const Tensor& w);

/// Central differences (f(t + h e_i) - f(t - h e_i)) / 2h.
Tensor finite_difference_vjp(const std::function<double(const Tensor&)>& f, const Tensor& t, double h = 1e-6);

/// Weight Jacobian (N C_out O..., C_out C_in/G K...) assembled column by
/// column from convolutions with basis kernels.
Tensor weight_jacobian(const ConvSpec& spec, const Tensor& x);

inline constexpr Index kMaxExplicitWeights = 512;

struct GgnExplicit {
  Tensor ggn;                  // (P, P)
  Tensor diagonal;             // like W
  Tensor per_sample_diagonal;  // (N, ...W)
  Tensor gram;                 // (C N, C N)
};

/// Explicit GGN J^T S S^T J for S_Y of shape (C, N, C_out, O...). Throws
/// Unsupported above kMaxExplicitWeights weights.
GgnExplicit ggn_explicit(const ConvSpec& spec, const Tensor& x, const Tensor& s_y);

Tensor hesscale_weight_explicit(const ConvSpec& spec, const Tensor& x, const Tensor& d_y);
Tensor hesscale_input_explicit(const ConvSpec& spec, const Tensor& w, const Tensor& d_y);

/// Kronecker factors from the materialized patch matrix. `materialized`
/// receives the element count of that matrix.
Tensor kfac_expand(const ConvSpec& spec, const Tensor& x, Index* materialized = nullptr);
Tensor kfac_reduce(const ConvSpec& spec, const Tensor& x, Index* materialized = nullptr);
Tensor kfac_expand_transpose(const ConvSpec& spec, const Tensor& y);
Tensor kfac_reduce_transpose(const ConvSpec& spec, const Tensor& y);

/// Smallest eigenvalue of a symmetric matrix.
double sym_eig_min(const Tensor& matrix);

}  // namespace convtn::oracle
