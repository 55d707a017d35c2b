#pragma once

#include <optional>

#include "parttrack/numerics/rng.hpp"
#include "parttrack/numerics/tensor.hpp"

// Differentiable primitives. Every op checks its output for NaN/Inf and
// throws NumericError naming the op instead of letting it propagate.

namespace parttrack {

// Linear algebra and elementwise arithmetic.
template <typename S> Tensor<S> matmul(const Tensor<S>& a, const Tensor<S>& b);
template <typename S> Tensor<S> transpose(const Tensor<S>& a);
template <typename S> Tensor<S> add(const Tensor<S>& a, const Tensor<S>& b);
template <typename S> Tensor<S> sub(const Tensor<S>& a, const Tensor<S>& b);
template <typename S> Tensor<S> mul(const Tensor<S>& a, const Tensor<S>& b);
template <typename S> Tensor<S> div(const Tensor<S>& a, const Tensor<S>& b);
template <typename S> Tensor<S> scale(const Tensor<S>& a, S factor);
template <typename S> Tensor<S> add_scalar(const Tensor<S>& a, S offset);
template <typename S> Tensor<S> neg(const Tensor<S>& a);
template <typename S> Tensor<S> maximum(const Tensor<S>& a, const Tensor<S>& b);
template <typename S> Tensor<S> minimum(const Tensor<S>& a, const Tensor<S>& b);

/// a (n x m) + row (1 x m) broadcast over rows.
template <typename S> Tensor<S> add_row(const Tensor<S>& a, const Tensor<S>& row);
/// a (n x m) - row (1 x m) broadcast over rows.
template <typename S> Tensor<S> sub_row(const Tensor<S>& a, const Tensor<S>& row);
/// a (n x m) scaled row-wise by col (n x 1).
template <typename S> Tensor<S> mul_col(const Tensor<S>& a, const Tensor<S>& col);

// Pointwise nonlinearities.
template <typename S> Tensor<S> relu(const Tensor<S>& a);
template <typename S> Tensor<S> sigmoid(const Tensor<S>& a);
template <typename S> Tensor<S> abs(const Tensor<S>& a);
/// Square root; the backward pass floors sqrt(x) at 1e-12 so a zero input
/// yields a large but finite slope.
template <typename S> Tensor<S> sqrt(const Tensor<S>& a);

// Reductions.
template <typename S> Tensor<S> sum(const Tensor<S>& a);
template <typename S> Tensor<S> mean(const Tensor<S>& a);
/// Column sums: (n x m) -> (1 x m).
template <typename S> Tensor<S> sum_rows(const Tensor<S>& a);
/// sum(|a - b|).
template <typename S> Tensor<S> l1_distance(const Tensor<S>& a, const Tensor<S>& b);

// Structure.
template <typename S> Tensor<S> concat_rows(const Tensor<S>& a, const Tensor<S>& b);
template <typename S> Tensor<S> concat_cols(const std::vector<Tensor<S>>& parts);
template <typename S> Tensor<S> slice_rows(const Tensor<S>& a, Index begin, Index count);
template <typename S> Tensor<S> slice_cols(const Tensor<S>& a, Index begin, Index count);
template <typename S> Tensor<S> reshape(const Tensor<S>& a, Index rows, Index cols);

/// Numerically stable softmax along axis 1 (each row) or axis 0 (each column).
/// Non-finite input throws NumericError.
template <typename S> Tensor<S> softmax(const Tensor<S>& a, int axis = 1);

/// Row-wise layer normalization with affine gamma/beta (each 1 x cols).
template <typename S>
Tensor<S> layer_norm(const Tensor<S>& x, const Tensor<S>& gamma, const Tensor<S>& beta,
                     S eps = S(1e-5));

/// Gathers 3x3 (or k x k) neighbourhoods of an (height*width x channels)
/// feature map into rows of an (out_h*out_w x k*k*channels) matrix.
/// Padding positions read zero.
template <typename S>
Tensor<S> im2col(const Tensor<S>& x, int height, int width, int kernel, int stride, int pad);

/// Row-wise Gumbel-softmax. With hard=true the forward value is the exact
/// one-hot argmax of the perturbed logits and the backward pass uses the
/// gradient of the soft sample (straight-through).
template <typename S>
Tensor<S> gumbel_softmax(const Tensor<S>& logits, S tau, bool hard, Rng& rng);

/// Row-wise one-hot argmax with no sampling and no gradient.
template <typename S> Tensor<S> hard_argmax(const Tensor<S>& logits);

/// softmax(q k^T / sqrt(d) + key_bias) v, composed from the primitives above.
/// key_bias, when given, is 1 x keys and added to every query row.
template <typename S>
Tensor<S> scaled_dot_product_attention(const Tensor<S>& q, const Tensor<S>& k, const Tensor<S>& v,
                                       const std::optional<Tensor<S>>& key_bias = std::nullopt);

}  // namespace parttrack
