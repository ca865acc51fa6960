#pragma once

#include <cstddef>

#include "relnov/numerics/tape.hpp"
#include "relnov/numerics/tensor.hpp"

// Differentiable primitives. Each tape overload computes its forward value
// eagerly and records a closure implementing its vector-Jacobian product.
// Every op treats its inputs as matrices whose last axis is the column axis.
// Instantiated for float (training) and double (gradient checking).

namespace relnov {

inline constexpr double kLayerNormEps = 1e-5;

// ---- pure tensor kernels ----

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

// Population variance over the last axis.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias,
                     T eps = static_cast<T>(kLayerNormEps));

// axis is 0 or 1 for matrices, -1 for the last axis of any rank.
template <typename T>
Tensor<T> softmax(const Tensor<T>& x, int axis = -1);

template <typename T>
Tensor<T> gelu(const Tensor<T>& x);

template <typename T>
T gelu_scalar(T x);

template <typename T>
T sigmoid_scalar(T x);

// ---- tape ops ----

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b);

template <typename T>
Var<T> add(Var<T> a, Var<T> b);

template <typename T>
Var<T> sub(Var<T> a, Var<T> b);

template <typename T>
Var<T> mul(Var<T> a, Var<T> b);

template <typename T>
Var<T> scale(Var<T> a, T factor);

// x[m x n] + bias[n], bias broadcast across rows.
template <typename T>
Var<T> add_bias(Var<T> x, Var<T> bias);

template <typename T>
Var<T> gelu(Var<T> x);

template <typename T>
Var<T> sigmoid(Var<T> x);

template <typename T>
Var<T> layer_norm(Var<T> x, Var<T> gain, Var<T> bias, T eps = static_cast<T>(kLayerNormEps));

template <typename T>
Var<T> softmax(Var<T> x);

template <typename T>
Var<T> sum(Var<T> x);

template <typename T>
Var<T> mean(Var<T> x);

template <typename T>
Var<T> maximum(Var<T> a, Var<T> b);

// [a | b] along columns.
template <typename T>
Var<T> concat_cols(Var<T> a, Var<T> b);

// [a ; b] along rows.
template <typename T>
Var<T> concat_rows(Var<T> a, Var<T> b);

template <typename T>
Var<T> slice_rows(Var<T> x, std::size_t begin, std::size_t count);

// Rows offset, offset + stride, offset + 2*stride, ...
template <typename T>
Var<T> take_rows(Var<T> x, std::size_t offset, std::size_t stride);

template <typename T>
Var<T> select_col(Var<T> x, std::size_t col);

// Builds the token sequence [token; a_m; b_m] for every pair m, giving a
// (3*pairs) x d matrix. `token` is a single row shared by all pairs.
template <typename T>
Var<T> pair_sequence(Var<T> token, Var<T> a, Var<T> b);

// Multi-head scaled dot-product self-attention over independent groups of
// `seq_len` consecutive rows. `qkv` is N x 3d holding [Q | K | V]; the result
// is N x d with heads laid out side by side.
template <typename T>
Var<T> self_attention(Var<T> qkv, std::size_t seq_len, std::size_t heads);

// mean((pred - target)^2)
template <typename T>
Var<T> mse_loss(Var<T> pred, const Tensor<T>& target);

// mean(-[t ln sigmoid(z) + (1-t) ln(1 - sigmoid(z))]) evaluated on logits z.
template <typename T>
Var<T> bce_with_logits(Var<T> logits, const Tensor<T>& target);

}  // namespace relnov
