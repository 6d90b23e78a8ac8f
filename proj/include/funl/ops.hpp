#pragma once

#include <vector>

#include "funl/tensor.hpp"

namespace funl {

// Differentiable operations. Every op validates shapes and rejects
// non-finite inputs. Passing a tape records the backward rule when any
// input participates in differentiation; a null tape runs inference-only
// and the output does not require gradients.

// [m,k] x [k,n] -> [m,n]
Tensor matmul(const Tensor& a, const Tensor& b, Tape* tape);

Tensor relu(const Tensor& x, Tape* tape);

// x:[N,in], weight:[out,in], bias:[out] -> [N,out]
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias, Tape* tape);

// Cross-correlation with zero padding.
// input:[N,C,H,W], kernel:[F,C,kh,kw] -> [N,F,H',W'],
// H' = floor((H + 2*padding - kh)/stride) + 1, likewise W'.
Tensor conv2d(const Tensor& input, const Tensor& kernel, Dim stride, Dim padding, Tape* tape);

// x:[N,F,H,W] + bias:[F], broadcast over N,H,W.
Tensor add_channel_bias(const Tensor& x, const Tensor& bias, Tape* tape);

// Non-overlapping max pooling: window (pool_h, pool_w), stride equal to the
// window. Trailing rows/cols that do not fill a window are dropped.
Tensor maxpool2d(const Tensor& x, Dim pool_h, Dim pool_w, Tape* tape);

// [N, d1, d2, ...] -> [N, d1*d2*...]
Tensor flatten(const Tensor& x, Tape* tape);

// Row-wise softmax with max subtraction; logits:[N,K], K >= 2.
Tensor softmax(const Tensor& logits, Tape* tape);

// Mean over the batch of -log softmax(logits)[label]; labels in [0,K).
Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels, Tape* tape);

// Mean over rows of sum_k p_k * log(p_k / q_k) with the log arguments
// clamped at kKlLogClamp. Rows of p and q must be valid distributions.
// Differentiable through p, and through q when q carries gradients.
Tensor kl_divergence(const Tensor& p, const Tensor& q, Tape* tape);

Tensor scale(const Tensor& x, double c, Tape* tape);
Tensor add(const Tensor& a, const Tensor& b, Tape* tape);

inline constexpr double kKlLogClamp = 1e-12;

}  // namespace funl
