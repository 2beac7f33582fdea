#pragma once

#include <vector>

#include "pf/tensor.hpp"

namespace pf {

/// Sentinel target value that removes a position from the loss.
inline constexpr int kIgnoreIndex = -100;

/// C[m,n] = A[m,k] * B[k,n].
Tensor matmul(const Tensor& a, const Tensor& b);

/// C[m,n] = A[m,k] * B[n,k]^T. Covers tied output heads and low-rank
/// deltas without a transpose op.
Tensor matmul_nt(const Tensor& a, const Tensor& b);

/// Elementwise sum. Either identical shapes, or b is a vector matching
/// the trailing extent of a (row-broadcast affine).
Tensor add(const Tensor& a, const Tensor& b);

/// Elementwise product with the same broadcast rule as add.
Tensor mul(const Tensor& a, const Tensor& b);

/// Exact GELU: 0.5 x (1 + erf(x / sqrt(2))).
Tensor gelu(const Tensor& x);

/// Multiply every element by a constant.
Tensor scale(const Tensor& x, double factor);

/// Sum of all elements, as a scalar tensor.
Tensor sum(const Tensor& x);

/// Per-row normalization over the trailing extent, then affine with
/// gamma and beta.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps);

/// Gather rows of weight[V,d] by token id.
Tensor embedding(const Tensor& weight, const std::vector<int>& ids);

/// Stack a on top of b along the row axis; trailing extents must match.
Tensor concat_rows(const Tensor& a, const Tensor& b);

/// Multi-head scaled-dot-product attention with causal masking.
/// q is [T,d]; k and v are [p+T,d] where the leading p rows are a
/// prefix block visible to every query. Query t attends to all prefix
/// rows plus real positions up to t. Returns [T,d].
Tensor causal_attention(const Tensor& q, const Tensor& k, const Tensor& v, int n_heads);

/// Mean negative log-softmax over positions whose target is not
/// ignore_index. logits is [T,V]; targets has length T.
Tensor softmax_cross_entropy(const Tensor& logits, const std::vector<int>& targets,
                             int ignore_index = kIgnoreIndex);

}  // namespace pf
