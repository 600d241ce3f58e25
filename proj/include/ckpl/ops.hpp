#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ckpl/tensor.hpp"

// Differentiable operations. Each op records a backward closure only when at
// least one input requires a gradient; otherwise it is a plain evaluation.
namespace ckpl {

// Norms below this are treated as zero by cosine_similarity and l2_normalize.
inline constexpr double kDegenerateNorm = 1e-12;
inline constexpr double kLayerNormEps = 1e-5;

// Matrix product of two rank-2 tensors.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
// Sum of same-shape tensors.
Tensor add_n(std::span<const Tensor> terms);

// y = x W + b, x is [T, in] or [in], W is [in, out], b is [out].
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

Tensor relu(const Tensor& x);
Tensor gelu(const Tensor& x);
Tensor log(const Tensor& x);
Tensor sum(const Tensor& x);

// Row-wise layer normalization of a [T, d] or [d] tensor.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = kLayerNormEps);

// Row-wise softmax of a [T, S] tensor.
Tensor softmax_rows(const Tensor& x);
// softmax(logits / tau) over a rank-1 tensor, max-subtracted.
Tensor softmax_with_temperature(const Tensor& logits, double tau);
std::vector<double> softmax_with_temperature(std::span<const double> logits, double tau);

// dot(u, v) / (|u| |v|) as a scalar tensor; 0 with no gradient if either
// norm is below kDegenerateNorm.
Tensor cosine_similarity(const Tensor& u, const Tensor& v);
double cosine_similarity(std::span<const double> u, std::span<const double> v);

// x / |x| for a rank-1 tensor (zero vector, no gradient, when degenerate).
Tensor l2_normalize(const Tensor& x);
// Applies l2_normalize independently to every row of a [T, d] tensor.
Tensor l2_normalize_rows(const Tensor& x);

// -log softmax(logits)[label] for rank-1 logits.
Tensor cross_entropy(const Tensor& logits, std::size_t label);

// Element i of a rank-1 tensor as a scalar tensor.
Tensor select(const Tensor& x, std::size_t index);
// Scalars (or size-1 tensors) gathered into a rank-1 tensor.
Tensor stack(std::span<const Tensor> scalars);

Tensor reshape(const Tensor& x, Shape shape);
// Rows of [r_i, d] tensors (rank-1 inputs count as one row) stacked.
Tensor concat_rows(std::span<const Tensor> parts);
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end);
// Row i of a rank-2 tensor as a rank-1 tensor.
Tensor row(const Tensor& x, std::size_t index);
Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end);
Tensor concat_cols(std::span<const Tensor> parts);

// sum_j weights[j] * items[j] over same-shape items; weights is rank-1.
Tensor weighted_sum(const Tensor& weights, std::span<const Tensor> items);

}  // namespace ckpl
