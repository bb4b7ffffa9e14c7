#pragma once

#include <span>
#include <vector>

#include "lsrlab/ndgrad/tape.hpp"

namespace lsrlab::ndgrad {

// Every op checks shapes (ShapeMismatch) and rejects non-finite results
// (NonFinite). Matrices are rank-2 row-major.

Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
/// a[n,m] + bias[m] broadcast over rows (bias may be rank 1 or 1xm).
Var add_bias(Var a, Var bias);
/// scale * a + shift, elementwise.
Var affine(Var a, double scale, double shift = 0.0);
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var slice_cols(Var a, std::size_t begin, std::size_t end);
Var slice_rows(Var a, std::size_t begin, std::size_t end);
/// Embedding lookup: rows of table[V,E] selected by indices -> [n,E].
Var gather_rows(Var table, std::span<const int> indices);

Var tanh(Var a);
Var sigmoid(Var a);
Var exp(Var a);
Var abs(Var a);
/// Elementwise sign; the result is a constant (zero gradient everywhere).
Var sign(Var a);

Var sum(Var a);
Var mean(Var a);

/// Mean over rows of -log softmax(logits)[row, target[row]] (log-sum-exp form).
Var softmax_cross_entropy(Var logits, std::span<const int> targets);
/// Mean elementwise binary cross-entropy of probabilities against targets;
/// probabilities are floored at `floor` inside both logs.
Var binary_cross_entropy(Var probs, const Tensor& targets, double floor);
/// [n,1] -> [n,n] with out(i,j) = x_i - x_j.
Var pairwise_diff(Var column);

}  // namespace lsrlab::ndgrad
