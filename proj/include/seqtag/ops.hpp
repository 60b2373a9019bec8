#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include "seqtag/array.hpp"
#include "seqtag/tape.hpp"

namespace seqtag::nn {

// ---- scalar and array activations ------------------------------------------

/// Logistic function, evaluated without overflow for either sign of x.
double sigmoid(double x);
/// log(sigmoid(x)) = -softplus(-x).
double log_sigmoid(double x);

Array sigmoid(const Array& x);
/// Max-subtracted softmax along `axis` of an n-dimensional array.
Array softmax(const Array& x, std::size_t axis);

// ---- tape ops ----------------------------------------------------------------
// Every Var is treated as a rows x cols matrix. Bias vectors are 1 x n.

Var matmul(Var a, Var b, bool trans_a = false, bool trans_b = false);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
/// a + bias, with bias (1 x cols) broadcast over rows.
Var add_bias(Var a, Var bias);
/// Multiplies row r of `a` by s[r]; `s` is rows x 1.
Var scale_rows(Var a, Var s);
/// Affine map x * w + b.
Var linear(Var x, Var w, Var b);

Var sigmoid(Var x);
Var tanh(Var x);
Var relu(Var x);
Var softmax_rows(Var x);
Var softmax_cols(Var x);
Var transpose(Var x);

Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var slice_cols(Var x, std::size_t begin, std::size_t end);
Var slice_rows(Var x, std::size_t begin, std::size_t end);
Var reshape(Var x, std::size_t rows, std::size_t cols);
/// out[:, j] = x[:, index[j]].
Var gather_cols(Var x, const std::vector<std::size_t>& index);
/// Row r of the result is row r of `when_true` if keep[r], else of `when_false`.
Var select_rows(const std::vector<bool>& keep, Var when_true, Var when_false);

/// Identity forward; blocks all gradient flow to the input.
Var stop_gradient(Var x);

Var sum(Var x);
Var mean(Var x);
/// Column sums as a 1 x cols row.
Var col_sum(Var x);
/// Mean over each row, as a rows x 1 column.
Var row_mean(Var x);
/// sum(x .* weights) for a constant weight array of the same shape.
Var weighted_sum(Var x, const Array& weights);

/// Softmax-gated mixture. `gate_logits` and `values` are N x (U*k) with the
/// k mixture entries of unit u stored contiguously; the result is N x U with
/// out[n,u] = sum_i softmax(gate_logits[n,u,:])_i * values[n,u,i].
Var mix(Var gate_logits, Var values, std::size_t k);

/// S[i,j] = -||x_i - c_j||^2 for X (T x D) and C (K x D).
Var neg_sq_dist(Var x, Var c);
/// S[i,j] = sum_p w[p] * tanh(u[i,p] + v[j,p] + b[p]) for u (T x P), v (K x P),
/// b and w (1 x P).
Var pairwise_tanh_score(Var u, Var v, Var b, Var w);
/// Scales each length-`block` segment of every row to unit L2 norm
/// (x / sqrt(|x|^2 + eps)).
Var l2_normalize_blocks(Var x, std::size_t block, double eps = 1e-12);

/// Inverted dropout: keeps each entry with probability `keep`, scaling by 1/keep.
Var dropout(Var x, double keep, std::mt19937_64& rng);

}  // namespace seqtag::nn
