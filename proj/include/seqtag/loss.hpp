#pragma once

#include <cstddef>

#include "seqtag/array.hpp"
#include "seqtag/tape.hpp"

namespace seqtag::nn {

/// Mean binary cross-entropy over all N*V entries, computed from logits as
/// max(x,0) - x*y + log1p(exp(-|x|)).
double sigmoid_cross_entropy(const Array& logits, const Array& labels);
Var sigmoid_cross_entropy(Var logits, const Array& labels);

/// Softmax cross-entropy against each label row normalized to sum to one,
/// averaged over rows. Throws ValidationError on an all-zero label row.
double smoothed_softmax_loss(const Array& logits, const Array& labels);
Var smoothed_softmax_loss(Var logits, const Array& labels);

/// Mean binary cross-entropy of a mixture-of-experts prediction, evaluated in
/// log space from the raw gate and expert logits (both N x (V*k)):
///   log p     = logsumexp_i(log g_i + log sigmoid(e_i))
///   log (1-p) = logsumexp_i(log g_i + log sigmoid(-e_i))
/// so saturated experts never produce log(0).
double moe_log_loss(const Array& gate_logits, const Array& expert_logits, const Array& labels,
                    std::size_t k);
Var moe_log_loss(Var gate_logits, Var expert_logits, const Array& labels, std::size_t k);

}  // namespace seqtag::nn
