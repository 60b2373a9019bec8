#pragma once

#include <cstddef>
#include <string>

#include "seqtag/array.hpp"
#include "seqtag/param_set.hpp"
#include "seqtag/rng.hpp"
#include "seqtag/tape.hpp"

// Order-free aggregation of a frame matrix X (T x D): multi-hop attention
// pooling and soft-assignment VLAD. All functions take one sample truncated to
// its true length, so padding never enters a softmax or a sum.

namespace seqtag::agg {

// ---- attention pooling -------------------------------------------------------------

struct AttentionParams {
  Array projection;  // W_i, P x D
  Array attention;   // W_a, H x P

  std::size_t hops() const { return attention.rows(); }
  std::size_t proj_size() const { return projection.rows(); }
  std::size_t input_dim() const { return projection.cols(); }

  static AttentionParams random(std::size_t input_dim, std::size_t proj_size, std::size_t hops,
                                Rng& rng);
  void validate() const;
};

/// flatten(softmax_T(W_a tanh(W_i X^T)) X), a 1 x (H*D) row.
Array attention_pool(const Array& x, const AttentionParams& p);
nn::Var attention_pool(nn::Var x, nn::Var projection, nn::Var attention);

// ---- assignment kernels ------------------------------------------------------------

/// Which axis the attention kernel normalizes over.
enum class SoftmaxAxis { centers, inputs };

/// A[i,j] = softmax_j(-alpha ||x_i - c_j||^2).
Array assign_alpha(const Array& x, const Array& centers, double alpha);
nn::Var assign_alpha(nn::Var x, nn::Var centers, double alpha);

/// A[i,j] = softmax_j(w_j . x_i + b_j) for w (K x D) and b (1 x K).
Array assign_decoupled(const Array& x, const Array& w, const Array& b);
nn::Var assign_decoupled(nn::Var x, nn::Var w, nn::Var b);

struct AttentionKernelParams {
  Array center_proj;  // W_c, P x D
  Array input_proj;   // W_i, P x D (separate from the pooling projection)
  Array bias;         // 1 x P
  Array score;        // W_a, 1 x P

  static AttentionKernelParams random(std::size_t input_dim, std::size_t proj_size, Rng& rng);
};

/// A[i,j] proportional to exp(W_a tanh(W_c c_j + W_i x_i + b)), normalized
/// over centers (rows sum to 1) or over inputs (columns sum to 1).
Array assign_attention(const Array& x, const Array& centers, const AttentionKernelParams& p,
                       SoftmaxAxis axis);
nn::Var assign_attention(nn::Var x, nn::Var centers, nn::Var center_proj, nn::Var input_proj,
                         nn::Var bias, nn::Var score, SoftmaxAxis axis);

// ---- VLAD ---------------------------------------------------------------------------

/// O(j) = sum_i A[i,j] (x_i - c_j), concatenated over j into a 1 x (K*D) row.
Array vlad_aggregate(const Array& x, const Array& centers, const Array& assignment);
nn::Var vlad_aggregate(nn::Var x, nn::Var centers, nn::Var assignment);

/// sum_i sum_j A[i,j] ||x_i - c_j||^2.
double vlad_cluster_loss(const Array& x, const Array& centers, const Array& assignment);
nn::Var vlad_cluster_loss(nn::Var x, nn::Var centers, nn::Var assignment);

enum class DescriptorNorm { none, intra, global, intra_global };

/// Optional per-center then whole-descriptor unit L2 normalization.
nn::Var normalize_descriptor(nn::Var descriptor, std::size_t dim, DescriptorNorm norm);

enum class KernelKind { alpha, decoupled, attention };

struct VladConfig {
  std::size_t centers = 10;
  KernelKind kernel = KernelKind::attention;
  SoftmaxAxis axis = SoftmaxAxis::centers;
  double alpha = 0.1;
  std::size_t proj_size = 32;  // attention kernel
  double cluster_weight = 1e-3;
  DescriptorNorm norm = DescriptorNorm::intra_global;
  /// Initial centers are N(0, center_scale^2); features are standardized at load.
  double center_scale = 1.0;

  void validate() const;
};

/// VLAD layer with parameters under `prefix` in a ParamSet.
class VladLayer {
 public:
  VladLayer(std::string prefix, std::size_t input_dim, VladConfig config);

  void init(ParamSet& params, Rng& rng) const;

  struct Output {
    nn::Var descriptor;    // 1 x (K*D), after normalization
    nn::Var cluster_loss;  // 1 x 1, unweighted
  };
  nn::Var assignment(nn::Tape& tape, const ParamSet& params, nn::Var x) const;
  Output forward(nn::Tape& tape, const ParamSet& params, nn::Var x) const;

  std::size_t output_dim() const { return config_.centers * input_dim_; }
  const VladConfig& config() const { return config_; }

 private:
  std::string prefix_;
  std::size_t input_dim_;
  VladConfig config_;
};

/// Multi-hop attention pooling layer with parameters under `prefix`.
class AttentionPoolLayer {
 public:
  AttentionPoolLayer(std::string prefix, std::size_t input_dim, std::size_t proj_size,
                     std::size_t hops);

  void init(ParamSet& params, Rng& rng) const;
  nn::Var forward(nn::Tape& tape, const ParamSet& params, nn::Var x) const;
  std::size_t output_dim() const { return hops_ * input_dim_; }

 private:
  std::string prefix_;
  std::size_t input_dim_, proj_size_, hops_;
};

}  // namespace seqtag::agg
