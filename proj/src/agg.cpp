#include "seqtag/agg.hpp"

#include "seqtag/error.hpp"
#include "seqtag/ops.hpp"

namespace seqtag::agg {

using nn::Tape;
using nn::Var;

namespace {

Array as_matrix(const Array& a) { return a.reshaped({a.rows(), a.cols()}); }

Array as_row(const Array& a) { return a.reshaped({1, a.size()}); }

void require_frames(Var x, const char* op) {
  require(x.rows() >= 1, std::string(op) + ": empty input");
}

}  // namespace

// ---- attention pooling -------------------------------------------------------------

AttentionParams AttentionParams::random(std::size_t input_dim, std::size_t proj_size,
                                        std::size_t hops, Rng& rng) {
  require(input_dim >= 1 && proj_size >= 1 && hops >= 1,
          "attention: dims and hop count must be positive");
  return AttentionParams{glorot(proj_size, input_dim, rng), glorot(hops, proj_size, rng)};
}

void AttentionParams::validate() const {
  require(projection.rows() >= 1 && attention.rows() >= 1, "attention: empty parameters");
  require(attention.cols() == projection.rows(),
          "attention: W_a columns must equal the projection size");
}

Var attention_pool(Var x, Var projection, Var attention) {
  require_frames(x, "attention_pool");
  require(projection.cols() == x.cols(), "attention_pool: projection width != feature dim");
  require(attention.cols() == projection.rows(), "attention_pool: W_a columns != projection size");
  Var hidden = nn::tanh(nn::matmul(x, projection, false, true));         // T x P
  Var weights = nn::softmax_cols(nn::matmul(hidden, attention, false, true));  // T x H
  Var pooled = nn::matmul(weights, x, true, false);                     // H x D
  return nn::reshape(pooled, 1, pooled.rows() * pooled.cols());
}

Array attention_pool(const Array& x, const AttentionParams& p) {
  p.validate();
  Tape tape;
  return attention_pool(tape.constant(as_matrix(x)), tape.constant(p.projection),
                        tape.constant(p.attention))
      .value();
}

// ---- assignment kernels ------------------------------------------------------------

Var assign_alpha(Var x, Var centers, double alpha) {
  require(alpha > 0.0, "assign_alpha: alpha must be positive");
  require_frames(x, "assign_alpha");
  return nn::softmax_rows(nn::scale(nn::neg_sq_dist(x, centers), alpha));
}

Array assign_alpha(const Array& x, const Array& centers, double alpha) {
  Tape tape;
  return assign_alpha(tape.constant(as_matrix(x)), tape.constant(as_matrix(centers)), alpha)
      .value();
}

Var assign_decoupled(Var x, Var w, Var b) {
  require_frames(x, "assign_decoupled");
  require(w.cols() == x.cols(), "assign_decoupled: w width != feature dim");
  require(b.rows() == 1 && b.cols() == w.rows(), "assign_decoupled: b must be 1 x K");
  return nn::softmax_rows(nn::add_bias(nn::matmul(x, w, false, true), b));
}

Array assign_decoupled(const Array& x, const Array& w, const Array& b) {
  Tape tape;
  return assign_decoupled(tape.constant(as_matrix(x)), tape.constant(as_matrix(w)),
                          tape.constant(as_row(b)))
      .value();
}

AttentionKernelParams AttentionKernelParams::random(std::size_t input_dim, std::size_t proj_size,
                                                    Rng& rng) {
  require(input_dim >= 1 && proj_size >= 1, "attention kernel: dims must be positive");
  AttentionKernelParams p;
  p.center_proj = glorot(proj_size, input_dim, rng);
  p.input_proj = glorot(proj_size, input_dim, rng);
  p.bias = Array::matrix(1, proj_size);
  p.score = glorot(1, proj_size, rng);
  return p;
}

Var assign_attention(Var x, Var centers, Var center_proj, Var input_proj, Var bias, Var score,
                     SoftmaxAxis axis) {
  require_frames(x, "assign_attention");
  require(centers.cols() == x.cols(), "assign_attention: center width != feature dim");
  Var u = nn::matmul(x, input_proj, false, true);         // T x P
  Var v = nn::matmul(centers, center_proj, false, true);  // K x P
  Var logits = nn::pairwise_tanh_score(u, v, bias, score);
  return axis == SoftmaxAxis::centers ? nn::softmax_rows(logits) : nn::softmax_cols(logits);
}

Array assign_attention(const Array& x, const Array& centers, const AttentionKernelParams& p,
                       SoftmaxAxis axis) {
  Tape tape;
  return assign_attention(tape.constant(as_matrix(x)), tape.constant(as_matrix(centers)),
                          tape.constant(p.center_proj), tape.constant(p.input_proj),
                          tape.constant(as_row(p.bias)), tape.constant(as_row(p.score)), axis)
      .value();
}

// ---- VLAD ---------------------------------------------------------------------------

Var vlad_aggregate(Var x, Var centers, Var assignment) {
  require(centers.cols() == x.cols(), "vlad_aggregate: center width != feature dim");
  require(assignment.rows() == x.rows() && assignment.cols() == centers.rows(),
          "vlad_aggregate: assignment must be T x K");
  Var weighted = nn::matmul(assignment, x, true, false);                        // K x D
  Var mass = nn::transpose(nn::col_sum(assignment));                            // K x 1
  Var residual = nn::sub(weighted, nn::scale_rows(centers, mass));
  return nn::reshape(residual, 1, residual.rows() * residual.cols());
}

Array vlad_aggregate(const Array& x, const Array& centers, const Array& assignment) {
  Tape tape;
  return vlad_aggregate(tape.constant(as_matrix(x)), tape.constant(as_matrix(centers)),
                        tape.constant(as_matrix(assignment)))
      .value();
}

Var vlad_cluster_loss(Var x, Var centers, Var assignment) {
  Var dist = nn::neg_sq_dist(x, centers);
  require(assignment.rows() == dist.rows() && assignment.cols() == dist.cols(),
          "vlad_cluster_loss: assignment must be T x K");
  return nn::scale(nn::sum(nn::mul(assignment, dist)), -1.0);
}

double vlad_cluster_loss(const Array& x, const Array& centers, const Array& assignment) {
  Tape tape;
  return vlad_cluster_loss(tape.constant(as_matrix(x)), tape.constant(as_matrix(centers)),
                           tape.constant(as_matrix(assignment)))
      .value()[0];
}

Var normalize_descriptor(Var descriptor, std::size_t dim, DescriptorNorm norm) {
  Var out = descriptor;
  if (norm == DescriptorNorm::intra || norm == DescriptorNorm::intra_global)
    out = nn::l2_normalize_blocks(out, dim);
  if (norm == DescriptorNorm::global || norm == DescriptorNorm::intra_global)
    out = nn::l2_normalize_blocks(out, out.cols());
  return out;
}

// ---- layers ----------------------------------------------------------------------------

void VladConfig::validate() const {
  require(centers >= 1, "vlad: need at least one center");
  require(kernel != KernelKind::alpha || alpha > 0.0, "vlad: alpha must be positive");
  require(proj_size >= 1, "vlad: projection size must be positive");
  require(cluster_weight >= 0.0, "vlad: cluster loss weight must be non-negative");
  require(center_scale > 0.0, "vlad: center scale must be positive");
}

VladLayer::VladLayer(std::string prefix, std::size_t input_dim, VladConfig config)
    : prefix_(std::move(prefix)), input_dim_(input_dim), config_(config) {
  config_.validate();
  require(input_dim_ >= 1, "vlad: input dim must be positive");
}

void VladLayer::init(ParamSet& params, Rng& rng) const {
  const std::size_t k = config_.centers, d = input_dim_;
  Array centers = random_normal({k, d}, config_.center_scale, rng);
  switch (config_.kernel) {
    case KernelKind::alpha:
      break;
    case KernelKind::decoupled: {
      // Start at the alpha kernel: w_j = 2 alpha c_j, b_j = -alpha |c_j|^2.
      Array w = Array::matrix(k, d), b = Array::matrix(1, k);
      for (std::size_t j = 0; j < k; ++j) {
        double norm2 = 0.0;
        for (std::size_t p = 0; p < d; ++p) {
          w(j, p) = 2.0 * config_.alpha * centers(j, p);
          norm2 += centers(j, p) * centers(j, p);
        }
        b[j] = -config_.alpha * norm2;
      }
      params.add(prefix_ + "assign_w", std::move(w));
      params.add(prefix_ + "assign_b", std::move(b));
      break;
    }
    case KernelKind::attention: {
      AttentionKernelParams p = AttentionKernelParams::random(d, config_.proj_size, rng);
      params.add(prefix_ + "attn_wc", std::move(p.center_proj));
      params.add(prefix_ + "attn_wi", std::move(p.input_proj));
      params.add(prefix_ + "attn_b", std::move(p.bias));
      params.add(prefix_ + "attn_wa", std::move(p.score));
      break;
    }
  }
  params.add(prefix_ + "centers", std::move(centers));
}

Var VladLayer::assignment(Tape& tape, const ParamSet& params, Var x) const {
  Var centers = tape.param(params, prefix_ + "centers");
  switch (config_.kernel) {
    case KernelKind::alpha:
      return assign_alpha(x, centers, config_.alpha);
    case KernelKind::decoupled:
      return assign_decoupled(x, tape.param(params, prefix_ + "assign_w"),
                              tape.param(params, prefix_ + "assign_b"));
    case KernelKind::attention:
      break;
  }
  return assign_attention(x, centers, tape.param(params, prefix_ + "attn_wc"),
                          tape.param(params, prefix_ + "attn_wi"),
                          tape.param(params, prefix_ + "attn_b"),
                          tape.param(params, prefix_ + "attn_wa"), config_.axis);
}

VladLayer::Output VladLayer::forward(Tape& tape, const ParamSet& params, Var x) const {
  Var a = assignment(tape, params, x);
  Var centers = tape.param(params, prefix_ + "centers");
  Var descriptor = vlad_aggregate(x, centers, a);
  return Output{normalize_descriptor(descriptor, input_dim_, config_.norm),
                vlad_cluster_loss(x, centers, a)};
}

AttentionPoolLayer::AttentionPoolLayer(std::string prefix, std::size_t input_dim,
                                       std::size_t proj_size, std::size_t hops)
    : prefix_(std::move(prefix)), input_dim_(input_dim), proj_size_(proj_size), hops_(hops) {
  require(input_dim_ >= 1 && proj_size_ >= 1 && hops_ >= 1,
          "attention: dims and hop count must be positive");
}

void AttentionPoolLayer::init(ParamSet& params, Rng& rng) const {
  AttentionParams p = AttentionParams::random(input_dim_, proj_size_, hops_, rng);
  params.add(prefix_ + "proj", std::move(p.projection));
  params.add(prefix_ + "attn", std::move(p.attention));
}

Var AttentionPoolLayer::forward(Tape& tape, const ParamSet& params, Var x) const {
  return attention_pool(x, tape.param(params, prefix_ + "proj"),
                        tape.param(params, prefix_ + "attn"));
}

}  // namespace seqtag::agg
