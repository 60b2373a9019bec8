#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "seqtag/array.hpp"
#include "seqtag/param_set.hpp"
#include "seqtag/rng.hpp"
#include "seqtag/tape.hpp"

// 1-D residual network over frame sequences.
//
// Activations for N sequences of T steps with C channels are stored as an
// (N*T) x C matrix, sequence-major. A convolution kernel of width k is a
// (k*Cin) x Cout matrix whose row j*Cin + ci holds the weights of tap j and
// input channel ci.

namespace seqtag::conv {

struct Activation {
  nn::Var value;
  std::size_t sequences = 1;
  std::size_t length = 1;
};

/// Cross-correlation along time; output length floor((T + 2 pad - k) / stride) + 1.
Activation conv1d(const Activation& x, nn::Var kernel, std::size_t kernel_size,
                  std::size_t stride, std::size_t pad);
/// Single sequence x (T x Cin) with a k x Cin x Cout kernel.
Array conv1d(const Array& x, const Array& kernel, std::size_t stride, std::size_t pad);

/// y = x * scale + shift per channel, with scale and shift 1 x C.
nn::Var channel_affine(nn::Var x, nn::Var scale, nn::Var shift);
/// Normalizes each channel by its mean and variance over all rows, then
/// applies gamma and beta. Writes the batch statistics when requested.
nn::Var batch_norm(nn::Var x, nn::Var gamma, nn::Var beta, double eps, Array* mean_out = nullptr,
                   Array* var_out = nullptr);
/// Max over windows along time; padded positions never win.
Activation max_pool1d(const Activation& x, std::size_t kernel_size, std::size_t stride,
                      std::size_t pad);
/// Mean over time per sequence, N x C.
nn::Var mean_over_time(const Activation& x);

enum class NormMode {
  /// Batch statistics while training, running statistics at inference.
  batch,
  /// Plain per-channel affine map.
  affine,
};

struct ResNet1dSpec {
  /// Stem width followed by the output width of each stage.
  std::vector<std::size_t> channels{8, 8, 16, 32, 64};
  std::vector<std::size_t> blocks{1, 1, 1, 1};
  std::size_t stem_kernel = 7;
  std::size_t stem_stride = 2;
  bool stem_pool = true;
  std::size_t mid_kernel = 3;
  /// First block of every stage after the first uses stride 2.
  bool downsample = true;
  NormMode norm = NormMode::batch;
  double bn_eps = 1e-5;
  double bn_momentum = 0.9;

  static ResNet1dSpec desk();
  static ResNet1dSpec full();
  void validate() const;
};

/// Batch statistics observed during a training forward pass.
struct NormStat {
  std::string prefix;
  Array mean, var;
};

struct ForwardContext {
  bool training = false;
  std::vector<NormStat>* stats = nullptr;
};

class Norm {
 public:
  Norm(std::string prefix, std::size_t channels, NormMode mode, double eps);
  void init(ParamSet& params) const;
  nn::Var forward(nn::Tape& tape, const ParamSet& params, nn::Var x,
                  const ForwardContext& ctx) const;

 private:
  std::string prefix_;
  std::size_t channels_;
  NormMode mode_;
  double eps_;
};

/// relu(F(x) + shortcut(x)) with F = 1x1 -> k x k (strided) -> 1x1 and a
/// projection shortcut when the width or length changes.
class BottleneckBlock {
 public:
  BottleneckBlock(std::string prefix, std::size_t in_channels, std::size_t out_channels,
                  std::size_t stride, std::size_t mid_kernel, NormMode mode, double eps);

  void init(ParamSet& params, Rng& rng) const;
  Activation forward(nn::Tape& tape, const ParamSet& params, const Activation& x,
                     const ForwardContext& ctx) const;

  bool has_projection() const { return projection_; }
  std::size_t mid_channels() const { return mid_; }
  /// Names of the parameters inside F (not the shortcut).
  std::vector<std::string> residual_param_names() const;

 private:
  std::string prefix_;
  std::size_t in_, out_, mid_, stride_, mid_kernel_;
  bool projection_;
  std::vector<Norm> norms_;  // n1, n2, n3, then the shortcut norm when projecting
};

class ResNet1d {
 public:
  ResNet1d(std::string prefix, ResNet1dSpec spec, std::size_t input_dim, std::size_t classes);

  void init(ParamSet& params, Rng& rng) const;

  /// x is (N*T) x D. Returns N x V logits.
  nn::Var logits(nn::Tape& tape, const ParamSet& params, nn::Var x, std::size_t sequences,
                 std::size_t length, const ForwardContext& ctx = {}) const;
  /// Representation before global average pooling.
  Activation features(nn::Tape& tape, const ParamSet& params, nn::Var x, std::size_t sequences,
                      std::size_t length, const ForwardContext& ctx = {}) const;
  /// Inference scores in (0, 1) for a single T x D sequence, shape 1 x V.
  Array forward(const ParamSet& params, const Array& sequence) const;

  /// Exponential moving average of the running statistics.
  void update_running_stats(ParamSet& params, const std::vector<NormStat>& stats) const;

  const std::vector<BottleneckBlock>& blocks() const { return blocks_; }
  const ResNet1dSpec& spec() const { return spec_; }
  std::size_t classes() const { return classes_; }

 private:
  std::string prefix_;
  ResNet1dSpec spec_;
  std::size_t input_dim_, classes_;
  Norm stem_norm_;
  std::vector<BottleneckBlock> blocks_;
};

}  // namespace seqtag::conv
