#include "seqtag/resnet1d.hpp"

#include <cmath>
#include <limits>

#include "seqtag/error.hpp"
#include "seqtag/kernels.hpp"
#include "seqtag/ops.hpp"

namespace seqtag::conv {

using nn::Tape;
using nn::Var;

namespace {

void add_into(Array& dst, const Array& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

void require_activation(const Activation& x, const char* op) {
  require(x.sequences >= 1 && x.length >= 1, std::string(op) + ": empty activation");
  require(x.value.rows() == x.sequences * x.length,
          std::string(op) + ": rows do not equal sequences * length");
}

Array he_kernel(std::size_t kernel_size, std::size_t in, std::size_t out, Rng& rng) {
  const double stddev = std::sqrt(2.0 / static_cast<double>(kernel_size * in));
  return random_normal({kernel_size * in, out}, stddev, rng);
}

}  // namespace

Activation conv1d(const Activation& x, Var kernel, std::size_t kernel_size, std::size_t stride,
                  std::size_t pad) {
  require_activation(x, "conv1d");
  require(kernel_size >= 1 && stride >= 1, "conv1d: kernel size and stride must be positive");
  const std::size_t cin = x.value.cols();
  require(kernel.rows() == kernel_size * cin, "conv1d: kernel rows != kernel_size * in_channels");
  require(x.length + 2 * pad >= kernel_size, "conv1d: output length would be below 1");
  kernels::ConvShape s{x.sequences, x.length, cin, kernel.cols(), kernel_size, stride, pad};
  const std::size_t tout = s.out_length();
  Array out = Array::matrix(x.sequences * tout, s.out_channels);
  kernels::conv1d_forward(s, x.value.value().data().data(), kernel.value().data().data(),
                          out.data().data());
  Var input = x.value;
  Var y = input.tape().record(std::move(out), {input, kernel},
                              [input, kernel, s](Tape& t, const Array&, const Array& g) {
                                if (Array* gi = t.grad_slot(input)) {
                                  Array tmp(gi->shape(), 0.0);
                                  kernels::conv1d_backward_input(s, g.data().data(),
                                                                 kernel.value().data().data(),
                                                                 tmp.data().data());
                                  add_into(*gi, tmp);
                                }
                                if (Array* gk = t.grad_slot(kernel)) {
                                  Array tmp(gk->shape(), 0.0);
                                  kernels::conv1d_backward_weight(s, input.value().data().data(),
                                                                  g.data().data(),
                                                                  tmp.data().data());
                                  add_into(*gk, tmp);
                                }
                              });
  return Activation{y, x.sequences, tout};
}

Array conv1d(const Array& x, const Array& kernel, std::size_t stride, std::size_t pad) {
  require(kernel.rank() == 3, "conv1d: kernel must be k x Cin x Cout");
  const std::size_t k = kernel.shape()[0], cin = kernel.shape()[1], cout = kernel.shape()[2];
  require(x.cols() == cin, "conv1d: input channels do not match the kernel");
  Tape tape;
  Activation in{tape.constant(x.reshaped({x.rows(), x.cols()})), 1, x.rows()};
  return conv1d(in, tape.constant(kernel.reshaped({k * cin, cout})), k, stride, pad).value.value();
}

Var channel_affine(Var x, Var scale, Var shift) {
  const std::size_t rows = x.rows(), c = x.cols();
  require(scale.rows() == 1 && scale.cols() == c && shift.rows() == 1 && shift.cols() == c,
          "channel_affine: scale and shift must be 1 x channels");
  Array out = Array::matrix(rows, c);
  const Array& xv = x.value();
  const Array& sv = scale.value();
  const Array& bv = shift.value();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < c; ++j) out[r * c + j] = xv[r * c + j] * sv[j] + bv[j];
  return x.tape().record(std::move(out), {x, scale, shift},
                         [x, scale, shift, rows, c](Tape& t, const Array&, const Array& g) {
                           Array* gx = t.grad_slot(x);
                           Array* gs = t.grad_slot(scale);
                           Array* gb = t.grad_slot(shift);
                           const Array& xv = x.value();
                           const Array& sv = scale.value();
                           for (std::size_t r = 0; r < rows; ++r)
                             for (std::size_t j = 0; j < c; ++j) {
                               const double gr = g[r * c + j];
                               if (gx) (*gx)[r * c + j] += gr * sv[j];
                               if (gs) (*gs)[j] += gr * xv[r * c + j];
                               if (gb) (*gb)[j] += gr;
                             }
                         });
}

Var batch_norm(Var x, Var gamma, Var beta, double eps, Array* mean_out, Array* var_out) {
  const std::size_t rows = x.rows(), c = x.cols();
  require(gamma.cols() == c && beta.cols() == c && gamma.rows() == 1 && beta.rows() == 1,
          "batch_norm: gamma and beta must be 1 x channels");
  require(eps > 0.0, "batch_norm: eps must be positive");
  const Array& xv = x.value();
  const double m = static_cast<double>(rows);
  Array mean = Array::matrix(1, c), var = Array::matrix(1, c);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < c; ++j) mean[j] += xv[r * c + j];
  for (std::size_t j = 0; j < c; ++j) mean[j] /= m;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < c; ++j) {
      const double d = xv[r * c + j] - mean[j];
      var[j] += d * d;
    }
  for (std::size_t j = 0; j < c; ++j) var[j] /= m;
  Array inv_std = Array::matrix(1, c);
  for (std::size_t j = 0; j < c; ++j) inv_std[j] = 1.0 / std::sqrt(var[j] + eps);
  Array xhat = Array::matrix(rows, c), out = Array::matrix(rows, c);
  const Array& gv = gamma.value();
  const Array& bv = beta.value();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t j = 0; j < c; ++j) {
      xhat[r * c + j] = (xv[r * c + j] - mean[j]) * inv_std[j];
      out[r * c + j] = gv[j] * xhat[r * c + j] + bv[j];
    }
  if (mean_out) *mean_out = mean;
  if (var_out) *var_out = var;
  return x.tape().record(
      std::move(out), {x, gamma, beta},
      [x, gamma, beta, xhat, inv_std, rows, c, m](Tape& t, const Array&, const Array& g) {
        Array* gx = t.grad_slot(x);
        Array* gg = t.grad_slot(gamma);
        Array* gb = t.grad_slot(beta);
        std::vector<double> sum_g(c, 0.0), sum_gx(c, 0.0);
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t j = 0; j < c; ++j) {
            sum_g[j] += g[r * c + j];
            sum_gx[j] += g[r * c + j] * xhat[r * c + j];
          }
        if (gg)
          for (std::size_t j = 0; j < c; ++j) (*gg)[j] += sum_gx[j];
        if (gb)
          for (std::size_t j = 0; j < c; ++j) (*gb)[j] += sum_g[j];
        if (gx) {
          const Array& gv = gamma.value();
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < c; ++j) {
              const double k = gv[j] * inv_std[j] / m;
              (*gx)[r * c + j] +=
                  k * (m * g[r * c + j] - sum_g[j] - xhat[r * c + j] * sum_gx[j]);
            }
        }
      });
}

Activation max_pool1d(const Activation& x, std::size_t kernel_size, std::size_t stride,
                      std::size_t pad) {
  require_activation(x, "max_pool1d");
  require(kernel_size >= 1 && stride >= 1, "max_pool1d: kernel size and stride must be positive");
  require(pad < kernel_size, "max_pool1d: padding must be smaller than the window");
  require(x.length + 2 * pad >= kernel_size, "max_pool1d: output length would be below 1");
  const std::size_t c = x.value.cols();
  const std::size_t tout = (x.length + 2 * pad - kernel_size) / stride + 1;
  Array out = Array::matrix(x.sequences * tout, c);
  std::vector<std::size_t> source(out.size());
  const Array& xv = x.value.value();
  for (std::size_t seq = 0; seq < x.sequences; ++seq)
    for (std::size_t t = 0; t < tout; ++t)
      for (std::size_t j = 0; j < c; ++j) {
        double best = -std::numeric_limits<double>::infinity();
        std::size_t arg = 0;
        for (std::size_t w = 0; w < kernel_size; ++w) {
          const std::int64_t u = static_cast<std::int64_t>(t * stride + w) - static_cast<std::int64_t>(pad);
          if (u < 0 || u >= static_cast<std::int64_t>(x.length)) continue;
          const std::size_t idx = (seq * x.length + static_cast<std::size_t>(u)) * c + j;
          if (xv[idx] > best) {
            best = xv[idx];
            arg = idx;
          }
        }
        const std::size_t o = (seq * tout + t) * c + j;
        out[o] = best;
        source[o] = arg;
      }
  Var input = x.value;
  Var y = input.tape().record(std::move(out), {input},
                              [input, source](Tape& t, const Array&, const Array& g) {
                                Array* gi = t.grad_slot(input);
                                for (std::size_t o = 0; o < source.size(); ++o)
                                  (*gi)[source[o]] += g[o];
                              });
  return Activation{y, x.sequences, tout};
}

Var mean_over_time(const Activation& x) {
  require_activation(x, "mean_over_time");
  const std::size_t c = x.value.cols(), n = x.sequences, len = x.length;
  const double inv = 1.0 / static_cast<double>(len);
  const Array& xv = x.value.value();
  Array out = Array::matrix(n, c);
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t t = 0; t < len; ++t)
      for (std::size_t j = 0; j < c; ++j) out[s * c + j] += xv[(s * len + t) * c + j];
  for (auto& v : out.values()) v *= inv;
  Var input = x.value;
  return input.tape().record(std::move(out), {input},
                             [input, n, len, c, inv](Tape& t, const Array&, const Array& g) {
                               Array* gi = t.grad_slot(input);
                               for (std::size_t s = 0; s < n; ++s)
                                 for (std::size_t tt = 0; tt < len; ++tt)
                                   for (std::size_t j = 0; j < c; ++j)
                                     (*gi)[(s * len + tt) * c + j] += g[s * c + j] * inv;
                             });
}

// ---- spec ---------------------------------------------------------------------------

ResNet1dSpec ResNet1dSpec::desk() { return ResNet1dSpec{}; }

ResNet1dSpec ResNet1dSpec::full() {
  ResNet1dSpec s;
  s.channels = {512, 512, 1024, 2048, 4096};
  s.blocks = {3, 4, 6, 3};
  return s;
}

void ResNet1dSpec::validate() const {
  require(channels.size() == blocks.size() + 1,
          "resnet1d: need one stem width plus one width per stage");
  require(!blocks.empty(), "resnet1d: need at least one stage");
  for (std::size_t i = 0; i < channels.size(); ++i) {
    require(channels[i] >= 1, "resnet1d: channel widths must be positive");
    if (i > 0) require(channels[i] >= channels[i - 1], "resnet1d: channel widths must not decrease");
  }
  for (std::size_t b : blocks) require(b >= 1, "resnet1d: each stage needs at least one block");
  require(stem_kernel >= 1 && stem_stride >= 1 && mid_kernel >= 1,
          "resnet1d: kernel sizes and strides must be positive");
  require(mid_kernel % 2 == 1, "resnet1d: the middle kernel must have odd width");
  require(bn_eps > 0.0, "resnet1d: bn_eps must be positive");
  require(bn_momentum >= 0.0 && bn_momentum < 1.0, "resnet1d: bn_momentum must be in [0, 1)");
}

// ---- Norm ---------------------------------------------------------------------------

Norm::Norm(std::string prefix, std::size_t channels, NormMode mode, double eps)
    : prefix_(std::move(prefix)), channels_(channels), mode_(mode), eps_(eps) {}

void Norm::init(ParamSet& params) const {
  params.add(prefix_ + "gamma", Array::matrix(1, channels_, 1.0));
  params.add(prefix_ + "beta", Array::matrix(1, channels_));
  if (mode_ == NormMode::batch) {
    params.add(prefix_ + "running_mean", Array::matrix(1, channels_), false);
    params.add(prefix_ + "running_var", Array::matrix(1, channels_, 1.0), false);
  }
}

Var Norm::forward(Tape& tape, const ParamSet& params, Var x, const ForwardContext& ctx) const {
  Var gamma = tape.param(params, prefix_ + "gamma");
  Var beta = tape.param(params, prefix_ + "beta");
  if (mode_ == NormMode::affine) return channel_affine(x, gamma, beta);
  if (ctx.training) {
    NormStat stat{prefix_, {}, {}};
    Var y = batch_norm(x, gamma, beta, eps_, &stat.mean, &stat.var);
    if (ctx.stats) ctx.stats->push_back(std::move(stat));
    return y;
  }
  const Array& mean = params.at(prefix_ + "running_mean");
  const Array& var = params.at(prefix_ + "running_var");
  Array inv_std(mean.shape(), 0.0), neg_mean(mean.shape(), 0.0);
  for (std::size_t j = 0; j < channels_; ++j) {
    inv_std[j] = 1.0 / std::sqrt(var[j] + eps_);
    neg_mean[j] = -mean[j] * inv_std[j];
  }
  // gamma * (x - mean) / std + beta = x * (gamma / std) + (beta - gamma * mean / std)
  Var scale = nn::mul(gamma, tape.constant(inv_std));
  Var shift = nn::add(beta, nn::mul(gamma, tape.constant(neg_mean)));
  return channel_affine(x, scale, shift);
}

// ---- BottleneckBlock ------------------------------------------------------------------

BottleneckBlock::BottleneckBlock(std::string prefix, std::size_t in_channels,
                                 std::size_t out_channels, std::size_t stride,
                                 std::size_t mid_kernel, NormMode mode, double eps)
    : prefix_(std::move(prefix)),
      in_(in_channels),
      out_(out_channels),
      mid_(std::max<std::size_t>(1, out_channels / 4)),
      stride_(stride),
      mid_kernel_(mid_kernel),
      projection_(in_channels != out_channels || stride != 1) {
  require(in_ >= 1 && out_ >= 1 && stride_ >= 1, "bottleneck: widths and stride must be positive");
  norms_.emplace_back(prefix_ + "n1.", mid_, mode, eps);
  norms_.emplace_back(prefix_ + "n2.", mid_, mode, eps);
  norms_.emplace_back(prefix_ + "n3.", out_, mode, eps);
  if (projection_) norms_.emplace_back(prefix_ + "ns.", out_, mode, eps);
}

void BottleneckBlock::init(ParamSet& params, Rng& rng) const {
  params.add(prefix_ + "c1", he_kernel(1, in_, mid_, rng));
  params.add(prefix_ + "c2", he_kernel(mid_kernel_, mid_, mid_, rng));
  params.add(prefix_ + "c3", he_kernel(1, mid_, out_, rng));
  if (projection_) params.add(prefix_ + "cs", he_kernel(1, in_, out_, rng));
  for (const auto& n : norms_) n.init(params);
}

std::vector<std::string> BottleneckBlock::residual_param_names() const {
  std::vector<std::string> names{prefix_ + "c1", prefix_ + "c2", prefix_ + "c3"};
  for (const char* n : {"n1.", "n2.", "n3."})
    for (const char* f : {"gamma", "beta"}) names.push_back(prefix_ + n + f);
  return names;
}

Activation BottleneckBlock::forward(Tape& tape, const ParamSet& params, const Activation& x,
                                    const ForwardContext& ctx) const {
  require(x.value.cols() == in_, "bottleneck: input width does not match the block");
  Activation h = conv1d(x, tape.param(params, prefix_ + "c1"), 1, 1, 0);
  h.value = nn::relu(norms_[0].forward(tape, params, h.value, ctx));
  h = conv1d(h, tape.param(params, prefix_ + "c2"), mid_kernel_, stride_, mid_kernel_ / 2);
  h.value = nn::relu(norms_[1].forward(tape, params, h.value, ctx));
  h = conv1d(h, tape.param(params, prefix_ + "c3"), 1, 1, 0);
  h.value = norms_[2].forward(tape, params, h.value, ctx);
  Activation shortcut = x;
  if (projection_) {
    shortcut = conv1d(x, tape.param(params, prefix_ + "cs"), 1, stride_, 0);
    shortcut.value = norms_[3].forward(tape, params, shortcut.value, ctx);
  }
  require(shortcut.length == h.length, "bottleneck: residual and shortcut lengths differ");
  return Activation{nn::relu(nn::add(h.value, shortcut.value)), h.sequences, h.length};
}

// ---- ResNet1d ---------------------------------------------------------------------------

ResNet1d::ResNet1d(std::string prefix, ResNet1dSpec spec, std::size_t input_dim,
                   std::size_t classes)
    : prefix_(std::move(prefix)),
      spec_(std::move(spec)),
      input_dim_(input_dim),
      classes_(classes),
      stem_norm_(prefix_ + "stem_norm.", spec_.channels.empty() ? 1 : spec_.channels.front(),
                 spec_.norm, spec_.bn_eps) {
  spec_.validate();
  require(input_dim_ >= 1 && classes_ >= 1, "resnet1d: input dim and classes must be positive");
  std::size_t in = spec_.channels.front();
  for (std::size_t stage = 0; stage < spec_.blocks.size(); ++stage) {
    const std::size_t out = spec_.channels[stage + 1];
    for (std::size_t b = 0; b < spec_.blocks[stage]; ++b) {
      const std::size_t stride = (spec_.downsample && stage > 0 && b == 0) ? 2 : 1;
      blocks_.emplace_back(prefix_ + "s" + std::to_string(stage) + "b" + std::to_string(b) + ".",
                           in, out, stride, spec_.mid_kernel, spec_.norm, spec_.bn_eps);
      in = out;
    }
  }
}

void ResNet1d::init(ParamSet& params, Rng& rng) const {
  params.add(prefix_ + "stem", he_kernel(spec_.stem_kernel, input_dim_, spec_.channels.front(), rng));
  stem_norm_.init(params);
  for (const auto& b : blocks_) b.init(params, rng);
  params.add(prefix_ + "fc_w", glorot(spec_.channels.back(), classes_, rng));
  params.add(prefix_ + "fc_b", Array::matrix(1, classes_));
}

Activation ResNet1d::features(Tape& tape, const ParamSet& params, Var x, std::size_t sequences,
                              std::size_t length, const ForwardContext& ctx) const {
  require(x.cols() == input_dim_, "resnet1d: frames have " + std::to_string(x.cols()) +
                                      " features, expected " + std::to_string(input_dim_));
  Activation h{x, sequences, length};
  h = conv1d(h, tape.param(params, prefix_ + "stem"), spec_.stem_kernel, spec_.stem_stride,
             spec_.stem_kernel / 2);
  h.value = nn::relu(stem_norm_.forward(tape, params, h.value, ctx));
  if (spec_.stem_pool) h = max_pool1d(h, 3, 2, 1);
  for (const auto& b : blocks_) h = b.forward(tape, params, h, ctx);
  return h;
}

Var ResNet1d::logits(Tape& tape, const ParamSet& params, Var x, std::size_t sequences,
                     std::size_t length, const ForwardContext& ctx) const {
  Var pooled = mean_over_time(features(tape, params, x, sequences, length, ctx));
  return nn::linear(pooled, tape.param(params, prefix_ + "fc_w"),
                    tape.param(params, prefix_ + "fc_b"));
}

Array ResNet1d::forward(const ParamSet& params, const Array& sequence) const {
  Tape tape;
  Var x = tape.constant(sequence.reshaped({sequence.rows(), sequence.cols()}));
  return nn::sigmoid(logits(tape, params, x, 1, sequence.rows())).value();
}

void ResNet1d::update_running_stats(ParamSet& params, const std::vector<NormStat>& stats) const {
  const double m = spec_.bn_momentum;
  for (const auto& s : stats) {
    Array& mean = params.at(s.prefix + "running_mean");
    Array& var = params.at(s.prefix + "running_var");
    for (std::size_t j = 0; j < mean.size(); ++j) {
      mean[j] = m * mean[j] + (1.0 - m) * s.mean[j];
      var[j] = m * var[j] + (1.0 - m) * s.var[j];
    }
  }
}

}  // namespace seqtag::conv
