#include "seqtag/kernels.hpp"

#include <atomic>
#include <cstdint>
#include <vector>

namespace seqtag::kernels {

namespace {

std::atomic<Execution> g_execution{Execution::parallel};

// Work below this many multiply-adds stays serial even in parallel mode.
constexpr std::size_t kParallelThreshold = 1 << 14;

inline double a_at(bool trans, const double* a, std::size_t ld, std::size_t i, std::size_t p) {
  return trans ? a[p * ld + i] : a[i * ld + p];
}

inline void gemm_row(bool trans_a, bool trans_b, std::size_t i, std::size_t n, std::size_t k,
                     const double* a, std::size_t lda, const double* b, std::size_t ldb,
                     double* c, std::size_t ldc, bool accumulate, double* acc) {
  for (std::size_t j = 0; j < n; ++j) acc[j] = 0.0;
  if (!trans_b) {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a_at(trans_a, a, lda, i, p);
      const double* brow = b + p * ldb;
      for (std::size_t j = 0; j < n; ++j) acc[j] += aip * brow[j];
    }
  } else {
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a_at(trans_a, a, lda, i, p);
      for (std::size_t j = 0; j < n; ++j) acc[j] += aip * b[j * ldb + p];
    }
  }
  double* crow = c + i * ldc;
  if (accumulate) {
    for (std::size_t j = 0; j < n; ++j) crow[j] += acc[j];
  } else {
    for (std::size_t j = 0; j < n; ++j) crow[j] = acc[j];
  }
}

inline void conv_forward_row(const ConvShape& s, std::size_t seq, std::size_t t,
                             const double* input, const double* weight, double* output) {
  double* out = output + (seq * s.out_length() + t) * s.out_channels;
  for (std::size_t co = 0; co < s.out_channels; ++co) out[co] = 0.0;
  for (std::size_t j = 0; j < s.kernel; ++j) {
    const std::int64_t u = static_cast<std::int64_t>(t * s.stride + j) - static_cast<std::int64_t>(s.pad);
    if (u < 0 || u >= static_cast<std::int64_t>(s.length)) continue;
    const double* in = input + (seq * s.length + static_cast<std::size_t>(u)) * s.in_channels;
    for (std::size_t ci = 0; ci < s.in_channels; ++ci) {
      const double x = in[ci];
      const double* w = weight + (j * s.in_channels + ci) * s.out_channels;
      for (std::size_t co = 0; co < s.out_channels; ++co) out[co] += x * w[co];
    }
  }
}

inline void conv_backward_input_seq(const ConvShape& s, std::size_t seq, const double* grad_out,
                                    const double* weight, double* grad_in) {
  double* gin = grad_in + seq * s.length * s.in_channels;
  for (std::size_t i = 0; i < s.length * s.in_channels; ++i) gin[i] = 0.0;
  const std::size_t tout = s.out_length();
  for (std::size_t t = 0; t < tout; ++t) {
    const double* go = grad_out + (seq * tout + t) * s.out_channels;
    for (std::size_t j = 0; j < s.kernel; ++j) {
      const std::int64_t u = static_cast<std::int64_t>(t * s.stride + j) - static_cast<std::int64_t>(s.pad);
      if (u < 0 || u >= static_cast<std::int64_t>(s.length)) continue;
      double* g = gin + static_cast<std::size_t>(u) * s.in_channels;
      for (std::size_t ci = 0; ci < s.in_channels; ++ci) {
        const double* w = weight + (j * s.in_channels + ci) * s.out_channels;
        double acc = 0.0;
        for (std::size_t co = 0; co < s.out_channels; ++co) acc += go[co] * w[co];
        g[ci] += acc;
      }
    }
  }
}

inline void conv_backward_weight_row(const ConvShape& s, std::size_t j, std::size_t ci,
                                     const double* input, const double* grad_out,
                                     double* grad_weight) {
  double* gw = grad_weight + (j * s.in_channels + ci) * s.out_channels;
  for (std::size_t co = 0; co < s.out_channels; ++co) gw[co] = 0.0;
  const std::size_t tout = s.out_length();
  for (std::size_t seq = 0; seq < s.sequences; ++seq) {
    for (std::size_t t = 0; t < tout; ++t) {
      const std::int64_t u = static_cast<std::int64_t>(t * s.stride + j) - static_cast<std::int64_t>(s.pad);
      if (u < 0 || u >= static_cast<std::int64_t>(s.length)) continue;
      const double x = input[(seq * s.length + static_cast<std::size_t>(u)) * s.in_channels + ci];
      const double* go = grad_out + (seq * tout + t) * s.out_channels;
      for (std::size_t co = 0; co < s.out_channels; ++co) gw[co] += x * go[co];
    }
  }
}

}  // namespace

void set_execution(Execution mode) { g_execution.store(mode); }
Execution execution() { return g_execution.load(); }

namespace serial {

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          const double* a, std::size_t lda, const double* b, std::size_t ldb, double* c,
          std::size_t ldc, bool accumulate) {
  std::vector<double> acc(n);
  for (std::size_t i = 0; i < m; ++i)
    gemm_row(trans_a, trans_b, i, n, k, a, lda, b, ldb, c, ldc, accumulate, acc.data());
}

void conv1d_forward(const ConvShape& s, const double* input, const double* weight, double* output) {
  for (std::size_t seq = 0; seq < s.sequences; ++seq)
    for (std::size_t t = 0; t < s.out_length(); ++t)
      conv_forward_row(s, seq, t, input, weight, output);
}

void conv1d_backward_input(const ConvShape& s, const double* grad_out, const double* weight,
                           double* grad_in) {
  for (std::size_t seq = 0; seq < s.sequences; ++seq)
    conv_backward_input_seq(s, seq, grad_out, weight, grad_in);
}

void conv1d_backward_weight(const ConvShape& s, const double* input, const double* grad_out,
                            double* grad_weight) {
  for (std::size_t j = 0; j < s.kernel; ++j)
    for (std::size_t ci = 0; ci < s.in_channels; ++ci)
      conv_backward_weight_row(s, j, ci, input, grad_out, grad_weight);
}

}  // namespace serial

namespace omp {

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          const double* a, std::size_t lda, const double* b, std::size_t ldb, double* c,
          std::size_t ldc, bool accumulate) {
#pragma omp parallel
  {
    std::vector<double> acc(n);
#pragma omp for schedule(static)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(m); ++i)
      gemm_row(trans_a, trans_b, static_cast<std::size_t>(i), n, k, a, lda, b, ldb, c, ldc,
               accumulate, acc.data());
  }
}

void conv1d_forward(const ConvShape& s, const double* input, const double* weight, double* output) {
  const std::int64_t rows = static_cast<std::int64_t>(s.sequences * s.out_length());
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < rows; ++r) {
    const auto row = static_cast<std::size_t>(r);
    conv_forward_row(s, row / s.out_length(), row % s.out_length(), input, weight, output);
  }
}

void conv1d_backward_input(const ConvShape& s, const double* grad_out, const double* weight,
                           double* grad_in) {
#pragma omp parallel for schedule(static)
  for (std::int64_t seq = 0; seq < static_cast<std::int64_t>(s.sequences); ++seq)
    conv_backward_input_seq(s, static_cast<std::size_t>(seq), grad_out, weight, grad_in);
}

void conv1d_backward_weight(const ConvShape& s, const double* input, const double* grad_out,
                            double* grad_weight) {
  const std::int64_t rows = static_cast<std::int64_t>(s.kernel * s.in_channels);
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < rows; ++r) {
    const auto row = static_cast<std::size_t>(r);
    conv_backward_weight_row(s, row / s.in_channels, row % s.in_channels, input, grad_out,
                             grad_weight);
  }
}

}  // namespace omp

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          const double* a, std::size_t lda, const double* b, std::size_t ldb, double* c,
          std::size_t ldc, bool accumulate) {
  if (execution() == Execution::parallel && m > 1 && m * n * k >= kParallelThreshold)
    omp::gemm(trans_a, trans_b, m, n, k, a, lda, b, ldb, c, ldc, accumulate);
  else
    serial::gemm(trans_a, trans_b, m, n, k, a, lda, b, ldb, c, ldc, accumulate);
}

namespace {
std::size_t conv_work(const ConvShape& s) {
  return s.sequences * s.out_length() * s.kernel * s.in_channels * s.out_channels;
}
}  // namespace

void conv1d_forward(const ConvShape& s, const double* input, const double* weight, double* output) {
  if (execution() == Execution::parallel && conv_work(s) >= kParallelThreshold)
    omp::conv1d_forward(s, input, weight, output);
  else
    serial::conv1d_forward(s, input, weight, output);
}

void conv1d_backward_input(const ConvShape& s, const double* grad_out, const double* weight,
                           double* grad_in) {
  if (execution() == Execution::parallel && conv_work(s) >= kParallelThreshold)
    omp::conv1d_backward_input(s, grad_out, weight, grad_in);
  else
    serial::conv1d_backward_input(s, grad_out, weight, grad_in);
}

void conv1d_backward_weight(const ConvShape& s, const double* input, const double* grad_out,
                            double* grad_weight) {
  if (execution() == Execution::parallel && conv_work(s) >= kParallelThreshold)
    omp::conv1d_backward_weight(s, input, grad_out, grad_weight);
  else
    serial::conv1d_backward_weight(s, input, grad_out, grad_weight);
}

}  // namespace seqtag::kernels
