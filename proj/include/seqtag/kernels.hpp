#pragma once

#include <cstddef>

// Dense compute kernels. Every kernel exists twice: a plain serial loop nest
// kept as the reference, and an OpenMP version that partitions independent
// outputs across threads. Both accumulate each output element in the same
// order, so their results are bit-identical and tests compare them exactly.

namespace seqtag::kernels {

enum class Execution { serial, parallel };

/// Process-wide choice between the two kernel families. Defaults to parallel.
void set_execution(Execution mode);
Execution execution();

/// Geometry of a batched 1-D convolution over `sequences` stacked sequences
/// of `length` steps each. Input rows are laid out sequence-major.
struct ConvShape {
  std::size_t sequences = 1;
  std::size_t length = 1;
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t pad = 0;

  std::size_t out_length() const { return (length + 2 * pad - kernel) / stride + 1; }
};

namespace serial {
// C[m x n] = op(A) * op(B) (+ C when accumulate). op transposes when the flag is set.
// Leading dimensions are the row strides of A, B and C as stored.
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          const double* a, std::size_t lda, const double* b, std::size_t ldb, double* c,
          std::size_t ldc, bool accumulate);
void conv1d_forward(const ConvShape& s, const double* input, const double* weight, double* output);
void conv1d_backward_input(const ConvShape& s, const double* grad_out, const double* weight,
                           double* grad_in);
void conv1d_backward_weight(const ConvShape& s, const double* input, const double* grad_out,
                            double* grad_weight);
}  // namespace serial

namespace omp {
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          const double* a, std::size_t lda, const double* b, std::size_t ldb, double* c,
          std::size_t ldc, bool accumulate);
void conv1d_forward(const ConvShape& s, const double* input, const double* weight, double* output);
void conv1d_backward_input(const ConvShape& s, const double* grad_out, const double* weight,
                           double* grad_in);
void conv1d_backward_weight(const ConvShape& s, const double* input, const double* grad_out,
                            double* grad_weight);
}  // namespace omp

// Dispatch on execution().
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k,
          const double* a, std::size_t lda, const double* b, std::size_t ldb, double* c,
          std::size_t ldc, bool accumulate);
void conv1d_forward(const ConvShape& s, const double* input, const double* weight, double* output);
void conv1d_backward_input(const ConvShape& s, const double* grad_out, const double* weight,
                           double* grad_in);
void conv1d_backward_weight(const ConvShape& s, const double* input, const double* grad_out,
                            double* grad_weight);

}  // namespace seqtag::kernels
