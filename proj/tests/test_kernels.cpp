#include <gtest/gtest.h>

#include <random>
#include <vector>

#include "seqtag/kernels.hpp"

using namespace seqtag::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> d;
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

}  // namespace

TEST(Gemm, MatchesNaiveTripleLoopForAllTransposes) {
  std::mt19937_64 rng(1);
  const std::size_t m = 7, n = 5, k = 4;
  for (bool ta : {false, true})
    for (bool tb : {false, true}) {
      auto a = random_vec(m * k, rng), b = random_vec(k * n, rng);
      const std::size_t lda = ta ? m : k, ldb = tb ? k : n;
      std::vector<double> c(m * n);
      serial::gemm(ta, tb, m, n, k, a.data(), lda, b.data(), ldb, c.data(), n, false);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          double ref = 0.0;
          for (std::size_t p = 0; p < k; ++p)
            ref += (ta ? a[p * lda + i] : a[i * lda + p]) * (tb ? b[j * ldb + p] : b[p * ldb + j]);
          EXPECT_NEAR(c[i * n + j], ref, 1e-12);
        }
    }
}

TEST(Gemm, ParallelIsBitIdenticalToSerial) {
  std::mt19937_64 rng(2);
  const std::size_t m = 130, n = 70, k = 90;
  for (bool ta : {false, true})
    for (bool tb : {false, true}) {
      auto a = random_vec(m * k, rng), b = random_vec(k * n, rng);
      auto c0 = random_vec(m * n, rng);
      auto c1 = c0;
      const std::size_t lda = ta ? m : k, ldb = tb ? k : n;
      serial::gemm(ta, tb, m, n, k, a.data(), lda, b.data(), ldb, c0.data(), n, true);
      omp::gemm(ta, tb, m, n, k, a.data(), lda, b.data(), ldb, c1.data(), n, true);
      EXPECT_EQ(c0, c1);
    }
}

TEST(Conv1d, ParallelIsBitIdenticalToSerial) {
  std::mt19937_64 rng(3);
  ConvShape s{4, 37, 6, 9, 3, 2, 1};
  auto in = random_vec(s.sequences * s.length * s.in_channels, rng);
  auto w = random_vec(s.kernel * s.in_channels * s.out_channels, rng);
  auto go = random_vec(s.sequences * s.out_length() * s.out_channels, rng);
  std::vector<double> o0(go.size()), o1(go.size());
  serial::conv1d_forward(s, in.data(), w.data(), o0.data());
  omp::conv1d_forward(s, in.data(), w.data(), o1.data());
  EXPECT_EQ(o0, o1);
  std::vector<double> gi0(in.size()), gi1(in.size());
  serial::conv1d_backward_input(s, go.data(), w.data(), gi0.data());
  omp::conv1d_backward_input(s, go.data(), w.data(), gi1.data());
  EXPECT_EQ(gi0, gi1);
  std::vector<double> gw0(w.size()), gw1(w.size());
  serial::conv1d_backward_weight(s, in.data(), go.data(), gw0.data());
  omp::conv1d_backward_weight(s, in.data(), go.data(), gw1.data());
  EXPECT_EQ(gw0, gw1);
}

TEST(Conv1d, OutputLengthFormula) {
  ConvShape s{1, 10, 1, 1, 3, 2, 1};
  EXPECT_EQ(s.out_length(), 5u);  // floor((10 + 2 - 3) / 2) + 1
  s.length = 9;
  EXPECT_EQ(s.out_length(), 5u);
}
