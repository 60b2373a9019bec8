#include "seqtag/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "seqtag/error.hpp"
#include "seqtag/kernels.hpp"

namespace seqtag::nn {

namespace {

void require_same_shape(Var a, Var b, const char* op) {
  require(a.rows() == b.rows() && a.cols() == b.cols(),
          std::string(op) + ": shape mismatch " + shape_string({a.rows(), a.cols()}) + " vs " +
              shape_string({b.rows(), b.cols()}));
}

Array mat(std::size_t r, std::size_t c) { return Array::matrix(r, c, 0.0); }

Array as_matrix(const Array& a) { return a.reshaped({a.rows(), a.cols()}); }

void add_into(Array& dst, const Array& src) {
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] += src[i];
}

// Elementwise op whose derivative is a function of (input, output).
template <typename F, typename D>
Var elementwise(Var x, F f, D derivative) {
  Array out = as_matrix(x.value());
  for (auto& v : out.values()) v = f(v);
  return x.tape().record(std::move(out), {x}, [x, derivative](Tape& t, const Array& y, const Array& g) {
    Array* s = t.grad_slot(x);
    const Array& in = x.value();
    for (std::size_t i = 0; i < g.size(); ++i) (*s)[i] += g[i] * derivative(in[i], y[i]);
  });
}

void softmax_rows_inplace(Array& a) {
  const std::size_t r = a.rows(), c = a.cols();
  for (std::size_t i = 0; i < r; ++i) {
    double mx = a(i, 0);
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, a(i, j));
    double total = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      a(i, j) = std::exp(a(i, j) - mx);
      total += a(i, j);
    }
    for (std::size_t j = 0; j < c; ++j) a(i, j) /= total;
  }
}

}  // namespace

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log_sigmoid(double x) {
  if (x >= 0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

Array sigmoid(const Array& x) {
  Array out = x;
  for (auto& v : out.values()) v = sigmoid(v);
  return out;
}

Array softmax(const Array& x, std::size_t axis) {
  const auto& shape = x.shape();
  require(axis < shape.size(), "softmax: axis out of range");
  std::size_t outer = 1, inner = 1;
  const std::size_t extent = shape[axis];
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  Array out = x;
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      auto at = [&](std::size_t j) -> double& { return out[(o * extent + j) * inner + in]; };
      double mx = at(0);
      for (std::size_t j = 1; j < extent; ++j) mx = std::max(mx, at(j));
      double total = 0.0;
      for (std::size_t j = 0; j < extent; ++j) {
        at(j) = std::exp(at(j) - mx);
        total += at(j);
      }
      for (std::size_t j = 0; j < extent; ++j) at(j) /= total;
    }
  }
  return out;
}

// ---- linear algebra ----------------------------------------------------------

Var matmul(Var a, Var b, bool trans_a, bool trans_b) {
  const Array& A = a.value();
  const Array& B = b.value();
  const std::size_t m = trans_a ? A.cols() : A.rows();
  const std::size_t k = trans_a ? A.rows() : A.cols();
  const std::size_t kb = trans_b ? B.cols() : B.rows();
  const std::size_t n = trans_b ? B.rows() : B.cols();
  require(k == kb, "matmul: inner dimensions differ (" + std::to_string(k) + " vs " +
                       std::to_string(kb) + ")");
  Array out = mat(m, n);
  kernels::gemm(trans_a, trans_b, m, n, k, A.values().data(), A.cols(), B.values().data(),
                B.cols(), out.values().data(), n, false);
  return a.tape().record(
      std::move(out), {a, b}, [a, b, m, n, k, trans_a, trans_b](Tape& t, const Array&, const Array& g) {
        const Array& A = a.value();
        const Array& B = b.value();
        if (Array* ga = t.grad_slot(a)) {
          // dA = g op(B)^T, stored in A's layout.
          if (!trans_a)
            kernels::gemm(false, !trans_b, m, k, n, g.values().data(), n, B.values().data(),
                          B.cols(), ga->values().data(), A.cols(), true);
          else
            kernels::gemm(trans_b, true, k, m, n, B.values().data(), B.cols(), g.values().data(),
                          n, ga->values().data(), A.cols(), true);
        }
        if (Array* gb = t.grad_slot(b)) {
          // dB = op(A)^T g, stored in B's layout.
          if (!trans_b)
            kernels::gemm(!trans_a, false, k, n, m, A.values().data(), A.cols(),
                          g.values().data(), n, gb->values().data(), B.cols(), true);
          else
            kernels::gemm(true, trans_a, n, k, m, g.values().data(), n, A.values().data(),
                          A.cols(), gb->values().data(), B.cols(), true);
        }
      });
}

Var add(Var a, Var b) {
  require_same_shape(a, b, "add");
  Array out = as_matrix(a.value());
  add_into(out, b.value());
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, const Array&, const Array& g) {
    if (Array* s = t.grad_slot(a)) add_into(*s, g);
    if (Array* s = t.grad_slot(b)) add_into(*s, g);
  });
}

Var sub(Var a, Var b) {
  require_same_shape(a, b, "sub");
  Array out = as_matrix(a.value());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, const Array&, const Array& g) {
    if (Array* s = t.grad_slot(a)) add_into(*s, g);
    if (Array* s = t.grad_slot(b))
      for (std::size_t i = 0; i < g.size(); ++i) (*s)[i] -= g[i];
  });
}

Var mul(Var a, Var b) {
  require_same_shape(a, b, "mul");
  Array out = as_matrix(a.value());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, const Array&, const Array& g) {
    if (Array* s = t.grad_slot(a))
      for (std::size_t i = 0; i < g.size(); ++i) (*s)[i] += g[i] * b.value()[i];
    if (Array* s = t.grad_slot(b))
      for (std::size_t i = 0; i < g.size(); ++i) (*s)[i] += g[i] * a.value()[i];
  });
}

Var scale(Var a, double factor) {
  Array out = as_matrix(a.value());
  for (auto& v : out.values()) v *= factor;
  return a.tape().record(std::move(out), {a}, [a, factor](Tape& t, const Array&, const Array& g) {
    Array* s = t.grad_slot(a);
    for (std::size_t i = 0; i < g.size(); ++i) (*s)[i] += g[i] * factor;
  });
}

Var add_bias(Var a, Var bias) {
  const std::size_t r = a.rows(), c = a.cols();
  require(bias.value().size() == c, "add_bias: bias length " +
                                        std::to_string(bias.value().size()) + " does not match " +
                                        std::to_string(c) + " columns");
  Array out = as_matrix(a.value());
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out(i, j) += bias.value()[j];
  return a.tape().record(std::move(out), {a, bias}, [a, bias, r, c](Tape& t, const Array&, const Array& g) {
    if (Array* s = t.grad_slot(a)) add_into(*s, g);
    if (Array* s = t.grad_slot(bias))
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) (*s)[j] += g(i, j);
  });
}

Var scale_rows(Var a, Var s) {
  const std::size_t r = a.rows(), c = a.cols();
  require(s.value().size() == r, "scale_rows: need one factor per row");
  Array out = as_matrix(a.value());
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out(i, j) *= s.value()[i];
  return a.tape().record(std::move(out), {a, s}, [a, s, r, c](Tape& t, const Array&, const Array& g) {
    if (Array* ga = t.grad_slot(a))
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) (*ga)[i * c + j] += g(i, j) * s.value()[i];
    if (Array* gs = t.grad_slot(s))
      for (std::size_t i = 0; i < r; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < c; ++j) acc += g(i, j) * a.value()[i * c + j];
        (*gs)[i] += acc;
      }
  });
}

Var linear(Var x, Var w, Var b) { return add_bias(matmul(x, w), b); }

// ---- activations -------------------------------------------------------------

Var sigmoid(Var x) {
  return elementwise(
      x, [](double v) { return sigmoid(v); }, [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Var x) {
  return elementwise(
      x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Var relu(Var x) {
  return elementwise(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Var softmax_rows(Var x) {
  Array out = as_matrix(x.value());
  softmax_rows_inplace(out);
  return x.tape().record(std::move(out), {x}, [x](Tape& t, const Array& y, const Array& g) {
    Array* s = t.grad_slot(x);
    const std::size_t r = y.rows(), c = y.cols();
    for (std::size_t i = 0; i < r; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += g(i, j) * y(i, j);
      for (std::size_t j = 0; j < c; ++j) (*s)[i * c + j] += y(i, j) * (g(i, j) - dot);
    }
  });
}

Var softmax_cols(Var x) { return transpose(softmax_rows(transpose(x))); }

Var transpose(Var x) {
  const std::size_t r = x.rows(), c = x.cols();
  Array out = mat(c, r);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out(j, i) = x.value()[i * c + j];
  return x.tape().record(std::move(out), {x}, [x, r, c](Tape& t, const Array&, const Array& g) {
    Array* s = t.grad_slot(x);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) (*s)[i * c + j] += g(j, i);
  });
}

// ---- structural --------------------------------------------------------------

Var concat_cols(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_cols: no inputs");
  const std::size_t r = parts.front().rows();
  std::size_t c = 0;
  for (Var p : parts) {
    require(p.rows() == r, "concat_cols: row counts differ");
    c += p.cols();
  }
  Array out = mat(r, c);
  std::size_t offset = 0;
  for (Var p : parts) {
    const std::size_t pc = p.cols();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < pc; ++j) out(i, offset + j) = p.value()[i * pc + j];
    offset += pc;
  }
  return parts.front().tape().record(std::move(out), parts, [parts, r, c](Tape& t, const Array&, const Array& g) {
    std::size_t offset = 0;
    for (Var p : parts) {
      const std::size_t pc = p.cols();
      if (Array* s = t.grad_slot(p))
        for (std::size_t i = 0; i < r; ++i)
          for (std::size_t j = 0; j < pc; ++j) (*s)[i * pc + j] += g(i, offset + j);
      offset += pc;
    }
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_rows: no inputs");
  const std::size_t c = parts.front().cols();
  std::size_t r = 0;
  for (Var p : parts) {
    require(p.cols() == c, "concat_rows: column counts differ");
    r += p.rows();
  }
  Array out = mat(r, c);
  std::size_t offset = 0;
  for (Var p : parts) {
    std::copy(p.value().values().begin(), p.value().values().end(),
              out.values().begin() + static_cast<std::ptrdiff_t>(offset));
    offset += p.value().size();
  }
  return parts.front().tape().record(std::move(out), parts, [parts](Tape& t, const Array&, const Array& g) {
    std::size_t offset = 0;
    for (Var p : parts) {
      const std::size_t n = p.value().size();
      if (Array* s = t.grad_slot(p))
        for (std::size_t i = 0; i < n; ++i) (*s)[i] += g[offset + i];
      offset += n;
    }
  });
}

Var slice_cols(Var x, std::size_t begin, std::size_t end) {
  const std::size_t r = x.rows(), c = x.cols();
  require(begin < end && end <= c, "slice_cols: bad range");
  const std::size_t w = end - begin;
  Array out = mat(r, w);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < w; ++j) out(i, j) = x.value()[i * c + begin + j];
  return x.tape().record(std::move(out), {x}, [x, r, c, begin, w](Tape& t, const Array&, const Array& g) {
    Array* s = t.grad_slot(x);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < w; ++j) (*s)[i * c + begin + j] += g(i, j);
  });
}

Var slice_rows(Var x, std::size_t begin, std::size_t end) {
  const std::size_t r = x.rows(), c = x.cols();
  require(begin < end && end <= r, "slice_rows: bad range");
  Array out = mat(end - begin, c);
  std::copy(x.value().values().begin() + static_cast<std::ptrdiff_t>(begin * c),
            x.value().values().begin() + static_cast<std::ptrdiff_t>(end * c),
            out.values().begin());
  return x.tape().record(std::move(out), {x}, [x, c, begin](Tape& t, const Array&, const Array& g) {
    Array* s = t.grad_slot(x);
    for (std::size_t i = 0; i < g.size(); ++i) (*s)[begin * c + i] += g[i];
  });
}

Var reshape(Var x, std::size_t rows, std::size_t cols) {
  require(rows * cols == x.value().size(), "reshape: element count changes");
  Array out = x.value().reshaped({rows, cols});
  return x.tape().record(std::move(out), {x}, [x](Tape& t, const Array&, const Array& g) {
    add_into(*t.grad_slot(x), g);
  });
}

Var gather_cols(Var x, const std::vector<std::size_t>& index) {
  const std::size_t r = x.rows(), c = x.cols(), n = index.size();
  for (std::size_t j : index) require(j < c, "gather_cols: index out of range");
  Array out = mat(r, n);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < n; ++j) out(i, j) = x.value()[i * c + index[j]];
  return x.tape().record(std::move(out), {x}, [x, index, r, c, n](Tape& t, const Array&, const Array& g) {
    Array* s = t.grad_slot(x);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < n; ++j) (*s)[i * c + index[j]] += g(i, j);
  });
}

Var select_rows(const std::vector<bool>& keep, Var when_true, Var when_false) {
  require_same_shape(when_true, when_false, "select_rows");
  const std::size_t r = when_true.rows(), c = when_true.cols();
  require(keep.size() == r, "select_rows: mask length differs from row count");
  Array out = as_matrix(when_false.value());
  for (std::size_t i = 0; i < r; ++i)
    if (keep[i])
      for (std::size_t j = 0; j < c; ++j) out(i, j) = when_true.value()[i * c + j];
  return when_true.tape().record(
      std::move(out), {when_true, when_false}, [keep, when_true, when_false, r, c](Tape& t, const Array&, const Array& g) {
        Array* st = t.grad_slot(when_true);
        Array* sf = t.grad_slot(when_false);
        for (std::size_t i = 0; i < r; ++i) {
          Array* s = keep[i] ? st : sf;
          if (s == nullptr) continue;
          for (std::size_t j = 0; j < c; ++j) (*s)[i * c + j] += g(i, j);
        }
      });
}

Var stop_gradient(Var x) { return x.tape().constant(as_matrix(x.value())); }

// ---- reductions --------------------------------------------------------------

Var sum(Var x) {
  double total = 0.0;
  for (double v : x.value().values()) total += v;
  return x.tape().record(Array::scalar(total), {x}, [x](Tape& t, const Array&, const Array& g) {
    Array* s = t.grad_slot(x);
    for (auto& v : s->values()) v += g[0];
  });
}

Var mean(Var x) { return scale(sum(x), 1.0 / static_cast<double>(x.value().size())); }

Var col_sum(Var x) {
  const std::size_t r = x.rows(), c = x.cols();
  Array out = mat(1, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j] += x.value()[i * c + j];
  return x.tape().record(std::move(out), {x}, [x, r, c](Tape& t, const Array&, const Array& g) {
    Array* s = t.grad_slot(x);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) (*s)[i * c + j] += g[j];
  });
}

Var row_mean(Var x) {
  const std::size_t r = x.rows(), c = x.cols();
  Array out = mat(r, 1);
  for (std::size_t i = 0; i < r; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < c; ++j) acc += x.value()[i * c + j];
    out[i] = acc / static_cast<double>(c);
  }
  return x.tape().record(std::move(out), {x}, [x, r, c](Tape& t, const Array&, const Array& g) {
    Array* s = t.grad_slot(x);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) (*s)[i * c + j] += g[i] / static_cast<double>(c);
  });
}

Var weighted_sum(Var x, const Array& weights) {
  require(weights.size() == x.value().size(), "weighted_sum: weight count mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) total += x.value()[i] * weights[i];
  return x.tape().record(Array::scalar(total), {x}, [x, weights](Tape& t, const Array&, const Array& g) {
    Array* s = t.grad_slot(x);
    for (std::size_t i = 0; i < weights.size(); ++i) (*s)[i] += g[0] * weights[i];
  });
}

// ---- fused layers ------------------------------------------------------------

Var mix(Var gate_logits, Var values, std::size_t k) {
  require(k >= 1, "mix: need at least one mixture");
  require_same_shape(gate_logits, values, "mix");
  const std::size_t n = gate_logits.rows(), total = gate_logits.cols();
  require(total % k == 0, "mix: column count is not a multiple of the mixture count");
  const std::size_t units = total / k;
  Array gates = as_matrix(gate_logits.value()).reshaped({n * units, k});
  softmax_rows_inplace(gates);
  Array out = mat(n, units);
  const Array& v = values.value();
  for (std::size_t r = 0; r < n * units; ++r) {
    double acc = 0.0;
    for (std::size_t i = 0; i < k; ++i) acc += gates[r * k + i] * v[r * k + i];
    out[r] = acc;
  }
  return gate_logits.tape().record(
      std::move(out), {gate_logits, values}, [gate_logits, values, gates, n, units, k](Tape& t, const Array& y, const Array& g) {
        Array* sg = t.grad_slot(gate_logits);
        Array* sv = t.grad_slot(values);
        const Array& v = values.value();
        for (std::size_t r = 0; r < n * units; ++r) {
          for (std::size_t i = 0; i < k; ++i) {
            const double p = gates[r * k + i];
            if (sv) (*sv)[r * k + i] += g[r] * p;
            if (sg) (*sg)[r * k + i] += g[r] * p * (v[r * k + i] - y[r]);
          }
        }
      });
}

Var neg_sq_dist(Var x, Var c) {
  const std::size_t t_len = x.rows(), d = x.cols(), k = c.rows();
  require(c.cols() == d, "neg_sq_dist: feature dimensions differ");
  Array out = mat(t_len, k);
  const Array& X = x.value();
  const Array& C = c.value();
  for (std::size_t i = 0; i < t_len; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < d; ++p) {
        const double diff = X[i * d + p] - C[j * d + p];
        acc += diff * diff;
      }
      out(i, j) = -acc;
    }
  return x.tape().record(std::move(out), {x, c}, [x, c, t_len, d, k](Tape& t, const Array&, const Array& g) {
    Array* sx = t.grad_slot(x);
    Array* sc = t.grad_slot(c);
    const Array& X = x.value();
    const Array& C = c.value();
    for (std::size_t i = 0; i < t_len; ++i)
      for (std::size_t j = 0; j < k; ++j) {
        const double gij = g(i, j);
        for (std::size_t p = 0; p < d; ++p) {
          const double diff = X[i * d + p] - C[j * d + p];
          if (sx) (*sx)[i * d + p] -= 2.0 * gij * diff;
          if (sc) (*sc)[j * d + p] += 2.0 * gij * diff;
        }
      }
  });
}

Var pairwise_tanh_score(Var u, Var v, Var b, Var w) {
  const std::size_t t_len = u.rows(), p_dim = u.cols(), k = v.rows();
  require(v.cols() == p_dim && b.value().size() == p_dim && w.value().size() == p_dim,
          "pairwise_tanh_score: projection sizes differ");
  Array act({t_len, k, p_dim}, 0.0);
  Array out = mat(t_len, k);
  for (std::size_t i = 0; i < t_len; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      double acc = 0.0;
      for (std::size_t p = 0; p < p_dim; ++p) {
        const double z = std::tanh(u.value()[i * p_dim + p] + v.value()[j * p_dim + p] + b.value()[p]);
        act[(i * k + j) * p_dim + p] = z;
        acc += w.value()[p] * z;
      }
      out(i, j) = acc;
    }
  return u.tape().record(std::move(out), {u, v, b, w}, [u, v, b, w, act, t_len, k, p_dim](Tape& t, const Array&, const Array& g) {
    Array* su = t.grad_slot(u);
    Array* sv = t.grad_slot(v);
    Array* sb = t.grad_slot(b);
    Array* sw = t.grad_slot(w);
    for (std::size_t i = 0; i < t_len; ++i)
      for (std::size_t j = 0; j < k; ++j) {
        const double gij = g(i, j);
        for (std::size_t p = 0; p < p_dim; ++p) {
          const double z = act[(i * k + j) * p_dim + p];
          const double dz = gij * w.value()[p] * (1.0 - z * z);
          if (su) (*su)[i * p_dim + p] += dz;
          if (sv) (*sv)[j * p_dim + p] += dz;
          if (sb) (*sb)[p] += dz;
          if (sw) (*sw)[p] += gij * z;
        }
      }
  });
}

Var l2_normalize_blocks(Var x, std::size_t block, double eps) {
  const std::size_t r = x.rows(), c = x.cols();
  require(block >= 1 && c % block == 0, "l2_normalize_blocks: block does not divide row length");
  const std::size_t blocks = c / block;
  Array out = as_matrix(x.value());
  Array norms = mat(r, blocks);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t b = 0; b < blocks; ++b) {
      double ss = eps;
      for (std::size_t j = 0; j < block; ++j) ss += out(i, b * block + j) * out(i, b * block + j);
      const double norm = std::sqrt(ss);
      norms(i, b) = norm;
      for (std::size_t j = 0; j < block; ++j) out(i, b * block + j) /= norm;
    }
  return x.tape().record(std::move(out), {x}, [x, norms, r, c, block, blocks](Tape& t, const Array& y, const Array& g) {
    Array* s = t.grad_slot(x);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t b = 0; b < blocks; ++b) {
        double dot = 0.0;
        for (std::size_t j = 0; j < block; ++j) dot += y(i, b * block + j) * g(i, b * block + j);
        for (std::size_t j = 0; j < block; ++j) {
          const std::size_t col = b * block + j;
          (*s)[i * c + col] += (g(i, col) - y(i, col) * dot) / norms(i, b);
        }
      }
  });
}

Var dropout(Var x, double keep, std::mt19937_64& rng) {
  require(keep > 0.0 && keep <= 1.0, "dropout: keep probability must be in (0, 1]");
  if (keep == 1.0) return x;
  Array mask = mat(x.rows(), x.cols());
  std::bernoulli_distribution draw(keep);
  for (auto& m : mask.values()) m = draw(rng) ? 1.0 / keep : 0.0;
  return mul(x, x.tape().constant(std::move(mask)));
}

}  // namespace seqtag::nn
