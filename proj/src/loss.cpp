#include "seqtag/loss.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "seqtag/error.hpp"
#include "seqtag/ops.hpp"

namespace seqtag::nn {

namespace {

void check_labels(const Array& logits, const Array& labels, const char* op) {
  require(logits.rows() == labels.rows() && logits.cols() == labels.cols(),
          std::string(op) + ": logits " + shape_string({logits.rows(), logits.cols()}) +
              " and labels " + shape_string({labels.rows(), labels.cols()}) + " differ");
}

double bce_with_logits(double x, double y) {
  return std::max(x, 0.0) - x * y + std::log1p(std::exp(-std::abs(x)));
}

double log_sum_exp(const double* v, std::size_t n) {
  double mx = v[0];
  for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, v[i]);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += std::exp(v[i] - mx);
  return mx + std::log(total);
}

struct SmoothedRows {
  double loss = 0.0;
  Array grad;  // d loss / d logits
};

SmoothedRows smoothed_softmax(const Array& logits, const Array& labels) {
  check_labels(logits, labels, "smoothed_softmax_loss");
  const std::size_t n = logits.rows(), v = logits.cols();
  SmoothedRows out{0.0, Array::matrix(n, v)};
  std::vector<double> row(v);
  for (std::size_t i = 0; i < n; ++i) {
    double positives = 0.0;
    for (std::size_t j = 0; j < v; ++j) positives += labels[i * v + j];
    require(positives > 0.0, "smoothed_softmax_loss: label row " + std::to_string(i) +
                                 " has no positive label");
    for (std::size_t j = 0; j < v; ++j) row[j] = logits[i * v + j];
    const double lse = log_sum_exp(row.data(), v);
    for (std::size_t j = 0; j < v; ++j) {
      const double target = labels[i * v + j] / positives;
      const double log_p = row[j] - lse;
      out.loss -= target * log_p;
      out.grad[i * v + j] = (std::exp(log_p) - target) / static_cast<double>(n);
    }
  }
  out.loss /= static_cast<double>(n);
  return out;
}

struct MoeLoss {
  double loss = 0.0;
  Array grad_gates;
  Array grad_experts;
};

MoeLoss moe_loss(const Array& gate_logits, const Array& expert_logits, const Array& labels,
                 std::size_t k, bool want_grad) {
  require(k >= 1, "moe_log_loss: need at least one mixture");
  const std::size_t n = labels.rows(), v = labels.cols();
  require(gate_logits.rows() == n && gate_logits.cols() == v * k &&
              expert_logits.rows() == n && expert_logits.cols() == v * k,
          "moe_log_loss: logits must be N x (V*k)");
  MoeLoss out;
  if (want_grad) {
    out.grad_gates = Array::matrix(n, v * k);
    out.grad_experts = Array::matrix(n, v * k);
  }
  const double scale = 1.0 / static_cast<double>(n * v);
  std::vector<double> log_gate(k), a(k), b(k);
  for (std::size_t r = 0; r < n * v; ++r) {
    const double y = labels[r];
    const double* gl = gate_logits.values().data() + r * k;
    const double* el = expert_logits.values().data() + r * k;
    const double gate_lse = log_sum_exp(gl, k);
    for (std::size_t i = 0; i < k; ++i) {
      log_gate[i] = gl[i] - gate_lse;
      a[i] = log_gate[i] + log_sigmoid(el[i]);
      b[i] = log_gate[i] + log_sigmoid(-el[i]);
    }
    const double log_p = log_sum_exp(a.data(), k);
    const double log_q = log_sum_exp(b.data(), k);
    out.loss -= y * log_p + (1.0 - y) * log_q;
    if (!want_grad) continue;
    for (std::size_t i = 0; i < k; ++i) {
      const double gate = std::exp(log_gate[i]);
      const double post_a = std::exp(a[i] - log_p);
      const double post_b = std::exp(b[i] - log_q);
      const double s = sigmoid(el[i]);
      out.grad_gates[r * k + i] = scale * (gate - y * post_a - (1.0 - y) * post_b);
      out.grad_experts[r * k + i] = scale * (-y * post_a * (1.0 - s) + (1.0 - y) * post_b * s);
    }
  }
  out.loss *= scale;
  return out;
}

}  // namespace

double sigmoid_cross_entropy(const Array& logits, const Array& labels) {
  check_labels(logits, labels, "sigmoid_cross_entropy");
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) total += bce_with_logits(logits[i], labels[i]);
  return total / static_cast<double>(logits.size());
}

Var sigmoid_cross_entropy(Var logits, const Array& labels) {
  const double loss = sigmoid_cross_entropy(logits.value(), labels);
  return logits.tape().record(Array::scalar(loss), {logits}, [logits, labels](Tape& t, const Array&, const Array& g) {
    Array* s = t.grad_slot(logits);
    const Array& x = logits.value();
    const double scale = g[0] / static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) (*s)[i] += scale * (sigmoid(x[i]) - labels[i]);
  });
}

double smoothed_softmax_loss(const Array& logits, const Array& labels) {
  return smoothed_softmax(logits, labels).loss;
}

Var smoothed_softmax_loss(Var logits, const Array& labels) {
  SmoothedRows r = smoothed_softmax(logits.value(), labels);
  return logits.tape().record(Array::scalar(r.loss), {logits}, [logits, grad = std::move(r.grad)](Tape& t, const Array&, const Array& g) {
    Array* s = t.grad_slot(logits);
    for (std::size_t i = 0; i < grad.size(); ++i) (*s)[i] += g[0] * grad[i];
  });
}

double moe_log_loss(const Array& gate_logits, const Array& expert_logits, const Array& labels,
                    std::size_t k) {
  return moe_loss(gate_logits, expert_logits, labels, k, false).loss;
}

Var moe_log_loss(Var gate_logits, Var expert_logits, const Array& labels, std::size_t k) {
  MoeLoss r = moe_loss(gate_logits.value(), expert_logits.value(), labels, k, true);
  return gate_logits.tape().record(
      Array::scalar(r.loss), {gate_logits, expert_logits},
      [gate_logits, expert_logits, gg = std::move(r.grad_gates), ge = std::move(r.grad_experts)](
          Tape& t, const Array&, const Array& g) {
        if (Array* s = t.grad_slot(gate_logits))
          for (std::size_t i = 0; i < gg.size(); ++i) (*s)[i] += g[0] * gg[i];
        if (Array* s = t.grad_slot(expert_logits))
          for (std::size_t i = 0; i < ge.size(); ++i) (*s)[i] += g[0] * ge[i];
      });
}

}  // namespace seqtag::nn
