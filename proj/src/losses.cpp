#include "mcu/losses.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "mcu/error.hpp"

namespace mcu {

namespace {

void check_labels(const Tensor& logits, std::span<const int> labels) {
  if (logits.rank() != 2) {
    throw DimensionError("expected logits [batch, classes], got " + shape_string(logits.shape));
  }
  if (labels.size() != logits.shape[0]) {
    throw DimensionError(std::to_string(labels.size()) + " labels for " +
                         std::to_string(logits.shape[0]) + " rows");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= logits.shape[1]) {
      throw IndexError("label " + std::to_string(y) + " outside [0, " +
                       std::to_string(logits.shape[1]) + ")");
    }
  }
}

}  // namespace

std::vector<double> log_softmax_row(std::span<const float> logits) {
  double mx = -std::numeric_limits<double>::infinity();
  for (float v : logits) mx = std::max(mx, static_cast<double>(v));
  double s = 0.0;
  for (float v : logits) s += std::exp(static_cast<double>(v) - mx);
  const double lse = mx + std::log(s);
  std::vector<double> out(logits.size());
  for (std::size_t j = 0; j < logits.size(); ++j) out[j] = static_cast<double>(logits[j]) - lse;
  return out;
}

std::vector<double> per_sample_xent(const Tensor& logits, std::span<const int> labels) {
  check_labels(logits, labels);
  const std::size_t n = logits.shape[1];
  std::vector<double> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto ls = log_softmax_row(std::span<const float>(logits.data.data() + i * n, n));
    out[i] = -ls[static_cast<std::size_t>(labels[i])];
  }
  return out;
}

std::vector<double> true_class_prob(const Tensor& logits, std::span<const int> labels) {
  auto xent = per_sample_xent(logits, labels);
  for (auto& v : xent) v = std::exp(-v);
  return xent;
}

double softmax_xent(const Tensor& logits, std::span<const int> labels) {
  auto per = per_sample_xent(logits, labels);
  if (per.empty()) throw DimensionError("softmax_xent on an empty batch");
  double acc = 0.0;
  for (double v : per) acc += v;
  return acc / static_cast<double>(per.size());
}

double kl_divergence(const Tensor& logits_p, const Tensor& logits_q) {
  require_same_shape(logits_p.shape, logits_q.shape, "kl_divergence");
  if (logits_p.rank() != 2 || logits_p.shape[0] == 0) {
    throw DimensionError("kl_divergence expects non-empty [batch, classes] logits");
  }
  const std::size_t m = logits_p.shape[0], n = logits_p.shape[1];
  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    auto lp = log_softmax_row(std::span<const float>(logits_p.data.data() + i * n, n));
    auto lq = log_softmax_row(std::span<const float>(logits_q.data.data() + i * n, n));
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) row += std::exp(lp[j]) * (lp[j] - lq[j]);
    total += std::max(row, 0.0);
  }
  return total / static_cast<double>(m);
}

ad::Var softmax_xent(const ad::Var& logits, std::span<const int> labels) {
  return ad::neg(ad::mean(ad::pick(ad::log_softmax(logits), labels)));
}

ad::Var kl_divergence(const ad::Var& logits_p, const Tensor& logits_q) {
  require_same_shape(logits_p.shape(), logits_q.shape, "kl_divergence");
  ad::Tape& tape = logits_p.tape();
  const std::size_t m = logits_q.shape[0], n = logits_q.shape[1];
  Tensor lq(logits_q.shape);
  for (std::size_t i = 0; i < m; ++i) {
    auto row = log_softmax_row(std::span<const float>(logits_q.data.data() + i * n, n));
    for (std::size_t j = 0; j < n; ++j) lq.data[i * n + j] = static_cast<float>(row[j]);
  }
  ad::Var lp = ad::log_softmax(logits_p);
  ad::Var terms = ad::mul(ad::exp(lp), ad::sub(lp, tape.constant(std::move(lq))));
  return ad::scale(ad::sum(terms), 1.0f / static_cast<float>(m));
}

ad::Var npo_loss(const ad::Var& logits, std::span<const int> labels,
                 std::span<const float> ref_log_prob, float beta) {
  if (!(beta > 0.0f)) throw ConfigError("npo beta must be > 0");
  if (ref_log_prob.size() != labels.size()) {
    throw DimensionError("npo_loss: reference log-probs do not match the batch");
  }
  ad::Tape& tape = logits.tape();
  ad::Var logp = ad::pick(ad::log_softmax(logits), labels);
  Tensor ref(Shape{ref_log_prob.size()},
             std::vector<float>(ref_log_prob.begin(), ref_log_prob.end()));
  ad::Var z = ad::scale(ad::sub(logp, tape.constant(std::move(ref))), beta);
  return ad::scale(ad::mean(ad::softplus(z)), 2.0f / beta);
}

ParamVector backward(const ad::Var& loss, const ad::Var& params,
                     std::shared_ptr<const ParamLayout> layout) {
  auto grads = loss.tape().grad(loss, std::span<const ad::Var>(&params, 1));
  return ParamVector{grads[0].value().data, std::move(layout)};
}

ValueAndGrad value_and_grad(const Objective& objective, const ParamVector& at) {
  ad::Tape tape;
  ad::Var theta = tape.parameter(Tensor(Shape{at.size()}, at.values));
  ad::Var loss = objective(theta);
  ValueAndGrad out;
  out.value = loss.value().item();
  out.grad = backward(loss, theta, at.layout);
  return out;
}

}  // namespace mcu
