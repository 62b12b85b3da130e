#include "mcu/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mcu/error.hpp"
#include "mcu/kernels.hpp"

namespace mcu::ad {

const Tensor& Var::value() const { return tape_->node(id_).value; }

bool Var::requires_grad() const { return tape_->node(id_).requires_grad; }

Var Tape::constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(const char* op, Tensor value, std::vector<Var> parents, BackwardFn backward) {
  if (check_finite_ && !value.all_finite()) {
    throw NumericError(std::string("non-finite value produced by op '") + op + "'");
  }
  bool needs = false;
  if (recording_) {
    for (const auto& p : parents) {
      if (&p.tape() != this) throw ContractViolation("op mixes vars from different tapes");
      needs = needs || p.requires_grad();
    }
  }
  Node n;
  n.value = std::move(value);
  n.op = op;
  if (needs) {
    n.requires_grad = true;
    n.backward = std::move(backward);
    n.parents.reserve(parents.size());
    for (const auto& p : parents) n.parents.push_back(p.id());
  }
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

std::vector<Var> Tape::grad(const Var& loss, std::span<const Var> wrt, bool create_graph) {
  if (!loss.valid() || &loss.tape() != this) {
    throw ContractViolation("backward: loss does not belong to this tape");
  }
  if (loss.value().numel() != 1) {
    throw ContractViolation("backward on non-scalar of shape " + shape_string(loss.shape()));
  }
  if (consumed_.count(loss.id()) != 0) {
    throw ContractViolation("backward called twice on the same graph without reset");
  }
  consumed_.insert(loss.id());

  const std::size_t end = loss.id() + 1;
  std::vector<Var> grads(end);
  NoGradGuard guard(*this, create_graph);
  grads[loss.id()] = constant(Tensor(loss.shape(), 1.0f));

  for (std::size_t u = end; u-- > 0;) {
    if (!grads[u].valid()) continue;
    const Node& nd = nodes_[u];
    if (!nd.requires_grad || !nd.backward) continue;
    std::vector<Var> pg = nd.backward(Var(this, u), grads[u]);
    for (std::size_t i = 0; i < nd.parents.size(); ++i) {
      const std::size_t p = nd.parents[i];
      if (!pg[i].valid() || !nodes_[p].requires_grad) continue;
      grads[p] = grads[p].valid() ? add(grads[p], pg[i]) : pg[i];
    }
  }

  std::vector<Var> out;
  out.reserve(wrt.size());
  for (const auto& w : wrt) {
    if (w.id() < end && grads[w.id()].valid()) {
      out.push_back(grads[w.id()]);
    } else {
      out.push_back(constant(Tensor(w.shape(), 0.0f)));
    }
  }
  return out;
}

void Tape::reset() {
  nodes_.clear();
  consumed_.clear();
  recording_ = true;
}

namespace {

Tape& tape_of(const Var& a) {
  if (!a.valid()) throw ContractViolation("op on an invalid var");
  return a.tape();
}

template <typename F>
Tensor map_unary(const Tensor& a, F f) {
  Tensor out(a.shape);
  for (std::size_t i = 0; i < a.numel(); ++i) out.data[i] = f(a.data[i]);
  return out;
}

template <typename F>
Tensor map_binary(const Tensor& a, const Tensor& b, const char* op, F f) {
  require_same_shape(a.shape, b.shape, op);
  Tensor out(a.shape);
  for (std::size_t i = 0; i < a.numel(); ++i) out.data[i] = f(a.data[i], b.data[i]);
  return out;
}

void require_rank2(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected rank-2 value, got " +
                         shape_string(t.shape));
  }
}

Var ones_like(Tape& tape, const Var& a) { return tape.constant(Tensor(a.shape(), 1.0f)); }

}  // namespace

Var add(const Var& a, const Var& b) {
  Tensor v = map_binary(a.value(), b.value(), "add", [](float x, float y) { return x + y; });
  return tape_of(a).record("add", std::move(v), {a, b},
                           [](const Var&, const Var& g) { return std::vector<Var>{g, g}; });
}

Var sub(const Var& a, const Var& b) {
  Tensor v = map_binary(a.value(), b.value(), "sub", [](float x, float y) { return x - y; });
  return tape_of(a).record("sub", std::move(v), {a, b}, [](const Var&, const Var& g) {
    return std::vector<Var>{g, neg(g)};
  });
}

Var mul(const Var& a, const Var& b) {
  Tensor v = map_binary(a.value(), b.value(), "mul", [](float x, float y) { return x * y; });
  return tape_of(a).record("mul", std::move(v), {a, b}, [a, b](const Var&, const Var& g) {
    return std::vector<Var>{mul(g, b), mul(g, a)};
  });
}

Var neg(const Var& a) {
  Tensor v = map_unary(a.value(), [](float x) { return -x; });
  return tape_of(a).record("neg", std::move(v), {a},
                           [](const Var&, const Var& g) { return std::vector<Var>{neg(g)}; });
}

Var scale(const Var& a, float c) {
  Tensor v = map_unary(a.value(), [c](float x) { return x * c; });
  return tape_of(a).record("scale", std::move(v), {a}, [c](const Var&, const Var& g) {
    return std::vector<Var>{scale(g, c)};
  });
}

Var relu(const Var& a) {
  Tensor v = map_unary(a.value(), [](float x) { return x > 0.0f ? x : 0.0f; });
  return tape_of(a).record("relu", std::move(v), {a}, [a](const Var&, const Var& g) {
    Tensor mask = map_unary(a.value(), [](float x) { return x > 0.0f ? 1.0f : 0.0f; });
    return std::vector<Var>{mul(g, g.tape().constant(std::move(mask)))};
  });
}

Var tanh(const Var& a) {
  Tensor v = map_unary(a.value(), [](float x) { return std::tanh(x); });
  return tape_of(a).record("tanh", std::move(v), {a}, [](const Var& y, const Var& g) {
    return std::vector<Var>{mul(g, sub(ones_like(g.tape(), y), mul(y, y)))};
  });
}

Var exp(const Var& a) {
  Tensor v = map_unary(a.value(), [](float x) { return std::exp(x); });
  return tape_of(a).record("exp", std::move(v), {a}, [](const Var& y, const Var& g) {
    return std::vector<Var>{mul(g, y)};
  });
}

Var sigmoid(const Var& a) {
  Tensor v = map_unary(a.value(), [](float x) {
    const double xd = x;
    return static_cast<float>(xd >= 0 ? 1.0 / (1.0 + std::exp(-xd))
                                      : std::exp(xd) / (1.0 + std::exp(xd)));
  });
  return tape_of(a).record("sigmoid", std::move(v), {a}, [](const Var& s, const Var& g) {
    return std::vector<Var>{mul(g, mul(s, sub(ones_like(g.tape(), s), s)))};
  });
}

Var softplus(const Var& a) {
  Tensor v = map_unary(a.value(), [](float x) {
    const double xd = x;
    return static_cast<float>(std::max(xd, 0.0) + std::log1p(std::exp(-std::abs(xd))));
  });
  return tape_of(a).record("softplus", std::move(v), {a}, [a](const Var&, const Var& g) {
    return std::vector<Var>{mul(g, sigmoid(a))};
  });
}

Var matmul(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_rank2(av, "matmul");
  require_rank2(bv, "matmul");
  if (av.shape[1] != bv.shape[0]) {
    throw DimensionError("matmul: inner dimensions differ " + shape_string(av.shape) + " x " +
                         shape_string(bv.shape));
  }
  const std::size_t m = av.shape[0], k = av.shape[1], n = bv.shape[1];
  Tensor out(Shape{m, n});
  kernels::matmul(av.data, bv.data, out.data, m, k, n);
  return tape_of(a).record("matmul", std::move(out), {a, b}, [a, b](const Var&, const Var& g) {
    return std::vector<Var>{matmul(g, transpose(b)), matmul(transpose(a), g)};
  });
}

Var transpose(const Var& a) {
  const Tensor& av = a.value();
  require_rank2(av, "transpose");
  const std::size_t m = av.shape[0], n = av.shape[1];
  Tensor out(Shape{n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out.data[j * m + i] = av.data[i * n + j];
  return tape_of(a).record("transpose", std::move(out), {a}, [](const Var&, const Var& g) {
    return std::vector<Var>{transpose(g)};
  });
}

Var add_row(const Var& a, const Var& row) {
  const Tensor& av = a.value();
  const Tensor& rv = row.value();
  require_rank2(av, "add_row");
  const std::size_t m = av.shape[0], n = av.shape[1];
  if (rv.numel() != n) {
    throw DimensionError("add_row: row " + shape_string(rv.shape) + " vs " +
                         shape_string(av.shape));
  }
  Tensor out(av.shape);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out.data[i * n + j] = av.data[i * n + j] + rv.data[j];
  return tape_of(a).record("add_row", std::move(out), {a, row}, [](const Var&, const Var& g) {
    return std::vector<Var>{g, sum_rows(g)};
  });
}

Var sum_rows(const Var& a) {
  const Tensor& av = a.value();
  require_rank2(av, "sum_rows");
  const std::size_t m = av.shape[0], n = av.shape[1];
  Tensor out(Shape{n});
  kernels::sum_rows(av.data, out.data, m, n);
  return tape_of(a).record("sum_rows", std::move(out), {a}, [m](const Var&, const Var& g) {
    return std::vector<Var>{broadcast_rows(g, m)};
  });
}

Var broadcast_rows(const Var& v, std::size_t m) {
  const Tensor& vv = v.value();
  const std::size_t n = vv.numel();
  Tensor out(Shape{m, n});
  for (std::size_t i = 0; i < m; ++i) std::copy(vv.data.begin(), vv.data.end(), out.data.begin() + i * n);
  return tape_of(v).record("broadcast_rows", std::move(out), {v}, [](const Var&, const Var& g) {
    return std::vector<Var>{sum_rows(g)};
  });
}

Var sum_cols(const Var& a) {
  const Tensor& av = a.value();
  require_rank2(av, "sum_cols");
  const std::size_t m = av.shape[0], n = av.shape[1];
  Tensor out(Shape{m});
  for (std::size_t i = 0; i < m; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += av.data[i * n + j];
    out.data[i] = static_cast<float>(acc);
  }
  return tape_of(a).record("sum_cols", std::move(out), {a}, [n](const Var&, const Var& g) {
    return std::vector<Var>{broadcast_cols(g, n)};
  });
}

Var broadcast_cols(const Var& v, std::size_t n) {
  const Tensor& vv = v.value();
  const std::size_t m = vv.numel();
  Tensor out(Shape{m, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out.data[i * n + j] = vv.data[i];
  return tape_of(v).record("broadcast_cols", std::move(out), {v}, [](const Var&, const Var& g) {
    return std::vector<Var>{sum_cols(g)};
  });
}

Var sum(const Var& a) {
  const Tensor& av = a.value();
  double acc = 0.0;
  for (float x : av.data) acc += x;
  Shape shape = av.shape;
  return tape_of(a).record("sum", Tensor::scalar(static_cast<float>(acc)), {a},
                           [shape](const Var&, const Var& g) {
                             return std::vector<Var>{expand(g, shape)};
                           });
}

Var expand(const Var& s, const Shape& shape) {
  Tensor out(shape, s.value().item());
  return tape_of(s).record("expand", std::move(out), {s}, [](const Var&, const Var& g) {
    return std::vector<Var>{sum(g)};
  });
}

Var mean(const Var& a) {
  const auto n = a.value().numel();
  if (n == 0) throw DimensionError("mean of empty tensor");
  return scale(sum(a), 1.0f / static_cast<float>(n));
}

Var dot(const Var& a, const Var& b) { return sum(mul(a, b)); }

Var log_softmax(const Var& a) {
  const Tensor& av = a.value();
  require_rank2(av, "log_softmax");
  const std::size_t m = av.shape[0], n = av.shape[1];
  Tensor out(av.shape);
  kernels::log_softmax_rows(av.data, out.data, m, n);
  return tape_of(a).record("log_softmax", std::move(out), {a}, [n](const Var& y, const Var& g) {
    return std::vector<Var>{sub(g, mul(exp(y), broadcast_cols(sum_cols(g), n)))};
  });
}

namespace {

void check_labels(std::span<const int> labels, std::size_t m, std::size_t n, const char* op) {
  if (labels.size() != m) {
    throw DimensionError(std::string(op) + ": " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(m) + " rows");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= n) {
      throw IndexError(std::string(op) + ": label " + std::to_string(y) + " outside [0, " +
                       std::to_string(n) + ")");
    }
  }
}

}  // namespace

Var pick(const Var& a, std::span<const int> labels) {
  const Tensor& av = a.value();
  require_rank2(av, "pick");
  const std::size_t m = av.shape[0], n = av.shape[1];
  check_labels(labels, m, n, "pick");
  Tensor out(Shape{m});
  for (std::size_t i = 0; i < m; ++i) out.data[i] = av.data[i * n + static_cast<std::size_t>(labels[i])];
  std::vector<int> owned(labels.begin(), labels.end());
  return tape_of(a).record("pick", std::move(out), {a},
                           [owned = std::move(owned), n](const Var&, const Var& g) {
                             return std::vector<Var>{scatter(g, owned, n)};
                           });
}

Var scatter(const Var& v, std::span<const int> labels, std::size_t n) {
  const Tensor& vv = v.value();
  const std::size_t m = vv.numel();
  check_labels(labels, m, n, "scatter");
  Tensor out(Shape{m, n});
  for (std::size_t i = 0; i < m; ++i) out.data[i * n + static_cast<std::size_t>(labels[i])] = vv.data[i];
  std::vector<int> owned(labels.begin(), labels.end());
  return tape_of(v).record("scatter", std::move(out), {v},
                           [owned = std::move(owned)](const Var&, const Var& g) {
                             return std::vector<Var>{pick(g, owned)};
                           });
}

Var slice(const Var& flat, std::size_t offset, const Shape& shape) {
  const Tensor& fv = flat.value();
  const std::size_t count = shape_numel(shape);
  if (offset + count > fv.numel()) {
    throw DimensionError("slice [" + std::to_string(offset) + ", " +
                         std::to_string(offset + count) + ") beyond length " +
                         std::to_string(fv.numel()));
  }
  Tensor out(shape);
  std::copy_n(fv.data.begin() + static_cast<std::ptrdiff_t>(offset), count, out.data.begin());
  const std::size_t total = fv.numel();
  return tape_of(flat).record("slice", std::move(out), {flat},
                              [offset, total](const Var&, const Var& g) {
                                return std::vector<Var>{pad(g, offset, total)};
                              });
}

Var pad(const Var& v, std::size_t offset, std::size_t total) {
  const Tensor& vv = v.value();
  if (offset + vv.numel() > total) throw DimensionError("pad: value does not fit");
  Tensor out(Shape{total});
  std::copy(vv.data.begin(), vv.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(offset));
  Shape shape = vv.shape;
  return tape_of(v).record("pad", std::move(out), {v}, [offset, shape](const Var&, const Var& g) {
    return std::vector<Var>{slice(g, offset, shape)};
  });
}

}  // namespace mcu::ad
