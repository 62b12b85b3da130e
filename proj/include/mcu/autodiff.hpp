#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <limits>
#include <span>
#include <unordered_set>
#include <vector>

#include "mcu/tensor.hpp"

// Tape-based reverse-mode automatic differentiation over small dense tensors.
//
// Every op appends a node holding its value, its parents and a backward rule.
// Backward rules are themselves written with tape ops, so a gradient computed
// with `create_graph = true` is an ordinary node that can be differentiated
// again (used for Hessian-vector products). When the tape is not recording,
// ops still compute values but produce constant nodes with no parents.
namespace mcu::ad {

class Tape;

class Var {
 public:
  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  bool valid() const { return tape_ != nullptr && id_ != npos; }
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }

  const Tensor& value() const;
  const Shape& shape() const { return value().shape; }
  bool requires_grad() const;

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = npos;
};

using BackwardFn = std::function<std::vector<Var>(const Var& self, const Var& grad)>;

struct Node {
  Tensor value;
  std::vector<std::size_t> parents;
  BackwardFn backward;
  bool requires_grad = false;
  const char* op = "leaf";
};

class Tape {
 public:
  Var constant(Tensor value);
  Var parameter(Tensor value);

  /// Appends an op node. Produces a constant when not recording or when no
  /// parent requires a gradient.
  Var record(const char* op, Tensor value, std::vector<Var> parents, BackwardFn backward);

  /// Gradients of the scalar `loss` with respect to `wrt`. Inputs the loss does
  /// not depend on receive zero tensors. A loss node can be differentiated once
  /// per reset(); a second call is a contract violation.
  std::vector<Var> grad(const Var& loss, std::span<const Var> wrt, bool create_graph = false);

  const Node& node(std::size_t id) const { return nodes_[id]; }
  std::size_t size() const { return nodes_.size(); }
  bool recording() const { return recording_; }

  /// Debug assertion mode: every recorded value must be finite.
  void set_check_finite(bool on) { check_finite_ = on; }

  void reset();

 private:
  friend class NoGradGuard;

  std::deque<Node> nodes_;
  std::unordered_set<std::size_t> consumed_;
  bool recording_ = true;
  bool check_finite_ = false;
};

/// Disables recording on a tape for the guard's lifetime.
class NoGradGuard {
 public:
  explicit NoGradGuard(Tape& tape, bool recording = false) : tape_(tape), saved_(tape.recording_) {
    tape_.recording_ = recording;
  }
  ~NoGradGuard() { tape_.recording_ = saved_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  Tape& tape_;
  bool saved_;
};

// Elementwise, same shape.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var neg(const Var& a);
Var scale(const Var& a, float c);
Var relu(const Var& a);
Var tanh(const Var& a);
Var exp(const Var& a);
Var sigmoid(const Var& a);
Var softplus(const Var& a);

// Linear algebra on rank-2 values.
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);

// Broadcasting and reductions. A rank-1 [n] value acts as a row vector.
Var add_row(const Var& a, const Var& row);
Var sum_rows(const Var& a);                      // [m,n] -> [n]
Var broadcast_rows(const Var& v, std::size_t m);  // [n] -> [m,n]
Var sum_cols(const Var& a);                      // [m,n] -> [m]
Var broadcast_cols(const Var& v, std::size_t n);  // [m] -> [m,n]
Var sum(const Var& a);                           // any -> scalar
Var expand(const Var& s, const Shape& shape);    // scalar -> shape
Var mean(const Var& a);
Var dot(const Var& a, const Var& b);

Var log_softmax(const Var& a);  // row-wise on [m,n]

// Label indexing on [m,n].
Var pick(const Var& a, std::span<const int> labels);                        // -> [m]
Var scatter(const Var& v, std::span<const int> labels, std::size_t n);  // [m] -> [m,n]

// Views into a flat parameter vector.
Var slice(const Var& flat, std::size_t offset, const Shape& shape);
Var pad(const Var& v, std::size_t offset, std::size_t total);

}  // namespace mcu::ad
