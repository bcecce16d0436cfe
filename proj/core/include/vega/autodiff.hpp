#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "vega/tensor.hpp"

namespace vega::ad {

class Tape;

/// Handle to a value recorded on a tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t id() const { return id_; }
  Tape* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode tape.
///
/// Nodes are appended in evaluation order, so the node list is always a
/// topological order. backward() replays it in reverse and adds dLoss/dLeaf
/// into the gradient buffer of every bound leaf tensor that requires grad.
/// Leaf gradients accumulate across calls until the caller zeroes them.
class Tape {
 public:
  /// What a backward rule sees: the upstream gradient and accumulators for its inputs.
  class Context {
   public:
    bool needs(std::size_t input) const;
    std::span<double> grad(std::size_t input);
    const Tensor& input(std::size_t input) const;

   private:
    friend class Tape;
    Context(Tape& tape, std::size_t node) : tape_(tape), node_(node) {}
    Tape& tape_;
    std::size_t node_;
  };
  using BackwardFn = std::function<void(std::span<const double> grad_out, Context& ctx)>;

  // With record_gradients=false every bound leaf acts as a constant and no
  // backward rules are kept; used for evaluation passes.
  explicit Tape(bool record_gradients = true) : record_gradients_(record_gradients) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Binds an external tensor as a leaf. The tensor must outlive the tape and
  /// must not be modified while the tape is in use.
  Var param(Tensor& leaf);
  Var constant(Tensor value);

  /// Appends an op result. The backward rule is dropped when no input needs a gradient.
  Var record(Tensor value, std::vector<Var> inputs, BackwardFn backward);

  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }
  const Tensor& value(std::size_t id) const;
  bool requires_grad(Var v) const;

 private:
  struct Node {
    Tensor value;
    Tensor* leaf = nullptr;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool requires_grad = false;
  };

  void check_owned(Var v) const;
  std::span<double> grad_buffer(std::size_t id);

  bool record_gradients_ = true;
  std::deque<Node> nodes_;
  std::vector<std::vector<double>> grads_;
};

// ---------------------------------------------------------------------------
// Primitives. Every op validates shapes and throws ValidationError on mismatch.

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
// a[m x n] + bias[n], bias broadcast over rows.
Var add_bias(Var a, Var bias);
// a[(B*N) x d] + table[N x d], table repeated for each of the B groups.
Var add_tiled(Var a, Var table);
Var slice_rows(Var a, std::size_t first, std::size_t count);

inline constexpr double kLayerNormEps = 1e-5;
// Normalizes over the last axis, then applies gain and bias.
Var layer_norm(Var x, Var gain, Var bias, double eps = kLayerNormEps);
// Exact erf form: x * Phi(x).
Var gelu(Var x);
// Row-wise softmax over the last axis.
Var softmax(Var x);

/// Multi-head scaled dot-product self-attention.
/// qkv is [(B*N) x 3d] holding the query, key and value projections side by
/// side; attention runs independently within each group of N consecutive rows.
/// Returns [(B*N) x d] with the heads concatenated.
Var self_attention(Var qkv, std::size_t tokens_per_group, std::size_t heads);

// [(B*N) x d] -> [B x d], mean over each group of N rows.
Var mean_pool(Var x, std::size_t rows_per_group);

Var sum(Var a);
Var mean(Var a);
// Mean of squared differences over all elements.
Var mse(Var pred, Var target);
// Mean of absolute differences over all elements.
Var l1(Var pred, Var target);

inline constexpr double kCosineGradEps = 1e-12;
/// Mean over rows of (1 - cos(a_i, b_i)). Rejects any zero-norm row.
/// Norms in the gradient are clamped below at kCosineGradEps.
Var cosine_distance(Var a, Var b);

// Plain (non-differentiable) kernels shared with code that runs off-tape.
namespace kernels {
// c[m x n] = a[m x k] * b[k x n]
void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c, std::size_t m,
            std::size_t k, std::size_t n);
double gelu(double x);
double gelu_grad(double x);
}  // namespace kernels

}  // namespace vega::ad
