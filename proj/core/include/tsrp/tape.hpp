#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "tsrp/matrix.hpp"

namespace tsrp {

/// A named array. Trainable parameters get gradient slots on a tape; frozen
/// ones enter a tape as constants and never receive a gradient.
struct Parameter {
  std::string name;
  Matrix value;
  bool trainable = true;
};

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  bool requires_grad() const;
  Tape* tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Ordered record of primitive applications for reverse-mode differentiation.
///
/// Nodes live in a deque, so values stay addressable while new nodes are
/// appended. Gradient slots are only allocated for nodes that depend on a
/// trainable parameter; everything else (frozen weights, data, prompt
/// embeddings) is a constant and costs nothing in the backward sweep.
class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  /// The referenced matrix must outlive the tape.
  Var constant_ref(const Matrix& value);
  /// Registers a parameter. Repeated calls with the same parameter return the
  /// same node so gradients from every use accumulate in one slot.
  Var param(Parameter& p);

  /// Appends an op result. `backward` is dropped when no input requires grad.
  Var record(Matrix value, bool requires_grad, Backward backward);

  const Matrix& value(std::size_t id) const;
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  /// Gradient of node `id`; only meaningful inside or after backward().
  const Matrix& grad(std::size_t id) const;
  bool has_grad(std::size_t id) const { return !nodes_[id].grad.empty(); }
  void accumulate(std::size_t id, const Matrix& g);
  /// Zero-initialized gradient slot for in-place accumulation.
  Matrix& grad_slot(std::size_t id);

  /// Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse.
  void backward(Var loss);

  /// Gradient for a trainable parameter registered on this tape (zeros if it
  /// did not influence the loss). Frozen or unregistered parameters yield
  /// nullopt: their gradients are never materialized.
  std::optional<Matrix> gradient(const Parameter& p) const;

  std::size_t size() const noexcept { return nodes_.size(); }

  /// Keeps an object alive for as long as the tape (e.g. constant context
  /// referenced by an op's backward closure).
  void retain(std::shared_ptr<const void> object) { retained_.push_back(std::move(object)); }

 private:
  struct Node {
    Matrix owned;
    const Matrix* ref = nullptr;
    Matrix grad;
    bool requires_grad = false;
    Backward backward;
  };

  std::deque<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> params_;
  std::vector<std::shared_ptr<const void>> retained_;
};

/// Differentiable primitives. Every op checks shapes and throws ShapeError.
namespace ad {

Var matmul(Var a, Var b);
/// a·bᵀ
Var matmul_nt(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
/// Adds a 1×n row to every row of a.
Var add_row(Var a, Var row);
Var scale(Var a, double s);
/// x·Wᵀ + b with W out×in and b 1×out.
Var linear(Var x, Var weight, Var bias);
Var linear(Var x, Var weight);
/// Exact GELU, 0.5·x·(1 + erf(x/√2)).
Var gelu(Var a);
/// Row-wise layer normalization with 1×d gain and bias.
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);

struct AttentionOptions {
  std::size_t heads = 1;
  /// Query row i sees context rows plus key rows 0..i.
  bool causal = false;
  /// Constant keys/values that precede `k`/`v` (cached prefix). Either both or neither.
  const Matrix* context_keys = nullptr;
  const Matrix* context_values = nullptr;
};

/// Multi-head scaled dot-product attention. q is n×(H·d_h), k and v are
/// m×(H·d_h); column block h belongs to head h. Output is n×(H·d_h).
Var attention(Var q, Var k, Var v, const AttentionOptions& opts);

/// Per-head attention probabilities for the same inputs (no tape). Entry
/// [h] is n×(context+m); masked positions are exactly 0.
std::vector<Matrix> attention_weights(const Matrix& q, const Matrix& k,
                                      const AttentionOptions& opts);

Var concat_rows(std::span<const Var> parts);
Var slice_rows(Var a, std::size_t begin, std::size_t count);
/// Row-major flatten to 1×(rows·cols).
Var flatten(Var a);
/// Rows of `table` selected by `ids`.
Var gather_rows(Var table, std::span<const std::size_t> ids);
/// (1/n)·Σ(pred − target)² over all entries, as a 1×1 node.
Var mse(Var pred, const Matrix& target);
/// Mean of 1×1 nodes.
Var mean(std::span<const Var> scalars);

}  // namespace ad
}  // namespace tsrp
