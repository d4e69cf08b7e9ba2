#pragma once

#include <cstdint>
#include <deque>
#include <span>
#include <vector>

#include "tabattack/numerics/tensor.hpp"

namespace tabattack::ad {

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy; valid while the tape lives.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  [[nodiscard]] const Matrix& value() const;
  [[nodiscard]] Eigen::Index rows() const { return value().rows(); }
  [[nodiscard]] Eigen::Index cols() const { return value().cols(); }
  [[nodiscard]] double scalar() const;
  [[nodiscard]] bool requires_grad() const;
};

enum class OpKind : std::uint8_t {
  Leaf,
  MatMul,
  Add,
  Sub,
  Mul,
  Relu,
  Sigmoid,
  Exp,
  Log,
  Square,
  Abs,
  Scale,
  AddScalar,
  AddRowwise,
  MulRowwise,
  Sum,
  Mean,
  ConcatCols,
  SliceCols,
  Embedding,
  SoftmaxRows,
  SoftmaxCrossEntropy,
  KlGaussian,
  Clamp,
  BatchNorm,
  CwMargin,
};

/// Records operations in topological order and replays them backwards.
///
/// Leaves either own their value or reference an external matrix (model
/// parameters), which must outlive the tape. Every forward result is checked
/// for non-finite entries; a violation throws NumericError.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var constant_ref(const Matrix& value);
  Var variable(Matrix value);
  Var parameter(const Matrix& value);

  /// Reverse sweep from a 1x1 loss. Gradients of earlier sweeps are cleared.
  void backward(Var loss);

  /// Gradient of the last backward() loss w.r.t. `v`; zeros when unreached.
  [[nodiscard]] Matrix grad(Var v) const;

  [[nodiscard]] const Matrix& value(int id) const;
  [[nodiscard]] bool requires_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }
  [[nodiscard]] std::size_t size() const { return nodes_.size(); }
  [[nodiscard]] OpKind kind(int id) const { return nodes_[static_cast<std::size_t>(id)].kind; }
  [[nodiscard]] std::span<const int> inputs(int id) const { return nodes_[static_cast<std::size_t>(id)].inputs; }

  struct Node {
    OpKind kind = OpKind::Leaf;
    std::vector<int> inputs;
    Matrix owned;
    const Matrix* ref = nullptr;
    Matrix grad;
    Matrix cache;
    Matrix cache2;
    std::vector<int> labels;
    double a = 0.0;
    double b = 0.0;
    Eigen::Index offset = 0;
    bool requires_grad = false;

    [[nodiscard]] const Matrix& value() const { return ref ? *ref : owned; }
  };

  /// Appends an op node. Used by the op implementations.
  Var push(Node node, const char* what);

 private:
  void accumulate(int id, const Matrix& g);
  void propagate(const Node& node, const Matrix& g);

  std::deque<Node> nodes_;  // stable addresses across push
  bool has_grads_ = false;
};

Var matmul(Var a, Var b);

// Elementwise binary ops accept equal shapes or a 1x1 operand on either side.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);

Var relu(Var a);
Var sigmoid(Var a);
Var exp(Var a);
Var log(Var a);  // NumericError on non-positive input
Var square(Var a);
Var abs(Var a);  // subgradient 0 at 0
Var scale(Var a, double c);
Var add_scalar(Var a, double c);

/// x[n x m] + b[1 x m] broadcast over rows.
Var add_rowwise(Var x, Var b);
/// x[n x m] * r[1 x m] broadcast over rows.
Var mul_rowwise(Var x, Var r);

Var sum(Var a);
Var mean(Var a);

Var concat_cols(std::span<const Var> parts);
Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);

/// Row lookup: out[i] = table[codes[i]].
Var embedding(Var table, std::span<const int> codes);

Var softmax_rows(Var logits);

/// Mean over rows of -log softmax(logits)[label].
Var softmax_crossentropy(Var logits, std::span<const int> labels);

/// Mean over rows of -1/2 sum_j (1 + log_var - mu^2 - exp(log_var)).
Var kl_gaussian(Var mu, Var log_var);

/// Gradient passes only where lo < x < hi.
Var clamp(Var a, double lo, double hi);

struct BatchNormResult {
  Var out;
  RowVector batch_mean;
  RowVector batch_var;  // population variance of the batch
};

/// Training-mode batch normalisation over rows with learnable gamma/beta [1 x m].
BatchNormResult batch_norm(Var x, Var gamma, Var beta, double eps);

/// Sum over rows of max(z_y - max_{i != y} z_i + kappa, 0).
Var cw_margin(Var logits, std::span<const int> labels, double kappa);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator*(double c, Var a) { return scale(a, c); }

}  // namespace tabattack::ad
