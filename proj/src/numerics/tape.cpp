#include "tabattack/numerics/tape.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <utility>

namespace tabattack::ad {

namespace {

using Node = Tape::Node;

Tape& tape_of(Var a) {
  if (a.tape == nullptr) throw ContractError("operation on an unbound Var");
  return *a.tape;
}

Tape& tape_of(Var a, Var b) {
  if (a.tape != b.tape) throw ContractError("operands recorded on different tapes");
  return tape_of(a);
}

Node unary(OpKind kind, Var a) {
  Node n;
  n.kind = kind;
  n.inputs = {a.id};
  return n;
}

Node binary(OpKind kind, Var a, Var b) {
  Node n;
  n.kind = kind;
  n.inputs = {a.id, b.id};
  return n;
}

bool is_scalar(const Matrix& m) { return m.rows() == 1 && m.cols() == 1; }

void check_broadcast(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return;
  if (is_scalar(a) || is_scalar(b)) return;
  throw DimensionError(std::string(op) + ": incompatible shapes " + shape_string(a) + " and " +
                       shape_string(b));
}

// Elementwise combination with scalar broadcasting on either side.
template <typename F>
Matrix broadcast(const Matrix& a, const Matrix& b, F f) {
  if (is_scalar(a) && !is_scalar(b)) {
    const double s = a(0, 0);
    return b.unaryExpr([&](double v) { return f(s, v); });
  }
  if (is_scalar(b) && !is_scalar(a)) {
    const double s = b(0, 0);
    return a.unaryExpr([&](double v) { return f(v, s); });
  }
  return a.binaryExpr(b, f);
}

// Reduce an output-shaped gradient back onto an operand that may have been broadcast.
Matrix reduce_to(const Matrix& operand, const Matrix& g) {
  if (is_scalar(operand) && !is_scalar(g)) return scalar_matrix(g.sum());
  return g;
}

double sigmoid_scalar(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Matrix row_softmax(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double mx = logits.row(i).maxCoeff();
    out.row(i) = (logits.row(i).array() - mx).exp().matrix();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

void check_labels(std::span<const int> labels, const Matrix& logits, const char* op) {
  if (static_cast<Eigen::Index>(labels.size()) != logits.rows()) {
    throw DimensionError(std::string(op) + ": " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(logits.rows()) + " rows");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= logits.cols()) {
      throw IndexError(std::string(op) + ": label " + std::to_string(labels[i]) + " at row " +
                       std::to_string(i) + " outside [0, " + std::to_string(logits.cols()) + ")");
    }
  }
}

}  // namespace

const Matrix& Var::value() const { return tape_of(*this).value(id); }

double Var::scalar() const {
  const Matrix& v = value();
  if (!is_scalar(v)) throw ContractError("scalar() on non-scalar " + shape_string(v));
  return v(0, 0);
}

bool Var::requires_grad() const { return tape_of(*this).requires_grad(id); }

const Matrix& Tape::value(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= nodes_.size()) throw ContractError("stale Var id");
  return nodes_[static_cast<std::size_t>(id)].value();
}

Var Tape::push(Node node, const char* what) {
  require_finite(node.value(), what);
  for (int in : node.inputs) {
    if (nodes_[static_cast<std::size_t>(in)].requires_grad) node.requires_grad = true;
  }
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::constant(Matrix value) {
  Node n;
  n.owned = std::move(value);
  return push(std::move(n), "constant");
}

Var Tape::constant_ref(const Matrix& value) {
  Node n;
  n.ref = &value;
  return push(std::move(n), "constant");
}

Var Tape::variable(Matrix value) {
  Node n;
  n.owned = std::move(value);
  n.requires_grad = true;
  return push(std::move(n), "variable");
}

Var Tape::parameter(const Matrix& value) {
  Node n;
  n.ref = &value;
  n.requires_grad = true;
  return push(std::move(n), "parameter");
}

void Tape::accumulate(int id, const Matrix& g) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (!n.requires_grad) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

Matrix Tape::grad(Var v) const {
  const Node& n = nodes_.at(static_cast<std::size_t>(v.id));
  if (n.grad.size() == 0) return Matrix::Zero(n.value().rows(), n.value().cols());
  return n.grad;
}

void Tape::backward(Var loss) {
  if (loss.tape != this) throw ContractError("backward: loss belongs to another tape");
  const Matrix& lv = value(loss.id);
  if (!is_scalar(lv)) throw ContractError("backward: loss must be scalar, got " + shape_string(lv));
  for (Node& n : nodes_) n.grad.resize(0, 0);
  has_grads_ = true;
  if (!nodes_[static_cast<std::size_t>(loss.id)].requires_grad) return;
  nodes_[static_cast<std::size_t>(loss.id)].grad = scalar_matrix(1.0);
  for (int id = loss.id; id >= 0; --id) {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.requires_grad || n.grad.size() == 0 || n.kind == OpKind::Leaf) continue;
    propagate(n, n.grad);
  }
}

void Tape::propagate(const Node& n, const Matrix& g) {
  auto in = [&](std::size_t k) -> const Matrix& { return value(n.inputs[k]); };
  switch (n.kind) {
    case OpKind::Leaf:
      break;
    case OpKind::MatMul:
      accumulate(n.inputs[0], g * in(1).transpose());
      accumulate(n.inputs[1], in(0).transpose() * g);
      break;
    case OpKind::Add:
      accumulate(n.inputs[0], reduce_to(in(0), g));
      accumulate(n.inputs[1], reduce_to(in(1), g));
      break;
    case OpKind::Sub:
      accumulate(n.inputs[0], reduce_to(in(0), g));
      accumulate(n.inputs[1], reduce_to(in(1), -g));
      break;
    case OpKind::Mul: {
      const Matrix& a = in(0);
      const Matrix& b = in(1);
      accumulate(n.inputs[0], reduce_to(a, broadcast(g, b, [](double x, double y) { return x * y; })));
      accumulate(n.inputs[1], reduce_to(b, broadcast(g, a, [](double x, double y) { return x * y; })));
      break;
    }
    case OpKind::Relu:
      accumulate(n.inputs[0], g.cwiseProduct(in(0).unaryExpr([](double x) { return x > 0.0 ? 1.0 : 0.0; })));
      break;
    case OpKind::Sigmoid: {
      const Matrix& s = n.value();
      accumulate(n.inputs[0], g.array() * s.array() * (1.0 - s.array()));
      break;
    }
    case OpKind::Exp:
      accumulate(n.inputs[0], g.cwiseProduct(n.value()));
      break;
    case OpKind::Log:
      accumulate(n.inputs[0], g.cwiseQuotient(in(0)));
      break;
    case OpKind::Square:
      accumulate(n.inputs[0], 2.0 * g.cwiseProduct(in(0)));
      break;
    case OpKind::Abs:
      accumulate(n.inputs[0], g.cwiseProduct(in(0).unaryExpr([](double x) {
        return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
      })));
      break;
    case OpKind::Scale:
      accumulate(n.inputs[0], n.a * g);
      break;
    case OpKind::AddScalar:
      accumulate(n.inputs[0], g);
      break;
    case OpKind::AddRowwise:
      accumulate(n.inputs[0], g);
      accumulate(n.inputs[1], g.colwise().sum());
      break;
    case OpKind::MulRowwise: {
      const Matrix& x = in(0);
      const Matrix& r = in(1);
      Matrix gx = g;
      gx.array().rowwise() *= r.row(0).array();
      accumulate(n.inputs[0], gx);
      accumulate(n.inputs[1], g.cwiseProduct(x).colwise().sum());
      break;
    }
    case OpKind::Sum: {
      const Matrix& a = in(0);
      accumulate(n.inputs[0], Matrix::Constant(a.rows(), a.cols(), g(0, 0)));
      break;
    }
    case OpKind::Mean: {
      const Matrix& a = in(0);
      accumulate(n.inputs[0], Matrix::Constant(a.rows(), a.cols(), g(0, 0) / static_cast<double>(a.size())));
      break;
    }
    case OpKind::ConcatCols: {
      Eigen::Index col = 0;
      for (std::size_t k = 0; k < n.inputs.size(); ++k) {
        const Eigen::Index w = in(k).cols();
        accumulate(n.inputs[k], g.middleCols(col, w));
        col += w;
      }
      break;
    }
    case OpKind::SliceCols: {
      const Matrix& a = in(0);
      Matrix ga = Matrix::Zero(a.rows(), a.cols());
      ga.middleCols(n.offset, g.cols()) = g;
      accumulate(n.inputs[0], ga);
      break;
    }
    case OpKind::Embedding: {
      const Matrix& table = in(0);
      Matrix gt = Matrix::Zero(table.rows(), table.cols());
      for (std::size_t i = 0; i < n.labels.size(); ++i) {
        gt.row(n.labels[i]) += g.row(static_cast<Eigen::Index>(i));
      }
      accumulate(n.inputs[0], gt);
      break;
    }
    case OpKind::SoftmaxRows: {
      const Matrix& s = n.value();
      const Vector dots = g.cwiseProduct(s).rowwise().sum();
      Matrix gx = g;
      gx.colwise() -= dots;
      accumulate(n.inputs[0], gx.cwiseProduct(s));
      break;
    }
    case OpKind::SoftmaxCrossEntropy: {
      Matrix gx = n.cache;
      for (std::size_t i = 0; i < n.labels.size(); ++i) gx(static_cast<Eigen::Index>(i), n.labels[i]) -= 1.0;
      gx *= g(0, 0) / static_cast<double>(n.labels.size());
      accumulate(n.inputs[0], gx);
      break;
    }
    case OpKind::KlGaussian: {
      const Matrix& mu = in(0);
      const Matrix& lv = in(1);
      const double scale = g(0, 0) / static_cast<double>(mu.rows());
      accumulate(n.inputs[0], scale * mu);
      accumulate(n.inputs[1], (-0.5 * scale) * (1.0 - lv.array().exp()).matrix());
      break;
    }
    case OpKind::Clamp: {
      const double lo = n.a;
      const double hi = n.b;
      accumulate(n.inputs[0], g.cwiseProduct(in(0).unaryExpr([lo, hi](double x) {
        return (x > lo && x < hi) ? 1.0 : 0.0;
      })));
      break;
    }
    case OpKind::BatchNorm: {
      const Matrix& xhat = n.cache;
      const RowVector inv_std = n.cache2.row(0);
      const RowVector gamma = in(1).row(0);
      const double rows = static_cast<double>(xhat.rows());
      accumulate(n.inputs[1], g.cwiseProduct(xhat).colwise().sum());
      accumulate(n.inputs[2], g.colwise().sum());
      Matrix gxhat = g;
      gxhat.array().rowwise() *= gamma.array();
      const RowVector sum_g = gxhat.colwise().sum();
      const RowVector sum_gx = gxhat.cwiseProduct(xhat).colwise().sum();
      Matrix gx = rows * gxhat;
      gx.rowwise() -= sum_g;
      gx -= (xhat.array().rowwise() * sum_gx.array()).matrix();
      gx.array().rowwise() *= (inv_std.array() / rows);
      accumulate(n.inputs[0], gx);
      break;
    }
    case OpKind::CwMargin: {
      const Matrix& z = in(0);
      Matrix gz = Matrix::Zero(z.rows(), z.cols());
      for (std::size_t i = 0; i < n.labels.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        if (n.cache(r, 1) <= 0.0) continue;
        gz(r, n.labels[i]) += g(0, 0);
        gz(r, static_cast<Eigen::Index>(n.cache(r, 0))) -= g(0, 0);
      }
      accumulate(n.inputs[0], gz);
      break;
    }
  }
}

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols() != bv.rows()) {
    throw DimensionError("matmul: inner dimensions disagree " + shape_string(av) + " x " + shape_string(bv));
  }
  Node n = binary(OpKind::MatMul, a, b);
  n.owned = av * bv;
  return t.push(std::move(n), "matmul");
}

Var add(Var a, Var b) {
  Tape& t = tape_of(a, b);
  check_broadcast(a.value(), b.value(), "add");
  Node n = binary(OpKind::Add, a, b);
  n.owned = broadcast(a.value(), b.value(), [](double x, double y) { return x + y; });
  return t.push(std::move(n), "add");
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a, b);
  check_broadcast(a.value(), b.value(), "sub");
  Node n = binary(OpKind::Sub, a, b);
  n.owned = broadcast(a.value(), b.value(), [](double x, double y) { return x - y; });
  return t.push(std::move(n), "sub");
}

Var mul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  check_broadcast(a.value(), b.value(), "mul");
  Node n = binary(OpKind::Mul, a, b);
  n.owned = broadcast(a.value(), b.value(), [](double x, double y) { return x * y; });
  return t.push(std::move(n), "mul");
}

Var relu(Var a) {
  Node n = unary(OpKind::Relu, a);
  n.owned = a.value().cwiseMax(0.0);
  return tape_of(a).push(std::move(n), "relu");
}

Var sigmoid(Var a) {
  Node n = unary(OpKind::Sigmoid, a);
  n.owned = a.value().unaryExpr(&sigmoid_scalar);
  return tape_of(a).push(std::move(n), "sigmoid");
}

Var exp(Var a) {
  Node n = unary(OpKind::Exp, a);
  n.owned = a.value().array().exp().matrix();
  return tape_of(a).push(std::move(n), "exp");
}

Var log(Var a) {
  const Matrix& v = a.value();
  if ((v.array() <= 0.0).any()) throw NumericError("log: non-positive argument");
  Node n = unary(OpKind::Log, a);
  n.owned = v.array().log().matrix();
  return tape_of(a).push(std::move(n), "log");
}

Var square(Var a) {
  Node n = unary(OpKind::Square, a);
  n.owned = a.value().array().square().matrix();
  return tape_of(a).push(std::move(n), "square");
}

Var abs(Var a) {
  Node n = unary(OpKind::Abs, a);
  n.owned = a.value().cwiseAbs();
  return tape_of(a).push(std::move(n), "abs");
}

Var scale(Var a, double c) {
  Node n = unary(OpKind::Scale, a);
  n.a = c;
  n.owned = c * a.value();
  return tape_of(a).push(std::move(n), "scale");
}

Var add_scalar(Var a, double c) {
  Node n = unary(OpKind::AddScalar, a);
  n.a = c;
  n.owned = (a.value().array() + c).matrix();
  return tape_of(a).push(std::move(n), "add_scalar");
}

Var add_rowwise(Var x, Var b) {
  Tape& t = tape_of(x, b);
  const Matrix& xv = x.value();
  const Matrix& bv = b.value();
  if (bv.rows() != 1 || bv.cols() != xv.cols()) {
    throw DimensionError("add_rowwise: " + shape_string(bv) + " does not broadcast over " + shape_string(xv));
  }
  Node n = binary(OpKind::AddRowwise, x, b);
  n.owned = xv;
  n.owned.rowwise() += bv.row(0);
  return t.push(std::move(n), "add_rowwise");
}

Var mul_rowwise(Var x, Var r) {
  Tape& t = tape_of(x, r);
  const Matrix& xv = x.value();
  const Matrix& rv = r.value();
  if (rv.rows() != 1 || rv.cols() != xv.cols()) {
    throw DimensionError("mul_rowwise: " + shape_string(rv) + " does not broadcast over " + shape_string(xv));
  }
  Node n = binary(OpKind::MulRowwise, x, r);
  n.owned = xv;
  n.owned.array().rowwise() *= rv.row(0).array();
  return t.push(std::move(n), "mul_rowwise");
}

Var sum(Var a) {
  Node n = unary(OpKind::Sum, a);
  n.owned = scalar_matrix(a.value().sum());
  return tape_of(a).push(std::move(n), "sum");
}

Var mean(Var a) {
  const Matrix& v = a.value();
  if (v.size() == 0) throw DimensionError("mean of empty tensor");
  Node n = unary(OpKind::Mean, a);
  n.owned = scalar_matrix(v.mean());
  return tape_of(a).push(std::move(n), "mean");
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no inputs");
  Tape& t = tape_of(parts.front());
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  Node n;
  n.kind = OpKind::ConcatCols;
  for (const Var& p : parts) {
    tape_of(parts.front(), p);
    if (p.rows() != rows) {
      throw DimensionError("concat_cols: row mismatch " + std::to_string(p.rows()) + " vs " + std::to_string(rows));
    }
    cols += p.cols();
    n.inputs.push_back(p.id);
  }
  n.owned.resize(rows, cols);
  Eigen::Index col = 0;
  for (const Var& p : parts) {
    n.owned.middleCols(col, p.cols()) = p.value();
    col += p.cols();
  }
  return t.push(std::move(n), "concat_cols");
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  const Matrix& v = a.value();
  if (start < 0 || count < 0 || start + count > v.cols()) {
    throw DimensionError("slice_cols: [" + std::to_string(start) + ", " + std::to_string(start + count) +
                         ") outside " + shape_string(v));
  }
  Node n = unary(OpKind::SliceCols, a);
  n.offset = start;
  n.owned = v.middleCols(start, count);
  return tape_of(a).push(std::move(n), "slice_cols");
}

Var embedding(Var table, std::span<const int> codes) {
  const Matrix& tv = table.value();
  Node n = unary(OpKind::Embedding, table);
  n.owned.resize(static_cast<Eigen::Index>(codes.size()), tv.cols());
  for (std::size_t i = 0; i < codes.size(); ++i) {
    if (codes[i] < 0 || codes[i] >= tv.rows()) {
      throw IndexError("embedding: code " + std::to_string(codes[i]) + " at row " + std::to_string(i) +
                       " outside [0, " + std::to_string(tv.rows()) + ")");
    }
    n.owned.row(static_cast<Eigen::Index>(i)) = tv.row(codes[i]);
  }
  n.labels.assign(codes.begin(), codes.end());
  return tape_of(table).push(std::move(n), "embedding");
}

Var softmax_rows(Var logits) {
  Node n = unary(OpKind::SoftmaxRows, logits);
  n.owned = row_softmax(logits.value());
  return tape_of(logits).push(std::move(n), "softmax_rows");
}

Var softmax_crossentropy(Var logits, std::span<const int> labels) {
  const Matrix& z = logits.value();
  check_labels(labels, z, "softmax_crossentropy");
  if (z.rows() == 0) throw DimensionError("softmax_crossentropy: empty batch");
  Node n = unary(OpKind::SoftmaxCrossEntropy, logits);
  double total = 0.0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const double mx = z.row(i).maxCoeff();
    const double lse = mx + std::log((z.row(i).array() - mx).exp().sum());
    total += lse - z(i, labels[static_cast<std::size_t>(i)]);
  }
  n.cache = row_softmax(z);
  n.labels.assign(labels.begin(), labels.end());
  n.owned = scalar_matrix(total / static_cast<double>(z.rows()));
  return tape_of(logits).push(std::move(n), "softmax_crossentropy");
}

Var kl_gaussian(Var mu, Var log_var) {
  Tape& t = tape_of(mu, log_var);
  const Matrix& m = mu.value();
  const Matrix& lv = log_var.value();
  if (m.rows() != lv.rows() || m.cols() != lv.cols()) {
    throw DimensionError("kl_gaussian: " + shape_string(m) + " vs " + shape_string(lv));
  }
  if (m.rows() == 0) throw DimensionError("kl_gaussian: empty batch");
  Node n = binary(OpKind::KlGaussian, mu, log_var);
  const double total = -0.5 * (1.0 + lv.array() - m.array().square() - lv.array().exp()).sum();
  n.owned = scalar_matrix(total / static_cast<double>(m.rows()));
  return t.push(std::move(n), "kl_gaussian");
}

Var clamp(Var a, double lo, double hi) {
  Node n = unary(OpKind::Clamp, a);
  n.a = lo;
  n.b = hi;
  n.owned = a.value().cwiseMax(lo).cwiseMin(hi);
  return tape_of(a).push(std::move(n), "clamp");
}

BatchNormResult batch_norm(Var x, Var gamma, Var beta, double eps) {
  Tape& t = tape_of(x, gamma);
  tape_of(x, beta);
  const Matrix& xv = x.value();
  if (gamma.rows() != 1 || gamma.cols() != xv.cols() || beta.rows() != 1 || beta.cols() != xv.cols()) {
    throw DimensionError("batch_norm: affine parameters do not match " + shape_string(xv));
  }
  if (xv.rows() == 0) throw DimensionError("batch_norm: empty batch");
  const double rows = static_cast<double>(xv.rows());
  const RowVector mu = xv.colwise().sum() / rows;
  Matrix centered = xv;
  centered.rowwise() -= mu;
  const RowVector var = centered.array().square().colwise().sum().matrix() / rows;
  const RowVector inv_std = (var.array() + eps).rsqrt().matrix();

  Node n;
  n.kind = OpKind::BatchNorm;
  n.inputs = {x.id, gamma.id, beta.id};
  n.cache = centered;
  n.cache.array().rowwise() *= inv_std.array();
  n.cache2 = inv_std;
  n.owned = n.cache;
  n.owned.array().rowwise() *= gamma.value().row(0).array();
  n.owned.rowwise() += beta.value().row(0);
  Var out = t.push(std::move(n), "batch_norm");
  return {out, mu, var};
}

Var cw_margin(Var logits, std::span<const int> labels, double kappa) {
  const Matrix& z = logits.value();
  check_labels(labels, z, "cw_margin");
  if (z.cols() < 2) throw DimensionError("cw_margin: needs at least two classes");
  Node n = unary(OpKind::CwMargin, logits);
  n.cache.resize(z.rows(), 2);
  double total = 0.0;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    Eigen::Index best = -1;
    double best_val = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
      if (c == y) continue;
      if (z(i, c) > best_val) {
        best_val = z(i, c);
        best = c;
      }
    }
    const double margin = z(i, y) - best_val + kappa;
    n.cache(i, 0) = static_cast<double>(best);
    n.cache(i, 1) = margin;
    total += std::max(margin, 0.0);
  }
  n.labels.assign(labels.begin(), labels.end());
  n.owned = scalar_matrix(total);
  return tape_of(logits).push(std::move(n), "cw_margin");
}

}  // namespace tabattack::ad
