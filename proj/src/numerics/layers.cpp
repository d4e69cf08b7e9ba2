#include "tabattack/numerics/layers.hpp"

#include <cmath>
#include <utility>

namespace tabattack {

std::size_t ParameterStore::add(std::string name, Matrix init, bool trainable) {
  for (const auto& n : names_) {
    if (n == name) throw ContractError("duplicate parameter name '" + name + "'");
  }
  names_.push_back(std::move(name));
  values_.push_back(std::move(init));
  trainable_.push_back(trainable);
  return values_.size() - 1;
}

std::size_t ParameterStore::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return i;
  }
  throw ContractError("unknown parameter '" + name + "'");
}

std::vector<Matrix*> ParameterStore::trainable_values() {
  std::vector<Matrix*> out;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (trainable_[i]) out.push_back(&values_[i]);
  }
  return out;
}

std::vector<std::size_t> ParameterStore::trainable_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (trainable_[i]) out.push_back(i);
  }
  return out;
}

bool ParameterStore::operator==(const ParameterStore& other) const {
  if (names_ != other.names_ || trainable_ != other.trainable_) return false;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (values_[i].rows() != other.values_[i].rows() || values_[i].cols() != other.values_[i].cols()) return false;
    if (values_[i] != other.values_[i]) return false;
  }
  return true;
}

Binder::Binder(ad::Tape& tape, const ParameterStore& store, bool track_gradients)
    : tape_(&tape), store_(&store), track_(track_gradients), bound_(store.size(), -1) {}

ad::Var Binder::operator()(std::size_t index) {
  if (bound_.at(index) >= 0) return ad::Var{tape_, bound_[index]};
  const Matrix& value = store_->value(index);
  ad::Var v = (track_ && store_->trainable(index)) ? tape_->parameter(value) : tape_->constant_ref(value);
  bound_[index] = v.id;
  return v;
}

std::vector<Matrix> Binder::gradients() const {
  std::vector<Matrix> out;
  for (std::size_t i : store_->trainable_indices()) {
    if (bound_[i] >= 0) {
      out.push_back(tape_->grad(ad::Var{tape_, bound_[i]}));
    } else {
      out.push_back(Matrix::Zero(store_->value(i).rows(), store_->value(i).cols()));
    }
  }
  return out;
}

Matrix uniform_init(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<Eigen::Index>(fan_in, 1)));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

Dense Dense::create(ParameterStore& store, const std::string& name, Eigen::Index in, Eigen::Index out, Rng& rng,
                    bool zero_init) {
  Dense d;
  d.weight = store.add(name + ".weight", zero_init ? Matrix::Zero(in, out) : uniform_init(in, out, in, rng));
  d.bias = store.add(name + ".bias", zero_init ? Matrix::Zero(1, out) : uniform_init(1, out, in, rng));
  return d;
}

ad::Var Dense::forward(Binder& bind, ad::Var x) const {
  return ad::add_rowwise(ad::matmul(x, bind(weight)), bind(bias));
}

BatchNorm BatchNorm::create(ParameterStore& store, const std::string& name, Eigen::Index width) {
  BatchNorm bn;
  bn.gamma = store.add(name + ".gamma", Matrix::Ones(1, width));
  bn.beta = store.add(name + ".beta", Matrix::Zero(1, width));
  bn.running_mean = store.add(name + ".running_mean", Matrix::Zero(1, width), false);
  bn.running_var = store.add(name + ".running_var", Matrix::Ones(1, width), false);
  return bn;
}

ad::Var BatchNorm::forward(Binder& bind, ad::Var x, bool training,
                           std::vector<ad::BatchNormResult>* observed) const {
  if (training) {
    ad::BatchNormResult r = ad::batch_norm(x, bind(gamma), bind(beta), kEps);
    if (observed) observed->push_back(r);
    return r.out;
  }
  // y = (x - mean) / sqrt(var + eps) * gamma + beta, folded into one scale and shift.
  ad::Tape& t = bind.tape();
  const Matrix& rm = t.value(bind(running_mean).id);
  const Matrix& rv = t.value(bind(running_var).id);
  const RowVector inv_std = (rv.row(0).array() + kEps).rsqrt().matrix();
  ad::Var g = bind(gamma);
  ad::Var b = bind(beta);
  ad::Var s = ad::mul_rowwise(g, t.constant(inv_std));
  ad::Var centered = ad::add_rowwise(x, t.constant(-rm));
  return ad::add_rowwise(ad::mul_rowwise(centered, s), b);
}

void BatchNorm::update_running(ParameterStore& store, const ad::BatchNormResult& observed,
                               Eigen::Index batch_rows) const {
  Matrix& rm = store.value(running_mean);
  Matrix& rv = store.value(running_var);
  const double n = static_cast<double>(batch_rows);
  const RowVector unbiased = batch_rows > 1 ? RowVector(observed.batch_var * (n / (n - 1.0))) : observed.batch_var;
  rm = (1.0 - kMomentum) * rm + kMomentum * observed.batch_mean;
  rv = (1.0 - kMomentum) * rv + kMomentum * unbiased;
}

}  // namespace tabattack
