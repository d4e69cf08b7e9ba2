#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "tabattack/numerics/adam.hpp"
#include "tabattack/numerics/tape.hpp"

namespace tabattack {

/// Named tensors owned by a model. Trainable entries are optimised; buffers
/// (batch-norm running statistics) are only serialised.
class ParameterStore {
 public:
  std::size_t add(std::string name, Matrix init, bool trainable = true);

  [[nodiscard]] std::size_t size() const { return values_.size(); }
  [[nodiscard]] const Matrix& value(std::size_t i) const { return values_.at(i); }
  [[nodiscard]] Matrix& value(std::size_t i) { return values_.at(i); }
  [[nodiscard]] const std::string& name(std::size_t i) const { return names_.at(i); }
  [[nodiscard]] bool trainable(std::size_t i) const { return trainable_.at(i); }
  [[nodiscard]] std::size_t index_of(const std::string& name) const;

  /// Pointers to trainable tensors, in insertion order.
  [[nodiscard]] std::vector<Matrix*> trainable_values();
  [[nodiscard]] std::vector<std::size_t> trainable_indices() const;

  [[nodiscard]] bool operator==(const ParameterStore& other) const;

 private:
  std::vector<std::string> names_;
  std::vector<Matrix> values_;
  std::vector<bool> trainable_;
};

/// Places a ParameterStore's tensors on a tape on first use.
class Binder {
 public:
  Binder(ad::Tape& tape, const ParameterStore& store, bool track_gradients);

  ad::Var operator()(std::size_t index);
  [[nodiscard]] ad::Tape& tape() const { return *tape_; }
  [[nodiscard]] bool tracking() const { return track_; }

  /// Gradients of trainable parameters (trainable_indices order); zero when unreached.
  [[nodiscard]] std::vector<Matrix> gradients() const;

 private:
  ad::Tape* tape_;
  const ParameterStore* store_;
  bool track_;
  std::vector<int> bound_;
};

using Rng = std::mt19937_64;

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialisation.
Matrix uniform_init(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in, Rng& rng);

struct Dense {
  std::size_t weight = 0;
  std::size_t bias = 0;

  static Dense create(ParameterStore& store, const std::string& name, Eigen::Index in, Eigen::Index out,
                      Rng& rng, bool zero_init = false);
  [[nodiscard]] ad::Var forward(Binder& bind, ad::Var x) const;
  [[nodiscard]] Eigen::Index in_features(const ParameterStore& s) const { return s.value(weight).rows(); }
  [[nodiscard]] Eigen::Index out_features(const ParameterStore& s) const { return s.value(weight).cols(); }
};

/// Batch normalisation with running statistics for inference.
struct BatchNorm {
  static constexpr double kMomentum = 0.1;
  static constexpr double kEps = 1e-5;

  std::size_t gamma = 0;
  std::size_t beta = 0;
  std::size_t running_mean = 0;
  std::size_t running_var = 0;

  static BatchNorm create(ParameterStore& store, const std::string& name, Eigen::Index width);

  /// Training mode normalises with batch statistics; `observed` receives them.
  [[nodiscard]] ad::Var forward(Binder& bind, ad::Var x, bool training,
                                std::vector<ad::BatchNormResult>* observed = nullptr) const;
  void update_running(ParameterStore& store, const ad::BatchNormResult& observed, Eigen::Index batch_rows) const;
};

}  // namespace tabattack
