#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tabattack/data/dataset.hpp"
#include "tabattack/io/checkpoint.hpp"
#include "tabattack/numerics/layers.hpp"

namespace tabattack {

/// Numeric width and categorical cardinalities of the encoded input.
struct InputSpec {
  int numeric_dim = 0;
  std::vector<int> cardinalities;

  [[nodiscard]] int flat_width() const;
  [[nodiscard]] int categorical_count() const { return static_cast<int>(cardinalities.size()); }
  [[nodiscard]] nlohmann::json to_json() const;
  static InputSpec from_json(const nlohmann::json& j);
  bool operator==(const InputSpec&) const = default;
};

enum class ModelKind { Mlp, Sdt };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& s);

struct MlpConfig {
  std::vector<int> hidden{64, 32};
  bool zero_init_output = false;
};

struct SdtConfig {
  int depth = 4;
};

/// Classifier over the flat input `[one-hot blocks | numerics]`.
class TargetModel {
 public:
  static TargetModel mlp(InputSpec spec, int classes, const MlpConfig& config, std::uint64_t seed);
  static TargetModel sdt(InputSpec spec, int classes, const SdtConfig& config, std::uint64_t seed);

  [[nodiscard]] ModelKind kind() const { return kind_; }
  [[nodiscard]] const InputSpec& spec() const { return spec_; }
  [[nodiscard]] int class_count() const { return classes_; }
  [[nodiscard]] const ParameterStore& params() const { return store_; }
  [[nodiscard]] ParameterStore& params() { return store_; }
  [[nodiscard]] const MlpConfig& mlp_config() const { return mlp_; }
  [[nodiscard]] const SdtConfig& sdt_config() const { return sdt_; }

  /// Logits on a tape; `flat` may itself be a differentiable node.
  [[nodiscard]] ad::Var forward(Binder& bind, ad::Var flat) const;

  [[nodiscard]] Matrix logits(const Matrix& flat) const;
  [[nodiscard]] Matrix logits(const Matrix& num, const IndexMatrix& cat) const;
  [[nodiscard]] Matrix probabilities(const Matrix& flat) const;
  [[nodiscard]] std::vector<int> predict(const Matrix& flat) const;
  [[nodiscard]] std::vector<int> predict(const EncodedDataset& data) const;

  /// d(mean cross-entropy)/d(flat input).
  [[nodiscard]] Matrix input_gradient(const Matrix& flat, std::span<const int> labels) const;

  /// SDT only: probability of reaching each leaf, n x 2^depth.
  [[nodiscard]] Matrix leaf_probabilities(const Matrix& flat) const;

  [[nodiscard]] Checkpoint to_checkpoint() const;
  static TargetModel from_checkpoint(const Checkpoint& ckpt);

 private:
  ModelKind kind_ = ModelKind::Mlp;
  InputSpec spec_;
  int classes_ = 0;
  MlpConfig mlp_;
  SdtConfig sdt_;
  ParameterStore store_;
  std::vector<Dense> layers_;
  // SDT parameters.
  std::size_t gate_w_ = 0;
  std::size_t gate_b_ = 0;
  std::size_t leaf_logits_ = 0;

  [[nodiscard]] ad::Var sdt_leaf_probs(Binder& bind, ad::Var flat) const;
  void check_flat(const Matrix& flat) const;
};

}  // namespace tabattack
