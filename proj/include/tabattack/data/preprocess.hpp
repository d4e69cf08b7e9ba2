#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tabattack/data/dataset.hpp"

namespace tabattack {

/// Z-score for numeric columns (population std), ordinal codes for
/// categorical ones. Only a training split may fit it.
class Preprocessor {
 public:
  Preprocessor() = default;

  static Preprocessor fit(const RawDataset& train);

  [[nodiscard]] EncodedDataset transform(const RawDataset& data) const;
  [[nodiscard]] EncodedRow encode(const RawRow& row) const;

  [[nodiscard]] RawDataset inverse_transform(const EncodedDataset& data) const;
  [[nodiscard]] RawRow decode(const EncodedRow& row, int label = -1) const;

  [[nodiscard]] const TabularSchema& schema() const { return schema_; }
  [[nodiscard]] const RowVector& mean() const { return mean_; }
  [[nodiscard]] const RowVector& stddev() const { return std_; }
  /// Per-column bounds of the standardised training values.
  [[nodiscard]] const RowVector& z_min() const { return z_min_; }
  [[nodiscard]] const RowVector& z_max() const { return z_max_; }

  [[nodiscard]] int numeric_dim() const { return static_cast<int>(mean_.size()); }
  [[nodiscard]] std::vector<int> cardinalities() const { return schema_.cardinalities(); }
  [[nodiscard]] int class_count() const { return schema_.class_count(); }

  [[nodiscard]] nlohmann::json to_json() const;
  static Preprocessor from_json(const nlohmann::json& j);

 private:
  TabularSchema schema_;
  RowVector mean_;
  RowVector std_;
  RowVector z_min_;
  RowVector z_max_;
};

/// Width of the flat encoding `[one-hot blocks | numerics]`.
int flat_width(std::span<const int> cardinalities, int numeric_dim);

/// Flat encoding used by the target models and input-space attacks.
Matrix to_flat(const EncodedDataset& data, std::span<const int> cardinalities);
Matrix to_flat(const IndexMatrix& cat, const Matrix& num, std::span<const int> cardinalities);

/// Inverse of `to_flat` for discrete rows; each block is argmaxed.
void from_flat(const Matrix& flat, std::span<const int> cardinalities, IndexMatrix& cat, Matrix& num);

}  // namespace tabattack
