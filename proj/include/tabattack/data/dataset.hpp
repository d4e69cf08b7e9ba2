#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "tabattack/data/schema.hpp"
#include "tabattack/numerics/tensor.hpp"

namespace tabattack {

enum class SplitTag { All, Train, Val, Test };

std::string to_string(SplitTag tag);

/// One row in raw units. Numeric values follow the schema's numeric column
/// order, categorical values its categorical column order.
struct RawRow {
  std::vector<double> numeric;
  std::vector<std::string> categorical;
  std::string label;

  bool operator==(const RawRow&) const = default;
};

struct RawDataset {
  TabularSchema schema;
  std::vector<RawRow> rows;
  SplitTag split = SplitTag::All;

  [[nodiscard]] std::size_t size() const { return rows.size(); }
  [[nodiscard]] std::vector<int> labels() const;
  [[nodiscard]] RawDataset subset(std::span<const std::size_t> indices, SplitTag tag) const;
};

struct EncodedRow {
  Vector num;
  std::vector<int> cat;
};

/// Model-ready view: z-scored numerics, label-coded categoricals, class indices.
struct EncodedDataset {
  Matrix num;       // n x d
  IndexMatrix cat;  // n x m
  std::vector<int> y;
  SplitTag split = SplitTag::All;

  [[nodiscard]] std::size_t size() const { return y.size(); }
  [[nodiscard]] EncodedRow row(std::size_t i) const;
  [[nodiscard]] std::vector<int> cat_column(std::size_t j) const;
  [[nodiscard]] EncodedDataset subset(std::span<const std::size_t> indices) const;

  /// Row concatenation; the split tag of `a` is kept.
  static EncodedDataset concat(const EncodedDataset& a, const EncodedDataset& b);
};

}  // namespace tabattack
