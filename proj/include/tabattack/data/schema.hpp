#pragma once

#include <json.hpp>

#include <string>
#include <vector>

namespace tabattack {

enum class ColumnKind { Numeric, Categorical, Binary };

struct Column {
  std::string name;
  ColumnKind kind = ColumnKind::Numeric;
  std::vector<std::string> categories;  // ordered; position is the label code

  [[nodiscard]] bool is_categorical() const { return kind != ColumnKind::Numeric; }
  bool operator==(const Column&) const = default;
};

struct TargetColumn {
  std::string name;
  std::vector<std::string> classes;
  bool operator==(const TargetColumn&) const = default;
};

/// Where a schema column lives in the encoded representation.
struct FeatureSlot {
  bool categorical = false;
  int index = 0;  // position among numeric or among categorical columns
};

/// Column typing of a tabular dataset. Binary columns are categorical columns
/// with exactly two categories.
class TabularSchema {
 public:
  TabularSchema() = default;
  TabularSchema(std::vector<Column> columns, TargetColumn target);

  /// Throws SchemaError when an invariant is violated. Columns with an empty
  /// category list are allowed only when `allow_incomplete` is set.
  void validate(bool allow_incomplete = false) const;

  [[nodiscard]] bool complete() const;

  [[nodiscard]] const std::vector<Column>& columns() const { return columns_; }
  [[nodiscard]] const TargetColumn& target() const { return target_; }

  // Used when completing a schema whose category lists were omitted.
  void set_categories(std::size_t column, std::vector<std::string> categories);
  void set_classes(std::vector<std::string> classes) { target_.classes = std::move(classes); }

  [[nodiscard]] int numeric_count() const;
  [[nodiscard]] int categorical_count() const;
  [[nodiscard]] int binary_count() const;
  [[nodiscard]] int feature_count() const { return static_cast<int>(columns_.size()); }
  [[nodiscard]] int class_count() const { return static_cast<int>(target_.classes.size()); }
  [[nodiscard]] std::vector<int> cardinalities() const;
  [[nodiscard]] std::vector<FeatureSlot> slots() const;

  [[nodiscard]] const Column& numeric_column(int i) const;
  [[nodiscard]] const Column& categorical_column(int j) const;

  /// Code of `value` in categorical column j, or -1.
  [[nodiscard]] int category_code(int j, const std::string& value) const;
  [[nodiscard]] int class_code(const std::string& value) const;

  [[nodiscard]] nlohmann::json to_json() const;
  static TabularSchema from_json(const nlohmann::json& j);
  static TabularSchema load(const std::string& path);

  bool operator==(const TabularSchema&) const = default;

 private:
  std::vector<Column> columns_;
  TargetColumn target_;
  std::vector<int> numeric_index_;
  std::vector<int> categorical_index_;

  void index();
};

std::string to_string(ColumnKind kind);
ColumnKind column_kind_from_string(const std::string& s);

}  // namespace tabattack
