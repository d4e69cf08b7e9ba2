#include "tabattack/data/schema.hpp"

#include <fstream>
#include <set>
#include <utility>

#include "tabattack/error.hpp"

namespace tabattack {

std::string to_string(ColumnKind kind) {
  switch (kind) {
    case ColumnKind::Numeric:
      return "numeric";
    case ColumnKind::Categorical:
      return "categorical";
    case ColumnKind::Binary:
      return "binary";
  }
  return "numeric";
}

ColumnKind column_kind_from_string(const std::string& s) {
  if (s == "numeric") return ColumnKind::Numeric;
  if (s == "categorical") return ColumnKind::Categorical;
  if (s == "binary") return ColumnKind::Binary;
  throw SchemaError("unknown column kind '" + s + "'");
}

TabularSchema::TabularSchema(std::vector<Column> columns, TargetColumn target)
    : columns_(std::move(columns)), target_(std::move(target)) {
  index();
}

void TabularSchema::index() {
  numeric_index_.clear();
  categorical_index_.clear();
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    (columns_[i].is_categorical() ? categorical_index_ : numeric_index_).push_back(static_cast<int>(i));
  }
}

void TabularSchema::validate(bool allow_incomplete) const {
  std::set<std::string> names;
  for (const auto& c : columns_) {
    if (c.name.empty()) throw SchemaError("column with empty name");
    if (!names.insert(c.name).second) throw SchemaError("duplicate column name '" + c.name + "'");
    if (!c.is_categorical()) {
      if (!c.categories.empty()) throw SchemaError("numeric column '" + c.name + "' lists categories");
      continue;
    }
    if (c.categories.empty() && allow_incomplete) continue;
    std::set<std::string> cats(c.categories.begin(), c.categories.end());
    if (cats.size() != c.categories.size()) throw SchemaError("duplicate category in column '" + c.name + "'");
    if (c.kind == ColumnKind::Binary && c.categories.size() != 2) {
      throw SchemaError("binary column '" + c.name + "' must have exactly 2 categories");
    }
    if (c.categories.size() < 2) throw SchemaError("categorical column '" + c.name + "' needs >= 2 categories");
  }
  if (target_.name.empty()) throw SchemaError("target name missing");
  if (names.count(target_.name)) throw SchemaError("target '" + target_.name + "' is also a feature column");
  if (target_.classes.empty() && allow_incomplete) return;
  std::set<std::string> cls(target_.classes.begin(), target_.classes.end());
  if (cls.size() != target_.classes.size()) throw SchemaError("duplicate target class");
  if (target_.classes.size() < 2) throw SchemaError("target needs >= 2 classes");
}

bool TabularSchema::complete() const {
  for (const auto& c : columns_) {
    if (c.is_categorical() && c.categories.empty()) return false;
  }
  return !target_.classes.empty();
}

void TabularSchema::set_categories(std::size_t column, std::vector<std::string> categories) {
  columns_.at(column).categories = std::move(categories);
}

int TabularSchema::numeric_count() const { return static_cast<int>(numeric_index_.size()); }
int TabularSchema::categorical_count() const { return static_cast<int>(categorical_index_.size()); }

int TabularSchema::binary_count() const {
  int n = 0;
  for (const auto& c : columns_) n += c.kind == ColumnKind::Binary ? 1 : 0;
  return n;
}

std::vector<int> TabularSchema::cardinalities() const {
  std::vector<int> out;
  for (int i : categorical_index_) out.push_back(static_cast<int>(columns_[static_cast<std::size_t>(i)].categories.size()));
  return out;
}

std::vector<FeatureSlot> TabularSchema::slots() const {
  std::vector<FeatureSlot> out;
  int num = 0;
  int cat = 0;
  for (const auto& c : columns_) {
    if (c.is_categorical()) {
      out.push_back({true, cat++});
    } else {
      out.push_back({false, num++});
    }
  }
  return out;
}

const Column& TabularSchema::numeric_column(int i) const {
  return columns_.at(static_cast<std::size_t>(numeric_index_.at(static_cast<std::size_t>(i))));
}

const Column& TabularSchema::categorical_column(int j) const {
  return columns_.at(static_cast<std::size_t>(categorical_index_.at(static_cast<std::size_t>(j))));
}

int TabularSchema::category_code(int j, const std::string& value) const {
  const auto& cats = categorical_column(j).categories;
  for (std::size_t k = 0; k < cats.size(); ++k) {
    if (cats[k] == value) return static_cast<int>(k);
  }
  return -1;
}

int TabularSchema::class_code(const std::string& value) const {
  for (std::size_t k = 0; k < target_.classes.size(); ++k) {
    if (target_.classes[k] == value) return static_cast<int>(k);
  }
  return -1;
}

nlohmann::json TabularSchema::to_json() const {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& c : columns_) {
    nlohmann::json jc{{"name", c.name}, {"kind", to_string(c.kind)}};
    if (c.is_categorical()) jc["categories"] = c.categories;
    cols.push_back(jc);
  }
  return {{"columns", cols}, {"target", {{"name", target_.name}, {"classes", target_.classes}}}};
}

TabularSchema TabularSchema::from_json(const nlohmann::json& j) {
  try {
    std::vector<Column> cols;
    for (const auto& jc : j.at("columns")) {
      Column c;
      c.name = jc.at("name").get<std::string>();
      c.kind = column_kind_from_string(jc.at("kind").get<std::string>());
      if (jc.contains("categories")) c.categories = jc.at("categories").get<std::vector<std::string>>();
      cols.push_back(std::move(c));
    }
    TargetColumn t;
    t.name = j.at("target").at("name").get<std::string>();
    if (j.at("target").contains("classes")) t.classes = j.at("target").at("classes").get<std::vector<std::string>>();
    TabularSchema s(std::move(cols), std::move(t));
    s.validate(true);
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed schema: ") + e.what());
  }
}

TabularSchema TabularSchema::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open schema file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("schema file '" + path + "' is not valid JSON: " + e.what());
  }
  return from_json(j);
}

}  // namespace tabattack
