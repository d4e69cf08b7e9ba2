#include "tabattack/data/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "tabattack/error.hpp"

namespace tabattack {

Preprocessor Preprocessor::fit(const RawDataset& train) {
  if (train.split != SplitTag::Train) {
    throw FitError("preprocessor may only be fitted on the training split, got '" + to_string(train.split) + "'");
  }
  if (train.rows.empty()) throw FitError("cannot fit preprocessor on an empty training split");
  train.schema.validate(false);

  Preprocessor p;
  p.schema_ = train.schema;
  const int d = train.schema.numeric_count();
  const auto n = static_cast<double>(train.rows.size());
  p.mean_ = RowVector::Zero(d);
  p.std_ = RowVector::Zero(d);
  for (const auto& r : train.rows) {
    for (int i = 0; i < d; ++i) p.mean_(i) += r.numeric[static_cast<std::size_t>(i)];
  }
  p.mean_ /= n;
  for (const auto& r : train.rows) {
    for (int i = 0; i < d; ++i) {
      const double c = r.numeric[static_cast<std::size_t>(i)] - p.mean_(i);
      p.std_(i) += c * c;
    }
  }
  for (int i = 0; i < d; ++i) {
    p.std_(i) = std::sqrt(p.std_(i) / n);
    if (!(p.std_(i) > 0.0) || !std::isfinite(p.std_(i))) {
      throw FitError("numeric column '" + train.schema.numeric_column(i).name + "' is constant on the training split");
    }
  }
  p.z_min_ = RowVector::Constant(d, std::numeric_limits<double>::infinity());
  p.z_max_ = RowVector::Constant(d, -std::numeric_limits<double>::infinity());
  for (const auto& r : train.rows) {
    for (int i = 0; i < d; ++i) {
      const double z = (r.numeric[static_cast<std::size_t>(i)] - p.mean_(i)) / p.std_(i);
      p.z_min_(i) = std::min(p.z_min_(i), z);
      p.z_max_(i) = std::max(p.z_max_(i), z);
    }
  }
  return p;
}

EncodedRow Preprocessor::encode(const RawRow& row) const {
  const int d = numeric_dim();
  const int m = schema_.categorical_count();
  if (static_cast<int>(row.numeric.size()) != d || static_cast<int>(row.categorical.size()) != m) {
    throw DimensionError("row has " + std::to_string(row.numeric.size()) + " numeric / " +
                         std::to_string(row.categorical.size()) + " categorical values, expected " +
                         std::to_string(d) + " / " + std::to_string(m));
  }
  EncodedRow out;
  out.num.resize(d);
  for (int i = 0; i < d; ++i) out.num(i) = (row.numeric[static_cast<std::size_t>(i)] - mean_(i)) / std_(i);
  out.cat.resize(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) {
    const int code = schema_.category_code(j, row.categorical[static_cast<std::size_t>(j)]);
    if (code < 0) {
      throw IngestionError("unknown category '" + row.categorical[static_cast<std::size_t>(j)] + "' in column '" +
                           schema_.categorical_column(j).name + "'");
    }
    out.cat[static_cast<std::size_t>(j)] = code;
  }
  return out;
}

EncodedDataset Preprocessor::transform(const RawDataset& data) const {
  if (!(data.schema == schema_)) throw SchemaError("dataset schema differs from the fitted schema");
  const auto n = static_cast<Eigen::Index>(data.rows.size());
  const int d = numeric_dim();
  const int m = schema_.categorical_count();
  EncodedDataset out;
  out.split = data.split;
  out.num.resize(n, d);
  out.cat.resize(n, m);
  out.y = data.labels();
  for (Eigen::Index r = 0; r < n; ++r) {
    EncodedRow e;
    try {
      e = encode(data.rows[static_cast<std::size_t>(r)]);
    } catch (const IngestionError& err) {
      throw IngestionError(std::string(err.what()) + " at row " + std::to_string(r));
    }
    out.num.row(r) = e.num.transpose();
    for (int j = 0; j < m; ++j) out.cat(r, j) = e.cat[static_cast<std::size_t>(j)];
  }
  return out;
}

RawRow Preprocessor::decode(const EncodedRow& row, int label) const {
  const int d = numeric_dim();
  const int m = schema_.categorical_count();
  if (row.num.size() != d || static_cast<int>(row.cat.size()) != m) {
    throw DimensionError("encoded row does not match preprocessor layout");
  }
  RawRow out;
  out.numeric.resize(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) out.numeric[static_cast<std::size_t>(i)] = row.num(i) * std_(i) + mean_(i);
  out.categorical.resize(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) {
    const auto& cats = schema_.categorical_column(j).categories;
    const int code = row.cat[static_cast<std::size_t>(j)];
    if (code < 0 || code >= static_cast<int>(cats.size())) {
      throw DecodeError("code " + std::to_string(code) + " out of range for column '" +
                        schema_.categorical_column(j).name + "' with " + std::to_string(cats.size()) + " categories");
    }
    out.categorical[static_cast<std::size_t>(j)] = cats[static_cast<std::size_t>(code)];
  }
  if (label >= 0) {
    if (label >= class_count()) throw DecodeError("class index " + std::to_string(label) + " out of range");
    out.label = schema_.target().classes[static_cast<std::size_t>(label)];
  }
  return out;
}

RawDataset Preprocessor::inverse_transform(const EncodedDataset& data) const {
  RawDataset out{schema_, {}, data.split};
  out.rows.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) out.rows.push_back(decode(data.row(i), data.y[i]));
  return out;
}

namespace {

nlohmann::json row_to_json(const RowVector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

RowVector row_from_json(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  RowVector out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out(static_cast<Eigen::Index>(i)) = v[i];
  return out;
}

}  // namespace

nlohmann::json Preprocessor::to_json() const {
  return {{"schema", schema_.to_json()},
          {"mean", row_to_json(mean_)},
          {"std", row_to_json(std_)},
          {"z_min", row_to_json(z_min_)},
          {"z_max", row_to_json(z_max_)}};
}

Preprocessor Preprocessor::from_json(const nlohmann::json& j) {
  Preprocessor p;
  try {
    p.schema_ = TabularSchema::from_json(j.at("schema"));
    p.mean_ = row_from_json(j.at("mean"));
    p.std_ = row_from_json(j.at("std"));
    p.z_min_ = row_from_json(j.at("z_min"));
    p.z_max_ = row_from_json(j.at("z_max"));
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed preprocessor: ") + e.what());
  }
  p.schema_.validate(false);
  const int d = p.schema_.numeric_count();
  if (p.mean_.size() != d || p.std_.size() != d || p.z_min_.size() != d || p.z_max_.size() != d) {
    throw SchemaError("preprocessor statistics do not match the schema's numeric column count");
  }
  if ((p.std_.array() <= 0.0).any()) throw SchemaError("preprocessor holds a non-positive std");
  return p;
}

int flat_width(std::span<const int> cardinalities, int numeric_dim) {
  return std::accumulate(cardinalities.begin(), cardinalities.end(), 0) + numeric_dim;
}

Matrix to_flat(const IndexMatrix& cat, const Matrix& num, std::span<const int> cardinalities) {
  if (cat.cols() != static_cast<Eigen::Index>(cardinalities.size()) || cat.rows() != num.rows()) {
    throw DimensionError("to_flat: categorical block " + shape_string(cat) + " does not match layout");
  }
  const int onehot = flat_width(cardinalities, 0);
  Matrix out = Matrix::Zero(num.rows(), onehot + num.cols());
  for (Eigen::Index r = 0; r < cat.rows(); ++r) {
    int offset = 0;
    for (std::size_t j = 0; j < cardinalities.size(); ++j) {
      const int code = cat(r, static_cast<Eigen::Index>(j));
      if (code < 0 || code >= cardinalities[j]) {
        throw IndexError("to_flat: code " + std::to_string(code) + " out of range in column " + std::to_string(j));
      }
      out(r, offset + code) = 1.0;
      offset += cardinalities[j];
    }
  }
  out.rightCols(num.cols()) = num;
  return out;
}

Matrix to_flat(const EncodedDataset& data, std::span<const int> cardinalities) {
  return to_flat(data.cat, data.num, cardinalities);
}

void from_flat(const Matrix& flat, std::span<const int> cardinalities, IndexMatrix& cat, Matrix& num) {
  const int onehot = flat_width(cardinalities, 0);
  if (flat.cols() < onehot) throw DimensionError("from_flat: input narrower than the one-hot blocks");
  cat.resize(flat.rows(), static_cast<Eigen::Index>(cardinalities.size()));
  for (Eigen::Index r = 0; r < flat.rows(); ++r) {
    int offset = 0;
    for (std::size_t j = 0; j < cardinalities.size(); ++j) {
      Eigen::Index best = 0;
      flat.row(r).segment(offset, cardinalities[j]).maxCoeff(&best);
      cat(r, static_cast<Eigen::Index>(j)) = static_cast<int>(best);
      offset += cardinalities[j];
    }
  }
  num = flat.rightCols(flat.cols() - onehot);
}

}  // namespace tabattack
