#include "tabattack/data/dataset.hpp"

#include "tabattack/error.hpp"

namespace tabattack {

std::string to_string(SplitTag tag) {
  switch (tag) {
    case SplitTag::All:
      return "all";
    case SplitTag::Train:
      return "train";
    case SplitTag::Val:
      return "val";
    case SplitTag::Test:
      return "test";
  }
  return "all";
}

std::vector<int> RawDataset::labels() const {
  std::vector<int> out;
  out.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const int code = schema.class_code(rows[i].label);
    if (code < 0) throw IngestionError("row " + std::to_string(i) + ": unknown class '" + rows[i].label + "'");
    out.push_back(code);
  }
  return out;
}

RawDataset RawDataset::subset(std::span<const std::size_t> indices, SplitTag tag) const {
  RawDataset out{schema, {}, tag};
  out.rows.reserve(indices.size());
  for (std::size_t i : indices) out.rows.push_back(rows.at(i));
  return out;
}

EncodedRow EncodedDataset::row(std::size_t i) const {
  const auto r = static_cast<Eigen::Index>(i);
  EncodedRow out;
  out.num = num.row(r).transpose();
  out.cat.resize(static_cast<std::size_t>(cat.cols()));
  for (Eigen::Index j = 0; j < cat.cols(); ++j) out.cat[static_cast<std::size_t>(j)] = cat(r, j);
  return out;
}

std::vector<int> EncodedDataset::cat_column(std::size_t j) const {
  std::vector<int> out(static_cast<std::size_t>(cat.rows()));
  for (Eigen::Index i = 0; i < cat.rows(); ++i) out[static_cast<std::size_t>(i)] = cat(i, static_cast<Eigen::Index>(j));
  return out;
}

EncodedDataset EncodedDataset::subset(std::span<const std::size_t> indices) const {
  EncodedDataset out;
  out.split = split;
  const auto n = static_cast<Eigen::Index>(indices.size());
  out.num.resize(n, num.cols());
  out.cat.resize(n, cat.cols());
  out.y.reserve(indices.size());
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto src = static_cast<Eigen::Index>(indices[static_cast<std::size_t>(k)]);
    if (src >= num.rows()) throw IndexError("EncodedDataset::subset: row " + std::to_string(src) + " out of range");
    out.num.row(k) = num.row(src);
    out.cat.row(k) = cat.row(src);
    out.y.push_back(y[static_cast<std::size_t>(src)]);
  }
  return out;
}

EncodedDataset EncodedDataset::concat(const EncodedDataset& a, const EncodedDataset& b) {
  if (a.num.cols() != b.num.cols() || a.cat.cols() != b.cat.cols()) {
    throw DimensionError("EncodedDataset::concat: column layouts differ");
  }
  EncodedDataset out;
  out.split = a.split;
  out.num.resize(a.num.rows() + b.num.rows(), a.num.cols());
  out.num << a.num, b.num;
  out.cat.resize(a.cat.rows() + b.cat.rows(), a.cat.cols());
  out.cat << a.cat, b.cat;
  out.y = a.y;
  out.y.insert(out.y.end(), b.y.begin(), b.y.end());
  return out;
}

}  // namespace tabattack
