#include "tabattack/data/split.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "tabattack/error.hpp"

namespace tabattack {

namespace {

void check_ratios(const SplitRatios& r) {
  for (double v : r.as_array()) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("split ratios must be positive");
  }
  if (std::abs(r.train + r.val + r.test - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");
}

}  // namespace

std::array<std::size_t, 3> allocate_class(std::size_t class_size, const SplitRatios& ratios) {
  check_ratios(ratios);
  const auto r = ratios.as_array();
  std::array<std::size_t, 3> count{};
  std::array<double, 3> rem{};
  std::size_t used = 0;
  for (int s = 0; s < 3; ++s) {
    const double quota = static_cast<double>(class_size) * r[static_cast<std::size_t>(s)];
    const double fl = std::floor(quota + 1e-9);
    count[static_cast<std::size_t>(s)] = static_cast<std::size_t>(fl);
    rem[static_cast<std::size_t>(s)] = quota - fl;
    used += count[static_cast<std::size_t>(s)];
  }
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return rem[static_cast<std::size_t>(a)] > rem[static_cast<std::size_t>(b)] + 1e-9;
  });
  for (std::size_t k = 0; used < class_size; ++k, ++used) ++count[static_cast<std::size_t>(order[k % 3])];
  return count;
}

SplitIndices stratified_split(std::span<const int> labels, int class_count, const SplitRatios& ratios,
                              std::uint64_t seed) {
  check_ratios(ratios);
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(class_count));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= class_count) {
      throw IndexError("label " + std::to_string(labels[i]) + " at row " + std::to_string(i) + " out of range");
    }
    by_class[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  std::mt19937_64 rng(seed);
  SplitIndices out;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& rows = by_class[c];
    if (rows.empty()) continue;
    if (rows.size() < 3) {
      throw SplitError("class " + std::to_string(c) + " has " + std::to_string(rows.size()) +
                       " samples; at least 3 are required");
    }
    std::shuffle(rows.begin(), rows.end(), rng);
    const auto n = allocate_class(rows.size(), ratios);
    auto it = rows.begin();
    out.train.insert(out.train.end(), it, it + static_cast<std::ptrdiff_t>(n[0]));
    it += static_cast<std::ptrdiff_t>(n[0]);
    out.val.insert(out.val.end(), it, it + static_cast<std::ptrdiff_t>(n[1]));
    it += static_cast<std::ptrdiff_t>(n[1]);
    out.test.insert(out.test.end(), it, rows.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.val.begin(), out.val.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

SplitData apply_split(const RawDataset& data, const SplitIndices& split) {
  return {data.subset(split.train, SplitTag::Train), data.subset(split.val, SplitTag::Val),
          data.subset(split.test, SplitTag::Test)};
}

nlohmann::json split_manifest(const SplitIndices& split, const SplitRatios& ratios, std::uint64_t seed) {
  return {{"seed", seed},
          {"ratios", {{"train", ratios.train}, {"val", ratios.val}, {"test", ratios.test}}},
          {"train", split.train},
          {"val", split.val},
          {"test", split.test}};
}

SplitIndices split_from_manifest(const nlohmann::json& j) {
  try {
    return {j.at("train").get<std::vector<std::size_t>>(), j.at("val").get<std::vector<std::size_t>>(),
            j.at("test").get<std::vector<std::size_t>>()};
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed split manifest: ") + e.what());
  }
}

}  // namespace tabattack
