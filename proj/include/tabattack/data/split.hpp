#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "tabattack/data/dataset.hpp"

namespace tabattack {

struct SplitRatios {
  double train = 0.70;
  double val = 0.10;
  double test = 0.20;

  [[nodiscard]] std::array<double, 3> as_array() const { return {train, val, test}; }
};

/// Row indices per split, each sorted ascending.
struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;

  bool operator==(const SplitIndices&) const = default;
};

/// Per-class allocation: each quota is floored, leftover rows go to the
/// largest fractional remainders (ties to train, then val, then test).
std::array<std::size_t, 3> allocate_class(std::size_t class_size, const SplitRatios& ratios);

SplitIndices stratified_split(std::span<const int> labels, int class_count, const SplitRatios& ratios,
                              std::uint64_t seed);

struct SplitData {
  RawDataset train;
  RawDataset val;
  RawDataset test;
};

SplitData apply_split(const RawDataset& data, const SplitIndices& split);

nlohmann::json split_manifest(const SplitIndices& split, const SplitRatios& ratios, std::uint64_t seed);
SplitIndices split_from_manifest(const nlohmann::json& j);

}  // namespace tabattack
