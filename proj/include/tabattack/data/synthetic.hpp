#pragma once

#include <cstdint>

#include "tabattack/data/dataset.hpp"

namespace tabattack {

struct MoonsOptions {
  std::size_t rows = 2000;
  double noise = 0.15;
  std::uint64_t seed = 0;
};

/// Two interleaved half-moons with two numeric coordinates and two
/// categorical columns derived from them ("side" with 2 levels, "band" with 3).
RawDataset make_mixed_moons(const MoonsOptions& options);

struct BlobOptions {
  std::size_t rows = 400;
  double separation = 4.0;
  std::uint64_t seed = 0;
  /// Adds a 3-level categorical column drawn independently of the class.
  bool with_categorical = true;
};

/// Two Gaussian blobs centred at (-s/2, -s/2) and (s/2, s/2).
RawDataset make_blobs(const BlobOptions& options);

}  // namespace tabattack
