#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "tabattack/numerics/layers.hpp"

namespace tabattack {

/// Binary container: magic "TABCKPT\0", u32 version, u64 header length, JSON
/// header, u32 tensor count, then per tensor u32 name length, name, u64 rows,
/// u64 cols and row-major little-endian f64 data.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  nlohmann::json header;
  std::vector<std::pair<std::string, Matrix>> tensors;

  /// Copies every stored tensor into the same-named store entry; names and
  /// shapes must match exactly.
  void restore(ParameterStore& store) const;
  static Checkpoint capture(nlohmann::json header, const ParameterStore& store);
};

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace tabattack
