#include "tabattack/io/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>

#include "tabattack/error.hpp"

namespace tabattack {

namespace {

constexpr std::array<char, 8> kMagic{'T', 'A', 'B', 'C', 'K', 'P', 'T', '\0'};

static_assert(std::endian::native == std::endian::little, "checkpoint io assumes a little-endian host");

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in, const char* what) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw IoError(std::string("truncated checkpoint reading ") + what);
  return v;
}

std::string get_string(std::istream& in, std::uint64_t n, const char* what) {
  std::string s(n, '\0');
  if (n && !in.read(s.data(), static_cast<std::streamsize>(n))) {
    throw IoError(std::string("truncated checkpoint reading ") + what);
  }
  return s;
}

}  // namespace

void Checkpoint::restore(ParameterStore& store) const {
  if (tensors.size() != store.size()) {
    throw SchemaError("checkpoint holds " + std::to_string(tensors.size()) + " tensors, model expects " +
                      std::to_string(store.size()));
  }
  for (const auto& [name, value] : tensors) {
    const std::size_t idx = store.index_of(name);
    Matrix& dst = store.value(idx);
    if (dst.rows() != value.rows() || dst.cols() != value.cols()) {
      throw DimensionError("checkpoint tensor '" + name + "' has shape " + shape_string(value) + ", model expects " +
                           shape_string(dst));
    }
    dst = value;
  }
}

Checkpoint Checkpoint::capture(nlohmann::json header, const ParameterStore& store) {
  Checkpoint c;
  c.header = std::move(header);
  for (std::size_t i = 0; i < store.size(); ++i) c.tensors.emplace_back(store.name(i), store.value(i));
  return c;
}

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, Checkpoint::kVersion);
  const std::string header = ckpt.header.dump();
  put<std::uint64_t>(out, header.size());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, m] : ckpt.tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
    out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)));
  }
  if (!out) throw IoError("failed writing checkpoint");
}

Checkpoint read_checkpoint(std::istream& in) {
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) throw IoError("not a checkpoint file (bad magic)");
  const auto version = get<std::uint32_t>(in, "version");
  if (version != Checkpoint::kVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint c;
  const auto header_len = get<std::uint64_t>(in, "header length");
  try {
    c.header = nlohmann::json::parse(get_string(in, header_len, "header"));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("corrupt checkpoint header: ") + e.what());
  }
  const auto count = get<std::uint32_t>(in, "tensor count");
  std::set<std::string> seen;
  for (std::uint32_t t = 0; t < count; ++t) {
    const auto name_len = get<std::uint32_t>(in, "tensor name length");
    std::string name = get_string(in, name_len, "tensor name");
    if (!seen.insert(name).second) throw IoError("duplicate tensor '" + name + "' in checkpoint");
    const auto rows = get<std::uint64_t>(in, "rows");
    const auto cols = get<std::uint64_t>(in, "cols");
    if (rows > (1ULL << 32) || cols > (1ULL << 32)) throw IoError("implausible tensor shape in checkpoint");
    Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    if (m.size() && !in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(double)))) {
      throw IoError("truncated checkpoint reading tensor '" + name + "'");
    }
    c.tensors.emplace_back(std::move(name), std::move(m));
  }
  return c;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  write_checkpoint(out, ckpt);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path + "'");
  return read_checkpoint(in);
}

}  // namespace tabattack
