#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "tabattack/attacks/attack.hpp"
#include "tabattack/data/split.hpp"
#include "tabattack/metrics/metrics.hpp"
#include "tabattack/models/train.hpp"
#include "tabattack/vae/vae.hpp"

namespace tabattack::cli {

/// Either a CSV file with a schema, or a generated dataset ("moons", "blobs").
struct DatasetSpec {
  std::string name = "dataset";
  std::string csv;     // as written in the config
  std::string schema;  // as written in the config
  std::string synthetic;
  std::size_t rows = 2000;
  double noise = 0.15;
  double separation = 4.0;
  bool with_categorical = true;
  bool drop_missing = false;
  /// Pins the split seed; cleared when the run seed is overridden.
  std::optional<std::uint64_t> seed;

  [[nodiscard]] bool is_synthetic() const { return !synthetic.empty(); }
};

struct TargetSpec {
  std::string name;
  ModelKind kind = ModelKind::Mlp;
  MlpConfig mlp;
  SdtConfig sdt;
  TrainOptions train;
};

struct AttackSpec {
  std::string name;
  AttackConfig config;
};

struct EvaluationSpec {
  std::size_t samples = 500;
  bool class_balanced = false;
  ReportOptions report;
};

struct SweepSpec {
  std::string attack;  // name of an entry in `attacks`, or an attack kind
  std::string target;  // empty: the first target
  std::vector<double> lambdas;
  std::vector<double> lrs;
  std::vector<double> sparsity_weights;  // empty: the attack's own weight
  std::size_t samples = 100;
};

struct RunConfig {
  std::string name = "run";
  std::uint64_t seed = 0;
  DatasetSpec dataset;
  VaeConfig vae;
  std::vector<TargetSpec> targets;
  std::vector<AttackSpec> attacks;
  EvaluationSpec evaluation;
  std::optional<SweepSpec> sweep;
  std::string out = "out";

  /// Directory that relative paths in the config resolve against.
  std::filesystem::path base_dir;

  static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
  static RunConfig load(const std::filesystem::path& path);

  /// Throws ConfigError for bad values and IoError for missing files.
  void validate() const;

  /// Replaces the run seed and every seed derived from it.
  void reseed(std::uint64_t seed);

  [[nodiscard]] std::filesystem::path resolve(const std::string& path) const;
  [[nodiscard]] std::filesystem::path out_dir() const { return resolve(out); }

  [[nodiscard]] std::uint64_t split_seed() const;
  [[nodiscard]] std::uint64_t sample_seed() const;
  [[nodiscard]] std::uint64_t data_seed() const;

  [[nodiscard]] const TargetSpec& target(const std::string& name) const;
  [[nodiscard]] const AttackSpec& attack(const std::string& name) const;

  /// Canonical form with derived seeds filled in; `out` is left out so runs
  /// written to different directories hash alike.
  [[nodiscard]] nlohmann::json to_json() const;
  [[nodiscard]] std::string hash() const;
};

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);
std::string hex(std::uint64_t h);
/// splitmix64 of the seed mixed with a tag hash.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag);

/// Stage hashes chaining data -> models -> outcomes.
struct Lineage {
  static std::string data(const RunConfig& cfg);
  static std::string vae(const RunConfig& cfg);
  static std::string target(const RunConfig& cfg, const TargetSpec& t);
  static std::string samples(const RunConfig& cfg);
  static std::string attack(const RunConfig& cfg, const TargetSpec& t, const AttackSpec& a);
};

}  // namespace tabattack::cli
