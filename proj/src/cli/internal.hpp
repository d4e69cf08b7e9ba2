#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "tabattack/cli/pipeline.hpp"

namespace tabattack::cli::detail {

namespace fs = std::filesystem;

/// Aborts with a ConfigError when an artifact was built from another config.
void check_lineage(const nlohmann::json& artifact, const std::string& key, const std::string& expected,
                   const std::string& what, const char* stage);

using CsvRow = std::vector<std::string>;
void write_csv_file(const fs::path& path, const CsvRow& header, const std::vector<CsvRow>& rows);

std::string num(double v);

struct Paths {
  fs::path root;

  [[nodiscard]] fs::path manifest() const { return root / "manifest.json"; }
  [[nodiscard]] fs::path preprocessor() const { return root / "preprocessor.json"; }
  [[nodiscard]] fs::path encoded(const std::string& split) const { return root / "encoded" / (split + ".csv"); }
  [[nodiscard]] fs::path target_ckpt(const std::string& name) const { return root / "targets" / (name + ".ckpt"); }
  [[nodiscard]] fs::path target_history(const std::string& name) const {
    return root / "targets" / (name + "_history.csv");
  }
  [[nodiscard]] fs::path vae_ckpt() const { return root / "vae.ckpt"; }
  [[nodiscard]] fs::path vae_history() const { return root / "vae_history.csv"; }
  [[nodiscard]] fs::path samples() const { return root / "samples.json"; }
  [[nodiscard]] fs::path outcomes(const std::string& stem) const { return root / "outcomes" / (stem + ".jsonl"); }
  [[nodiscard]] fs::path outcome_meta(const std::string& stem) const {
    return root / "outcomes" / (stem + ".meta.json");
  }
  [[nodiscard]] fs::path report_dir() const { return root / "report"; }
  [[nodiscard]] fs::path sweep_csv() const { return root / "sweep.csv"; }
  [[nodiscard]] fs::path sweep_meta() const { return root / "sweep.meta.json"; }
};

/// Sample indices into the test split with their lineage check applied.
std::vector<std::size_t> load_samples(const RunConfig& cfg);

/// Attack configs resolved for a sweep: the named attack from the config, or
/// the defaults of an attack kind.
AttackSpec sweep_base(const RunConfig& cfg);

}  // namespace tabattack::cli::detail
