#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "tabattack/cli/run_config.hpp"

namespace tabattack::cli {

struct Runtime {
  int threads = 1;
};

/// Train/val/test encodings rebuilt from the dataset, the split manifest and
/// the stored preprocessor.
struct PreparedData {
  RawDataset raw;
  SplitIndices split;
  Preprocessor prep;
  EncodedDataset train, val, test;
};

void cmd_preprocess(const RunConfig& cfg, const Runtime& rt);
void cmd_train_target(const RunConfig& cfg, const Runtime& rt);
void cmd_train_vae(const RunConfig& cfg, const Runtime& rt);
void cmd_attack(const RunConfig& cfg, const Runtime& rt);
void cmd_report(const RunConfig& cfg, const Runtime& rt);
void cmd_sweep(const RunConfig& cfg, const Runtime& rt);

RawDataset load_dataset(const RunConfig& cfg);
PreparedData load_prepared(const RunConfig& cfg);
TargetModel load_target(const RunConfig& cfg, const TargetSpec& spec);
VaeModel load_vae(const RunConfig& cfg);

/// First n rows of a seeded shuffle of the test split. The class-balanced
/// variant takes floor(n / classes) rows from each class, so 500 over 7
/// classes yields 497.
std::vector<std::size_t> select_samples(std::span<const int> labels, int class_count, std::size_t n,
                                        bool class_balanced, std::uint64_t seed);

/// Reads a JSON-lines outcome file.
std::vector<AttackOutcome> read_outcomes(const std::filesystem::path& path);

/// Outcomes file stem for a (target, attack) pair.
std::string outcome_stem(const std::string& target, const std::string& attack);

nlohmann::json read_json(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

/// 0 ok, 1 configuration, 2 numeric failure, 3 I/O.
int exit_code_for(const std::exception& e);

/// Entry point of the `tabattack` executable.
int run_cli(int argc, char** argv);

}  // namespace tabattack::cli
