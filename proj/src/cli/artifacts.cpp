#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <spdlog/spdlog.h>

#include "internal.hpp"
#include "tabattack/data/csv.hpp"
#include "tabattack/data/synthetic.hpp"
#include "tabattack/error.hpp"

namespace tabattack::cli {

using nlohmann::json;
namespace fs = std::filesystem;

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  try {
    json j;
    in >> j;
    return j;
  } catch (const json::exception& e) {
    throw IoError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  if (ec) throw IoError("cannot create directory '" + path.parent_path().string() + "': " + ec.message());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  out.flush();
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

std::string outcome_stem(const std::string& target, const std::string& attack) { return target + "__" + attack; }

RawDataset load_dataset(const RunConfig& cfg) {
  const auto& d = cfg.dataset;
  if (d.synthetic == "moons") return make_mixed_moons({d.rows, d.noise, cfg.data_seed()});
  if (d.synthetic == "blobs") return make_blobs({d.rows, d.separation, cfg.data_seed(), d.with_categorical});
  if (d.is_synthetic()) throw ConfigError("unknown synthetic dataset '" + d.synthetic + "'");
  auto schema = TabularSchema::load(cfg.resolve(d.schema).string());
  LoadOptions opts;
  opts.drop_missing = d.drop_missing;
  LoadReport report;
  auto raw = load_csv(cfg.resolve(d.csv).string(), std::move(schema), opts, &report);
  if (report.dropped > 0) spdlog::info("dropped {} rows with missing values", report.dropped);
  return raw;
}

PreparedData load_prepared(const RunConfig& cfg) {
  const detail::Paths paths{cfg.out_dir()};
  const json manifest = read_json(paths.manifest());
  const auto expected = Lineage::data(cfg);
  detail::check_lineage(manifest, "data", expected, "split manifest", "preprocess");
  const json pj = read_json(paths.preprocessor());
  detail::check_lineage(pj, "data", expected, "preprocessor", "preprocess");

  PreparedData p;
  p.raw = load_dataset(cfg);
  p.split = split_from_manifest(manifest);
  if (manifest.value("rows", std::size_t{0}) != p.raw.size()) {
    throw ConfigError("split manifest row count does not match the dataset; rerun preprocess");
  }
  p.prep = Preprocessor::from_json(pj.at("preprocessor"));
  const auto parts = apply_split(p.raw, p.split);
  p.train = p.prep.transform(parts.train);
  p.val = p.prep.transform(parts.val);
  p.test = p.prep.transform(parts.test);
  return p;
}

TargetModel load_target(const RunConfig& cfg, const TargetSpec& spec) {
  const detail::Paths paths{cfg.out_dir()};
  const auto ckpt = load_checkpoint(paths.target_ckpt(spec.name).string());
  detail::check_lineage(ckpt.header, "target", Lineage::target(cfg, spec), "target '" + spec.name + "'",
                        "train-target");
  return TargetModel::from_checkpoint(ckpt);
}

VaeModel load_vae(const RunConfig& cfg) {
  const detail::Paths paths{cfg.out_dir()};
  const auto ckpt = load_checkpoint(paths.vae_ckpt().string());
  detail::check_lineage(ckpt.header, "vae", Lineage::vae(cfg), "vae", "train-vae");
  auto vae = VaeModel::from_checkpoint(ckpt);
  if (!vae.latent_stats) throw StatsError("vae checkpoint has no latent statistics; rerun train-vae");
  return vae;
}

std::vector<std::size_t> select_samples(std::span<const int> labels, int class_count, std::size_t n,
                                        bool class_balanced, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::size_t> out;
  if (!class_balanced) {
    out.resize(labels.size());
    std::iota(out.begin(), out.end(), std::size_t{0});
    std::shuffle(out.begin(), out.end(), rng);
    out.resize(std::min(n, out.size()));
    return out;
  }
  if (class_count < 1) throw ConfigError("class-balanced sampling needs at least one class");
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(class_count));
  for (std::size_t i = 0; i < labels.size(); ++i) by_class.at(static_cast<std::size_t>(labels[i])).push_back(i);
  for (auto& c : by_class) std::shuffle(c.begin(), c.end(), rng);
  const std::size_t quota = n / static_cast<std::size_t>(class_count);
  for (std::size_t round = 0; round < quota; ++round) {
    for (const auto& c : by_class) {
      if (round < c.size()) out.push_back(c[round]);
    }
  }
  return out;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const IoError*>(&e) != nullptr) return 3;
  if (dynamic_cast<const fs::filesystem_error*>(&e) != nullptr) return 3;
  if (dynamic_cast<const NumericError*>(&e) != nullptr) return 2;
  return 1;
}

namespace detail {

void check_lineage(const json& artifact, const std::string& key, const std::string& expected, const std::string& what,
                   const char* stage) {
  std::string stored;
  if (artifact.contains("lineage") && artifact.at("lineage").contains(key)) {
    stored = artifact.at("lineage").at(key).get<std::string>();
  }
  if (stored != expected) {
    throw ConfigError("lineage mismatch for " + what + ": built from " + (stored.empty() ? "<none>" : stored) +
                      ", config expects " + expected + "; rerun " + stage);
  }
}

void write_csv_file(const fs::path& path, const CsvRow& header, const std::vector<CsvRow>& rows) {
  std::ostringstream ss;
  write_csv_record(ss, header);
  for (const auto& r : rows) write_csv_record(ss, r);
  write_text(path, ss.str());
}

std::string num(double v) { return format_number(v); }

std::vector<std::size_t> load_samples(const RunConfig& cfg) {
  const json j = read_json(Paths{cfg.out_dir()}.samples());
  check_lineage(j, "samples", Lineage::samples(cfg), "sample selection", "attack");
  return j.at("indices").get<std::vector<std::size_t>>();
}

AttackSpec sweep_base(const RunConfig& cfg) {
  const auto& name = cfg.sweep->attack;
  for (const auto& a : cfg.attacks) {
    if (a.name == name) return a;
  }
  AttackSpec a{name, AttackConfig::defaults(attack_kind_from_string(name))};
  a.config.seed = derive_seed(cfg.seed, "attack:" + name);
  return a;
}

}  // namespace detail

}  // namespace tabattack::cli
