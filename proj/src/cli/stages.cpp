#include <spdlog/spdlog.h>

#include "internal.hpp"
#include "tabattack/error.hpp"

namespace tabattack::cli {

using nlohmann::json;
namespace fs = std::filesystem;
using detail::CsvRow;
using detail::num;
using detail::Paths;

namespace {

const detail::CsvRow kHistoryHeader{"epoch", "total", "recon_num", "recon_cat", "kl", "cls", "val_acc"};

void write_encoded(const fs::path& path, const Preprocessor& prep, const EncodedDataset& d) {
  const auto& schema = prep.schema();
  CsvRow header;
  for (int i = 0; i < schema.numeric_count(); ++i) header.push_back(schema.numeric_column(i).name);
  for (int j = 0; j < schema.categorical_count(); ++j) header.push_back(schema.categorical_column(j).name);
  header.push_back(schema.target().name);
  std::vector<CsvRow> rows;
  rows.reserve(d.size());
  for (std::size_t r = 0; r < d.size(); ++r) {
    CsvRow row;
    const auto ri = static_cast<Eigen::Index>(r);
    for (Eigen::Index c = 0; c < d.num.cols(); ++c) row.push_back(num(d.num(ri, c)));
    for (Eigen::Index c = 0; c < d.cat.cols(); ++c) row.push_back(std::to_string(d.cat(ri, c)));
    row.push_back(std::to_string(d.y[r]));
    rows.push_back(std::move(row));
  }
  detail::write_csv_file(path, header, rows);
}

}  // namespace

void cmd_preprocess(const RunConfig& cfg, const Runtime&) {
  const Paths paths{cfg.out_dir()};
  const RawDataset raw = load_dataset(cfg);
  const SplitRatios ratios;
  const auto split = stratified_split(raw.labels(), raw.schema.class_count(), ratios, cfg.split_seed());
  const auto parts = apply_split(raw, split);
  const auto prep = Preprocessor::fit(parts.train);
  const auto lineage = Lineage::data(cfg);

  json manifest = split_manifest(split, ratios, cfg.split_seed());
  manifest["dataset"] = cfg.dataset.name;
  manifest["rows"] = raw.size();
  manifest["lineage"] = {{"data", lineage}};
  manifest["config_hash"] = cfg.hash();
  write_text(paths.manifest(), manifest.dump(2) + "\n");

  json pj{{"lineage", {{"data", lineage}}}, {"config_hash", cfg.hash()}, {"preprocessor", prep.to_json()}};
  write_text(paths.preprocessor(), pj.dump(2) + "\n");

  write_encoded(paths.encoded("train"), prep, prep.transform(parts.train));
  write_encoded(paths.encoded("val"), prep, prep.transform(parts.val));
  write_encoded(paths.encoded("test"), prep, prep.transform(parts.test));
  spdlog::info("preprocess: {} rows -> train {}, val {}, test {}", raw.size(), split.train.size(), split.val.size(),
               split.test.size());
}

void cmd_train_target(const RunConfig& cfg, const Runtime&) {
  const Paths paths{cfg.out_dir()};
  const auto data = load_prepared(cfg);
  const InputSpec spec{data.prep.numeric_dim(), data.prep.cardinalities()};
  const int classes = data.prep.class_count();
  for (const auto& t : cfg.targets) {
    TargetModel model = t.kind == ModelKind::Mlp ? TargetModel::mlp(spec, classes, t.mlp, t.train.seed)
                                                 : TargetModel::sdt(spec, classes, t.sdt, t.train.seed);
    const auto history = train_target(model, data.train, data.val, t.train);
    const auto test = evaluate(model, data.test);

    auto ckpt = model.to_checkpoint();
    ckpt.header["lineage"] = {{"data", Lineage::data(cfg)}, {"target", Lineage::target(cfg, t)}};
    ckpt.header["config_hash"] = cfg.hash();
    ckpt.header["name"] = t.name;
    ckpt.header["train"] = {{"epochs", t.train.epochs},
                            {"lr", t.train.lr},
                            {"batch", t.train.batch_size},
                            {"patience", t.train.patience},
                            {"seed", t.train.seed},
                            {"best_epoch", history.best_epoch},
                            {"best_val_accuracy", history.best_val_accuracy},
                            {"test_accuracy", test.accuracy}};
    fs::create_directories(paths.target_ckpt(t.name).parent_path());
    save_checkpoint(paths.target_ckpt(t.name).string(), ckpt);

    std::vector<CsvRow> rows;
    for (const auto& e : history.epochs) {
      rows.push_back({std::to_string(e.epoch), num(e.loss), "", "", "", num(e.loss), num(e.val_accuracy)});
    }
    detail::write_csv_file(paths.target_history(t.name), kHistoryHeader, rows);
    spdlog::info("train-target {}: {} epochs, best val acc {:.4f}, test acc {:.4f}", t.name, history.epochs.size(),
                 history.best_val_accuracy, test.accuracy);
  }
}

void cmd_train_vae(const RunConfig& cfg, const Runtime&) {
  const Paths paths{cfg.out_dir()};
  const auto data = load_prepared(cfg);
  const auto fit_rows = EncodedDataset::concat(data.train, data.val);
  VaeModel vae(data.prep, cfg.vae);
  const auto history = train_vae(vae, fit_rows);
  vae.latent_stats = LatentStats::fit(vae.encode_mean(fit_rows));

  auto ckpt = vae.to_checkpoint();
  ckpt.header["lineage"] = {{"data", Lineage::data(cfg)}, {"vae", Lineage::vae(cfg)}};
  ckpt.header["config_hash"] = cfg.hash();
  fs::create_directories(paths.vae_ckpt().parent_path());
  save_checkpoint(paths.vae_ckpt().string(), ckpt);

  std::vector<CsvRow> rows;
  for (const auto& e : history) {
    rows.push_back({std::to_string(e.epoch), num(e.mean.total), num(e.mean.recon_num), num(e.mean.recon_cat),
                    num(e.mean.kl), num(e.mean.cls), ""});
  }
  detail::write_csv_file(paths.vae_history(), kHistoryHeader, rows);
  if (!history.empty()) {
    spdlog::info("train-vae: {} epochs, final loss {:.6f}", history.size(), history.back().mean.total);
  }
}

void cmd_attack(const RunConfig& cfg, const Runtime& rt) {
  const Paths paths{cfg.out_dir()};
  const auto data = load_prepared(cfg);
  const auto vae = load_vae(cfg);
  const int classes = data.prep.class_count();

  const auto indices = select_samples(data.test.y, classes, cfg.evaluation.samples, cfg.evaluation.class_balanced,
                                      cfg.sample_seed());
  if (indices.size() < cfg.evaluation.samples) {
    spdlog::warn("requested {} samples, using {} (test split has {} rows)", cfg.evaluation.samples, indices.size(),
                 data.test.size());
  }
  json sj{{"lineage", {{"data", Lineage::data(cfg)}, {"samples", Lineage::samples(cfg)}}},
          {"config_hash", cfg.hash()},
          {"requested", cfg.evaluation.samples},
          {"used", indices.size()},
          {"class_balanced", cfg.evaluation.class_balanced},
          {"seed", cfg.sample_seed()},
          {"indices", indices}};
  write_text(paths.samples(), sj.dump(2) + "\n");
  const auto rows = data.test.subset(indices);

  if (cfg.attacks.empty()) spdlog::warn("config lists no attacks");
  for (const auto& t : cfg.targets) {
    const auto model = load_target(cfg, t);
    const AttackContext ctx{&model, &vae, &data.prep};
    for (const auto& a : cfg.attacks) {
      const auto stem = outcome_stem(t.name, a.name);
      json meta{{"target", t.name},
                {"attack", a.name},
                {"kind", to_string(a.config.kind)},
                {"config", a.config.to_json()},
                {"lineage",
                 {{"attack", Lineage::attack(cfg, t, a)},
                  {"target", Lineage::target(cfg, t)},
                  {"vae", Lineage::vae(cfg)},
                  {"samples", Lineage::samples(cfg)}}},
                {"config_hash", cfg.hash()}};
      std::error_code ec;
      fs::remove(paths.outcomes(stem), ec);
      if (a.config.kind == AttackKind::DeltaZ && classes > 2) {
        const std::string why = "deltaz supports binary tasks only; dataset has " + std::to_string(classes) + " classes";
        spdlog::warn("skipping {} on {}: {}", a.name, t.name, why);
        meta["status"] = "skipped";
        meta["reason"] = why;
        meta["count"] = 0;
        write_text(paths.outcome_meta(stem), meta.dump(2) + "\n");
        continue;
      }
      auto outcomes = run_campaign(ctx, rows, a.config, rt.threads);
      std::string lines;
      std::size_t fooled = 0;
      for (auto& o : outcomes) {
        o.index = indices[o.index];
        fooled += o.fooled();
        lines += o.to_json().dump();
        lines += '\n';
      }
      write_text(paths.outcomes(stem), lines);
      meta["status"] = "ok";
      meta["count"] = outcomes.size();
      write_text(paths.outcome_meta(stem), meta.dump(2) + "\n");
      spdlog::info("attack {} on {}: {}/{} fooled", a.name, t.name, fooled, outcomes.size());
    }
  }
}

}  // namespace tabattack::cli
