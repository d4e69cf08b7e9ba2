#include <fstream>

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

struct Campaign {
  std::string target;
  std::string attack;
  std::string kind;
  std::string status;  // ok, skipped, missing
  std::string note;
  std::optional<CampaignReport> report;
};

void write_latent_coords(const fs::path& path, const VaeModel& vae, const std::vector<AttackOutcome>& outcomes,
                         const LatentStats& stats) {
  const auto n = static_cast<Eigen::Index>(outcomes.size());
  const Eigen::Index k = vae.latent_dim();
  Matrix num_rows(n, vae.numeric_dim());
  IndexMatrix cat_rows(n, static_cast<Eigen::Index>(vae.cardinalities().size()));
  Matrix adv(n, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& o = outcomes[static_cast<std::size_t>(i)];
    num_rows.row(i) = o.original.num.transpose();
    for (Eigen::Index j = 0; j < cat_rows.cols(); ++j) cat_rows(i, j) = o.original.cat[static_cast<std::size_t>(j)];
    adv.row(i) = o.latent.transpose();
  }
  Matrix both(2 * n, k);
  both << vae.encode_mean(num_rows, cat_rows), adv;
  const auto pca = pca_project(both);
  std::vector<CsvRow> rows;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& o = outcomes[static_cast<std::size_t>(i)];
    rows.push_back({std::to_string(o.index), num(pca.coords(i, 0)), num(pca.coords(i, 1)), num(pca.coords(n + i, 0)),
                    num(pca.coords(n + i, 1)), num(mahalanobis(o.latent, stats)),
                    o.fooled() ? "1" : "0"});
  }
  detail::write_csv_file(path,
                         {"index", "original_pc1", "original_pc2", "adversarial_pc1", "adversarial_pc2", "md", "fooled"},
                         rows);
}

}  // namespace

std::vector<AttackOutcome> read_outcomes(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::vector<AttackOutcome> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      out.push_back(AttackOutcome::from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw IoError(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

void cmd_report(const RunConfig& cfg, const Runtime&) {
  const Paths paths{cfg.out_dir()};
  const auto dir = paths.report_dir();
  const auto data = load_prepared(cfg);
  const auto vae = load_vae(cfg);
  const auto& opts = cfg.evaluation.report;
  const std::string seed = std::to_string(cfg.seed);
  const std::string rule = to_string(opts.md_rule);
  const std::string hash = cfg.hash();
  const std::string& dataset = cfg.dataset.name;

  json out{{"dataset", dataset},
           {"seed", cfg.seed},
           {"md_rule", rule},
           {"config_hash", hash},
           {"lineage", {{"data", Lineage::data(cfg)}, {"vae", Lineage::vae(cfg)}}},
           {"config", cfg.to_json()}};

  std::vector<CsvRow> recon_rows;
  out["recon"] = json::object();
  std::vector<Campaign> campaigns;
  for (const auto& t : cfg.targets) {
    const auto model = load_target(cfg, t);
    const auto r = recon_report(model, vae, data.test);
    out["recon"][t.name] = r.to_json();
    recon_rows.push_back({dataset, t.name, num(r.accuracy_original), num(r.accuracy_reconstructed), num(r.delta_acc),
                          num(r.mse), num(r.r2), num(r.cosine), num(r.pearson),
                          r.cat_accuracy ? num(*r.cat_accuracy) : "", seed, hash});

    for (const auto& a : cfg.attacks) {
      const auto stem = outcome_stem(t.name, a.name);
      Campaign c{t.name, a.name, to_string(a.config.kind), "missing", "", std::nullopt};
      if (!fs::exists(paths.outcome_meta(stem))) {
        c.note = "no outcomes; run the attack stage";
        spdlog::warn("report: no outcomes for {} on {}", a.name, t.name);
        campaigns.push_back(std::move(c));
        continue;
      }
      const json meta = read_json(paths.outcome_meta(stem));
      detail::check_lineage(meta, "attack", Lineage::attack(cfg, t, a), "outcomes " + stem, "attack");
      if (meta.value("status", std::string()) == "skipped") {
        c.status = "skipped";
        c.note = meta.value("reason", std::string());
        campaigns.push_back(std::move(c));
        continue;
      }
      const auto outcomes = read_outcomes(paths.outcomes(stem));
      if (outcomes.size() != meta.value("count", std::size_t{0})) {
        throw IoError("outcomes " + stem + " hold " + std::to_string(outcomes.size()) + " lines, meta says " +
                      std::to_string(meta.value("count", std::size_t{0})));
      }
      if (outcomes.empty()) {
        c.note = "empty outcome file";
        campaigns.push_back(std::move(c));
        continue;
      }
      c.status = "ok";
      c.report = campaign_report(outcomes, *vae.latent_stats, opts);
      write_latent_coords(dir / "latent" / (stem + ".csv"), vae, outcomes, *vae.latent_stats);
      campaigns.push_back(std::move(c));
    }
  }

  detail::write_csv_file(dir / "recon.csv",
                         {"dataset", "model", "accuracy_original", "accuracy_reconstructed", "delta_acc", "mse", "r2",
                          "cosine", "pearson", "cat_accuracy", "seed", "config_hash"},
                         recon_rows);

  std::vector<CsvRow> eff, imp, spa;
  out["campaigns"] = json::array();
  for (const auto& c : campaigns) {
    const CsvRow key{dataset, c.target, c.attack, c.kind, c.status};
    const CsvRow tail{c.note, seed, rule, hash};
    auto row = [&](std::initializer_list<std::string> cells) {
      CsvRow r = key;
      r.insert(r.end(), cells);
      r.insert(r.end(), tail.begin(), tail.end());
      return r;
    };
    json cj{{"target", c.target}, {"attack", c.attack}, {"kind", c.kind}, {"status", c.status}, {"note", c.note}};
    if (c.report) {
      const auto& r = *c.report;
      eff.push_back(row({std::to_string(r.n), std::to_string(r.fooled), num(r.asr)}));
      imp.push_back(row({std::to_string(r.n), num(r.asr), num(r.outlier_rate), num(r.idsr()), std::to_string(r.flagged),
                         num(r.threshold), to_string(r.options.outlier_base), r.options.correct_only ? "1" : "0",
                         num(r.options.p)}));
      spa.push_back(row({std::to_string(r.n), num(r.sparsity.mean_l0), num(r.sparsity.sparsity_rate),
                         num(r.sparsity.mean_l1), num(r.mean_delta_l2)}));
      cj["report"] = r.to_json();
    } else {
      eff.push_back(row({"", "", ""}));
      imp.push_back(row({"", "", "", "", "", "", "", "", ""}));
      spa.push_back(row({"", "", "", "", ""}));
      cj["report"] = nullptr;
    }
    out["campaigns"].push_back(cj);
  }
  const CsvRow key{"dataset", "model", "attack", "kind", "status"};
  const CsvRow tail{"note", "seed", "md_rule", "config_hash"};
  auto header = [&](std::initializer_list<std::string> cells) {
    CsvRow r = key;
    r.insert(r.end(), cells);
    r.insert(r.end(), tail.begin(), tail.end());
    return r;
  };
  detail::write_csv_file(dir / "effectiveness.csv", header({"n", "fooled", "ASR"}), eff);
  detail::write_csv_file(dir / "imperceptibility.csv",
                         header({"n", "ASR", "O_r", "IDSR", "flagged", "threshold", "outlier_base", "correct_only", "p"}),
                         imp);
  detail::write_csv_file(dir / "sparsity.csv", header({"n", "l0", "sparsity_rate", "l1", "mean_delta_l2"}), spa);
  write_text(dir / "report.json", out.dump(2) + "\n");
  spdlog::info("report: {} campaigns written to {}", campaigns.size(), dir.string());
}

void cmd_sweep(const RunConfig& cfg, const Runtime& rt) {
  if (!cfg.sweep) throw ConfigError("config has no 'sweep' section");
  const auto& sw = *cfg.sweep;
  const Paths paths{cfg.out_dir()};
  const auto data = load_prepared(cfg);
  const auto vae = load_vae(cfg);
  const auto& tspec = sw.target.empty() ? cfg.targets.front() : cfg.target(sw.target);
  const auto model = load_target(cfg, tspec);
  const AttackContext ctx{&model, &vae, &data.prep};
  const auto base = detail::sweep_base(cfg);
  if (!is_latent(base.config.kind)) throw ConfigError("sweep needs a latent attack, got " + to_string(base.config.kind));
  if (base.config.kind == AttackKind::DeltaZ && data.prep.class_count() > 2) {
    throw UnsupportedTaskError("deltaz supports binary tasks only");
  }

  const auto indices = select_samples(data.test.y, data.prep.class_count(), sw.samples, cfg.evaluation.class_balanced,
                                      cfg.sample_seed());
  const auto rows = data.test.subset(indices);
  const std::vector<double> weights =
      sw.sparsity_weights.empty() ? std::vector<double>{base.config.sparsity_weight} : sw.sparsity_weights;
  const std::string seed = std::to_string(cfg.seed);
  const std::string rule = to_string(cfg.evaluation.report.md_rule);
  const std::string hash = cfg.hash();

  std::vector<CsvRow> out;
  for (double w : weights) {
    for (double lambda : sw.lambdas) {
      for (double lr : sw.lrs) {
        AttackConfig c = base.config;
        c.sparsity_weight = w;
        c.lambda = lambda;
        c.lr = lr;
        c.validate();
        const auto outcomes = run_campaign(ctx, rows, c, rt.threads);
        const auto r = campaign_report(outcomes, *vae.latent_stats, cfg.evaluation.report);
        out.push_back({cfg.dataset.name, tspec.name, base.name, num(w), num(lambda), num(lr), std::to_string(r.n),
                       num(r.asr), num(r.outlier_rate), num(r.idsr()), num(r.mean_delta_l2), num(r.sparsity.mean_l0),
                       num(r.sparsity.mean_l1), num(r.sparsity.sparsity_rate), seed, rule, hash});
        spdlog::info("sweep w={} lambda={} lr={}: ASR {:.3f}, mean l2 {:.4f}", w, lambda, lr, r.asr, r.mean_delta_l2);
      }
    }
  }
  detail::write_csv_file(paths.sweep_csv(),
                         {"dataset", "model", "attack", "sparsity_weight", "lambda", "lr", "n", "ASR", "O_r", "IDSR",
                          "mean_delta_l2", "l0", "l1", "sparsity_rate", "seed", "md_rule", "config_hash"},
                         out);
  json meta{{"lineage",
             {{"target", Lineage::target(cfg, tspec)}, {"vae", Lineage::vae(cfg)}, {"data", Lineage::data(cfg)}}},
            {"config_hash", hash},
            {"attack", base.name},
            {"base_config", base.config.to_json()},
            {"samples", indices.size()}};
  write_text(paths.sweep_meta(), meta.dump(2) + "\n");
}

}  // namespace tabattack::cli
