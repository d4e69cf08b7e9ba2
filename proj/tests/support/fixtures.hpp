#pragma once

// Small trained pipelines shared by the attack and metric suites.

#include <string>
#include <vector>

#include "tabattack/data/split.hpp"
#include "tabattack/data/synthetic.hpp"
#include "tabattack/models/train.hpp"
#include "tabattack/vae/vae.hpp"

namespace tabattack::testing {

struct Prepared {
  Preprocessor prep;
  EncodedDataset train, val, test;
};

inline Prepared prepare(const RawDataset& raw, std::uint64_t seed) {
  const auto parts = apply_split(raw, stratified_split(raw.labels(), raw.schema.class_count(), {}, seed));
  Prepared p;
  p.prep = Preprocessor::fit(parts.train);
  p.train = p.prep.transform(parts.train);
  p.val = p.prep.transform(parts.val);
  p.test = p.prep.transform(parts.test);
  return p;
}

/// Numeric-only training split with the given column names and two classes.
inline RawDataset numeric_dataset(const std::vector<std::string>& names, const std::vector<std::vector<double>>& rows,
                                  const std::vector<int>& labels) {
  std::vector<Column> cols;
  for (const auto& n : names) cols.push_back({n, ColumnKind::Numeric, {}});
  RawDataset d;
  d.schema = TabularSchema(cols, {"y", {"a", "b"}});
  d.split = SplitTag::Train;
  for (std::size_t i = 0; i < rows.size(); ++i) d.rows.push_back({rows[i], {}, labels[i] == 0 ? "a" : "b"});
  return d;
}

/// Two-moon data with a trained MLP target and a small VAE.
struct MoonsPipeline {
  Prepared data;
  TargetModel model;
  VaeModel vae;

  static const MoonsPipeline& get() {
    static const MoonsPipeline p = build();
    return p;
  }

 private:
  static MoonsPipeline build() {
    Prepared data = prepare(make_mixed_moons({800, 0.15, 3}), 3);
    InputSpec spec{data.prep.numeric_dim(), data.prep.cardinalities()};
    MlpConfig mc;
    mc.hidden = {32};
    TargetModel model = TargetModel::mlp(spec, 2, mc, 3);
    TrainOptions to;
    to.epochs = 60;
    to.lr = 1e-2;
    to.batch_size = 32;
    to.patience = 0;
    to.seed = 3;
    train_target(model, data.train, data.val, to);

    VaeConfig vc;
    vc.encode_widths = {32};
    vc.latent_dim = 4;
    vc.epochs = 80;
    vc.batch_size = 64;
    vc.kl_weight = 1e-2;
    vc.seed = 3;
    VaeModel vae(data.prep, vc);
    train_vae(vae, data.train);
    vae.latent_stats = LatentStats::fit(vae.encode_mean(data.train));
    return {std::move(data), std::move(model), std::move(vae)};
  }
};

}  // namespace tabattack::testing
