#include "tabattack/vae/vae.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <spdlog/spdlog.h>

#include "tabattack/error.hpp"

namespace tabattack {

nlohmann::json VaeConfig::to_json() const {
  return {{"encode_widths", encode_widths}, {"latent_dim", latent_dim},
          {"epochs", epochs},               {"beta", kl_weight},
          {"alpha", cls_weight},            {"lr", lr},
          {"batch", batch_size},            {"numeric_width", numeric_width},
          {"seed", seed},                   {"zero_init_classifier", zero_init_classifier}};
}

VaeConfig VaeConfig::from_json(const nlohmann::json& j) {
  VaeConfig c;
  try {
    c.encode_widths = j.value("encode_widths", c.encode_widths);
    c.latent_dim = j.value("latent_dim", c.latent_dim);
    c.epochs = j.value("epochs", c.epochs);
    c.kl_weight = j.value("beta", c.kl_weight);
    c.cls_weight = j.value("alpha", c.cls_weight);
    c.lr = j.value("lr", c.lr);
    c.batch_size = j.value("batch", c.batch_size);
    c.numeric_width = j.value("numeric_width", c.numeric_width);
    c.seed = j.value("seed", c.seed);
    c.zero_init_classifier = j.value("zero_init_classifier", c.zero_init_classifier);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad vae config: ") + e.what());
  }
  c.validate();
  return c;
}

void VaeConfig::validate() const {
  if (latent_dim < 1) throw ConfigError("latent_dim must be >= 1");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (batch_size < 2) throw ConfigError("vae batch must be >= 2 (batch norm needs two rows)");
  if (!(lr > 0.0)) throw ConfigError("vae lr must be > 0");
  if (kl_weight < 0.0 || cls_weight < 0.0) throw ConfigError("beta and alpha must be >= 0");
  if (numeric_width < 1) throw ConfigError("numeric_width must be >= 1");
  for (int w : encode_widths) {
    if (w < 1) throw ConfigError("encode widths must be positive");
  }
}

int embedding_width(int cardinality) { return std::min(16, (cardinality + 1) / 2 + 1); }

VaeModel::VaeModel(Preprocessor prep, VaeConfig config)
    : prep_(std::move(prep)), config_(std::move(config)), card_(prep_.cardinalities()) {
  config_.validate();
  const int d = prep_.numeric_dim();
  if (d == 0 && card_.empty()) throw ConfigError("schema has no features");
  Rng rng(config_.seed);
  Eigen::Index width = 0;
  for (std::size_t j = 0; j < card_.size(); ++j) {
    const int e = embedding_width(card_[j]);
    embeddings_.push_back(store_.add("vae.emb" + std::to_string(j), uniform_init(card_[j], e, 1, rng)));
    width += e;
  }
  if (d > 0) {
    numeric_in_ = Dense::create(store_, "vae.num_in", d, config_.numeric_width, rng);
    width += config_.numeric_width;
  }
  for (std::size_t i = 0; i < config_.encode_widths.size(); ++i) {
    const int w = config_.encode_widths[i];
    enc_dense_.push_back(Dense::create(store_, "vae.enc" + std::to_string(i), width, w, rng));
    enc_bn_.push_back(BatchNorm::create(store_, "vae.enc_bn" + std::to_string(i), w));
    width = w;
  }
  const int k = config_.latent_dim;
  mu_head_ = Dense::create(store_, "vae.mu", width, k, rng);
  logvar_head_ = Dense::create(store_, "vae.logvar", width, k, rng);

  width = k;
  for (std::size_t i = config_.encode_widths.size(); i-- > 0;) {
    const int w = config_.encode_widths[i];
    dec_dense_.push_back(Dense::create(store_, "vae.dec" + std::to_string(dec_dense_.size()), width, w, rng));
    width = w;
  }
  for (std::size_t j = 0; j < card_.size(); ++j) {
    cat_heads_.push_back(Dense::create(store_, "vae.cat_head" + std::to_string(j), width, card_[j], rng));
  }
  if (d > 0) num_head_ = Dense::create(store_, "vae.num_head", width, d, rng);
  classifier_ = Dense::create(store_, "vae.cls", k, prep_.class_count(), rng, config_.zero_init_classifier);
}

Encoded VaeModel::encode(Binder& bind, ad::Var num, const IndexMatrix& cat, bool training,
                         std::vector<ad::BatchNormResult>* observed) const {
  if (cat.cols() != static_cast<Eigen::Index>(card_.size()) || num.cols() != numeric_dim() ||
      num.rows() != cat.rows()) {
    throw DimensionError("vae encode: input " + shape_string(num.value()) + " / " + shape_string(cat) +
                         " does not match the schema");
  }
  std::vector<ad::Var> parts;
  std::vector<int> codes(static_cast<std::size_t>(cat.rows()));
  for (std::size_t j = 0; j < card_.size(); ++j) {
    for (Eigen::Index r = 0; r < cat.rows(); ++r) codes[static_cast<std::size_t>(r)] = cat(r, static_cast<Eigen::Index>(j));
    parts.push_back(ad::embedding(bind(embeddings_[j]), codes));
  }
  if (numeric_in_) parts.push_back(ad::relu(numeric_in_->forward(bind, num)));
  ad::Var h = parts.size() == 1 ? parts.front() : ad::concat_cols(parts);
  for (std::size_t i = 0; i < enc_dense_.size(); ++i) {
    h = ad::relu(enc_bn_[i].forward(bind, enc_dense_[i].forward(bind, h), training, observed));
  }
  return {mu_head_.forward(bind, h), ad::clamp(logvar_head_.forward(bind, h), -10.0, 10.0)};
}

Decoded VaeModel::decode(Binder& bind, ad::Var z) const {
  if (z.cols() != latent_dim()) {
    throw DimensionError("vae decode: latent has " + std::to_string(z.cols()) + " columns, expected " +
                         std::to_string(latent_dim()));
  }
  ad::Var h = z;
  for (const auto& layer : dec_dense_) h = ad::relu(layer.forward(bind, h));
  Decoded out;
  for (const auto& head : cat_heads_) out.cat_logits.push_back(head.forward(bind, h));
  if (num_head_) out.num = num_head_->forward(bind, h);
  return out;
}

ad::Var VaeModel::decode_flat(Binder& bind, ad::Var z) const {
  Decoded d = decode(bind, z);
  std::vector<ad::Var> parts;
  for (const auto& logits : d.cat_logits) parts.push_back(ad::softmax_rows(logits));
  if (num_head_) parts.push_back(d.num);
  return parts.size() == 1 ? parts.front() : ad::concat_cols(parts);
}

ad::Var VaeModel::classify(Binder& bind, ad::Var z) const { return classifier_.forward(bind, z); }

ad::Var reparameterize(ad::Var mu, ad::Var log_var, ad::Var eps) {
  return mu + ad::exp(ad::scale(log_var, 0.5)) * eps;
}

VaeLoss VaeModel::loss(Binder& bind, const Matrix& num, const IndexMatrix& cat, std::span<const int> y,
                       const Matrix& noise, bool training, std::vector<ad::BatchNormResult>* observed) const {
  ad::Tape& tape = bind.tape();
  const auto n = static_cast<double>(num.rows());
  const Encoded e = encode(bind, tape.constant_ref(num), cat, training, observed);
  const ad::Var z = reparameterize(e.mu, e.log_var, tape.constant_ref(noise));
  const Decoded d = decode(bind, z);

  VaeLoss out;
  std::vector<ad::Var> terms;
  if (d.num.tape) {
    const ad::Var rn = ad::scale(ad::sum(ad::square(d.num - tape.constant_ref(num))), 1.0 / n);
    out.parts.recon_num = rn.scalar();
    terms.push_back(rn);
  }
  std::vector<int> codes(static_cast<std::size_t>(cat.rows()));
  ad::Var rc;
  for (std::size_t j = 0; j < d.cat_logits.size(); ++j) {
    for (Eigen::Index r = 0; r < cat.rows(); ++r) codes[static_cast<std::size_t>(r)] = cat(r, static_cast<Eigen::Index>(j));
    const ad::Var ce = ad::softmax_crossentropy(d.cat_logits[j], codes);
    rc = j == 0 ? ce : rc + ce;
  }
  if (rc.tape) {
    out.parts.recon_cat = rc.scalar();
    terms.push_back(rc);
  }
  const ad::Var kl = ad::kl_gaussian(e.mu, e.log_var);
  out.parts.kl = kl.scalar();
  if (config_.kl_weight != 0.0) terms.push_back(ad::scale(kl, config_.kl_weight));
  const ad::Var cls = ad::softmax_crossentropy(classify(bind, z), y);
  out.parts.cls = cls.scalar();
  if (config_.cls_weight != 0.0) terms.push_back(ad::scale(cls, config_.cls_weight));

  out.total = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) out.total = out.total + terms[i];
  out.parts.total = out.total.scalar();
  return out;
}

Matrix VaeModel::encode_mean(const Matrix& num, const IndexMatrix& cat) const {
  ad::Tape tape;
  Binder bind(tape, store_, false);
  return encode(bind, tape.constant_ref(num), cat, false).mu.value();
}

Matrix VaeModel::decode_flat(const Matrix& z) const {
  ad::Tape tape;
  Binder bind(tape, store_, false);
  return decode_flat(bind, tape.constant_ref(z)).value();
}

Matrix VaeModel::classify(const Matrix& z) const {
  ad::Tape tape;
  Binder bind(tape, store_, false);
  return classify(bind, tape.constant_ref(z)).value();
}

void VaeModel::decode_discrete(const Matrix& z, IndexMatrix& cat, Matrix& num) const {
  ad::Tape tape;
  Binder bind(tape, store_, false);
  const Decoded d = decode(bind, tape.constant_ref(z));
  cat.resize(z.rows(), static_cast<Eigen::Index>(card_.size()));
  for (std::size_t j = 0; j < d.cat_logits.size(); ++j) {
    const Matrix& logits = d.cat_logits[j].value();
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
      Eigen::Index best = 0;
      logits.row(r).maxCoeff(&best);
      cat(r, static_cast<Eigen::Index>(j)) = static_cast<int>(best);
    }
  }
  num = d.num.tape ? d.num.value() : Matrix(z.rows(), 0);
}

EncodedDataset VaeModel::reconstruct(const EncodedDataset& data) const {
  EncodedDataset out;
  out.split = data.split;
  out.y = data.y;
  decode_discrete(encode_mean(data), out.cat, out.num);
  return out;
}

RawDataset VaeModel::reconstruct_raw(const EncodedDataset& data) const {
  return prep_.inverse_transform(reconstruct(data));
}

void VaeModel::update_running(const std::vector<ad::BatchNormResult>& observed, Eigen::Index batch_rows) {
  if (observed.size() != enc_bn_.size()) throw ContractError("batch-norm observation count mismatch");
  for (std::size_t i = 0; i < enc_bn_.size(); ++i) enc_bn_[i].update_running(store_, observed[i], batch_rows);
}

Checkpoint VaeModel::to_checkpoint() const {
  nlohmann::json h{{"artifact", "vae"}, {"config", config_.to_json()}, {"preprocessor", prep_.to_json()}};
  if (latent_stats) h["latent_stats"] = latent_stats->to_json();
  return Checkpoint::capture(std::move(h), store_);
}

VaeModel VaeModel::from_checkpoint(const Checkpoint& ckpt) {
  const auto& h = ckpt.header;
  if (h.value("artifact", "") != "vae") throw SchemaError("checkpoint does not hold a vae");
  VaeModel m(Preprocessor::from_json(h.at("preprocessor")), VaeConfig::from_json(h.at("config")));
  ckpt.restore(m.store_);
  if (h.contains("latent_stats")) m.latent_stats = LatentStats::from_json(h.at("latent_stats"));
  return m;
}

std::vector<VaeEpoch> train_vae(VaeModel& vae, const EncodedDataset& data) {
  const auto& cfg = vae.config();
  const auto n = static_cast<Eigen::Index>(data.size());
  if (n < 2) throw ConfigError("vae training needs at least 2 rows");

  // Batch boundaries; a trailing single row joins the previous batch.
  std::vector<std::pair<Eigen::Index, Eigen::Index>> batches;
  for (Eigen::Index s = 0; s < n; s += cfg.batch_size) batches.emplace_back(s, std::min<Eigen::Index>(cfg.batch_size, n - s));
  if (batches.size() > 1 && batches.back().second == 1) {
    batches.pop_back();
    ++batches.back().second;
  }

  Rng rng(cfg.seed ^ 0x5eedULL);
  std::normal_distribution<double> gauss(0.0, 1.0);
  AdamState adam;
  AdamOptions opts;
  opts.lr = cfg.lr;
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<VaeEpoch> history;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    VaeEpoch rec;
    rec.epoch = epoch;
    for (const auto& [start, rows] : batches) {
      const std::span<const std::size_t> idx(order.data() + start, static_cast<std::size_t>(rows));
      const EncodedDataset batch = data.subset(idx);
      Matrix noise(rows, cfg.latent_dim);
      for (Eigen::Index i = 0; i < noise.size(); ++i) noise.data()[i] = gauss(rng);

      ad::Tape tape;
      Binder bind(tape, vae.params(), true);
      std::vector<ad::BatchNormResult> observed;
      VaeLoss l;
      try {
        l = vae.loss(bind, batch.num, batch.cat, batch.y, noise, true, &observed);
        if (!std::isfinite(l.parts.total)) throw NumericError("non-finite loss");
        tape.backward(l.total);
      } catch (const NumericError& e) {
        throw TrainingError("vae training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
      }
      const auto grads = bind.gradients();
      auto params = vae.params().trainable_values();
      adam_step(params, grads, adam, opts);
      vae.update_running(observed, rows);

      const double w = static_cast<double>(rows) / static_cast<double>(n);
      rec.mean.total += w * l.parts.total;
      rec.mean.recon_num += w * l.parts.recon_num;
      rec.mean.recon_cat += w * l.parts.recon_cat;
      rec.mean.kl += w * l.parts.kl;
      rec.mean.cls += w * l.parts.cls;
    }
    const Matrix logits = vae.classify(vae.encode_mean(data));
    std::size_t correct = 0;
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
      Eigen::Index best = 0;
      logits.row(r).maxCoeff(&best);
      correct += static_cast<int>(best) == data.y[static_cast<std::size_t>(r)];
    }
    rec.cls_accuracy = static_cast<double>(correct) / static_cast<double>(n);
    history.push_back(rec);
    spdlog::debug("vae epoch {} total {:.5f} num {:.5f} cat {:.5f} kl {:.5f} cls {:.5f} acc {:.4f}", epoch,
                  rec.mean.total, rec.mean.recon_num, rec.mean.recon_cat, rec.mean.kl, rec.mean.cls,
                  rec.cls_accuracy);
  }
  return history;
}

}  // namespace tabattack
