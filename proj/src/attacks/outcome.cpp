#include <cmath>
#include <limits>

#include "internal.hpp"

namespace tabattack {

namespace detail {

IndexMatrix cat_matrix(const EncodedRow& row) {
  IndexMatrix cat(1, static_cast<Eigen::Index>(row.cat.size()));
  for (std::size_t j = 0; j < row.cat.size(); ++j) cat(0, static_cast<Eigen::Index>(j)) = row.cat[j];
  return cat;
}

EncodedRow row_from_flat(const AttackContext& ctx, const Matrix& flat) {
  IndexMatrix cat;
  Matrix num;
  from_flat(flat, ctx.model->spec().cardinalities, cat, num);
  return {num.row(0).transpose(), std::vector<int>(cat.data(), cat.data() + cat.size())};
}

EncodedRow row_from_latent(const VaeModel& vae, const Matrix& z) {
  IndexMatrix cat;
  Matrix num;
  vae.decode_discrete(z, cat, num);
  return {num.row(0).transpose(), std::vector<int>(cat.data(), cat.data() + cat.size())};
}

Matrix encode_row(const VaeModel& vae, const EncodedRow& row) {
  return vae.encode_mean(row.num.transpose(), cat_matrix(row));
}

}  // namespace detail

Matrix AttackContext::flat(const EncodedRow& row) const {
  return to_flat(detail::cat_matrix(row), row.num.transpose(), model->spec().cardinalities);
}

void AttackContext::require_vae(const char* attack) const {
  if (vae == nullptr) throw ConfigError(std::string(attack) + " needs a trained VAE");
  if (!(vae->preprocessor().schema() == prep->schema()) || vae->numeric_dim() != model->spec().numeric_dim ||
      vae->cardinalities() != model->spec().cardinalities) {
    throw ConfigError(std::string(attack) + ": VAE and target model were built for different schemas");
  }
}

double logit_margin(const Matrix& logits, int y) {
  double other = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < logits.cols(); ++i) {
    if (i != y) other = std::max(other, logits(0, i));
  }
  return logits(0, y) - other;
}

AttackOutcome make_outcome(const AttackContext& ctx, const EncodedRow& x, int y, const EncodedRow& adv,
                           const AttackConfig& cfg) {
  AttackOutcome o;
  o.kind = cfg.kind;
  o.true_label = y;
  o.original = x;
  o.adversarial = adv;
  const Matrix fx = ctx.flat(x);
  const Matrix fa = ctx.flat(adv);
  o.original_prediction = ctx.model->predict(fx).front();
  o.adversarial_prediction = ctx.model->predict(fa).front();
  o.success = o.adversarial_prediction != o.original_prediction;
  o.l1 = (fa - fx).cwiseAbs().sum();
  o.original_raw = ctx.prep->decode(x, y);
  o.adversarial_raw = ctx.prep->decode(adv, y);

  const auto slots = ctx.prep->schema().slots();
  o.changed.resize(slots.size());
  for (std::size_t c = 0; c < slots.size(); ++c) {
    const auto i = static_cast<std::size_t>(slots[c].index);
    if (slots[c].categorical) {
      o.changed[c] = o.original_raw.categorical[i] != o.adversarial_raw.categorical[i];
    } else {
      o.changed[c] = std::abs(o.adversarial_raw.numeric[i] - o.original_raw.numeric[i]) > cfg.numeric_change_tol;
    }
  }
  return o;
}

}  // namespace tabattack
