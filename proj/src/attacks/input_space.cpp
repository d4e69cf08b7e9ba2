#include <algorithm>

#include "internal.hpp"

namespace tabattack {

namespace {

// Clamps the numeric tail of a flat row to the training z-range.
void clip_numeric(const AttackContext& ctx, Matrix& flat) {
  const Eigen::Index d = ctx.model->spec().numeric_dim;
  const Eigen::Index off = flat.cols() - d;
  for (Eigen::Index i = 0; i < d; ++i) {
    flat(0, off + i) = std::clamp(flat(0, off + i), ctx.prep->z_min()(i), ctx.prep->z_max()(i));
  }
}

Matrix sign(const Matrix& g) { return g.unaryExpr([](double v) { return double((v > 0.0) - (v < 0.0)); }); }

AttackOutcome finish(const AttackContext& ctx, const EncodedRow& x, int y, const Matrix& adv_flat, int iterations,
                     bool flat_gradient, const AttackConfig& cfg) {
  AttackOutcome o = make_outcome(ctx, x, y, detail::row_from_flat(ctx, adv_flat), cfg);
  o.continuous = adv_flat.row(0).transpose();
  o.iterations = iterations;
  // No z + delta exists here; the distance is measured at the encoding of the adversarial row.
  if (ctx.vae != nullptr) o.latent = detail::encode_row(*ctx.vae, o.adversarial).row(0).transpose();
  if (flat_gradient) o.note = "flat gradient";
  return o;
}

}  // namespace

AttackOutcome fgsm(const AttackContext& ctx, const EncodedRow& x, int y, const AttackConfig& cfg) {
  cfg.validate();
  const Matrix x0 = ctx.flat(x);
  const int lbl[] = {y};
  const Matrix g = ctx.model->input_gradient(x0, lbl);
  Matrix adv = x0 + cfg.epsilon * sign(g);
  if (cfg.clip_numeric) clip_numeric(ctx, adv);
  return finish(ctx, x, y, adv, 1, g.isZero(0.0), cfg);
}

AttackOutcome pgd(const AttackContext& ctx, const EncodedRow& x, int y, const AttackConfig& cfg) {
  cfg.validate();
  const Matrix x0 = ctx.flat(x);
  const int lbl[] = {y};
  const double step = cfg.step();
  Matrix p = Matrix::Zero(1, x0.cols());
  Matrix adv = x0;
  bool flat_gradient = false;
  for (int t = 0; t < cfg.iterations; ++t) {
    const Matrix g = ctx.model->input_gradient(adv, lbl);
    if (t == 0) flat_gradient = g.isZero(0.0);
    p = (p + step * sign(g)).cwiseMax(-cfg.epsilon).cwiseMin(cfg.epsilon);
    adv = x0 + p;
    if (cfg.clip_numeric) {
      clip_numeric(ctx, adv);
      p = adv - x0;
    }
  }
  return finish(ctx, x, y, adv, cfg.iterations, flat_gradient, cfg);
}

}  // namespace tabattack
