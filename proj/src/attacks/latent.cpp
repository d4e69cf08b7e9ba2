#include <array>

#include "internal.hpp"
#include "tabattack/numerics/adam.hpp"

namespace tabattack {

namespace {

bool multiplicative(const AttackConfig& cfg) { return cfg.kind == AttackKind::DeltaZ; }

Matrix perturbed(const Matrix& z, const Matrix& param, const AttackConfig& cfg) {
  if (multiplicative(cfg)) return z.cwiseProduct((param.array() + 1.0).matrix());
  return z + param;
}

AttackOutcome finish(const AttackContext& ctx, const EncodedRow& x, int y, const Matrix& z, const Matrix& zp,
                     int iterations, const AttackConfig& cfg) {
  AttackOutcome o = make_outcome(ctx, x, y, detail::row_from_latent(*ctx.vae, zp), cfg);
  o.continuous = ctx.vae->decode_flat(zp).row(0).transpose();
  o.latent = zp.row(0).transpose();
  o.delta = (zp - z).row(0).transpose();
  o.delta_l2 = o.delta.norm();
  o.iterations = iterations;
  return o;
}

// Algorithm shared by latent_cw, its sparse variants and DeltaZ.
AttackOutcome optimise_latent(const AttackContext& ctx, const EncodedRow& x, int y, const AttackConfig& cfg) {
  const Matrix z = detail::encode_row(*ctx.vae, x);
  const Matrix x_flat = ctx.flat(x);
  Matrix param = Matrix::Zero(1, z.cols());
  AdamState adam;
  const AdamOptions adam_opts{.lr = cfg.lr};
  int used = 0;
  for (int t = 1; t <= cfg.iterations; ++t) {
    used = t;
    ad::Tape tape;
    const ad::Var p = tape.variable(param);
    tape.backward(latent_attack_loss(ctx, tape, z, p, x_flat, y, cfg));
    const Matrix g = tape.grad(p);
    const Matrix before = param;
    if (cfg.use_adam) {
      std::array<Matrix*, 1> ps{&param};
      std::array<Matrix, 1> gs{g};
      adam_step(ps, gs, adam, adam_opts);
    } else {
      param -= cfg.lr * g;
    }
    if ((param - before).norm() < cfg.tau) break;
  }
  return finish(ctx, x, y, z, perturbed(z, param, cfg), used, cfg);
}

}  // namespace

ad::Var latent_attack_loss(const AttackContext& ctx, ad::Tape& tape, const Matrix& z, ad::Var param,
                           const Matrix& x_flat, int y, const AttackConfig& cfg) {
  Binder vae_bind(tape, ctx.vae->params(), false);
  Binder model_bind(tape, ctx.model->params(), false);
  const ad::Var zc = tape.constant_ref(z);
  const ad::Var zp = multiplicative(cfg) ? zc * ad::add_scalar(param, 1.0) : zc + param;
  const ad::Var x_adv = ctx.vae->decode_flat(vae_bind, zp);
  const int lbl[] = {y};

  ad::Var loss = ad::sum(ad::square(param));
  if (cfg.lambda > 0.0) loss = cfg.lambda * ad::cw_margin(ctx.model->forward(model_bind, x_adv), lbl, cfg.kappa) + loss;
  if (cfg.sparsity_weight > 0.0 && cfg.penalty() != SparsityPenalty::None) {
    const ad::Var diff = ad::abs(x_adv - tape.constant_ref(x_flat));
    const ad::Var pen = cfg.penalty() == SparsityPenalty::L1
                            ? ad::sum(diff)
                            : ad::sum(ad::sigmoid(ad::add_scalar(cfg.sigmoid_steepness * diff, -cfg.sigmoid_threshold)));
    loss = loss + cfg.sparsity_weight * pen;
  }
  return loss;
}

AttackOutcome latent_cw(const AttackContext& ctx, const EncodedRow& x, int y, const AttackConfig& cfg) {
  cfg.validate();
  ctx.require_vae("latent_cw");
  AttackConfig c = cfg;
  if (c.kind != AttackKind::LatentCwL0 && c.kind != AttackKind::LatentCwL1 && c.kind != AttackKind::LatentCwGreedy) {
    c.kind = AttackKind::LatentCw;
  }
  return optimise_latent(ctx, x, y, c);
}

AttackOutcome deltaz(const AttackContext& ctx, const EncodedRow& x, int y, const AttackConfig& cfg) {
  cfg.validate();
  if (ctx.model->class_count() > 2) {
    throw UnsupportedTaskError("deltaz supports binary classification only; the model has " +
                               std::to_string(ctx.model->class_count()) + " classes");
  }
  ctx.require_vae("deltaz");
  AttackConfig c = cfg;
  c.kind = AttackKind::DeltaZ;
  return optimise_latent(ctx, x, y, c);
}

AttackOutcome pgd_vae(const AttackContext& ctx, const EncodedRow& x, int y, const AttackConfig& cfg) {
  cfg.validate();
  ctx.require_vae("pgd_vae");
  const Matrix z = detail::encode_row(*ctx.vae, x);
  const int lbl[] = {y};
  const double step = cfg.step();
  Matrix delta = Matrix::Zero(1, z.cols());
  for (int t = 0; t < cfg.iterations; ++t) {
    ad::Tape tape;
    Binder vae_bind(tape, ctx.vae->params(), false);
    Binder model_bind(tape, ctx.model->params(), false);
    const ad::Var d = tape.variable(delta);
    const ad::Var x_adv = ctx.vae->decode_flat(vae_bind, tape.constant_ref(z) + d);
    tape.backward(ad::softmax_crossentropy(ctx.model->forward(model_bind, x_adv), lbl));
    const Matrix g = tape.grad(d);
    const Matrix s = g.unaryExpr([](double v) { return double((v > 0.0) - (v < 0.0)); });
    delta = (delta + step * s).cwiseMax(-cfg.epsilon).cwiseMin(cfg.epsilon);
  }
  return finish(ctx, x, y, z, z + delta, cfg.iterations, cfg);
}

}  // namespace tabattack
