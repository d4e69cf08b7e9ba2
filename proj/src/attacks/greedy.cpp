#include <limits>

#include "internal.hpp"

namespace tabattack {

namespace {

void revert(EncodedRow& row, const EncodedRow& original, const FeatureSlot& slot) {
  const auto i = static_cast<std::size_t>(slot.index);
  if (slot.categorical) {
    row.cat[i] = original.cat[i];
  } else {
    row.num(slot.index) = original.num(slot.index);
  }
}

}  // namespace

AttackOutcome greedy_sparsify(const AttackContext& ctx, const AttackOutcome& outcome, const AttackConfig& cfg) {
  if (!outcome.success) return outcome;
  const auto slots = ctx.prep->schema().slots();
  const int y = outcome.true_label;
  EncodedRow adv = outcome.adversarial;
  std::vector<bool> changed = outcome.changed;
  int reverted = 0;

  while (true) {
    // Least impact = the single revert that leaves the true class furthest behind.
    std::size_t best = slots.size();
    double best_margin = std::numeric_limits<double>::infinity();
    EncodedRow best_row;
    for (std::size_t c = 0; c < slots.size(); ++c) {
      if (!changed[c]) continue;
      EncodedRow trial = adv;
      revert(trial, outcome.original, slots[c]);
      const double m = logit_margin(ctx.model->logits(ctx.flat(trial)), y);
      if (m < best_margin) {
        best_margin = m;
        best = c;
        best_row = std::move(trial);
      }
    }
    if (best == slots.size()) break;
    const int pred = ctx.model->predict(ctx.flat(best_row)).front();
    if (pred == y || pred == outcome.original_prediction) break;
    adv = std::move(best_row);
    changed[best] = false;
    ++reverted;
  }
  if (reverted == 0) return outcome;

  AttackOutcome o = make_outcome(ctx, outcome.original, y, adv, cfg);
  o.index = outcome.index;
  o.kind = outcome.kind;
  o.delta = outcome.delta;
  o.delta_l2 = outcome.delta_l2;
  o.iterations = outcome.iterations;
  o.continuous = ctx.flat(adv).row(0).transpose();
  o.latent = ctx.vae != nullptr ? Vector(detail::encode_row(*ctx.vae, adv).row(0).transpose()) : outcome.latent;
  o.note = "greedy reverted " + std::to_string(reverted);
  return o;
}

}  // namespace tabattack
