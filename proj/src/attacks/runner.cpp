#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

#include "tabattack/attacks/attack.hpp"

namespace tabattack {

AttackOutcome run_attack(const AttackContext& ctx, const EncodedRow& x, int y, const AttackConfig& cfg) {
  switch (cfg.kind) {
    case AttackKind::Fgsm:
      return fgsm(ctx, x, y, cfg);
    case AttackKind::Pgd:
      return pgd(ctx, x, y, cfg);
    case AttackKind::PgdVae:
      return pgd_vae(ctx, x, y, cfg);
    case AttackKind::DeltaZ:
      return deltaz(ctx, x, y, cfg);
    case AttackKind::LatentCwGreedy:
      return greedy_sparsify(ctx, latent_cw(ctx, x, y, cfg), cfg);
    case AttackKind::LatentCw:
    case AttackKind::LatentCwL0:
    case AttackKind::LatentCwL1:
      return latent_cw(ctx, x, y, cfg);
  }
  throw ConfigError("unknown attack kind");
}

std::vector<AttackOutcome> run_campaign(const AttackContext& ctx, const EncodedDataset& data,
                                        const AttackConfig& cfg, int threads) {
  cfg.validate();
  if (is_latent(cfg.kind)) ctx.require_vae(to_string(cfg.kind).c_str());
  if (cfg.kind == AttackKind::DeltaZ && ctx.model->class_count() > 2) {
    throw UnsupportedTaskError("deltaz supports binary classification only");
  }
  const std::size_t n = data.size();
  std::vector<AttackOutcome> out(n);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        out[i] = run_attack(ctx, data.row(i), data.y[i], cfg);
        out[i].index = i;
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = n;
      }
    }
  };

  const auto workers = static_cast<std::size_t>(std::max(1, threads));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < std::min(workers, n); ++w) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace tabattack
