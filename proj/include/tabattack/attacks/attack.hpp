#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "tabattack/data/preprocess.hpp"
#include "tabattack/models/target.hpp"
#include "tabattack/vae/vae.hpp"

namespace tabattack {

enum class AttackKind { Fgsm, Pgd, LatentCw, PgdVae, DeltaZ, LatentCwL0, LatentCwL1, LatentCwGreedy };

std::string to_string(AttackKind kind);
AttackKind attack_kind_from_string(const std::string& s);
/// True for attacks that optimise in the VAE latent space.
bool is_latent(AttackKind kind);

enum class SparsityPenalty { None, L0Sigmoid, L1 };

struct AttackConfig {
  AttackKind kind = AttackKind::LatentCw;
  double epsilon = 0.5;     // input-space and PGD-VAE budget
  int iterations = 300;     // T
  double pgd_step = 0.0;    // 0 means epsilon / T
  double lr = 0.1;          // eta
  double lambda = 1.0;
  double kappa = 0.0;
  double tau = 1e-5;
  double sparsity_weight = 0.0;
  double sigmoid_steepness = 20.0;
  double sigmoid_threshold = 0.1;
  bool use_adam = true;
  bool clip_numeric = false;
  double numeric_change_tol = 1e-3;  // raw units
  std::uint64_t seed = 0;

  /// Per-kind defaults: T = 10 for FGSM/PGD/PGD-VAE, 300 otherwise.
  static AttackConfig defaults(AttackKind kind);
  [[nodiscard]] SparsityPenalty penalty() const;
  [[nodiscard]] double step() const { return pgd_step > 0.0 ? pgd_step : epsilon / iterations; }
  void validate() const;
  [[nodiscard]] nlohmann::json to_json() const;
  static AttackConfig from_json(const nlohmann::json& j);
};

struct AttackOutcome {
  std::size_t index = 0;  // row within the attacked split
  AttackKind kind = AttackKind::LatentCw;
  int true_label = 0;
  int original_prediction = 0;
  int adversarial_prediction = 0;
  /// Prediction flipped relative to the original prediction, re-verified.
  bool success = false;
  EncodedRow original;
  EncodedRow adversarial;
  RawRow original_raw;
  RawRow adversarial_raw;
  Vector delta;       // latent perturbation (latent attacks only)
  Vector latent;      // point whose Mahalanobis distance is reported
  Vector continuous;  // flat adversarial representation before discretisation
  int iterations = 0;
  double delta_l2 = 0.0;
  double l1 = 0.0;  // sum |flat(x_adv) - flat(x)|
  std::vector<bool> changed;  // schema column order
  std::string note;

  [[nodiscard]] bool fooled() const { return adversarial_prediction != true_label; }
  [[nodiscard]] int l0() const;
  [[nodiscard]] nlohmann::json to_json() const;
  static AttackOutcome from_json(const nlohmann::json& j);
};

/// Shared read-only models for an attack campaign.
struct AttackContext {
  const TargetModel* model = nullptr;
  const VaeModel* vae = nullptr;
  const Preprocessor* prep = nullptr;

  [[nodiscard]] Matrix flat(const EncodedRow& row) const;
  void require_vae(const char* attack) const;
};

/// Builds and re-verifies an outcome from a discrete adversarial row.
AttackOutcome make_outcome(const AttackContext& ctx, const EncodedRow& x, int y, const EncodedRow& adv,
                           const AttackConfig& cfg);

/// Latent attack objective for one row: margin hinge, squared perturbation and
/// the configured sparsity penalty. `param` is delta (additive) or Delta z (DeltaZ).
ad::Var latent_attack_loss(const AttackContext& ctx, ad::Tape& tape, const Matrix& z, ad::Var param,
                           const Matrix& x_flat, int y, const AttackConfig& cfg);

/// f_y - max_{i != y} f_i for one row of logits.
double logit_margin(const Matrix& logits, int y);

AttackOutcome fgsm(const AttackContext& ctx, const EncodedRow& x, int y, const AttackConfig& cfg);
AttackOutcome pgd(const AttackContext& ctx, const EncodedRow& x, int y, const AttackConfig& cfg);
AttackOutcome latent_cw(const AttackContext& ctx, const EncodedRow& x, int y, const AttackConfig& cfg);
AttackOutcome pgd_vae(const AttackContext& ctx, const EncodedRow& x, int y, const AttackConfig& cfg);
AttackOutcome deltaz(const AttackContext& ctx, const EncodedRow& x, int y, const AttackConfig& cfg);

/// Reverts changed features one at a time while the row stays adversarial.
AttackOutcome greedy_sparsify(const AttackContext& ctx, const AttackOutcome& outcome, const AttackConfig& cfg);

/// Dispatches on cfg.kind.
AttackOutcome run_attack(const AttackContext& ctx, const EncodedRow& x, int y, const AttackConfig& cfg);

/// Attacks every row of `data`; results are in row order for any thread count.
std::vector<AttackOutcome> run_campaign(const AttackContext& ctx, const EncodedDataset& data,
                                        const AttackConfig& cfg, int threads = 1);

}  // namespace tabattack
