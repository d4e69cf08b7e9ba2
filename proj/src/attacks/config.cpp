#include <array>
#include <set>
#include <utility>

#include "tabattack/attacks/attack.hpp"

namespace tabattack {

namespace {

constexpr std::array<std::pair<AttackKind, const char*>, 8> kKindNames{{
    {AttackKind::Fgsm, "fgsm"},
    {AttackKind::Pgd, "pgd"},
    {AttackKind::LatentCw, "latent_cw"},
    {AttackKind::PgdVae, "pgd_vae"},
    {AttackKind::DeltaZ, "deltaz"},
    {AttackKind::LatentCwL0, "latent_cw_l0"},
    {AttackKind::LatentCwL1, "latent_cw_l1"},
    {AttackKind::LatentCwGreedy, "latent_cw_greedy"},
}};

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

Vector to_vector(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

nlohmann::json row_json(const EncodedRow& r) { return {{"num", to_std(r.num)}, {"cat", r.cat}}; }

EncodedRow row_from_json(const nlohmann::json& j) {
  return {to_vector(j.at("num")), j.at("cat").get<std::vector<int>>()};
}

nlohmann::json raw_json(const RawRow& r) {
  return {{"numeric", r.numeric}, {"categorical", r.categorical}, {"label", r.label}};
}

RawRow raw_from_json(const nlohmann::json& j) {
  return {j.at("numeric").get<std::vector<double>>(), j.at("categorical").get<std::vector<std::string>>(),
          j.at("label").get<std::string>()};
}

}  // namespace

std::string to_string(AttackKind kind) {
  for (const auto& [k, name] : kKindNames) {
    if (k == kind) return name;
  }
  throw ConfigError("unknown attack kind");
}

AttackKind attack_kind_from_string(const std::string& s) {
  for (const auto& [k, name] : kKindNames) {
    if (s == name) return k;
  }
  throw ConfigError("unknown attack kind '" + s + "'");
}

bool is_latent(AttackKind kind) { return kind != AttackKind::Fgsm && kind != AttackKind::Pgd; }

AttackConfig AttackConfig::defaults(AttackKind kind) {
  AttackConfig c;
  c.kind = kind;
  switch (kind) {
    case AttackKind::Fgsm:
    case AttackKind::Pgd:
    case AttackKind::PgdVae:
      c.iterations = 10;
      break;
    default:
      c.iterations = 300;
  }
  return c;
}

SparsityPenalty AttackConfig::penalty() const {
  if (kind == AttackKind::LatentCwL0) return SparsityPenalty::L0Sigmoid;
  if (kind == AttackKind::LatentCwL1) return SparsityPenalty::L1;
  return SparsityPenalty::None;
}

void AttackConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("attack config: ") + what);
  };
  require(epsilon >= 0.0, "epsilon must be >= 0");
  require(iterations >= 1, "iterations must be >= 1");
  require(pgd_step >= 0.0, "pgd_step must be >= 0");
  require(lr > 0.0, "lr must be > 0");
  require(lambda >= 0.0, "lambda must be >= 0");
  require(kappa >= 0.0, "kappa must be >= 0");
  require(tau > 0.0, "tau must be > 0");
  require(sparsity_weight >= 0.0, "sparsity_weight must be >= 0");
  require(sigmoid_steepness > 0.0, "sigmoid_steepness must be > 0");
  require(numeric_change_tol >= 0.0, "numeric_change_tol must be >= 0");
}

nlohmann::json AttackConfig::to_json() const {
  return {{"kind", to_string(kind)},
          {"epsilon", epsilon},
          {"iterations", iterations},
          {"pgd_step", pgd_step},
          {"lr", lr},
          {"lambda", lambda},
          {"kappa", kappa},
          {"tau", tau},
          {"sparsity_weight", sparsity_weight},
          {"sigmoid_steepness", sigmoid_steepness},
          {"sigmoid_threshold", sigmoid_threshold},
          {"use_adam", use_adam},
          {"clip_numeric", clip_numeric},
          {"numeric_change_tol", numeric_change_tol},
          {"seed", seed}};
}

AttackConfig AttackConfig::from_json(const nlohmann::json& j) {
  static const std::set<std::string> known{"kind",           "epsilon",           "iterations",
                                           "pgd_step",       "lr",                "lambda",
                                           "kappa",          "tau",               "sparsity_weight",
                                           "sigmoid_steepness", "sigmoid_threshold", "use_adam",
                                           "clip_numeric",   "numeric_change_tol", "seed"};
  if (!j.is_object()) throw ConfigError("attack config must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw ConfigError("attack config: unknown key '" + key + "'");
  }
  try {
    AttackConfig c = defaults(attack_kind_from_string(j.value("kind", std::string("latent_cw"))));
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("epsilon", c.epsilon);
    get("iterations", c.iterations);
    get("pgd_step", c.pgd_step);
    get("lr", c.lr);
    get("lambda", c.lambda);
    get("kappa", c.kappa);
    get("tau", c.tau);
    get("sparsity_weight", c.sparsity_weight);
    get("sigmoid_steepness", c.sigmoid_steepness);
    get("sigmoid_threshold", c.sigmoid_threshold);
    get("use_adam", c.use_adam);
    get("clip_numeric", c.clip_numeric);
    get("numeric_change_tol", c.numeric_change_tol);
    get("seed", c.seed);
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("attack config: ") + e.what());
  }
}

int AttackOutcome::l0() const {
  int n = 0;
  for (bool c : changed) n += c;
  return n;
}

nlohmann::json AttackOutcome::to_json() const {
  return {{"index", index},
          {"kind", to_string(kind)},
          {"true_label", true_label},
          {"original_prediction", original_prediction},
          {"adversarial_prediction", adversarial_prediction},
          {"success", success},
          {"original", row_json(original)},
          {"adversarial", row_json(adversarial)},
          {"original_raw", raw_json(original_raw)},
          {"adversarial_raw", raw_json(adversarial_raw)},
          {"delta", to_std(delta)},
          {"latent", to_std(latent)},
          {"continuous", to_std(continuous)},
          {"iterations", iterations},
          {"delta_l2", delta_l2},
          {"l1", l1},
          {"changed", changed},
          {"note", note}};
}

AttackOutcome AttackOutcome::from_json(const nlohmann::json& j) {
  try {
    AttackOutcome o;
    o.index = j.at("index").get<std::size_t>();
    o.kind = attack_kind_from_string(j.at("kind").get<std::string>());
    o.true_label = j.at("true_label").get<int>();
    o.original_prediction = j.at("original_prediction").get<int>();
    o.adversarial_prediction = j.at("adversarial_prediction").get<int>();
    o.success = j.at("success").get<bool>();
    o.original = row_from_json(j.at("original"));
    o.adversarial = row_from_json(j.at("adversarial"));
    o.original_raw = raw_from_json(j.at("original_raw"));
    o.adversarial_raw = raw_from_json(j.at("adversarial_raw"));
    o.delta = to_vector(j.at("delta"));
    o.latent = to_vector(j.at("latent"));
    o.continuous = to_vector(j.at("continuous"));
    o.iterations = j.at("iterations").get<int>();
    o.delta_l2 = j.at("delta_l2").get<double>();
    o.l1 = j.at("l1").get<double>();
    o.changed = j.at("changed").get<std::vector<bool>>();
    o.note = j.value("note", std::string());
    return o;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed attack outcome: ") + e.what());
  }
}

}  // namespace tabattack
