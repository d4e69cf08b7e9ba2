#include "tabattack/cli/run_config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "tabattack/error.hpp"

namespace tabattack::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t basis) {
  std::uint64_t h = basis;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) {
  std::uint64_t x = seed ^ fnv1a(tag);
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

namespace {

void check_keys(const json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <class T>
void get(const json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

DatasetSpec parse_dataset(const json& j) {
  check_keys(j, {"name", "csv", "schema", "synthetic", "rows", "noise", "separation", "with_categorical",
                 "drop_missing", "seed"},
             "dataset");
  DatasetSpec d;
  get(j, "name", d.name);
  get(j, "csv", d.csv);
  get(j, "schema", d.schema);
  get(j, "synthetic", d.synthetic);
  get(j, "rows", d.rows);
  get(j, "noise", d.noise);
  get(j, "separation", d.separation);
  get(j, "with_categorical", d.with_categorical);
  get(j, "drop_missing", d.drop_missing);
  if (j.contains("seed")) d.seed = j.at("seed").get<std::uint64_t>();
  return d;
}

json dataset_json(const DatasetSpec& d) {
  json j{{"name", d.name}, {"drop_missing", d.drop_missing}};
  if (d.is_synthetic()) {
    j["synthetic"] = d.synthetic;
    j["rows"] = d.rows;
    if (d.synthetic == "moons") j["noise"] = d.noise;
    if (d.synthetic == "blobs") {
      j["separation"] = d.separation;
      j["with_categorical"] = d.with_categorical;
    }
  } else {
    j["csv"] = d.csv;
    j["schema"] = d.schema;
  }
  if (d.seed) j["seed"] = *d.seed;
  return j;
}

TargetSpec parse_target(const json& j) {
  check_keys(j, {"name", "kind", "hidden", "depth", "train"}, "target");
  TargetSpec t;
  get(j, "name", t.name);
  t.kind = model_kind_from_string(j.value("kind", std::string("mlp")));
  if (t.name.empty()) t.name = to_string(t.kind);
  get(j, "hidden", t.mlp.hidden);
  get(j, "depth", t.sdt.depth);
  if (j.contains("train")) {
    const auto& tr = j.at("train");
    check_keys(tr, {"epochs", "lr", "batch", "patience"}, "target '" + t.name + "' train");
    get(tr, "epochs", t.train.epochs);
    get(tr, "lr", t.train.lr);
    get(tr, "batch", t.train.batch_size);
    get(tr, "patience", t.train.patience);
  }
  return t;
}

json target_json(const TargetSpec& t) {
  json j{{"name", t.name},
         {"kind", to_string(t.kind)},
         {"train",
          {{"epochs", t.train.epochs},
           {"lr", t.train.lr},
           {"batch", t.train.batch_size},
           {"patience", t.train.patience},
           {"seed", t.train.seed}}}};
  if (t.kind == ModelKind::Mlp) {
    j["hidden"] = t.mlp.hidden;
  } else {
    j["depth"] = t.sdt.depth;
  }
  return j;
}

AttackSpec parse_attack(json j) {
  if (!j.is_object()) throw ConfigError("attack entries must be JSON objects");
  AttackSpec a;
  if (j.contains("name")) {
    a.name = j.at("name").get<std::string>();
    j.erase("name");
  }
  if (j.contains("seed")) throw ConfigError("attack seeds are derived from the run seed; remove 'seed'");
  a.config = AttackConfig::from_json(j);
  if (a.name.empty()) a.name = to_string(a.config.kind);
  return a;
}

EvaluationSpec parse_evaluation(const json& j) {
  check_keys(j, {"samples", "class_balanced", "md_rule", "outlier_base", "correct_only", "p"}, "evaluation");
  EvaluationSpec e;
  get(j, "samples", e.samples);
  get(j, "class_balanced", e.class_balanced);
  if (j.contains("md_rule")) e.report.md_rule = md_rule_from_string(j.at("md_rule").get<std::string>());
  if (j.contains("outlier_base")) {
    e.report.outlier_base = outlier_base_from_string(j.at("outlier_base").get<std::string>());
  }
  get(j, "correct_only", e.report.correct_only);
  get(j, "p", e.report.p);
  return e;
}

std::vector<double> tenths() {
  std::vector<double> v;
  for (int i = 1; i <= 10; ++i) v.push_back(i / 10.0);
  return v;
}

SweepSpec parse_sweep(const json& j) {
  check_keys(j, {"attack", "target", "lambdas", "lrs", "sparsity_weights", "samples"}, "sweep");
  SweepSpec s;
  s.attack = "latent_cw";
  s.lambdas = tenths();
  s.lrs = {0.01, 0.03, 0.1, 0.15, 0.2, 0.25, 0.3};
  get(j, "attack", s.attack);
  get(j, "target", s.target);
  get(j, "lambdas", s.lambdas);
  get(j, "lrs", s.lrs);
  get(j, "sparsity_weights", s.sparsity_weights);
  get(j, "samples", s.samples);
  return s;
}

std::string file_digest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return hex(fnv1a(ss.str()));
}

std::string chain(std::initializer_list<std::string_view> parts) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (auto p : parts) {
    h = fnv1a(p, h);
    h = fnv1a(std::string_view("\x1f", 1), h);
  }
  return hex(h);
}

}  // namespace

RunConfig RunConfig::from_json(const json& j, const fs::path& base_dir) {
  RunConfig c;
  c.base_dir = base_dir;
  try {
    check_keys(j, {"name", "seed", "dataset", "vae", "targets", "attacks", "evaluation", "sweep", "out"}, "config");
    get(j, "name", c.name);
    get(j, "seed", c.seed);
    get(j, "out", c.out);
    if (!j.contains("dataset")) throw ConfigError("config needs a 'dataset' section");
    c.dataset = parse_dataset(j.at("dataset"));
    if (j.contains("vae")) {
      if (j.at("vae").contains("seed")) throw ConfigError("the vae seed is derived from the run seed; remove 'seed'");
      c.vae = VaeConfig::from_json(j.at("vae"));
    }
    if (j.contains("targets")) {
      for (const auto& t : j.at("targets")) c.targets.push_back(parse_target(t));
    } else {
      c.targets.push_back(TargetSpec{"mlp", ModelKind::Mlp, {}, {}, {}});
    }
    if (j.contains("attacks")) {
      for (const auto& a : j.at("attacks")) c.attacks.push_back(parse_attack(a));
    }
    if (j.contains("evaluation")) c.evaluation = parse_evaluation(j.at("evaluation"));
    if (j.contains("sweep")) c.sweep = parse_sweep(j.at("sweep"));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  c.reseed(c.seed);
  if (j.at("dataset").contains("seed")) c.dataset.seed = j.at("dataset").at("seed").get<std::uint64_t>();
  return c;
}

RunConfig RunConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return from_json(j, fs::absolute(path).parent_path());
}

void RunConfig::reseed(std::uint64_t s) {
  seed = s;
  dataset.seed.reset();
  vae.seed = derive_seed(seed, "vae");
  for (auto& t : targets) t.train.seed = derive_seed(seed, "target:" + t.name);
  for (auto& a : attacks) a.config.seed = derive_seed(seed, "attack:" + a.name);
}

fs::path RunConfig::resolve(const std::string& path) const {
  const fs::path p(path);
  return p.is_absolute() ? p : base_dir / p;
}

std::uint64_t RunConfig::split_seed() const { return dataset.seed ? *dataset.seed : derive_seed(seed, "split"); }
std::uint64_t RunConfig::sample_seed() const { return derive_seed(seed, "samples"); }
std::uint64_t RunConfig::data_seed() const { return derive_seed(seed, "synthetic"); }

void RunConfig::validate() const {
  if (dataset.is_synthetic()) {
    if (dataset.synthetic != "moons" && dataset.synthetic != "blobs") {
      throw ConfigError("unknown synthetic dataset '" + dataset.synthetic + "' (expected moons or blobs)");
    }
    if (!dataset.csv.empty() || !dataset.schema.empty()) {
      throw ConfigError("dataset: give either csv/schema or synthetic, not both");
    }
    if (dataset.rows < 10) throw ConfigError("dataset: synthetic rows must be >= 10");
  } else {
    if (dataset.csv.empty() || dataset.schema.empty()) throw ConfigError("dataset needs csv and schema paths");
    for (const auto& p : {dataset.csv, dataset.schema}) {
      if (!fs::is_regular_file(resolve(p))) throw IoError("referenced file '" + resolve(p).string() + "' does not exist");
    }
  }
  vae.validate();
  if (targets.empty()) throw ConfigError("config needs at least one target");
  std::set<std::string> names;
  for (const auto& t : targets) {
    if (t.name.empty() || t.name.find_first_of("/\\ ") != std::string::npos) {
      throw ConfigError("target name '" + t.name + "' must be non-empty without spaces or slashes");
    }
    if (!names.insert(t.name).second) throw ConfigError("duplicate target name '" + t.name + "'");
    if (t.train.epochs < 0 || t.train.batch_size < 1 || !(t.train.lr > 0.0) || t.train.patience < 0) {
      throw ConfigError("target '" + t.name + "': bad training options");
    }
    if (t.kind == ModelKind::Sdt && (t.sdt.depth < 1 || t.sdt.depth > 12)) {
      throw ConfigError("target '" + t.name + "': sdt depth must be in [1, 12]");
    }
  }
  names.clear();
  for (const auto& a : attacks) {
    if (a.name.empty() || a.name.find_first_of("/\\ ") != std::string::npos || a.name.find("__") != std::string::npos) {
      throw ConfigError("attack name '" + a.name + "' must be non-empty without spaces, slashes or '__'");
    }
    if (!names.insert(a.name).second) throw ConfigError("duplicate attack name '" + a.name + "'");
    a.config.validate();
  }
  if (evaluation.samples < 1) throw ConfigError("evaluation.samples must be >= 1");
  if (!(evaluation.report.p > 0.0 && evaluation.report.p < 1.0)) throw ConfigError("evaluation.p must lie in (0, 1)");
  if (sweep) {
    if (sweep->lambdas.empty() || sweep->lrs.empty()) throw ConfigError("sweep needs lambdas and lrs");
    for (double l : sweep->lambdas) {
      if (l < 0.0) throw ConfigError("sweep lambdas must be >= 0");
    }
    for (double l : sweep->lrs) {
      if (!(l > 0.0)) throw ConfigError("sweep lrs must be > 0");
    }
    for (double w : sweep->sparsity_weights) {
      if (w < 0.0) throw ConfigError("sweep sparsity weights must be >= 0");
    }
    if (sweep->samples < 1) throw ConfigError("sweep.samples must be >= 1");
    if (!sweep->target.empty()) (void)target(sweep->target);
  }
}

const TargetSpec& RunConfig::target(const std::string& n) const {
  for (const auto& t : targets) {
    if (t.name == n) return t;
  }
  throw ConfigError("no target named '" + n + "'");
}

const AttackSpec& RunConfig::attack(const std::string& n) const {
  for (const auto& a : attacks) {
    if (a.name == n) return a;
  }
  throw ConfigError("no attack named '" + n + "'");
}

json RunConfig::to_json() const {
  json j{{"name", name}, {"seed", seed}, {"dataset", dataset_json(dataset)}, {"vae", vae.to_json()}};
  j["targets"] = json::array();
  for (const auto& t : targets) j["targets"].push_back(target_json(t));
  j["attacks"] = json::array();
  for (const auto& a : attacks) {
    json aj = a.config.to_json();
    aj["name"] = a.name;
    j["attacks"].push_back(aj);
  }
  j["evaluation"] = {{"samples", evaluation.samples},
                     {"class_balanced", evaluation.class_balanced},
                     {"md_rule", to_string(evaluation.report.md_rule)},
                     {"outlier_base", to_string(evaluation.report.outlier_base)},
                     {"correct_only", evaluation.report.correct_only},
                     {"p", evaluation.report.p}};
  if (sweep) {
    j["sweep"] = {{"attack", sweep->attack},
                  {"target", sweep->target},
                  {"lambdas", sweep->lambdas},
                  {"lrs", sweep->lrs},
                  {"sparsity_weights", sweep->sparsity_weights},
                  {"samples", sweep->samples}};
  }
  return j;
}

std::string RunConfig::hash() const { return hex(fnv1a(to_json().dump())); }

std::string Lineage::data(const RunConfig& cfg) {
  std::string files;
  if (!cfg.dataset.is_synthetic()) {
    files = file_digest(cfg.resolve(cfg.dataset.csv)) + file_digest(cfg.resolve(cfg.dataset.schema));
  } else {
    files = std::to_string(cfg.data_seed());
  }
  const SplitRatios r;
  return chain({"data", dataset_json(cfg.dataset).dump(), files, std::to_string(cfg.split_seed()),
                json(r.as_array()).dump()});
}

std::string Lineage::vae(const RunConfig& cfg) { return chain({"vae", data(cfg), cfg.vae.to_json().dump()}); }

std::string Lineage::target(const RunConfig& cfg, const TargetSpec& t) {
  return chain({"target", data(cfg), target_json(t).dump()});
}

std::string Lineage::samples(const RunConfig& cfg) {
  return chain({"samples", data(cfg), std::to_string(cfg.evaluation.samples),
                cfg.evaluation.class_balanced ? "balanced" : "plain", std::to_string(cfg.sample_seed())});
}

std::string Lineage::attack(const RunConfig& cfg, const TargetSpec& t, const AttackSpec& a) {
  json aj = a.config.to_json();
  aj["name"] = a.name;
  return chain({"attack", target(cfg, t), vae(cfg), samples(cfg), aj.dump()});
}

}  // namespace tabattack::cli
