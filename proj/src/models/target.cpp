#include "tabattack/models/target.hpp"

#include <numeric>

#include "tabattack/data/preprocess.hpp"
#include "tabattack/error.hpp"

namespace tabattack {

int InputSpec::flat_width() const { return tabattack::flat_width(cardinalities, numeric_dim); }

nlohmann::json InputSpec::to_json() const { return {{"numeric_dim", numeric_dim}, {"cardinalities", cardinalities}}; }

InputSpec InputSpec::from_json(const nlohmann::json& j) {
  return {j.at("numeric_dim").get<int>(), j.at("cardinalities").get<std::vector<int>>()};
}

std::string to_string(ModelKind kind) { return kind == ModelKind::Mlp ? "mlp" : "sdt"; }

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "mlp") return ModelKind::Mlp;
  if (s == "sdt") return ModelKind::Sdt;
  throw ConfigError("unknown target model '" + s + "' (expected mlp or sdt)");
}

TargetModel TargetModel::mlp(InputSpec spec, int classes, const MlpConfig& config, std::uint64_t seed) {
  if (classes < 2) throw ConfigError("a classifier needs at least 2 classes");
  if (spec.flat_width() == 0) throw ConfigError("input has no features");
  TargetModel m;
  m.kind_ = ModelKind::Mlp;
  m.spec_ = std::move(spec);
  m.classes_ = classes;
  m.mlp_ = config;
  Rng rng(seed);
  Eigen::Index in = m.spec_.flat_width();
  for (std::size_t i = 0; i < config.hidden.size(); ++i) {
    if (config.hidden[i] <= 0) throw ConfigError("hidden layer widths must be positive");
    m.layers_.push_back(Dense::create(m.store_, "mlp.hidden" + std::to_string(i), in, config.hidden[i], rng));
    in = config.hidden[i];
  }
  m.layers_.push_back(Dense::create(m.store_, "mlp.out", in, classes, rng, config.zero_init_output));
  return m;
}

TargetModel TargetModel::sdt(InputSpec spec, int classes, const SdtConfig& config, std::uint64_t seed) {
  if (classes < 2) throw ConfigError("a classifier needs at least 2 classes");
  if (config.depth < 1 || config.depth > 12) throw ConfigError("tree depth must lie in [1, 12]");
  if (spec.flat_width() == 0) throw ConfigError("input has no features");
  TargetModel m;
  m.kind_ = ModelKind::Sdt;
  m.spec_ = std::move(spec);
  m.classes_ = classes;
  m.sdt_ = config;
  Rng rng(seed);
  const Eigen::Index in = m.spec_.flat_width();
  const Eigen::Index inner = (Eigen::Index{1} << config.depth) - 1;
  m.gate_w_ = m.store_.add("sdt.gate.weight", uniform_init(in, inner, in, rng));
  m.gate_b_ = m.store_.add("sdt.gate.bias", Matrix::Zero(1, inner));
  m.leaf_logits_ = m.store_.add("sdt.leaf.logits", uniform_init(inner + 1, classes, 1, rng));
  return m;
}

ad::Var TargetModel::sdt_leaf_probs(Binder& bind, ad::Var flat) const {
  const ad::Var gates = ad::sigmoid(ad::add_rowwise(ad::matmul(flat, bind(gate_w_)), bind(gate_b_)));
  // Heap order: node i routes left with probability gate_i.
  std::vector<ad::Var> level{ad::Var{}};
  int node = 0;
  for (int d = 0; d < sdt_.depth; ++d) {
    std::vector<ad::Var> next;
    next.reserve(level.size() * 2);
    for (std::size_t k = 0; k < level.size(); ++k, ++node) {
      const ad::Var g = ad::slice_cols(gates, node, 1);
      const ad::Var not_g = ad::add_scalar(ad::scale(g, -1.0), 1.0);
      if (d == 0) {
        next.push_back(g);
        next.push_back(not_g);
      } else {
        next.push_back(level[k] * g);
        next.push_back(level[k] * not_g);
      }
    }
    level = std::move(next);
  }
  return ad::concat_cols(level);
}

ad::Var TargetModel::forward(Binder& bind, ad::Var flat) const {
  if (flat.cols() != spec_.flat_width()) {
    throw DimensionError("model expects flat input width " + std::to_string(spec_.flat_width()) + ", got " +
                         std::to_string(flat.cols()));
  }
  if (kind_ == ModelKind::Mlp) {
    ad::Var h = flat;
    for (std::size_t i = 0; i + 1 < layers_.size(); ++i) h = ad::relu(layers_[i].forward(bind, h));
    return layers_.back().forward(bind, h);
  }
  const ad::Var leaves = sdt_leaf_probs(bind, flat);
  const ad::Var mixture = ad::matmul(leaves, ad::softmax_rows(bind(leaf_logits_)));
  return ad::log(mixture);
}

void TargetModel::check_flat(const Matrix& flat) const {
  if (flat.cols() != spec_.flat_width()) {
    throw DimensionError("model expects flat input width " + std::to_string(spec_.flat_width()) + ", got " +
                         std::to_string(flat.cols()));
  }
}

Matrix TargetModel::logits(const Matrix& flat) const {
  check_flat(flat);
  ad::Tape tape;
  Binder bind(tape, store_, false);
  return forward(bind, tape.constant_ref(flat)).value();
}

Matrix TargetModel::logits(const Matrix& num, const IndexMatrix& cat) const {
  if (num.cols() != spec_.numeric_dim || cat.cols() != spec_.categorical_count()) {
    throw DimensionError("encoded input " + shape_string(num) + " / " + shape_string(cat) +
                         " does not match the model input spec");
  }
  return logits(to_flat(cat, num, spec_.cardinalities));
}

Matrix TargetModel::probabilities(const Matrix& flat) const {
  Matrix z = logits(flat);
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const double mx = z.row(r).maxCoeff();
    z.row(r) = (z.row(r).array() - mx).exp();
    z.row(r) /= z.row(r).sum();
  }
  return z;
}

std::vector<int> TargetModel::predict(const Matrix& flat) const {
  const Matrix z = logits(flat);
  std::vector<int> out(static_cast<std::size_t>(z.rows()));
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    Eigen::Index best = 0;
    z.row(r).maxCoeff(&best);
    out[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return out;
}

std::vector<int> TargetModel::predict(const EncodedDataset& data) const {
  return predict(to_flat(data, spec_.cardinalities));
}

Matrix TargetModel::input_gradient(const Matrix& flat, std::span<const int> labels) const {
  check_flat(flat);
  ad::Tape tape;
  Binder bind(tape, store_, false);
  const ad::Var x = tape.variable(flat);
  tape.backward(ad::softmax_crossentropy(forward(bind, x), labels));
  return tape.grad(x);
}

Matrix TargetModel::leaf_probabilities(const Matrix& flat) const {
  if (kind_ != ModelKind::Sdt) throw ContractError("leaf_probabilities requires a soft decision tree");
  check_flat(flat);
  ad::Tape tape;
  Binder bind(tape, store_, false);
  return sdt_leaf_probs(bind, tape.constant_ref(flat)).value();
}

Checkpoint TargetModel::to_checkpoint() const {
  nlohmann::json h{{"artifact", "target"},
                   {"kind", to_string(kind_)},
                   {"input", spec_.to_json()},
                   {"classes", classes_}};
  if (kind_ == ModelKind::Mlp) {
    h["config"] = {{"hidden", mlp_.hidden}, {"zero_init_output", mlp_.zero_init_output}};
  } else {
    h["config"] = {{"depth", sdt_.depth}};
  }
  return Checkpoint::capture(std::move(h), store_);
}

TargetModel TargetModel::from_checkpoint(const Checkpoint& ckpt) {
  const auto& h = ckpt.header;
  TargetModel m;
  try {
    if (h.at("artifact").get<std::string>() != "target") throw SchemaError("checkpoint does not hold a target model");
    const auto kind = model_kind_from_string(h.at("kind").get<std::string>());
    const auto spec = InputSpec::from_json(h.at("input"));
    const int classes = h.at("classes").get<int>();
    if (kind == ModelKind::Mlp) {
      MlpConfig cfg;
      cfg.hidden = h.at("config").at("hidden").get<std::vector<int>>();
      cfg.zero_init_output = h.at("config").at("zero_init_output").get<bool>();
      m = mlp(spec, classes, cfg, 0);
    } else {
      SdtConfig cfg;
      cfg.depth = h.at("config").at("depth").get<int>();
      m = sdt(spec, classes, cfg, 0);
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed target checkpoint header: ") + e.what());
  }
  ckpt.restore(m.store_);
  return m;
}

}  // namespace tabattack
