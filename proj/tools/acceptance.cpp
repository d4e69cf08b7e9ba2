// Runs the eight acceptance criteria and prints one PASS/FAIL line for each.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "tabattack/attacks/attack.hpp"
#include "tabattack/cli/pipeline.hpp"
#include "tabattack/data/csv.hpp"
#include "tabattack/data/synthetic.hpp"
#include "tabattack/error.hpp"
#include "tabattack/metrics/metrics.hpp"

#ifndef TABATTACK_DESK_CONFIG
#define TABATTACK_DESK_CONFIG "configs/moons.json"
#endif

using namespace tabattack;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

// ---- finite differences

using LossFn = std::function<ad::Var(ad::Tape&, const std::vector<ad::Var>&)>;

double eval_loss(const LossFn& fn, const std::vector<Matrix>& inputs) {
  ad::Tape tape;
  std::vector<ad::Var> vars;
  for (const auto& m : inputs) vars.push_back(tape.constant(m));
  return fn(tape, vars).scalar();
}

double relative_error(const Matrix& analytic, const Matrix& numeric) {
  const double diff = (analytic - numeric).cwiseAbs().maxCoeff();
  const double scale = std::max({analytic.cwiseAbs().maxCoeff(), numeric.cwiseAbs().maxCoeff(), 1e-6});
  return diff / scale;
}

double gradient_error(const LossFn& fn, std::vector<Matrix> inputs, double h = 1e-5) {
  ad::Tape tape;
  std::vector<ad::Var> vars;
  for (const auto& m : inputs) vars.push_back(tape.variable(m));
  tape.backward(fn(tape, vars));
  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    if (inputs[k].size() == 0) continue;
    const Matrix analytic = tape.grad(vars[k]);
    Matrix numeric(inputs[k].rows(), inputs[k].cols());
    for (Eigen::Index i = 0; i < inputs[k].size(); ++i) {
      const double orig = inputs[k].data()[i];
      inputs[k].data()[i] = orig + h;
      const double up = eval_loss(fn, inputs);
      inputs[k].data()[i] = orig - h;
      const double down = eval_loss(fn, inputs);
      inputs[k].data()[i] = orig;
      numeric.data()[i] = (up - down) / (2.0 * h);
    }
    worst = std::max(worst, relative_error(analytic, numeric));
  }
  return worst;
}

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0,
                     double gap = 0.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    double v = dist(rng);
    while (std::abs(v) < gap) v = dist(rng);
    m.data()[i] = v;
  }
  return m;
}

struct Small {
  Preprocessor prep;
  EncodedDataset train, test;
};

Small small_moons(std::uint64_t seed) {
  const auto raw = make_mixed_moons({300, 0.2, seed});
  const auto parts = apply_split(raw, stratified_split(raw.labels(), 2, {}, seed));
  Small s;
  s.prep = Preprocessor::fit(parts.train);
  s.train = s.prep.transform(parts.train);
  s.test = s.prep.transform(parts.test);
  return s;
}

VaeConfig small_vae(std::uint64_t seed) {
  VaeConfig c;
  c.encode_widths = {16, 8};
  c.latent_dim = 3;
  c.kl_weight = 1e-2;
  c.seed = seed;
  return c;
}

IndexMatrix cat_row(const EncodedRow& x) {
  IndexMatrix m(1, static_cast<Eigen::Index>(x.cat.size()));
  for (std::size_t j = 0; j < x.cat.size(); ++j) m(0, static_cast<Eigen::Index>(j)) = x.cat[j];
  return m;
}

// ---- 1

Verdict gradients() {
  std::mt19937_64 rng(2024);
  const Matrix a = random_matrix(3, 4, rng, -1, 1, 0.05);
  const Matrix b = random_matrix(4, 2, rng, -1, 1, 0.05);
  const Matrix c = random_matrix(3, 4, rng, -1, 1, 0.05);
  const Matrix pos = random_matrix(3, 4, rng, 0.2, 2.0);
  const Matrix s = random_matrix(1, 1, rng, 0.5, 1.5);
  const Matrix row = random_matrix(1, 4, rng, 0.5, 1.5);
  const Matrix beta = random_matrix(1, 4, rng);
  const std::vector<int> labels{0, 3, 1};
  const std::vector<int> codes{2, 0, 2, 1};

  const std::vector<std::tuple<const char*, LossFn, std::vector<Matrix>>> ops{
      {"matmul", [](ad::Tape&, const auto& v) { return ad::sum(ad::square(ad::matmul(v[0], v[1]))); }, {a, b}},
      {"add", [](ad::Tape&, const auto& v) { return ad::sum(ad::square(v[0] + v[1])); }, {a, c}},
      {"sub", [](ad::Tape&, const auto& v) { return ad::sum(ad::square(v[0] - v[1])); }, {a, c}},
      {"mul", [](ad::Tape&, const auto& v) { return ad::sum(ad::mul(v[0], v[1])); }, {a, c}},
      {"mul broadcast", [](ad::Tape&, const auto& v) { return ad::sum(ad::square(ad::mul(v[1], v[0]))); }, {a, s}},
      {"add broadcast", [](ad::Tape&, const auto& v) { return ad::sum(ad::square(ad::add(v[0], v[1]))); }, {a, s}},
      {"relu", [](ad::Tape&, const auto& v) { return ad::sum(ad::square(ad::relu(v[0]))); }, {a}},
      {"sigmoid", [](ad::Tape&, const auto& v) { return ad::sum(ad::sigmoid(v[0])); }, {a}},
      {"exp", [](ad::Tape&, const auto& v) { return ad::sum(ad::exp(v[0])); }, {a}},
      {"log", [](ad::Tape&, const auto& v) { return ad::sum(ad::log(v[0])); }, {pos}},
      {"square", [](ad::Tape&, const auto& v) { return ad::sum(ad::square(v[0])); }, {a}},
      {"abs", [](ad::Tape&, const auto& v) { return ad::sum(ad::abs(v[0])); }, {a}},
      {"scale", [](ad::Tape&, const auto& v) { return ad::sum(ad::square(ad::scale(v[0], -1.7))); }, {a}},
      {"add_scalar", [](ad::Tape&, const auto& v) { return ad::sum(ad::square(ad::add_scalar(v[0], 0.3))); }, {a}},
      {"add_rowwise", [](ad::Tape&, const auto& v) { return ad::sum(ad::square(ad::add_rowwise(v[0], v[1]))); },
       {a, row}},
      {"mul_rowwise", [](ad::Tape&, const auto& v) { return ad::sum(ad::square(ad::mul_rowwise(v[0], v[1]))); },
       {a, row}},
      {"mean", [](ad::Tape&, const auto& v) { return ad::mean(ad::square(v[0])); }, {a}},
      {"concat/slice",
       [](ad::Tape&, const auto& v) {
         std::vector<ad::Var> parts{v[0], v[1]};
         return ad::sum(ad::square(ad::slice_cols(ad::concat_cols(parts), 2, 4)));
       },
       {a, c}},
      {"embedding", [&](ad::Tape&, const auto& v) { return ad::sum(ad::square(ad::embedding(v[0], codes))); }, {a}},
      {"softmax_rows", [](ad::Tape&, const auto& v) { return ad::sum(ad::mul(ad::softmax_rows(v[0]), v[1])); },
       {a, c}},
      {"softmax_crossentropy", [&](ad::Tape&, const auto& v) { return ad::softmax_crossentropy(v[0], labels); },
       {a}},
      {"kl_gaussian", [](ad::Tape&, const auto& v) { return ad::kl_gaussian(v[0], v[1]); }, {a, c}},
      {"clamp", [](ad::Tape&, const auto& v) { return ad::sum(ad::square(ad::clamp(v[0], -0.5, 0.5))); }, {a}},
      {"batch_norm",
       [](ad::Tape&, const auto& v) {
         auto r = ad::batch_norm(v[0], v[1], v[2], 1e-5);
         return ad::sum(ad::mul(ad::square(r.out), v[3]));
       },
       {a, row, beta, pos}},
      {"cw_margin", [&](ad::Tape&, const auto& v) { return ad::cw_margin(v[0], labels, 2.0); }, {a}},
  };
  double worst = 0.0;
  std::string worst_name;
  auto note = [&](const std::string& name, double e) {
    if (e > worst || worst_name.empty()) {
      worst = std::max(worst, e);
      worst_name = name;
    }
  };
  for (const auto& [name, fn, inputs] : ops) note(name, gradient_error(fn, inputs));

  // Full VAE loss, training mode, against the numeric input and every trainable tensor.
  const auto data = small_moons(5);
  VaeModel vae(data.prep, small_vae(6));
  const auto batch = data.train.subset(std::vector<std::size_t>{0, 2, 5, 9, 11, 17});
  const Matrix noise = random_matrix(6, 3, rng);
  // vae.loss takes the numeric block as data, so the input check rebuilds
  // the same graph from its parts.
  const LossFn vae_input = [&](ad::Tape& t, const std::vector<ad::Var>& in) {
    Binder bind(t, vae.params(), false);
    const Encoded e = vae.encode(bind, in[0], batch.cat, true);
    const ad::Var zz = reparameterize(e.mu, e.log_var, t.constant(noise));
    const Decoded d = vae.decode(bind, zz);
    return ad::sum(ad::square(d.num - in[0])) + ad::kl_gaussian(e.mu, e.log_var) +
           ad::softmax_crossentropy(vae.classify(bind, zz), batch.y);
  };
  note("vae loss (input)", gradient_error(vae_input, {batch.num}));

  {
    ad::Tape tape;
    Binder bind(tape, vae.params(), true);
    const auto l = vae.loss(bind, batch.num, batch.cat, batch.y, noise, true);
    tape.backward(l.total);
    const auto grads = bind.gradients();
    const auto idx = vae.params().trainable_indices();
    auto loss_at = [&] {
      ad::Tape t;
      Binder b(t, vae.params(), false);
      return vae.loss(b, batch.num, batch.cat, batch.y, noise, true).parts.total;
    };
    const double h = 1e-5;
    for (std::size_t p = 0; p < idx.size(); ++p) {
      Matrix& w = vae.params().value(idx[p]);
      const Eigen::Index n = w.size();
      const Eigen::Index stride = std::max<Eigen::Index>(1, n / 6);
      std::vector<double> an, nu;
      for (Eigen::Index i = 0; i < n; i += stride) {
        const double orig = w.data()[i];
        w.data()[i] = orig + h;
        const double up = loss_at();
        w.data()[i] = orig - h;
        const double down = loss_at();
        w.data()[i] = orig;
        an.push_back(grads[p].data()[i]);
        nu.push_back((up - down) / (2.0 * h));
      }
      const Eigen::Map<const Matrix> ma(an.data(), static_cast<Eigen::Index>(an.size()), 1);
      const Eigen::Map<const Matrix> mn(nu.data(), static_cast<Eigen::Index>(nu.size()), 1);
      note("vae loss (" + vae.params().name(idx[p]) + ")", relative_error(ma, mn));
    }
  }

  // Attack objectives on a random target and the same VAE.
  const TargetModel model = TargetModel::mlp({data.prep.numeric_dim(), data.prep.cardinalities()}, 2, {{16}, false}, 8);
  const AttackContext ctx{&model, &vae, &data.prep};
  for (const auto kind : {AttackKind::LatentCw, AttackKind::LatentCwL0, AttackKind::LatentCwL1, AttackKind::DeltaZ}) {
    AttackConfig cfg = AttackConfig::defaults(kind);
    cfg.kappa = 4.0;
    cfg.lambda = 1.3;
    cfg.sparsity_weight = 0.4;
    cfg.sigmoid_steepness = 3.0;
    for (std::size_t i = 0; i < 3; ++i) {
      const EncodedRow x = data.test.row(i);
      const Matrix z = vae.encode_mean(x.num.transpose(), cat_row(x));
      const Matrix xf = ctx.flat(x);
      const int y = data.test.y[i];
      const LossFn fn = [&](ad::Tape& tape, const std::vector<ad::Var>& v) {
        return latent_attack_loss(ctx, tape, z, v[0], xf, y, cfg);
      };
      note("attack loss (" + to_string(kind) + ")", gradient_error(fn, {random_matrix(1, 3, rng, -0.3, 0.3)}));
    }
  }
  return {worst < 1e-4, fmt::format("worst relative error {:.2e} ({}), {} ops plus vae and attack losses", worst,
                                    worst_name, ops.size())};
}

// ---- 2

Verdict loss_decomposition() {
  const auto data = small_moons(11);
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> rows_dist(4, 32);
  std::uniform_real_distribution<double> weight(0.0, 2.0);
  double worst = 0.0;
  bool ablation_exact = true;
  int batches = 0;
  for (int m = 0; m < 10; ++m) {
    for (int k = 0; k < 10; ++k, ++batches) {
      auto cfg = small_vae(100 + static_cast<std::uint64_t>(m));
      cfg.kl_weight = weight(rng);
      cfg.cls_weight = k % 2 == 0 ? weight(rng) : 0.0;
      const VaeModel vae(data.prep, cfg);
      std::vector<std::size_t> idx(static_cast<std::size_t>(rows_dist(rng)));
      std::uniform_int_distribution<std::size_t> pick(0, data.train.size() - 1);
      for (auto& i : idx) i = pick(rng);
      const auto batch = data.train.subset(idx);
      const Matrix noise = random_matrix(static_cast<Eigen::Index>(idx.size()), cfg.latent_dim, rng, -2, 2);
      ad::Tape tape;
      Binder bind(tape, vae.params(), true);
      const auto l = vae.loss(bind, batch.num, batch.cat, batch.y, noise, true);
      const auto& p = l.parts;
      const double recomposed = p.recon_num + p.recon_cat + cfg.kl_weight * p.kl + cfg.cls_weight * p.cls;
      worst = std::max({worst, std::abs(p.total - recomposed), std::abs(l.total.scalar() - p.total)});
      if (cfg.cls_weight == 0.0) {
        ablation_exact &= p.total == p.recon_num + p.recon_cat + cfg.kl_weight * p.kl;
        tape.backward(l.total);
        const auto grads = bind.gradients();
        const auto tidx = vae.params().trainable_indices();
        for (std::size_t g = 0; g < tidx.size(); ++g) {
          if (vae.params().name(tidx[g]).rfind("vae.cls.", 0) == 0) ablation_exact &= grads[g].isZero(0.0);
        }
      }
    }
  }
  return {worst <= 1e-10 && ablation_exact,
          fmt::format("{} batches, worst |total - weighted parts| {:.2e}; alpha = 0 drops the term exactly: {}", batches,
                      worst, ablation_exact ? "yes" : "no")};
}

// ---- 3

double monte_carlo_quantile(int k, std::size_t draws, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> s(draws);
  for (auto& v : s) {
    double acc = 0.0;
    for (int i = 0; i < k; ++i) {
      const double x = g(rng);
      acc += x * x;
    }
    v = acc;
  }
  const auto q = static_cast<std::size_t>(0.95 * static_cast<double>(draws));
  std::nth_element(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(q), s.end());
  return s[q];
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw IoError("not a number: '" + s + "'");
  return v;
}

std::vector<std::vector<std::string>> read_csv_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  return read_csv_records(in);
}

Verdict metric_identities(const std::vector<fs::path>& report_dirs) {
  std::size_t rows = 0;
  bool idsr_ok = true;
  for (const auto& dir : report_dirs) {
    const auto recs = read_csv_file(dir / "imperceptibility.csv");
    const auto& h = recs.at(0);
    const auto col = [&](const char* name) {
      return static_cast<std::size_t>(std::find(h.begin(), h.end(), name) - h.begin());
    };
    const auto asr = col("ASR"), orr = col("O_r"), idsr = col("IDSR"), status = col("status");
    for (std::size_t r = 1; r < recs.size(); ++r) {
      if (recs[r].at(status) != "ok") continue;
      ++rows;
      idsr_ok &= parse_double(recs[r].at(asr)) * (1.0 - parse_double(recs[r].at(orr))) == parse_double(recs[r].at(idsr));
    }
  }

  std::mt19937_64 rng(31);
  const Matrix latents = random_matrix(200, 5, rng, -2, 2);
  const auto stats = LatentStats::fit(latents);
  const double md_mean = mahalanobis(stats.mean.transpose(), stats);

  LatentStats id;
  id.mean = random_matrix(1, 6, rng);
  id.covariance = Matrix::Identity(6, 6);
  id.cholesky = Matrix::Identity(6, 6);
  double id_err = 0.0;
  for (int i = 0; i < 50; ++i) {
    const Vector z = random_matrix(6, 1, rng, -3, 3);
    id_err = std::max(id_err, std::abs(mahalanobis(z, id) - (z - id.mean.transpose()).norm()));
  }

  const double q8 = chi2_quantile(0.95, 8), q16 = chi2_quantile(0.95, 16);
  const double mc8 = monte_carlo_quantile(8, 10'000'000, 77 + 8);
  const double mc16 = monte_carlo_quantile(16, 10'000'000, 77 + 16);
  const bool chi_ok = std::abs(q8 - mc8) < 1e-2 && std::abs(q16 - mc16) < 1e-2;
  return {rows > 0 && idsr_ok && md_mean == 0.0 && id_err <= 1e-12 && chi_ok,
          fmt::format("IDSR identity {} over {} report rows; MD(mean) = {}; identity-cov error {:.1e}; "
                      "chi2(8) {:.4f} vs MC {:.4f} (|d| {:.4f}), chi2(16) {:.4f} vs MC {:.4f} (|d| {:.4f}), tol 1e-2",
                      idsr_ok ? "exact" : "BROKEN", rows, md_mean, id_err, q8, mc8, std::abs(q8 - mc8), q16, mc16,
                      std::abs(q16 - mc16))};
}

// ---- 4

Verdict adult_cells(const fs::path& work) {
  const std::string table_cell = fmt::format("{:.1f}", 51.0 * (1.0 - 0.165));
  LatentStats s;
  s.mean = RowVector::Zero(2);
  s.covariance = Matrix::Identity(2, 2);
  s.cholesky = Matrix::Identity(2, 2);
  std::string lines;
  for (int i = 0; i < 500; ++i) {
    AttackOutcome o;
    o.index = static_cast<std::size_t>(i);
    o.true_label = 0;
    o.original_prediction = 0;
    o.adversarial_prediction = i < 255 ? 1 : 0;
    o.success = o.adversarial_prediction != o.original_prediction;
    o.latent = Vector::Constant(2, i < 42 ? 10.0 : 0.1);
    lines += o.to_json().dump() + "\n";
  }
  const auto path = work / "adult_synthetic.jsonl";
  cli::write_text(path, lines);
  const auto outcomes = cli::read_outcomes(path);
  ReportOptions opts;
  opts.outlier_base = OutlierBase::Successful;
  const auto r = campaign_report(outcomes, s, opts);
  const auto asr = fmt::format("{:.1f}", 100.0 * r.asr);
  const auto orr = fmt::format("{:.1f}", 100.0 * r.outlier_rate);
  const auto idsr = fmt::format("{:.1f}", 100.0 * r.idsr());
  return {table_cell == "42.6" && asr == "51.0" && orr == "16.5" && idsr == "42.6",
          fmt::format("51.0 x (1 - 0.165) = {}; report from {} outcomes: ASR {} O_r {} IDSR {}", table_cell,
                      outcomes.size(), asr, orr, idsr)};
}

// ---- pipeline helpers

double run_pipeline(const cli::RunConfig& cfg, int threads) {
  const auto t0 = std::chrono::steady_clock::now();
  const cli::Runtime rt{threads};
  cli::cmd_preprocess(cfg, rt);
  cli::cmd_train_target(cfg, rt);
  cli::cmd_train_vae(cfg, rt);
  cli::cmd_attack(cfg, rt);
  cli::cmd_report(cfg, rt);
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

const nlohmann::json* campaign(const nlohmann::json& report, const std::string& target, const std::string& kind) {
  for (const auto& c : report.at("campaigns")) {
    if (c.at("target") == target && c.at("kind") == kind && c.at("status") == "ok") return &c.at("report");
  }
  return nullptr;
}

// ---- 5

Verdict desk_end_to_end(const cli::RunConfig& cfg, double seconds) {
  const auto report = cli::read_json(cfg.out_dir() / "report" / "report.json");
  const auto& target = cfg.targets.front().name;
  const auto& recon = report.at("recon").at(target);
  const double r2 = recon.at("r2");
  const double cat = recon.at("cat_accuracy").is_null() ? 0.0 : recon.at("cat_accuracy").get<double>();
  const auto* cw = campaign(report, target, "latent_cw");
  const auto* fg = campaign(report, target, "fgsm");
  if (cw == nullptr || fg == nullptr) return {false, "config lacks latent_cw or fgsm outcomes"};
  const double asr = cw->at("ASR"), or_cw = cw->at("O_r"), or_fg = fg->at("O_r");
  const double eps = cfg.attack("fgsm").config.epsilon;
  const bool recon_ok = r2 >= 0.9 && cat >= 0.95;
  const bool cw_ok = asr >= 0.6 && or_cw <= 0.15;
  const bool ratio_ok = or_fg > or_cw && or_fg >= 2.0 * or_cw;
  const bool time_ok = seconds < 300.0;
  return {recon_ok && cw_ok && ratio_ok && time_ok && eps == 0.5,
          fmt::format("R2 {:.4f} cat acc {:.4f} [{}]; latent_cw ASR {:.3f} O_r {:.3f} [{}]; fgsm(eps {}) O_r {:.3f} "
                      "vs 2 x {:.3f} [{}]; pipeline {:.0f}s single-threaded [{}]",
                      r2, cat, recon_ok ? "ok" : "miss", asr, or_cw, cw_ok ? "ok" : "miss", eps, or_fg, or_cw,
                      ratio_ok ? "ok" : "miss", seconds, time_ok ? "ok" : "miss")};
}

// ---- 6

Verdict sparsity_trend(const cli::RunConfig& cfg) {
  const auto data = cli::load_prepared(cfg);
  const auto vae = cli::load_vae(cfg);
  const auto model = cli::load_target(cfg, cfg.targets.front());
  const AttackContext ctx{&model, &vae, &data.prep};
  const auto indices = cli::select_samples(data.test.y, data.prep.class_count(), cfg.evaluation.samples,
                                           cfg.evaluation.class_balanced, cfg.sample_seed());
  const auto rows = data.test.subset(indices);
  const std::vector<double> alphas{0.0, 0.1, 0.5, 1.0};
  auto sweep = [&](AttackKind kind) {
    std::vector<CampaignReport> out;
    for (double a : alphas) {
      AttackConfig c = AttackConfig::defaults(kind);
      c.sparsity_weight = a;
      out.push_back(campaign_report(run_campaign(ctx, rows, c, 1), *vae.latent_stats, cfg.evaluation.report));
    }
    return out;
  };
  const auto l1 = sweep(AttackKind::LatentCwL1);
  const auto l0 = sweep(AttackKind::LatentCwL0);

  int inversions = 0;
  bool small = true;
  bool asr_ok = true;
  for (std::size_t i = 1; i < l1.size(); ++i) {
    const double prev = l1[i - 1].sparsity.mean_l1, cur = l1[i].sparsity.mean_l1;
    if (cur > prev) {
      ++inversions;
      small &= cur <= 1.05 * prev;
    }
    asr_ok &= l1[i].asr <= l1[i - 1].asr;
  }
  const bool l1_ok = inversions == 0 || (inversions == 1 && small);
  double lo = l0.front().sparsity.mean_l0, hi = lo, mean = 0.0;
  for (const auto& r : l0) {
    lo = std::min(lo, r.sparsity.mean_l0);
    hi = std::max(hi, r.sparsity.mean_l0);
    mean += r.sparsity.mean_l0 / static_cast<double>(l0.size());
  }
  const double variation = mean > 0.0 ? (hi - lo) / mean : 0.0;
  std::string l1s, asrs, l0s;
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    l1s += fmt::format("{}{:.4f}", i ? " " : "", l1[i].sparsity.mean_l1);
    asrs += fmt::format("{}{:.3f}", i ? " " : "", l1[i].asr);
    l0s += fmt::format("{}{:.3f}", i ? " " : "", l0[i].sparsity.mean_l0);
  }
  return {l1_ok && asr_ok && variation < 0.15,
          fmt::format("alpha 0/0.1/0.5/1: l1 [{}] ({} inversion(s)); ASR [{}]; sigmoid-l0 mean l0 [{}] variation {:.3f}",
                      l1s, inversions, asrs, l0s, variation)};
}

// ---- 7

bool same_row(const EncodedRow& a, const EncodedRow& b) { return a.num == b.num && a.cat == b.cat; }

Verdict degenerate_cases(const cli::RunConfig& cfg) {
  const auto data = cli::load_prepared(cfg);
  const auto vae = cli::load_vae(cfg);
  const auto model = cli::load_target(cfg, cfg.targets.front());
  const AttackContext ctx{&model, &vae, &data.prep};
  const std::size_t n = std::min<std::size_t>(100, data.test.size());
  int eps_bad = 0, lambda_bad = 0, pgd_bad = 0, greedy_bad = 0, greedy_runs = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const EncodedRow x = data.test.row(i);
    const int y = data.test.y[i];
    IndexMatrix cat;
    Matrix num;
    vae.decode_discrete(vae.encode_mean(x.num.transpose(), cat_row(x)), cat, num);
    EncodedRow recon{num.row(0).transpose(), std::vector<int>(static_cast<std::size_t>(cat.cols()))};
    for (Eigen::Index j = 0; j < cat.cols(); ++j) recon.cat[static_cast<std::size_t>(j)] = cat(0, j);

    for (const auto kind : {AttackKind::Fgsm, AttackKind::Pgd, AttackKind::PgdVae}) {
      AttackConfig c = AttackConfig::defaults(kind);
      c.epsilon = 0.0;
      const auto o = run_attack(ctx, x, y, c);
      eps_bad += !(kind == AttackKind::PgdVae ? o.delta.isZero(0.0) && same_row(o.adversarial, recon)
                                              : same_row(o.adversarial, x));
    }
    AttackConfig c0 = AttackConfig::defaults(AttackKind::LatentCw);
    c0.lambda = 0.0;
    lambda_bad += !same_row(latent_cw(ctx, x, y, c0).adversarial, recon);

    AttackConfig f = AttackConfig::defaults(AttackKind::Fgsm);
    AttackConfig p = AttackConfig::defaults(AttackKind::Pgd);
    p.iterations = 1;
    const auto of = fgsm(ctx, x, y, f);
    const auto op = pgd(ctx, x, y, p);
    pgd_bad += !(of.continuous == op.continuous && same_row(of.adversarial, op.adversarial));

    const auto cw = latent_cw(ctx, x, y, AttackConfig::defaults(AttackKind::LatentCw));
    if (cw.success) {
      ++greedy_runs;
      greedy_bad += !greedy_sparsify(ctx, cw, AttackConfig::defaults(AttackKind::LatentCwGreedy)).success;
    }
  }

  // A three-class problem for the DeltaZ guard.
  std::vector<Column> cols{{"a", ColumnKind::Numeric, {}}, {"b", ColumnKind::Numeric, {}}};
  RawDataset raw;
  raw.schema = TabularSchema(cols, {"y", {"p", "q", "r"}});
  raw.split = SplitTag::Train;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int i = 0; i < 30; ++i) raw.rows.push_back({{g(rng), g(rng)}, {}, std::string(1, "pqr"[i % 3])});
  const auto prep3 = Preprocessor::fit(raw);
  const auto enc3 = prep3.transform(raw);
  VaeConfig vc;
  vc.encode_widths = {8};
  vc.latent_dim = 2;
  const VaeModel vae3(prep3, vc);
  const auto model3 = TargetModel::mlp({2, {}}, 3, {{8}, false}, 1);
  const AttackContext ctx3{&model3, &vae3, &prep3};
  bool rejected = false;
  try {
    (void)deltaz(ctx3, enc3.row(0), enc3.y[0], AttackConfig::defaults(AttackKind::DeltaZ));
  } catch (const UnsupportedTaskError&) {
    rejected = true;
  }
  const bool ok = eps_bad == 0 && lambda_bad == 0 && pgd_bad == 0 && rejected && greedy_bad == 0 && greedy_runs > 0;
  return {ok, fmt::format("{} rows: eps=0 non-identities {}; lambda=0 non-reconstructions {}; PGD(T=1) != FGSM {}; "
                          "DeltaZ rejects 3 classes: {}; greedy broke {}/{} successes",
                          n, eps_bad, lambda_bad, pgd_bad, rejected ? "yes" : "no", greedy_bad, greedy_runs)};
}

// ---- 8

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open '" + p.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Verdict reproducibility(const cli::RunConfig& a, const cli::RunConfig& b) {
  const bool manifest = slurp(a.out_dir() / "manifest.json") == slurp(b.out_dir() / "manifest.json");
  std::vector<std::string> differing;
  std::size_t compared = 0;
  for (const auto& entry : fs::directory_iterator(a.out_dir() / "report")) {
    if (entry.path().extension() != ".csv") continue;
    ++compared;
    const auto other = b.out_dir() / "report" / entry.path().filename();
    if (!fs::exists(other) || read_csv_file(entry.path()) != read_csv_file(other)) {
      differing.push_back(entry.path().filename().string());
    }
  }
  std::string diff;
  for (const auto& d : differing) diff += " " + d;
  return {manifest && differing.empty() && compared > 0,
          fmt::format("manifest byte-identical: {}; {} report CSVs compared, differing:{}", manifest ? "yes" : "no",
                      compared, diff.empty() ? " none" : diff)};
}

template <class F>
Verdict guarded(F&& f) {
  try {
    return f();
  } catch (const std::exception& e) {
    return {false, std::string("error: ") + e.what()};
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::string config = TABATTACK_DESK_CONFIG;
  std::string work = "acceptance_work";
  bool strict = false;
  app.add_option("--config", config, "desk-scale run config");
  app.add_option("--work", work, "scratch directory for pipeline runs");
  app.add_flag("--strict", strict, "exit 1 when any criterion fails");
  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::warn);

  const fs::path root = fs::absolute(work);
  std::error_code ec;
  fs::remove_all(root, ec);
  fs::create_directories(root);

  std::vector<std::pair<std::string, Verdict>> results(8);
  results[0] = {"gradient correctness", guarded(gradients)};
  results[1] = {"loss decomposition", guarded(loss_decomposition)};
  results[3] = {"reference-table consistency", guarded([&] { return adult_cells(root); })};

  cli::RunConfig run_a, run_b;
  double seconds = 0.0;
  bool pipeline_ok = false;
  std::string pipeline_error;
  try {
    run_a = cli::RunConfig::load(config);
    run_a.evaluation.report.md_rule = MdRule::Distance;
    run_a.validate();
    run_b = run_a;
    run_a.out = (root / "run_a").string();
    run_b.out = (root / "run_b").string();
    seconds = run_pipeline(run_a, 1);
    run_pipeline(run_b, 4);
    pipeline_ok = true;
  } catch (const std::exception& e) {
    pipeline_error = std::string("pipeline error: ") + e.what();
  }
  auto after_pipeline = [&](auto&& f) {
    return pipeline_ok ? guarded(f) : Verdict{false, pipeline_error};
  };
  results[2] = {"metric identities", after_pipeline([&] {
                  return metric_identities({run_a.out_dir() / "report", run_b.out_dir() / "report"});
                })};
  results[4] = {"desk-scale end-to-end", after_pipeline([&] { return desk_end_to_end(run_a, seconds); })};
  results[5] = {"sparsity directionality", after_pipeline([&] { return sparsity_trend(run_a); })};
  results[6] = {"degenerate cases", after_pipeline([&] { return degenerate_cases(run_a); })};
  results[7] = {"reproducibility", after_pipeline([&] { return reproducibility(run_a, run_b); })};

  int passed = 0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& [name, v] = results[i];
    passed += v.pass;
    fmt::print("{} {} {}: {}\n", v.pass ? "PASS" : "FAIL", i + 1, name, v.detail);
  }
  fmt::print("{}/{} criteria passed\n", passed, results.size());
  return strict && passed != static_cast<int>(results.size()) ? 1 : 0;
}
