#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "support/fixtures.hpp"
#include "support/gradcheck.hpp"
#include "tabattack/attacks/attack.hpp"
#include "tabattack/metrics/metrics.hpp"

using namespace tabattack;
using tabattack::testing::MoonsPipeline;

namespace {

AttackContext moons_ctx() {
  const auto& p = MoonsPipeline::get();
  return {&p.model, &p.vae, &p.data.prep};
}

bool same_row(const EncodedRow& a, const EncodedRow& b) { return a.cat == b.cat && a.num == b.num; }

EncodedRow reconstruction(const VaeModel& vae, const EncodedRow& x) {
  IndexMatrix cat(1, static_cast<Eigen::Index>(x.cat.size()));
  for (std::size_t j = 0; j < x.cat.size(); ++j) cat(0, static_cast<Eigen::Index>(j)) = x.cat[j];
  IndexMatrix rc;
  Matrix rn;
  vae.decode_discrete(vae.encode_mean(x.num.transpose(), cat), rc, rn);
  return {rn.row(0).transpose(), std::vector<int>(rc.data(), rc.data() + rc.size())};
}

double ce(const TargetModel& m, const Matrix& flat, int y) {
  const Matrix logits = m.logits(flat);
  const double mx = logits.maxCoeff();
  return -(logits(0, y) - mx - std::log((logits.array() - mx).exp().sum()));
}

// One numeric column, logistic target with f_1 - f_0 = 2 w x.
struct Logistic {
  Preprocessor prep;
  TargetModel model;
};

Logistic logistic(double w) {
  Logistic l{Preprocessor::fit(testing::numeric_dataset({"x"}, {{-2.0}, {-1.0}, {1.0}, {2.0}}, {0, 0, 1, 1})),
             TargetModel::mlp({1, {}}, 2, MlpConfig{{}, false}, 1)};
  auto& ps = l.model.params();
  ps.value(ps.index_of("mlp.out.weight")) << -w, w;
  ps.value(ps.index_of("mlp.out.bias")).setZero();
  return l;
}

}  // namespace

TEST_CASE("attack config defaults, validation and json") {
  CHECK(AttackConfig::defaults(AttackKind::Pgd).iterations == 10);
  CHECK(AttackConfig::defaults(AttackKind::PgdVae).iterations == 10);
  const AttackConfig cw = AttackConfig::defaults(AttackKind::LatentCw);
  CHECK(cw.iterations == 300);
  CHECK(cw.lr == 0.1);
  CHECK(cw.lambda == 1.0);
  CHECK(cw.tau == 1e-5);
  CHECK(cw.kappa == 0.0);

  for (const auto kind : {AttackKind::Fgsm, AttackKind::Pgd, AttackKind::LatentCw, AttackKind::PgdVae,
                          AttackKind::DeltaZ, AttackKind::LatentCwL0, AttackKind::LatentCwL1,
                          AttackKind::LatentCwGreedy}) {
    CHECK(attack_kind_from_string(to_string(kind)) == kind);
  }
  CHECK_THROWS_AS(attack_kind_from_string("cw"), ConfigError);

  AttackConfig c = AttackConfig::defaults(AttackKind::LatentCwL0);
  c.sparsity_weight = 0.5;
  c.kappa = 0.25;
  c.use_adam = false;
  const AttackConfig back = AttackConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
  CHECK(back.penalty() == SparsityPenalty::L0Sigmoid);

  CHECK_THROWS_AS(AttackConfig::from_json({{"kind", "pgd"}, {"epsilon", -0.1}}), ConfigError);
  CHECK_THROWS_AS(AttackConfig::from_json({{"kind", "pgd"}, {"iterations", 0}}), ConfigError);
  CHECK_THROWS_AS(AttackConfig::from_json({{"lr", 0.0}}), ConfigError);
  CHECK_THROWS_AS(AttackConfig::from_json({{"tau", 0.0}}), ConfigError);
  CHECK_THROWS_AS(AttackConfig::from_json({{"lambda", -1.0}}), ConfigError);
  CHECK_THROWS_AS(AttackConfig::from_json({{"kappa", -1.0}}), ConfigError);
  CHECK_THROWS_AS(AttackConfig::from_json({{"epsilom", 0.1}}), ConfigError);
  CHECK(AttackConfig::from_json({{"kind", "fgsm"}}).iterations == 10);
}

TEST_CASE("epsilon zero attacks are identities") {
  const auto ctx = moons_ctx();
  const auto& test = MoonsPipeline::get().data.test;
  for (std::size_t i = 0; i < 20; ++i) {
    const EncodedRow x = test.row(i);
    for (const auto kind : {AttackKind::Fgsm, AttackKind::Pgd}) {
      AttackConfig c = AttackConfig::defaults(kind);
      c.epsilon = 0.0;
      const auto o = run_attack(ctx, x, test.y[i], c);
      CHECK(same_row(o.adversarial, x));
      CHECK_FALSE(o.success);
      CHECK(o.l0() == 0);
      CHECK(o.l1 == 0.0);
    }
    AttackConfig c = AttackConfig::defaults(AttackKind::PgdVae);
    c.epsilon = 0.0;
    const auto o = pgd_vae(ctx, x, test.y[i], c);
    CHECK(same_row(o.adversarial, reconstruction(MoonsPipeline::get().vae, x)));
    CHECK(o.delta.isZero(0.0));
  }
}

TEST_CASE("fgsm on a logistic model moves the numeric feature by +epsilon") {
  const auto l = logistic(1.5);
  const AttackContext ctx{&l.model, nullptr, &l.prep};
  AttackConfig c = AttackConfig::defaults(AttackKind::Fgsm);
  for (const double eps : {0.1, 0.5, 1.3}) {
    c.epsilon = eps;
    for (const double x : {-0.7, 0.2, 2.0}) {
      EncodedRow row{Vector::Constant(1, x), {}};
      const auto o = fgsm(ctx, row, 0, c);
      CHECK(o.adversarial.num(0) == x + eps);
      CHECK(o.continuous(0) == x + eps);
    }
  }
  // A label-1 row is pushed the other way.
  c.epsilon = 0.5;
  CHECK(fgsm(ctx, {Vector::Constant(1, 0.2), {}}, 1, c).adversarial.num(0) == 0.2 - 0.5);

  auto flat = logistic(0.0);
  const AttackContext fctx{&flat.model, nullptr, &flat.prep};
  const auto o = fgsm(fctx, {Vector::Constant(1, 0.2), {}}, 0, c);
  CHECK(o.note == "flat gradient");
  CHECK_FALSE(o.success);
  CHECK(o.adversarial.num(0) == 0.2);
}

TEST_CASE("optional numeric clip keeps fgsm inside the training z-range") {
  const auto l = logistic(1.0);
  const AttackContext ctx{&l.model, nullptr, &l.prep};
  AttackConfig c = AttackConfig::defaults(AttackKind::Fgsm);
  c.epsilon = 5.0;
  c.clip_numeric = true;
  const auto o = fgsm(ctx, {Vector::Constant(1, 0.0), {}}, 0, c);
  CHECK(o.adversarial.num(0) == doctest::Approx(l.prep.z_max()(0)).epsilon(1e-15));
}

TEST_CASE("pgd with one full step equals fgsm and stays in the ball") {
  const auto ctx = moons_ctx();
  const auto& test = MoonsPipeline::get().data.test;
  AttackConfig f = AttackConfig::defaults(AttackKind::Fgsm);
  AttackConfig p = AttackConfig::defaults(AttackKind::Pgd);
  p.iterations = 1;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const EncodedRow x = test.row(i);
    const auto a = fgsm(ctx, x, test.y[i], f);
    const auto b = pgd(ctx, x, test.y[i], p);
    REQUIRE(a.continuous == b.continuous);
    CHECK(same_row(a.adversarial, b.adversarial));
    CHECK(a.success == b.success);
  }
  p = AttackConfig::defaults(AttackKind::Pgd);
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto o = pgd(ctx, test.row(i), test.y[i], p);
    const Matrix x0 = ctx.flat(test.row(i));
    CHECK((o.continuous.transpose() - x0).cwiseAbs().maxCoeff() <= p.epsilon + 1e-12);
  }
}

TEST_CASE("pgd reaches at least the fgsm loss on a quadratic boundary") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  for (int i = 0; i < 600; ++i) {
    const double a = u(rng);
    const double b = u(rng);
    rows.push_back({a, b});
    labels.push_back(a * a + b * b < 1.5 ? 0 : 1);
  }
  auto raw = testing::numeric_dataset({"u", "v"}, rows, labels);
  const auto prep = Preprocessor::fit(raw);
  const auto enc = prep.transform(raw);
  TargetModel model = TargetModel::mlp({2, {}}, 2, MlpConfig{{16}, false}, 5);
  TrainOptions to;
  to.epochs = 60;
  to.lr = 1e-2;
  to.batch_size = 32;
  to.patience = 0;
  train_target(model, enc, enc, to);
  REQUIRE(evaluate(model, enc).accuracy > 0.9);

  const AttackContext ctx{&model, nullptr, &prep};
  const AttackConfig f = AttackConfig::defaults(AttackKind::Fgsm);
  const AttackConfig p = AttackConfig::defaults(AttackKind::Pgd);
  int dominated = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    std::mt19937_64 r(seed);
    std::normal_distribution<double> g;
    EncodedRow x{Vector(2), {}};
    x.num << g(r), g(r);
    const int y = model.predict(ctx.flat(x)).front();
    const double lf = ce(model, fgsm(ctx, x, y, f).continuous.transpose(), y);
    const double lp = ce(model, pgd(ctx, x, y, p).continuous.transpose(), y);
    dominated += lp >= lf - 1e-12;
  }
  MESSAGE("pgd >= fgsm loss on " << dominated << " / 1000 seeds");
  CHECK(dominated >= 950);
}

TEST_CASE("lambda zero latent_cw returns the reconstruction") {
  const auto ctx = moons_ctx();
  const auto& test = MoonsPipeline::get().data.test;
  AttackConfig c = AttackConfig::defaults(AttackKind::LatentCw);
  c.lambda = 0.0;
  for (std::size_t i = 0; i < 20; ++i) {
    const auto o = latent_cw(ctx, test.row(i), test.y[i], c);
    CHECK(o.delta.isZero(0.0));
    CHECK(o.iterations == 1);
    CHECK(same_row(o.adversarial, reconstruction(MoonsPipeline::get().vae, test.row(i))));
    const int recon_pred = ctx.model->predict(ctx.flat(o.adversarial)).front();
    CHECK(o.success == (recon_pred != o.original_prediction));
  }
}

TEST_CASE("latent attack outcomes are re-verified and deterministic") {
  const auto ctx = moons_ctx();
  const auto& test = MoonsPipeline::get().data.test;
  const AttackConfig c = AttackConfig::defaults(AttackKind::LatentCw);
  for (std::size_t i = 0; i < 10; ++i) {
    const auto a = latent_cw(ctx, test.row(i), test.y[i], c);
    const auto b = latent_cw(ctx, test.row(i), test.y[i], c);
    CHECK(a.to_json() == b.to_json());
    const int adv = ctx.model->predict(ctx.flat(a.adversarial)).front();
    const int orig = ctx.model->predict(ctx.flat(a.original)).front();
    CHECK(a.adversarial_prediction == adv);
    CHECK(a.success == (adv != orig));
    CHECK(a.delta_l2 == doctest::Approx(a.delta.norm()));
    CHECK(a.latent.size() == 4);
    CHECK(a.changed.size() == 4);
  }
}

TEST_CASE("latent loop stops on the convergence threshold") {
  const auto ctx = moons_ctx();
  const auto& test = MoonsPipeline::get().data.test;
  AttackConfig c = AttackConfig::defaults(AttackKind::LatentCw);
  c.use_adam = false;
  c.tau = 1e-4;
  int early = 0;
  for (std::size_t i = 0; i < 20; ++i) {
    const auto o = latent_cw(ctx, test.row(i), test.y[i], c);
    if (o.iterations >= c.iterations || o.iterations < 2) continue;
    ++early;
    AttackConfig prev = c;
    prev.iterations = o.iterations - 1;
    const auto before = latent_cw(ctx, test.row(i), test.y[i], prev);
    CHECK((o.delta - before.delta).norm() < c.tau);
  }
  CHECK(early > 0);
}

TEST_CASE("zero sparsity weight reproduces latent_cw bit for bit") {
  const auto ctx = moons_ctx();
  const auto& test = MoonsPipeline::get().data.test;
  for (const auto kind : {AttackKind::LatentCwL0, AttackKind::LatentCwL1}) {
    AttackConfig s = AttackConfig::defaults(kind);
    s.sparsity_weight = 0.0;
    const AttackConfig base = AttackConfig::defaults(AttackKind::LatentCw);
    for (std::size_t i = 0; i < 5; ++i) {
      auto a = latent_cw(ctx, test.row(i), test.y[i], base).to_json();
      auto b = latent_cw(ctx, test.row(i), test.y[i], s).to_json();
      a.erase("kind");
      b.erase("kind");
      CHECK(a == b);
    }
  }
}

TEST_CASE("attack loss gradients pass finite differences") {
  const auto ctx = moons_ctx();
  const auto& p = MoonsPipeline::get();
  std::mt19937_64 rng(4);
  for (const auto kind : {AttackKind::LatentCw, AttackKind::LatentCwL0, AttackKind::LatentCwL1, AttackKind::DeltaZ}) {
    AttackConfig c = AttackConfig::defaults(kind);
    c.kappa = 4.0;
    c.lambda = 1.3;
    c.sparsity_weight = 0.4;
    c.sigmoid_steepness = 3.0;
    for (std::size_t i = 0; i < 3; ++i) {
      const EncodedRow x = p.data.test.row(i);
      const Matrix z = p.vae.encode_mean(x.num.transpose(), [&] {
        IndexMatrix m(1, 2);
        m << x.cat[0], x.cat[1];
        return m;
      }());
      const Matrix xf = ctx.flat(x);
      const int y = p.data.test.y[i];
      const testing::LossFn fn = [&](ad::Tape& tape, const std::vector<ad::Var>& v) {
        return latent_attack_loss(ctx, tape, z, v[0], xf, y, c);
      };
      const Matrix param = testing::random_matrix(1, 4, rng, -0.3, 0.3);
      CHECK(testing::gradient_relative_error(fn, {param}) < 1e-4);
    }
  }
}

TEST_CASE("larger lambda buys larger latent perturbations") {
  const auto ctx = moons_ctx();
  const auto& test = MoonsPipeline::get().data.test;
  std::vector<double> mean_l2;
  for (const double lambda : {0.5, 1.0, 2.0, 4.0}) {
    AttackConfig c = AttackConfig::defaults(AttackKind::LatentCw);
    c.lambda = lambda;
    double s = 0.0;
    for (std::size_t i = 0; i < 40; ++i) s += latent_cw(ctx, test.row(i), test.y[i], c).delta_l2;
    mean_l2.push_back(s / 40.0);
  }
  for (std::size_t i = 1; i < mean_l2.size(); ++i) CHECK(mean_l2[i - 1] <= mean_l2[i]);
}

TEST_CASE("pgd_vae stays in the latent ball") {
  const auto ctx = moons_ctx();
  const auto& test = MoonsPipeline::get().data.test;
  AttackConfig c = AttackConfig::defaults(AttackKind::PgdVae);
  c.epsilon = 0.3;
  for (std::size_t i = 0; i < 30; ++i) {
    const auto o = pgd_vae(ctx, test.row(i), test.y[i], c);
    CHECK(o.delta.cwiseAbs().maxCoeff() <= c.epsilon + 1e-12);
  }
}

TEST_CASE("two-moon latent attack flips correctly classified points on-manifold") {
  const auto& p = MoonsPipeline::get();
  InputSpec spec{p.data.prep.numeric_dim(), p.data.prep.cardinalities()};
  TargetModel linear = TargetModel::mlp(spec, 2, MlpConfig{{}, false}, 8);
  TrainOptions to;
  to.epochs = 60;
  to.lr = 1e-2;
  to.batch_size = 32;
  to.patience = 0;
  train_target(linear, p.data.train, p.data.val, to);
  const AttackContext ctx{&linear, &p.vae, &p.data.prep};

  const auto preds = linear.predict(p.data.test);
  std::vector<std::size_t> correct;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] == p.data.test.y[i]) correct.push_back(i);
  }
  const EncodedDataset sample = p.data.test.subset(correct);
  // A linear target has small logit margins; lambda = 1 stalls before the boundary.
  AttackConfig cc = AttackConfig::defaults(AttackKind::LatentCw);
  cc.lambda = 10.0;
  const auto cw = run_campaign(ctx, sample, cc, 4);
  const auto rep = campaign_report(cw, *p.vae.latent_stats);
  std::vector<double> md = rep.md;
  std::nth_element(md.begin(), md.begin() + static_cast<long>(md.size() / 2), md.end());
  MESSAGE("linear target: ASR " << rep.asr << " median MD " << md[md.size() / 2] << " threshold " << rep.threshold);
  CHECK(rep.asr >= 0.8);
  CHECK(md[md.size() / 2] < rep.threshold);

  // Matched budget: the L-inf ball that admits every latent_cw solution.
  AttackConfig pv = AttackConfig::defaults(AttackKind::PgdVae);
  double budget = 0.0;
  for (const auto& o : cw) budget = std::max(budget, o.delta.cwiseAbs().maxCoeff());
  pv.epsilon = budget;
  const auto vr = campaign_report(run_campaign(ctx, sample, pv, 4), *p.vae.latent_stats);
  MESSAGE("pgd_vae at matched budget " << budget << ": ASR " << vr.asr);
  CHECK(std::abs(vr.asr - rep.asr) <= 0.10);
}

TEST_CASE("deltaz finds a sign flip on a one-dimensional latent") {
  const Preprocessor prep =
      Preprocessor::fit(testing::numeric_dataset({"x"}, {{-2.0}, {-1.0}, {1.0}, {2.0}}, {0, 0, 1, 1}));
  VaeConfig vc;
  vc.encode_widths = {};
  vc.latent_dim = 1;
  vc.numeric_width = 2;
  VaeModel vae(prep, vc);
  auto& ps = vae.params();
  for (std::size_t i = 0; i < ps.size(); ++i) ps.value(i).setZero();
  ps.value(ps.index_of("vae.num_in.weight")) << 1.0, -1.0;
  ps.value(ps.index_of("vae.mu.weight")) << 1.0, -1.0;
  ps.value(ps.index_of("vae.num_head.weight")) << 1.0;
  const auto l = logistic(1.0);  // class 1 iff the decoded value is positive
  const AttackContext ctx{&l.model, &vae, &prep};

  AttackConfig c = AttackConfig::defaults(AttackKind::DeltaZ);
  c.kappa = 0.5;
  c.lambda = 4.0;
  for (const double z : {0.4, 1.0, 1.7}) {
    const EncodedRow x{Vector::Constant(1, z), {}};
    REQUIRE(vae.encode_mean(x.num.transpose(), IndexMatrix(1, 0))(0, 0) == doctest::Approx(z));
    const auto o = deltaz(ctx, x, 1, c);
    const double dz = o.delta(0) / z;
    CHECK(dz < -1.0);
    CHECK(o.success);
    CHECK(o.adversarial_prediction == 0);
  }

  AttackConfig zero = c;
  zero.lambda = 0.0;
  const auto o = deltaz(ctx, {Vector::Constant(1, 1.0), {}}, 1, zero);
  CHECK(o.delta.isZero(0.0));
}

TEST_CASE("deltaz rejects multiclass targets") {
  const auto l = logistic(1.0);
  const TargetModel three = TargetModel::mlp({1, {}}, 3, MlpConfig{{}, false}, 1);
  const AttackContext ctx{&three, nullptr, &l.prep};
  CHECK_THROWS_AS(deltaz(ctx, {Vector::Constant(1, 0.0), {}}, 0, AttackConfig::defaults(AttackKind::DeltaZ)),
                  UnsupportedTaskError);
  CHECK_THROWS_AS(latent_cw(ctx, {Vector::Constant(1, 0.0), {}}, 0, AttackConfig::defaults(AttackKind::LatentCw)),
                  ConfigError);
}

TEST_CASE("greedy sparsify drops features the model ignores") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  for (int i = 0; i < 50; ++i) {
    rows.push_back({g(rng), g(rng), g(rng), g(rng)});
    labels.push_back(i % 2);
  }
  const Preprocessor prep = Preprocessor::fit(testing::numeric_dataset({"f0", "f1", "f2", "f3"}, rows, labels));
  TargetModel model = TargetModel::mlp({4, {}}, 2, MlpConfig{{}, false}, 1);
  auto& ps = model.params();
  ps.value(ps.index_of("mlp.out.weight")).setZero();
  ps.value(ps.index_of("mlp.out.weight")).row(0) << -1.0, 1.0;
  ps.value(ps.index_of("mlp.out.bias")).setZero();
  const AttackContext ctx{&model, nullptr, &prep};
  const AttackConfig cfg = AttackConfig::defaults(AttackKind::LatentCwGreedy);

  EncodedRow x{Vector(4), {}};
  x.num << 1.0, 0.3, -0.2, 0.5;
  EncodedRow adv = x;
  adv.num(0) = -1.0;
  adv.num(3) = 2.0;
  const auto before = make_outcome(ctx, x, 1, adv, cfg);
  REQUIRE(before.success);
  REQUIRE(before.l0() == 2);
  CHECK(before.changed == std::vector<bool>{true, false, false, true});

  const auto after = greedy_sparsify(ctx, before, cfg);
  CHECK(after.success);
  CHECK(after.l0() == 1);
  CHECK(after.changed == std::vector<bool>{true, false, false, false});
  CHECK(after.adversarial.num(3) == 0.5);

  EncodedRow single = x;
  single.num(0) = -1.0;
  const auto one = make_outcome(ctx, x, 1, single, cfg);
  const auto same = greedy_sparsify(ctx, one, cfg);
  CHECK(same.to_json() == one.to_json());

  const auto failed = make_outcome(ctx, x, 1, x, cfg);
  CHECK(greedy_sparsify(ctx, failed, cfg).to_json() == failed.to_json());
}

TEST_CASE("greedy sparsify never turns a success into a failure") {
  const auto ctx = moons_ctx();
  const auto& test = MoonsPipeline::get().data.test;
  AttackConfig c = AttackConfig::defaults(AttackKind::LatentCwGreedy);
  c.lambda = 4.0;
  int successes = 0;
  for (std::size_t i = 0; i < 40; ++i) {
    const auto base = latent_cw(ctx, test.row(i), test.y[i], c);
    const auto g = greedy_sparsify(ctx, base, c);
    if (base.success) {
      ++successes;
      CHECK(g.success);
      CHECK(g.l0() <= base.l0());
      CHECK(g.adversarial_prediction != g.true_label);
    }
    CHECK(run_attack(ctx, test.row(i), test.y[i], c).to_json() == g.to_json());
  }
  CHECK(successes > 0);
}

TEST_CASE("changed mask uses the raw-unit tolerance") {
  const auto l = logistic(1.0);
  const AttackContext ctx{&l.model, nullptr, &l.prep};
  AttackConfig c = AttackConfig::defaults(AttackKind::Fgsm);
  const double sd = l.prep.stddev()(0);
  const EncodedRow x{Vector::Constant(1, 0.1), {}};
  CHECK_FALSE(make_outcome(ctx, x, 0, {Vector::Constant(1, 0.1 + 0.5e-3 / sd), {}}, c).changed[0]);
  CHECK(make_outcome(ctx, x, 0, {Vector::Constant(1, 0.1 + 2e-3 / sd), {}}, c).changed[0]);
  c.numeric_change_tol = 1e-2;
  CHECK_FALSE(make_outcome(ctx, x, 0, {Vector::Constant(1, 0.1 + 2e-3 / sd), {}}, c).changed[0]);
}

TEST_CASE("campaign results keep row order for any thread count and round-trip through json") {
  const auto ctx = moons_ctx();
  const EncodedDataset sample = MoonsPipeline::get().data.test.subset(std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7});
  for (const auto kind : {AttackKind::Pgd, AttackKind::LatentCw, AttackKind::DeltaZ}) {
    const AttackConfig c = AttackConfig::defaults(kind);
    const auto one = run_campaign(ctx, sample, c, 1);
    const auto many = run_campaign(ctx, sample, c, 4);
    REQUIRE(one.size() == sample.size());
    for (std::size_t i = 0; i < one.size(); ++i) {
      CHECK(one[i].index == i);
      CHECK(one[i].to_json() == many[i].to_json());
      CHECK(AttackOutcome::from_json(nlohmann::json::parse(one[i].to_json().dump())).to_json() == one[i].to_json());
    }
  }
}
