#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "support/gradcheck.hpp"
#include "tabattack/data/split.hpp"
#include "tabattack/data/synthetic.hpp"
#include "tabattack/error.hpp"
#include "tabattack/vae/vae.hpp"

using namespace tabattack;

namespace {

struct Prepared {
  Preprocessor prep;
  EncodedDataset train, val, test;
};

Prepared prepare(const RawDataset& raw, std::uint64_t seed) {
  const auto parts = apply_split(raw, stratified_split(raw.labels(), raw.schema.class_count(), {}, seed));
  Prepared p;
  p.prep = Preprocessor::fit(parts.train);
  p.train = p.prep.transform(parts.train);
  p.val = p.prep.transform(parts.val);
  p.test = p.prep.transform(parts.test);
  return p;
}

VaeConfig small_config(std::uint64_t seed) {
  VaeConfig c;
  c.encode_widths = {16, 8};
  c.latent_dim = 2;
  c.epochs = 20;
  c.kl_weight = 1e-2;
  c.batch_size = 64;
  c.seed = seed;
  return c;
}

double softmax_ce_row(const Matrix& logits, Eigen::Index r, int label) {
  double mx = logits.row(r).maxCoeff();
  double s = 0.0;
  for (Eigen::Index c = 0; c < logits.cols(); ++c) s += std::exp(logits(r, c) - mx);
  return -(logits(r, label) - mx - std::log(s));
}

double accuracy(const Matrix& logits, const std::vector<int>& y) {
  int hit = 0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    Eigen::Index best = 0;
    logits.row(r).maxCoeff(&best);
    hit += static_cast<int>(best) == y[static_cast<std::size_t>(r)];
  }
  return static_cast<double>(hit) / static_cast<double>(logits.rows());
}

}  // namespace

TEST_CASE("embedding width rule") {
  CHECK(embedding_width(2) == 2);
  CHECK(embedding_width(3) == 3);
  CHECK(embedding_width(9) == 6);
  CHECK(embedding_width(40) == 16);
}

TEST_CASE("encoder determinism, shapes and categorical sensitivity") {
  const auto data = prepare(make_mixed_moons({200, 0.2, 1}), 1);
  VaeConfig cfg;
  cfg.encode_widths = {128, 64};
  cfg.latent_dim = 16;
  const VaeModel vae(data.prep, cfg);

  Matrix num(3, 2);
  num << 0.3, -0.4, 0.3, -0.4, 0.3, -0.4;
  IndexMatrix cat(3, 2);
  cat << 1, 2, 1, 2, 0, 2;
  ad::Tape tape;
  Binder bind(tape, vae.params(), false);
  const Encoded e = vae.encode(bind, tape.constant_ref(num), cat, false);
  CHECK(e.mu.rows() == 3);
  CHECK(e.mu.cols() == 16);
  CHECK(e.log_var.cols() == 16);
  CHECK(e.mu.value().row(0) == e.mu.value().row(1));
  CHECK(e.log_var.value().row(0) == e.log_var.value().row(1));
  CHECK((e.mu.value().row(0) - e.mu.value().row(2)).cwiseAbs().maxCoeff() > 1e-8);

  IndexMatrix bad = cat;
  bad(0, 1) = 3;
  ad::Tape t2;
  Binder b2(t2, vae.params(), false);
  CHECK_THROWS_AS((void)vae.encode(b2, t2.constant_ref(num), bad, false), IndexError);
}

TEST_CASE("reparameterisation") {
  ad::Tape tape;
  Matrix mu(2, 3);
  mu << 0.5, -1.0, 2.0, 0.0, 3.0, -0.25;
  const ad::Var m = tape.constant(mu);
  CHECK(reparameterize(m, tape.constant(Matrix::Zero(2, 3)), tape.constant(Matrix::Zero(2, 3))).value() == mu);
  CHECK(reparameterize(m, tape.constant(Matrix::Zero(2, 3)), tape.constant(Matrix::Ones(2, 3))).value() ==
        (mu.array() + 1.0).matrix());

  // Monte-Carlo: z over many eps draws has mean mu and variance exp(log_var).
  const int n = 100000;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix eps(n, 2);
  for (Eigen::Index i = 0; i < eps.size(); ++i) eps.data()[i] = g(rng);
  Matrix mus(n, 2), lvs(n, 2);
  mus.col(0).setConstant(1.5);
  mus.col(1).setConstant(-2.0);
  lvs.col(0).setConstant(std::log(0.25));
  lvs.col(1).setConstant(std::log(4.0));
  ad::Tape t2;
  const Matrix z = reparameterize(t2.constant(mus), t2.constant(lvs), t2.constant(eps)).value();
  const RowVector mean = z.colwise().mean();
  const RowVector var = (z.rowwise() - mean).array().square().colwise().sum() / (n - 1.0);
  CHECK(std::abs(mean(0) - 1.5) < 0.02 * 1.5);
  CHECK(std::abs(mean(1) + 2.0) < 0.02 * 2.0);
  CHECK(std::abs(var(0) - 0.25) < 0.02 * 0.25);
  CHECK(std::abs(var(1) - 4.0) < 0.02 * 4.0);

  // Differentiable in mu and log_var.
  testing::LossFn fn = [&](ad::Tape& t, const std::vector<ad::Var>& in) {
    return ad::sum(ad::square(reparameterize(in[0], in[1], t.constant(eps.topRows(2)))));
  };
  std::mt19937_64 r2(3);
  CHECK(testing::gradient_relative_error(fn, {testing::random_matrix(2, 2, r2), testing::random_matrix(2, 2, r2)}) <
        1e-6);
}

TEST_CASE("decoder shapes and determinism") {
  const auto data = prepare(make_mixed_moons({200, 0.2, 1}), 1);
  const VaeModel vae(data.prep, small_config(1));
  std::mt19937_64 rng(7);
  const Matrix z = testing::random_matrix(5, 2, rng);
  ad::Tape tape;
  Binder bind(tape, vae.params(), false);
  const Decoded d = vae.decode(bind, tape.constant_ref(z));
  REQUIRE(d.cat_logits.size() == 2);
  CHECK(d.cat_logits[0].cols() == 2);
  CHECK(d.cat_logits[1].cols() == 3);
  CHECK(d.num.cols() == 2);
  CHECK(vae.decode_flat(z) == vae.decode_flat(z));
  const Matrix flat = vae.decode_flat(z);
  CHECK(flat.cols() == 7);
  CHECK((flat.leftCols(2).rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
}

TEST_CASE("latent classifier head") {
  const auto data = prepare(make_mixed_moons({200, 0.2, 1}), 1);
  auto cfg = small_config(2);
  cfg.zero_init_classifier = true;
  const VaeModel vae(data.prep, cfg);
  const Matrix p = vae.classify(Matrix::Random(4, 2));
  CHECK(p.rows() == 4);
  CHECK(p.cols() == 2);
  CHECK(p.cwiseAbs().maxCoeff() == 0.0);  // zero logits, uniform softmax
}

TEST_CASE("composite loss matches a scalar re-implementation") {
  const auto data = prepare(make_mixed_moons({200, 0.2, 1}), 1);
  std::vector<std::size_t> rows{0, 3, 5, 8, 13};
  const auto batch = data.train.subset(rows);
  std::mt19937_64 rng(9);
  const Matrix noise = testing::random_matrix(5, 2, rng, -1.5, 1.5);

  for (double alpha : {1.0, 0.0}) {
    for (double beta : {1e-2, 0.0}) {
      auto cfg = small_config(3);
      cfg.cls_weight = alpha;
      cfg.kl_weight = beta;
      const VaeModel vae(data.prep, cfg);
      ad::Tape tape;
      Binder bind(tape, vae.params(), false);
      const VaeLoss l = vae.loss(bind, batch.num, batch.cat, batch.y, noise, false);

      // Independent route: pull out mu/log_var, then redo every part by hand.
      ad::Tape t2;
      Binder b2(t2, vae.params(), false);
      const Encoded e = vae.encode(b2, t2.constant_ref(batch.num), batch.cat, false);
      const Matrix& mu = e.mu.value();
      const Matrix& lv = e.log_var.value();
      Matrix z(5, 2);
      for (int i = 0; i < 5; ++i) {
        for (int k = 0; k < 2; ++k) z(i, k) = mu(i, k) + std::exp(0.5 * lv(i, k)) * noise(i, k);
      }
      const Decoded d = vae.decode(b2, t2.constant_ref(z));
      const Matrix cls_logits = vae.classify(z);
      double rn = 0.0, rc = 0.0, kl = 0.0, cls = 0.0;
      for (int i = 0; i < 5; ++i) {
        for (int c = 0; c < 2; ++c) rn += std::pow(batch.num(i, c) - d.num.value()(i, c), 2) / 5.0;
        for (int j = 0; j < 2; ++j) rc += softmax_ce_row(d.cat_logits[static_cast<std::size_t>(j)].value(), i, batch.cat(i, j)) / 5.0;
        for (int k = 0; k < 2; ++k) kl += -0.5 * (1 + lv(i, k) - mu(i, k) * mu(i, k) - std::exp(lv(i, k))) / 5.0;
        cls += softmax_ce_row(cls_logits, i, batch.y[static_cast<std::size_t>(i)]) / 5.0;
      }
      const double total = rn + rc + beta * kl + alpha * cls;
      CHECK(std::abs(l.parts.total - total) < 1e-10);
      CHECK(std::abs(l.parts.recon_num - rn) < 1e-10);
      CHECK(std::abs(l.parts.recon_cat - rc) < 1e-10);
      CHECK(std::abs(l.parts.kl - kl) < 1e-10);
      CHECK(std::abs(l.parts.cls - cls) < 1e-10);
      CHECK(std::abs(l.parts.total - (l.parts.recon_num + l.parts.recon_cat + beta * l.parts.kl +
                                      alpha * l.parts.cls)) < 1e-10);
      if (alpha == 0.0) CHECK(l.parts.total == l.parts.recon_num + l.parts.recon_cat + (beta == 0.0 ? 0.0 : beta * l.parts.kl));
    }
  }
}

TEST_CASE("encoder and decoder gradients pass finite differences") {
  const auto data = prepare(make_mixed_moons({200, 0.2, 1}), 1);
  const VaeModel vae(data.prep, small_config(4));
  const auto batch = data.train.subset(std::vector<std::size_t>{1, 2, 4, 7});
  testing::LossFn enc = [&](ad::Tape& t, const std::vector<ad::Var>& in) {
    Binder bind(t, vae.params(), false);
    const Encoded e = vae.encode(bind, in[0], batch.cat, false);
    return ad::sum(ad::square(e.mu)) + ad::sum(e.log_var);
  };
  CHECK(testing::gradient_relative_error(enc, {batch.num}) < 1e-4);
  testing::LossFn dec = [&](ad::Tape& t, const std::vector<ad::Var>& in) {
    Binder bind(t, vae.params(), false);
    return ad::sum(ad::square(vae.decode_flat(bind, in[0])));
  };
  std::mt19937_64 rng(5);
  CHECK(testing::gradient_relative_error(dec, {testing::random_matrix(4, 2, rng)}) < 1e-4);
}

TEST_CASE("memorises a four-row dataset") {
  TabularSchema s({{"u", ColumnKind::Numeric, {}}, {"c", ColumnKind::Categorical, {"p", "q", "r"}}},
                  {"y", {"0", "1"}});
  RawDataset train{s,
                   {{{1.0}, {"p"}, "0"}, {{2.0}, {"q"}, "1"}, {{3.0}, {"r"}, "0"}, {{4.0}, {"q"}, "1"}},
                   SplitTag::Train};
  const auto prep = Preprocessor::fit(train);
  const auto enc = prep.transform(train);
  VaeConfig cfg;
  cfg.encode_widths = {16};
  cfg.latent_dim = 2;
  cfg.epochs = 600;
  cfg.kl_weight = 0.0;
  cfg.batch_size = 4;
  cfg.lr = 1e-2;
  cfg.seed = 11;
  VaeModel vae(prep, cfg);
  train_vae(vae, enc);
  const auto rec = vae.reconstruct(enc);
  CHECK(rec.cat == enc.cat);
  const RawDataset raw = vae.reconstruct_raw(enc);
  CHECK(raw.schema == train.schema);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(raw.rows[i].categorical == train.rows[i].categorical);
    CHECK(std::round(raw.rows[i].numeric[0]) == train.rows[i].numeric[0]);
  }
  CHECK(vae.reconstruct(enc).num == rec.num);
}

TEST_CASE("training curve trends down and the latent classifier separates blobs") {
  BlobOptions opt;
  opt.rows = 800;
  opt.separation = 6.0;
  opt.seed = 2;
  const auto data = prepare(make_blobs(opt), 2);
  auto cfg = small_config(5);
  cfg.epochs = 40;
  cfg.lr = 1e-2;
  VaeModel vae(data.prep, cfg);
  const auto hist = train_vae(vae, EncodedDataset::concat(data.train, data.val));
  REQUIRE(hist.size() == 40);
  // Smoothing: means over consecutive 10-epoch blocks.
  std::vector<double> smooth;
  for (std::size_t b = 0; b + 10 <= hist.size(); b += 10) {
    double s = 0.0;
    for (std::size_t k = b; k < b + 10; ++k) s += hist[k].mean.total;
    smooth.push_back(s / 10.0);
  }
  for (std::size_t i = 1; i < smooth.size(); ++i) CHECK(smooth[i] <= smooth[i - 1]);
  CHECK(accuracy(vae.classify(vae.encode_mean(data.test)), data.test.y) >= 0.95);
}

TEST_CASE("classification loss helps the latent classifier on average") {
  const auto data = prepare(make_mixed_moons({600, 0.2, 3}), 3);
  double with = 0.0, without = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    for (double alpha : {1.0, 0.0}) {
      auto cfg = small_config(seed);
      cfg.cls_weight = alpha;
      cfg.epochs = 15;
      VaeModel vae(data.prep, cfg);
      train_vae(vae, data.train);
      (alpha > 0 ? with : without) += accuracy(vae.classify(vae.encode_mean(data.val)), data.val.y) / 5.0;
    }
  }
  MESSAGE("latent classifier val accuracy: alpha=1 " << with << ", alpha=0 " << without);
  CHECK(with >= without);
}

TEST_CASE("latent statistics") {
  SUBCASE("single repeated row") {
    Matrix z(6, 3);
    z.rowwise() = RowVector{{0.5, -1.0, 2.0}};
    const auto s = LatentStats::fit(z);
    CHECK(s.covariance.cwiseAbs().maxCoeff() == 0.0);
    CHECK(s.ridge == 1e-6);
    const Vector diff = (z.row(0) - s.mean).transpose();
    CHECK(s.cholesky.triangularView<Eigen::Lower>().solve(diff).norm() == 0.0);
  }
  SUBCASE("standard normal sampling oracle") {
    const int n = 100000, k = 8;
    std::mt19937_64 rng(13);
    std::normal_distribution<double> g(0.0, 1.0);
    Matrix z(n, k);
    for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = g(rng);
    const auto s = LatentStats::fit(z);
    CHECK(s.mean.cwiseAbs().maxCoeff() < 0.02);
    CHECK((s.covariance.diagonal().array() - 1.0).abs().maxCoeff() < 0.05);
    CHECK((s.cholesky * s.cholesky.transpose() - s.regularised()).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((s.covariance - s.covariance.transpose()).cwiseAbs().maxCoeff() == 0.0);
    const auto back = LatentStats::from_json(s.to_json());
    CHECK(back.cholesky == s.cholesky);
    CHECK(back.mean == s.mean);
  }
  CHECK_THROWS_AS(LatentStats::fit(Matrix(0, 2)), StatsError);
}

TEST_CASE("vae checkpoints round-trip") {
  const auto data = prepare(make_mixed_moons({200, 0.2, 1}), 1);
  auto cfg = small_config(6);
  cfg.epochs = 2;
  VaeModel vae(data.prep, cfg);
  train_vae(vae, data.train);
  vae.latent_stats = LatentStats::fit(vae.encode_mean(data.train));
  std::stringstream buf;
  write_checkpoint(buf, vae.to_checkpoint());
  const auto back = VaeModel::from_checkpoint(read_checkpoint(buf));
  CHECK(back.params() == vae.params());
  REQUIRE(back.latent_stats.has_value());
  CHECK(back.latent_stats->cholesky == vae.latent_stats->cholesky);
  CHECK(back.encode_mean(data.test) == vae.encode_mean(data.test));
}
