#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "tabattack/data/csv.hpp"
#include "tabattack/data/preprocess.hpp"
#include "tabattack/data/split.hpp"
#include "tabattack/data/synthetic.hpp"
#include "tabattack/error.hpp"

using namespace tabattack;

namespace {

TabularSchema small_schema() {
  return TabularSchema({{"age", ColumnKind::Numeric, {}},
                        {"color", ColumnKind::Categorical, {"a", "b", "c"}},
                        {"flag", ColumnKind::Binary, {"no", "yes"}},
                        {"height", ColumnKind::Numeric, {}}},
                       {"label", {"neg", "pos"}});
}

const char* kSmallCsv =
    "height,label,color,age,flag\n"
    "1.5,neg,a,30,no\n"
    "1.7,pos,b,41,yes\n"
    "1.9,pos,c,52,no\n";

// Largest-remainder allocation in integer tenths: quotas n*r/10 with
// remainders n*r%10, ties broken toward the earlier split.
std::array<std::size_t, 3> tenths_oracle(std::size_t n, std::array<std::size_t, 3> tenths) {
  std::array<std::size_t, 3> count{}, rem{};
  std::size_t used = 0;
  for (int s = 0; s < 3; ++s) {
    count[s] = n * tenths[s] / 10;
    rem[s] = n * tenths[s] % 10;
    used += count[s];
  }
  while (used < n) {
    int best = 0;
    for (int s = 1; s < 3; ++s) {
      if (rem[s] > rem[best]) best = s;
    }
    ++count[best];
    rem[best] = 0;
    ++used;
  }
  return count;
}

std::vector<int> labels_of_sizes(std::initializer_list<int> sizes, std::uint64_t seed) {
  std::vector<int> y;
  int c = 0;
  for (int s : sizes) {
    y.insert(y.end(), static_cast<std::size_t>(s), c);
    ++c;
  }
  std::mt19937_64 rng(seed);
  std::shuffle(y.begin(), y.end(), rng);
  return y;
}

std::size_t count_class(const std::vector<std::size_t>& idx, const std::vector<int>& y, int c) {
  return static_cast<std::size_t>(std::count_if(idx.begin(), idx.end(), [&](std::size_t i) { return y[i] == c; }));
}

}  // namespace

TEST_CASE("csv records follow quoting rules") {
  std::istringstream in("a,\"b,c\",\"say \"\"hi\"\"\"\r\n1,2,3\n\n");
  const auto rec = read_csv_records(in);
  REQUIRE(rec.size() == 2);
  CHECK(rec[0] == std::vector<std::string>{"a", "b,c", "say \"hi\""});
  CHECK(rec[1] == std::vector<std::string>{"1", "2", "3"});
  CHECK(csv_escape("x,y") == "\"x,y\"");
  CHECK(csv_escape("plain") == "plain");
}

TEST_CASE("load a three row csv with shuffled header") {
  std::istringstream in(kSmallCsv);
  const auto ds = parse_csv(in, small_schema());
  REQUIRE(ds.size() == 3);
  CHECK(ds.rows[1].numeric == std::vector<double>{41.0, 1.7});
  CHECK(ds.rows[1].categorical == std::vector<std::string>{"b", "yes"});
  CHECK(ds.rows[2].label == "pos");
  CHECK(ds.labels() == std::vector<int>{0, 1, 1});
}

TEST_CASE("unknown category names the column and row") {
  std::istringstream in("height,label,color,age,flag\n1.5,neg,a,30,no\n1.7,pos,unknownCat,41,yes\n");
  try {
    (void)parse_csv(in, small_schema());
    FAIL("expected IngestionError");
  } catch (const IngestionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("color") != std::string::npos);
    CHECK(msg.find("row 1") != std::string::npos);
    CHECK(msg.find("unknownCat") != std::string::npos);
  }
}

TEST_CASE("ingestion rejects bad numerics, missing columns and missing values") {
  std::istringstream bad_num("height,label,color,age,flag\n1.5x,neg,a,30,no\n");
  CHECK_THROWS_AS((void)parse_csv(bad_num, small_schema()), IngestionError);
  std::istringstream no_col("height,label,color,flag\n1.5,neg,a,no\n");
  CHECK_THROWS_AS((void)parse_csv(no_col, small_schema()), IngestionError);
  std::istringstream missing("height,label,color,age,flag\n1.5,neg,?,30,no\n1.6,pos,b,31,yes\n");
  CHECK_THROWS_AS((void)parse_csv(missing, small_schema()), IngestionError);

  std::istringstream again("height,label,color,age,flag\n1.5,neg,?,30,no\n1.6,pos,b,31,yes\n");
  LoadOptions opt;
  opt.drop_missing = true;
  LoadReport report;
  const auto ds = parse_csv(again, small_schema(), opt, &report);
  CHECK(ds.size() == 1);
  CHECK(report.dropped == 1);
}

TEST_CASE("omitted categories are completed alphabetically") {
  TabularSchema s({{"v", ColumnKind::Numeric, {}}, {"k", ColumnKind::Categorical, {}}}, {"y", {}});
  std::istringstream in("v,k,y\n1,zeta,t\n2,alpha,f\n3,mu,t\n");
  const auto ds = parse_csv(in, s);
  CHECK(ds.schema.categorical_column(0).categories == std::vector<std::string>{"alpha", "mu", "zeta"});
  CHECK(ds.schema.target().classes == std::vector<std::string>{"f", "t"});
}

TEST_CASE("schema invariants") {
  CHECK_THROWS_AS(TabularSchema({{"a", ColumnKind::Numeric, {}}, {"a", ColumnKind::Numeric, {}}}, {"y", {"0", "1"}})
                      .validate(),
                  SchemaError);
  CHECK_THROWS_AS(TabularSchema({{"y", ColumnKind::Numeric, {}}}, {"y", {"0", "1"}}).validate(), SchemaError);
  CHECK_THROWS_AS(TabularSchema({{"c", ColumnKind::Categorical, {"only"}}}, {"y", {"0", "1"}}).validate(),
                  SchemaError);
  CHECK_THROWS_AS(TabularSchema({{"b", ColumnKind::Binary, {"x", "y", "z"}}}, {"t", {"0", "1"}}).validate(),
                  SchemaError);
  const auto s = small_schema();
  CHECK(s.numeric_count() == 2);
  CHECK(s.categorical_count() == 2);
  CHECK(s.binary_count() == 1);
  CHECK(TabularSchema::from_json(s.to_json()) == s);
}

TEST_CASE("stratified split with exact divisibility") {
  const auto y = labels_of_sizes({50, 50}, 3);
  const auto sp = stratified_split(y, 2, {}, 42);
  CHECK(sp.train.size() == 70);
  CHECK(sp.val.size() == 10);
  CHECK(sp.test.size() == 20);
  for (int c = 0; c < 2; ++c) {
    CHECK(count_class(sp.train, y, c) == 35);
    CHECK(count_class(sp.val, y, c) == 5);
    CHECK(count_class(sp.test, y, c) == 10);
  }
}

TEST_CASE("stratified split is deterministic, disjoint and exhaustive") {
  const auto y = labels_of_sizes({60, 30, 13}, 9);
  const auto a = stratified_split(y, 3, {}, 7);
  const auto b = stratified_split(y, 3, {}, 7);
  const auto c = stratified_split(y, 3, {}, 8);
  CHECK(a == b);
  CHECK_FALSE(a == c);
  std::set<std::size_t> all;
  for (const auto* part : {&a.train, &a.val, &a.test}) {
    CHECK(std::is_sorted(part->begin(), part->end()));
    all.insert(part->begin(), part->end());
  }
  CHECK(all.size() == y.size());
  CHECK(a.train.size() + a.val.size() + a.test.size() == y.size());
  CHECK(split_from_manifest(split_manifest(a, {}, 7)) == a);
}

TEST_CASE("per-class allocation matches the integer oracle") {
  const auto y = labels_of_sizes({499, 299, 199}, 11);
  const auto sp = stratified_split(y, 3, {}, 5);
  const int sizes[] = {499, 299, 199};
  for (int c = 0; c < 3; ++c) {
    const auto expect = tenths_oracle(static_cast<std::size_t>(sizes[c]), {7, 1, 2});
    CHECK(count_class(sp.train, y, c) == expect[0]);
    CHECK(count_class(sp.val, y, c) == expect[1]);
    CHECK(count_class(sp.test, y, c) == expect[2]);
    // Within one sample of the ratio.
    CHECK(std::abs(static_cast<double>(expect[0]) - 0.7 * sizes[c]) < 1.0);
    CHECK(std::abs(static_cast<double>(expect[1]) - 0.1 * sizes[c]) < 1.0);
    CHECK(std::abs(static_cast<double>(expect[2]) - 0.2 * sizes[c]) < 1.0);
  }
  for (std::size_t n = 3; n < 400; ++n) {
    CHECK(allocate_class(n, {}) == tenths_oracle(n, {7, 1, 2}));
  }
}

TEST_CASE("split rejects tiny classes and bad ratios") {
  const std::vector<int> y{0, 0, 0, 0, 1, 1};
  CHECK_THROWS_AS(stratified_split(y, 2, {}, 1), SplitError);
  CHECK_THROWS_AS(stratified_split(labels_of_sizes({10, 10}, 1), 2, {0.5, 0.1, 0.1}, 1), ConfigError);
}

TEST_CASE("z-score uses population std") {
  TabularSchema s({{"v", ColumnKind::Numeric, {}}}, {"y", {"0", "1"}});
  RawDataset train{s, {{{1.0}, {}, "0"}, {{2.0}, {}, "1"}, {{3.0}, {}, "0"}}, SplitTag::Train};
  const auto prep = Preprocessor::fit(train);
  const auto enc = prep.transform(train);
  const double z = 1.0 / std::sqrt(2.0 / 3.0);
  CHECK(enc.num(0, 0) == doctest::Approx(-z).epsilon(1e-12));
  CHECK(enc.num(1, 0) == doctest::Approx(0.0));
  CHECK(enc.num(2, 0) == doctest::Approx(z).epsilon(1e-12));
  CHECK(std::abs(z - 1.2247) < 1e-4);
  CHECK(prep.z_min()(0) == doctest::Approx(-z));
  CHECK(prep.z_max()(0) == doctest::Approx(z));
}

TEST_CASE("preprocessor fits only on train and rejects constant columns") {
  std::istringstream in(kSmallCsv);
  auto ds = parse_csv(in, small_schema());
  CHECK_THROWS_AS(Preprocessor::fit(ds), FitError);
  ds.split = SplitTag::Val;
  CHECK_THROWS_AS(Preprocessor::fit(ds), FitError);

  TabularSchema s({{"v", ColumnKind::Numeric, {}}}, {"y", {"0", "1"}});
  RawDataset flat{s, {{{4.0}, {}, "0"}, {{4.0}, {}, "1"}}, SplitTag::Train};
  CHECK_THROWS_AS(Preprocessor::fit(flat), FitError);
}

TEST_CASE("categorical codes and inverse transform") {
  std::istringstream in(kSmallCsv);
  auto ds = parse_csv(in, small_schema());
  ds.split = SplitTag::Train;
  const auto prep = Preprocessor::fit(ds);
  const auto enc = prep.transform(ds);
  CHECK(enc.cat(1, 0) == 1);  // "b" in [a,b,c]
  CHECK(enc.cat(1, 1) == 1);  // "yes" in [no,yes]
  CHECK(enc.cat(0, 1) == 0);

  EncodedRow zero{Vector::Zero(2), {0, 0}};
  const auto raw = prep.decode(zero);
  CHECK(raw.numeric[0] == doctest::Approx(41.0));
  CHECK(raw.categorical == std::vector<std::string>{"a", "no"});
  EncodedRow bad{Vector::Zero(2), {3, 0}};
  CHECK_THROWS_AS((void)prep.decode(bad), DecodeError);

  // Mean 5, std 2 column.
  TabularSchema s({{"v", ColumnKind::Numeric, {}}}, {"y", {"0", "1"}});
  RawDataset train{s, {{{3.0}, {}, "0"}, {{7.0}, {}, "1"}}, SplitTag::Train};
  const auto p2 = Preprocessor::fit(train);
  CHECK(p2.decode({Vector::Zero(1), {}}).numeric[0] == 5.0);
}

TEST_CASE("transform then inverse is identity") {
  auto ds = make_mixed_moons({300, 0.2, 4});
  const auto sp = stratified_split(ds.labels(), 2, {}, 4);
  const auto parts = apply_split(ds, sp);
  const auto prep = Preprocessor::fit(parts.train);
  for (const auto* part : {&parts.train, &parts.val, &parts.test}) {
    const auto back = prep.inverse_transform(prep.transform(*part));
    REQUIRE(back.size() == part->size());
    for (std::size_t i = 0; i < part->size(); ++i) {
      CHECK(back.rows[i].categorical == part->rows[i].categorical);
      CHECK(back.rows[i].label == part->rows[i].label);
      for (std::size_t k = 0; k < part->rows[i].numeric.size(); ++k) {
        CHECK(std::abs(back.rows[i].numeric[k] - part->rows[i].numeric[k]) <= 1e-9);
      }
    }
  }
  const auto enc = prep.transform(parts.train);
  const RowVector mean = enc.num.colwise().mean();
  const RowVector var = (enc.num.rowwise() - mean).array().square().colwise().mean();
  CHECK(mean.cwiseAbs().maxCoeff() < 1e-9);
  CHECK((var.array() - 1.0).abs().maxCoeff() < 1e-9);
  CHECK(Preprocessor::from_json(prep.to_json()).to_json() == prep.to_json());
}

TEST_CASE("flat one-hot layout round-trips") {
  IndexMatrix cat(2, 2);
  cat << 1, 0, 2, 1;
  Matrix num(2, 1);
  num << 0.5, -1.0;
  const std::vector<int> card{3, 2};
  const Matrix flat = to_flat(cat, num, card);
  CHECK(flat.cols() == 6);
  CHECK(flat.row(0).sum() == doctest::Approx(2.5));
  CHECK(flat(0, 1) == 1.0);
  CHECK(flat(1, 4) == 1.0);
  IndexMatrix cat2;
  Matrix num2;
  from_flat(flat, card, cat2, num2);
  CHECK(cat2 == cat);
  CHECK(num2 == num);
}

TEST_CASE("csv write then read reproduces rows") {
  auto ds = make_mixed_moons({40, 0.1, 2});
  std::stringstream buf;
  write_csv(buf, ds);
  const auto back = parse_csv(buf, ds.schema);
  CHECK(back.rows == ds.rows);
}
