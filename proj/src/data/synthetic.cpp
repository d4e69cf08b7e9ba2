#include "tabattack/data/synthetic.hpp"

#include <numbers>
#include <random>

namespace tabattack {

RawDataset make_mixed_moons(const MoonsOptions& options) {
  TabularSchema schema({{"x1", ColumnKind::Numeric, {}},
                        {"x2", ColumnKind::Numeric, {}},
                        {"side", ColumnKind::Binary, {"left", "right"}},
                        {"band", ColumnKind::Categorical, {"low", "mid", "high"}}},
                       {"moon", {"upper", "lower"}});
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
  std::normal_distribution<double> noise(0.0, options.noise);
  std::bernoulli_distribution flip(0.05);

  RawDataset out{schema, {}, SplitTag::All};
  out.rows.reserve(options.rows);
  for (std::size_t i = 0; i < options.rows; ++i) {
    const int cls = static_cast<int>(i % 2);
    const double t = angle(rng);
    double x1 = cls == 0 ? std::cos(t) : 1.0 - std::cos(t);
    double x2 = cls == 0 ? std::sin(t) : 0.5 - std::sin(t);
    x1 += noise(rng);
    x2 += noise(rng);
    bool right = x1 > 0.5;
    if (flip(rng)) right = !right;
    const char* band = x2 < -0.1 ? "low" : (x2 < 0.6 ? "mid" : "high");
    out.rows.push_back({{x1, x2}, {right ? "right" : "left", band}, schema.target().classes[static_cast<std::size_t>(cls)]});
  }
  return out;
}

RawDataset make_blobs(const BlobOptions& options) {
  std::vector<Column> cols{{"a", ColumnKind::Numeric, {}}, {"b", ColumnKind::Numeric, {}}};
  if (options.with_categorical) cols.push_back({"tint", ColumnKind::Categorical, {"red", "green", "blue"}});
  TabularSchema schema(std::move(cols), {"label", {"neg", "pos"}});

  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> tint(0, 2);
  const double h = options.separation / 2.0;

  RawDataset out{schema, {}, SplitTag::All};
  out.rows.reserve(options.rows);
  for (std::size_t i = 0; i < options.rows; ++i) {
    const int cls = static_cast<int>(i % 2);
    const double c = cls == 0 ? -h : h;
    RawRow row{{c + unit(rng), c + unit(rng)}, {}, schema.target().classes[static_cast<std::size_t>(cls)]};
    if (options.with_categorical) row.categorical.push_back(schema.categorical_column(0).categories[static_cast<std::size_t>(tint(rng))]);
    out.rows.push_back(std::move(row));
  }
  return out;
}

}  // namespace tabattack
