#include "tabattack/vae/latent_stats.hpp"

#include <Eigen/Cholesky>

#include "tabattack/error.hpp"

namespace tabattack {

namespace {

nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(std::vector<double>(m.row(r).begin(), m.row(r).end()));
  return rows;
}

Matrix matrix_from_json(const nlohmann::json& j, Eigen::Index k) {
  Matrix m(k, k);
  if (static_cast<Eigen::Index>(j.size()) != k) throw SchemaError("latent stats matrix has the wrong row count");
  for (Eigen::Index r = 0; r < k; ++r) {
    const auto row = j.at(static_cast<std::size_t>(r)).get<std::vector<double>>();
    if (static_cast<Eigen::Index>(row.size()) != k) throw SchemaError("latent stats matrix has the wrong column count");
    for (Eigen::Index c = 0; c < k; ++c) m(r, c) = row[static_cast<std::size_t>(c)];
  }
  return m;
}

}  // namespace

LatentStats LatentStats::fit(const Matrix& latents) {
  if (latents.rows() == 0 || latents.cols() == 0) throw StatsError("latent statistics need at least one row");
  require_finite(latents, "latent means");
  const Eigen::Index k = latents.cols();
  LatentStats s;
  s.mean = latents.colwise().mean();
  const Matrix centred = latents.rowwise() - s.mean;
  if (latents.rows() > 1) {
    s.covariance = (centred.transpose() * centred) / static_cast<double>(latents.rows() - 1);
  } else {
    s.covariance = Matrix::Zero(k, k);
  }
  s.covariance = 0.5 * (s.covariance + s.covariance.transpose()).eval();
  const double trace = s.covariance.trace();
  s.ridge = trace > 0.0 ? 1e-6 * trace / static_cast<double>(k) : 1e-6;
  Eigen::LLT<Matrix> llt(s.regularised());
  if (llt.info() != Eigen::Success) throw StatsError("latent covariance is not positive definite after the ridge");
  s.cholesky = llt.matrixL();
  return s;
}

Matrix LatentStats::regularised() const {
  return covariance + ridge * Matrix::Identity(covariance.rows(), covariance.cols());
}

nlohmann::json LatentStats::to_json() const {
  return {{"mean", std::vector<double>(mean.data(), mean.data() + mean.size())},
          {"covariance", matrix_to_json(covariance)},
          {"ridge", ridge},
          {"cholesky", matrix_to_json(cholesky)}};
}

LatentStats LatentStats::from_json(const nlohmann::json& j) {
  LatentStats s;
  try {
    const auto mean = j.at("mean").get<std::vector<double>>();
    const auto k = static_cast<Eigen::Index>(mean.size());
    s.mean = Eigen::Map<const RowVector>(mean.data(), k);
    s.covariance = matrix_from_json(j.at("covariance"), k);
    s.ridge = j.at("ridge").get<double>();
    s.cholesky = matrix_from_json(j.at("cholesky"), k);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed latent stats: ") + e.what());
  }
  return s;
}

}  // namespace tabattack
