#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "tabattack/metrics/metrics.hpp"

namespace tabattack {

double mahalanobis(const Eigen::Ref<const Vector>& z, const LatentStats& stats) {
  if (z.size() != stats.mean.size()) {
    throw DimensionError("mahalanobis: point has " + std::to_string(z.size()) + " dims, stats have " +
                         std::to_string(stats.mean.size()));
  }
  const Vector diff = z - stats.mean.transpose();
  return stats.cholesky.triangularView<Eigen::Lower>().solve(diff).norm();
}

std::string to_string(MdRule rule) { return rule == MdRule::Distance ? "distance" : "squared"; }

MdRule md_rule_from_string(const std::string& s) {
  if (s == "distance") return MdRule::Distance;
  if (s == "squared") return MdRule::Squared;
  throw ConfigError("unknown md rule '" + s + "' (expected distance or squared)");
}

bool is_outlier(double md, double threshold, MdRule rule) {
  return (rule == MdRule::Distance ? md : md * md) > threshold;
}

std::string to_string(OutlierBase base) { return base == OutlierBase::All ? "all" : "successful"; }

OutlierBase outlier_base_from_string(const std::string& s) {
  if (s == "all") return OutlierBase::All;
  if (s == "successful") return OutlierBase::Successful;
  throw ConfigError("unknown outlier base '" + s + "' (expected all or successful)");
}

SparsityMetrics sparsity_metrics(std::span<const AttackOutcome> outcomes) {
  SparsityMetrics s;
  if (outcomes.empty()) return s;
  for (const auto& o : outcomes) {
    const double l0 = o.l0();
    s.mean_l0 += l0;
    s.sparsity_rate += o.changed.empty() ? 0.0 : l0 / static_cast<double>(o.changed.size());
    s.mean_l1 += o.l1;
  }
  const auto n = static_cast<double>(outcomes.size());
  s.mean_l0 /= n;
  s.sparsity_rate /= n;
  s.mean_l1 /= n;
  return s;
}

CampaignReport campaign_report(std::span<const AttackOutcome> outcomes, const LatentStats& stats,
                               const ReportOptions& options) {
  std::vector<AttackOutcome> kept;
  for (const auto& o : outcomes) {
    if (!options.correct_only || o.original_prediction == o.true_label) kept.push_back(o);
  }
  if (kept.empty()) throw ReportError("campaign report needs at least one outcome");

  CampaignReport r;
  r.options = options;
  r.n = kept.size();
  r.threshold = chi2_quantile(options.p, stats.dim());
  std::size_t base = 0;
  double l2 = 0.0;
  for (const auto& o : kept) {
    if (o.latent.size() == 0) throw ReportError("outcome " + std::to_string(o.index) + " has no latent point");
    const double md = mahalanobis(o.latent, stats);
    r.md.push_back(md);
    r.fooled += o.fooled();
    l2 += o.delta_l2;
    if (options.outlier_base == OutlierBase::All || o.fooled()) {
      ++base;
      r.flagged += is_outlier(md, r.threshold, options.md_rule);
    }
  }
  r.asr = static_cast<double>(r.fooled) / static_cast<double>(r.n);
  r.outlier_rate = base == 0 ? 0.0 : static_cast<double>(r.flagged) / static_cast<double>(base);
  r.mean_delta_l2 = l2 / static_cast<double>(r.n);
  r.sparsity = sparsity_metrics(kept);
  return r;
}

nlohmann::json CampaignReport::to_json() const {
  return {{"n", n},
          {"fooled", fooled},
          {"flagged", flagged},
          {"ASR", asr},
          {"O_r", outlier_rate},
          {"IDSR", idsr()},
          {"mean_delta_l2", mean_delta_l2},
          {"l0", sparsity.mean_l0},
          {"l1", sparsity.mean_l1},
          {"sparsity_rate", sparsity.sparsity_rate},
          {"threshold", threshold},
          {"md_rule", to_string(options.md_rule)},
          {"outlier_base", to_string(options.outlier_base)},
          {"correct_only", options.correct_only},
          {"p", options.p},
          {"md", md}};
}

double mean_squared_error(const Matrix& truth, const Matrix& pred) {
  if (truth.rows() != pred.rows() || truth.cols() != pred.cols()) throw DimensionError("mse: shape mismatch");
  if (truth.size() == 0) return 0.0;
  return (truth - pred).squaredNorm() / static_cast<double>(truth.size());
}

double r_squared(const Matrix& truth, const Matrix& pred) {
  if (truth.rows() != pred.rows() || truth.cols() != pred.cols()) throw DimensionError("r2: shape mismatch");
  const double ss_res = (truth - pred).squaredNorm();
  const double ss_tot = (truth.array() - truth.mean()).matrix().squaredNorm();
  if (ss_tot == 0.0) return ss_res == 0.0 ? 1.0 : 0.0;
  return 1.0 - ss_res / ss_tot;
}

double cosine_similarity(const Matrix& a, const Matrix& b) {
  if (a.size() != b.size()) throw DimensionError("cosine: size mismatch");
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return na == nb ? 1.0 : 0.0;
  return std::clamp(a.cwiseProduct(b).sum() / (na * nb), -1.0, 1.0);
}

double pearson(const Matrix& a, const Matrix& b) {
  if (a.size() != b.size()) throw DimensionError("pearson: size mismatch");
  const Matrix ca = a.array() - a.mean();
  const Matrix cb = b.array() - b.mean();
  const double denom = ca.norm() * cb.norm();
  if (denom == 0.0) return 0.0;
  return std::clamp(ca.cwiseProduct(cb).sum() / denom, -1.0, 1.0);
}

nlohmann::json ReconReport::to_json() const {
  nlohmann::json j{{"accuracy_original", accuracy_original},
                   {"accuracy_reconstructed", accuracy_reconstructed},
                   {"delta_acc", delta_acc},
                   {"mse", mse},
                   {"r2", r2},
                   {"cosine", cosine},
                   {"pearson", pearson}};
  j["cat_accuracy"] = cat_accuracy ? nlohmann::json(*cat_accuracy) : nlohmann::json(nullptr);
  return j;
}

ReconReport recon_report(const EncodedDataset& original, const EncodedDataset& reconstructed,
                         const TargetModel* model) {
  if (original.size() != reconstructed.size() || original.num.cols() != reconstructed.num.cols() ||
      original.cat.cols() != reconstructed.cat.cols()) {
    throw DimensionError("recon_report: original and reconstruction differ in shape");
  }
  ReconReport r;
  if (model != nullptr && original.size() > 0) {
    auto accuracy = [&](const EncodedDataset& d) {
      const auto pred = model->predict(d);
      std::size_t ok = 0;
      for (std::size_t i = 0; i < pred.size(); ++i) ok += pred[i] == original.y[i];
      return static_cast<double>(ok) / static_cast<double>(pred.size());
    };
    r.accuracy_original = accuracy(original);
    r.accuracy_reconstructed = accuracy(reconstructed);
    r.delta_acc = r.accuracy_original - r.accuracy_reconstructed;
  }
  if (original.num.size() > 0) {
    r.mse = mean_squared_error(original.num, reconstructed.num);
    r.r2 = r_squared(original.num, reconstructed.num);
    r.cosine = cosine_similarity(original.num, reconstructed.num);
    r.pearson = pearson(original.num, reconstructed.num);
  }
  if (original.cat.cols() > 0 && original.cat.rows() > 0) {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < original.cat.cols(); ++j) {
      acc += (original.cat.col(j).array() == reconstructed.cat.col(j).array()).cast<double>().mean();
    }
    r.cat_accuracy = acc / static_cast<double>(original.cat.cols());
  }
  return r;
}

ReconReport recon_report(const TargetModel& model, const VaeModel& vae, const EncodedDataset& test) {
  return recon_report(test, vae.reconstruct(test), &model);
}

Pca pca_project(const Matrix& latents) {
  const Eigen::Index n = latents.rows();
  const Eigen::Index k = latents.cols();
  if (n < 2) throw DimensionError("pca_project needs at least two rows");
  Pca out;
  const Matrix centred = latents.rowwise() - latents.colwise().mean();
  if (k < 2) {
    out.coords = Matrix::Zero(n, 2);
    if (k == 1) out.coords.col(0) = centred.col(0);
    out.eigenvalues = Vector::Constant(k, centred.squaredNorm() / static_cast<double>(n - 1));
    out.components = Matrix::Zero(k, 2);
    if (k == 1) out.components(0, 0) = 1.0;
    return out;
  }
  const Matrix cov = centred.transpose() * centred / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  if (eig.info() != Eigen::Success) throw NumericError("pca_project: eigendecomposition failed");
  out.eigenvalues = eig.eigenvalues().reverse();
  out.components.resize(k, 2);
  out.components.col(0) = eig.eigenvectors().col(k - 1);
  out.components.col(1) = eig.eigenvectors().col(k - 2);
  out.coords = centred * out.components;
  return out;
}

}  // namespace tabattack
