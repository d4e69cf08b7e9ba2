#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tabattack/attacks/attack.hpp"
#include "tabattack/vae/latent_stats.hpp"

namespace tabattack {

// ---- distances and the chi-squared threshold

/// sqrt((z - mu)^T Sigma^-1 (z - mu)) via a triangular solve against the Cholesky factor.
double mahalanobis(const Eigen::Ref<const Vector>& z, const LatentStats& stats);

/// Regularised lower incomplete gamma P(a, x).
double regularized_gamma_p(double a, double x);
double chi2_cdf(double x, double k);
/// Inverse chi-squared CDF, absolute tolerance 1e-9.
double chi2_quantile(double p, double k);

enum class MdRule { Distance, Squared };
std::string to_string(MdRule rule);
MdRule md_rule_from_string(const std::string& s);

/// Distance compares MD with the quantile; Squared compares MD^2.
bool is_outlier(double md, double threshold, MdRule rule);

// ---- campaign metrics

enum class OutlierBase { All, Successful };
std::string to_string(OutlierBase base);
OutlierBase outlier_base_from_string(const std::string& s);

struct ReportOptions {
  MdRule md_rule = MdRule::Distance;
  double p = 0.95;
  /// Denominator of the outlier rate: every attacked sample or only the fooled ones.
  OutlierBase outlier_base = OutlierBase::All;
  /// Count only samples the model classified correctly before the attack.
  bool correct_only = false;
};

struct SparsityMetrics {
  double mean_l0 = 0.0;
  double sparsity_rate = 0.0;  // mean fraction of features changed
  double mean_l1 = 0.0;
};

struct CampaignReport {
  std::size_t n = 0;
  std::size_t fooled = 0;
  std::size_t flagged = 0;  // outliers within the chosen base
  double asr = 0.0;
  double outlier_rate = 0.0;
  double mean_delta_l2 = 0.0;
  SparsityMetrics sparsity;
  double threshold = 0.0;
  ReportOptions options;
  std::vector<double> md;  // per considered sample

  [[nodiscard]] double idsr() const { return asr * (1.0 - outlier_rate); }
  [[nodiscard]] nlohmann::json to_json() const;
};

SparsityMetrics sparsity_metrics(std::span<const AttackOutcome> outcomes);

CampaignReport campaign_report(std::span<const AttackOutcome> outcomes, const LatentStats& stats,
                               const ReportOptions& options = {});

// ---- reconstruction quality

double mean_squared_error(const Matrix& truth, const Matrix& pred);
/// 1 - SS_res / SS_tot over all entries.
double r_squared(const Matrix& truth, const Matrix& pred);
double cosine_similarity(const Matrix& a, const Matrix& b);
double pearson(const Matrix& a, const Matrix& b);

struct ReconReport {
  double accuracy_original = 0.0;
  double accuracy_reconstructed = 0.0;
  double delta_acc = 0.0;
  double mse = 0.0;
  double r2 = 0.0;
  double cosine = 0.0;
  double pearson = 0.0;
  std::optional<double> cat_accuracy;

  [[nodiscard]] nlohmann::json to_json() const;
};

ReconReport recon_report(const EncodedDataset& original, const EncodedDataset& reconstructed,
                         const TargetModel* model = nullptr);
ReconReport recon_report(const TargetModel& model, const VaeModel& vae, const EncodedDataset& test);

// ---- projection

struct Pca {
  Matrix coords;       // n x 2
  Vector eigenvalues;  // all k, descending
  Matrix components;   // k x 2
};

Pca pca_project(const Matrix& latents);

}  // namespace tabattack
