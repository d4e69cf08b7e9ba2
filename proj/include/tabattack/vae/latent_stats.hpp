#pragma once

#include <json.hpp>

#include "tabattack/numerics/tensor.hpp"

namespace tabattack {

/// Mean and covariance of training latent means, with a ridge-regularised
/// Cholesky factor for Mahalanobis distances.
struct LatentStats {
  RowVector mean;
  Matrix covariance;
  double ridge = 0.0;
  Matrix cholesky;  // lower triangular, L L^T = covariance + ridge I

  /// Rows of `latents` are samples. Covariance uses the n-1 normaliser
  /// (zero for a single row); ridge = 1e-6 * trace / k, or 1e-6 when the trace is 0.
  static LatentStats fit(const Matrix& latents);

  [[nodiscard]] int dim() const { return static_cast<int>(mean.size()); }
  [[nodiscard]] Matrix regularised() const;

  [[nodiscard]] nlohmann::json to_json() const;
  static LatentStats from_json(const nlohmann::json& j);
};

}  // namespace tabattack
