#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "tabattack/data/preprocess.hpp"
#include "tabattack/io/checkpoint.hpp"
#include "tabattack/numerics/layers.hpp"
#include "tabattack/vae/latent_stats.hpp"

namespace tabattack {

struct VaeConfig {
  std::vector<int> encode_widths{128, 64};
  int latent_dim = 16;
  int epochs = 200;
  double kl_weight = 1e-3;   // beta
  double cls_weight = 1.0;   // alpha
  double lr = 1e-2;
  int batch_size = 512;
  int numeric_width = 16;
  std::uint64_t seed = 0;
  /// Zero-initialise the latent classifier head.
  bool zero_init_classifier = false;

  [[nodiscard]] nlohmann::json to_json() const;
  static VaeConfig from_json(const nlohmann::json& j);
  void validate() const;
};

/// Embedding width for a categorical column of the given cardinality.
int embedding_width(int cardinality);

struct Encoded {
  ad::Var mu;
  ad::Var log_var;
};

struct Decoded {
  std::vector<ad::Var> cat_logits;  // one n x |C_j| block per column
  ad::Var num;                      // n x d; invalid when d == 0
};

struct LossParts {
  double total = 0.0;
  double recon_num = 0.0;
  double recon_cat = 0.0;
  double kl = 0.0;
  double cls = 0.0;
};

struct VaeLoss {
  ad::Var total;
  LossParts parts;
};

class VaeModel {
 public:
  VaeModel() = default;
  VaeModel(Preprocessor prep, VaeConfig config);

  [[nodiscard]] const VaeConfig& config() const { return config_; }
  [[nodiscard]] VaeConfig& config() { return config_; }
  [[nodiscard]] const Preprocessor& preprocessor() const { return prep_; }
  [[nodiscard]] const ParameterStore& params() const { return store_; }
  [[nodiscard]] ParameterStore& params() { return store_; }
  [[nodiscard]] int latent_dim() const { return config_.latent_dim; }
  [[nodiscard]] int numeric_dim() const { return prep_.numeric_dim(); }
  [[nodiscard]] const std::vector<int>& cardinalities() const { return card_; }
  [[nodiscard]] int class_count() const { return prep_.class_count(); }

  /// Training mode uses batch statistics in the encoder's batch norms.
  [[nodiscard]] Encoded encode(Binder& bind, ad::Var num, const IndexMatrix& cat, bool training,
                               std::vector<ad::BatchNormResult>* observed = nullptr) const;
  [[nodiscard]] Decoded decode(Binder& bind, ad::Var z) const;
  /// Decoder output in the target's flat layout, softmax probabilities in the one-hot slots.
  [[nodiscard]] ad::Var decode_flat(Binder& bind, ad::Var z) const;
  [[nodiscard]] ad::Var classify(Binder& bind, ad::Var z) const;

  [[nodiscard]] VaeLoss loss(Binder& bind, const Matrix& num, const IndexMatrix& cat, std::span<const int> y,
                             const Matrix& noise, bool training,
                             std::vector<ad::BatchNormResult>* observed = nullptr) const;

  /// Encoder means in inference mode.
  [[nodiscard]] Matrix encode_mean(const Matrix& num, const IndexMatrix& cat) const;
  [[nodiscard]] Matrix encode_mean(const EncodedDataset& data) const { return encode_mean(data.num, data.cat); }
  [[nodiscard]] Matrix decode_flat(const Matrix& z) const;
  [[nodiscard]] Matrix classify(const Matrix& z) const;

  /// Discretised decode: argmax categorical codes and numeric outputs.
  void decode_discrete(const Matrix& z, IndexMatrix& cat, Matrix& num) const;

  /// Encode with mu, decode and argmax; labels are copied through.
  [[nodiscard]] EncodedDataset reconstruct(const EncodedDataset& data) const;
  [[nodiscard]] RawDataset reconstruct_raw(const EncodedDataset& data) const;

  void update_running(const std::vector<ad::BatchNormResult>& observed, Eigen::Index batch_rows);

  std::optional<LatentStats> latent_stats;

  [[nodiscard]] Checkpoint to_checkpoint() const;
  static VaeModel from_checkpoint(const Checkpoint& ckpt);

 private:
  Preprocessor prep_;
  VaeConfig config_;
  std::vector<int> card_;
  ParameterStore store_;
  std::vector<std::size_t> embeddings_;
  std::optional<Dense> numeric_in_;
  std::vector<Dense> enc_dense_;
  std::vector<BatchNorm> enc_bn_;
  Dense mu_head_;
  Dense logvar_head_;
  std::vector<Dense> dec_dense_;
  std::vector<Dense> cat_heads_;
  std::optional<Dense> num_head_;
  Dense classifier_;
};

/// z = mu + exp(log_var / 2) * eps.
ad::Var reparameterize(ad::Var mu, ad::Var log_var, ad::Var eps);

struct VaeEpoch {
  int epoch = 0;
  LossParts mean;
  double cls_accuracy = 0.0;  // latent classifier on the training rows
};

/// Joint Adam optimisation of encoder, decoder and latent classifier.
std::vector<VaeEpoch> train_vae(VaeModel& vae, const EncodedDataset& data);

}  // namespace tabattack
