#pragma once

#include <cstdint>
#include <vector>

#include "tabattack/data/dataset.hpp"
#include "tabattack/models/target.hpp"

namespace tabattack {

struct TrainOptions {
  int epochs = 100;
  double lr = 1e-3;
  int batch_size = 128;
  /// Epochs without a val-accuracy gain before stopping; 0 disables.
  int patience = 10;
  std::uint64_t seed = 0;
};

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;  // -1 when no epoch ran
  double best_val_accuracy = 0.0;
  bool stopped_early = false;
};

/// Minimises cross-entropy with Adam and keeps the best-val-accuracy weights.
TrainHistory train_target(TargetModel& model, const EncodedDataset& train, const EncodedDataset& val,
                          const TrainOptions& options);

struct Evaluation {
  double accuracy = 0.0;
  Eigen::MatrixXi confusion;  // rows: true class, cols: predicted
  std::vector<std::size_t> correct_per_class;
  std::vector<std::size_t> total_per_class;
};

Evaluation evaluate(std::span<const int> predictions, std::span<const int> labels, int class_count);
Evaluation evaluate(const TargetModel& model, const EncodedDataset& split);

}  // namespace tabattack
