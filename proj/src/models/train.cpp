#include "tabattack/models/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <spdlog/spdlog.h>

#include "tabattack/data/preprocess.hpp"
#include "tabattack/error.hpp"

namespace tabattack {

Evaluation evaluate(std::span<const int> predictions, std::span<const int> labels, int class_count) {
  if (predictions.size() != labels.size()) throw DimensionError("evaluate: prediction and label counts differ");
  Evaluation e;
  e.confusion = Eigen::MatrixXi::Zero(class_count, class_count);
  e.correct_per_class.assign(static_cast<std::size_t>(class_count), 0);
  e.total_per_class.assign(static_cast<std::size_t>(class_count), 0);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i];
    const int p = predictions[i];
    if (y < 0 || y >= class_count || p < 0 || p >= class_count) throw IndexError("evaluate: class index out of range");
    ++e.confusion(y, p);
    ++e.total_per_class[static_cast<std::size_t>(y)];
    if (y == p) {
      ++e.correct_per_class[static_cast<std::size_t>(y)];
      ++correct;
    }
  }
  e.accuracy = labels.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(labels.size());
  return e;
}

Evaluation evaluate(const TargetModel& model, const EncodedDataset& split) {
  return evaluate(model.predict(split), split.y, model.class_count());
}

TrainHistory train_target(TargetModel& model, const EncodedDataset& train, const EncodedDataset& val,
                          const TrainOptions& options) {
  if (options.epochs < 0 || options.batch_size <= 0 || !(options.lr > 0.0)) {
    throw ConfigError("training needs epochs >= 0, batch_size > 0 and lr > 0");
  }
  if (train.size() == 0) throw ConfigError("empty training split");
  const auto& card = model.spec().cardinalities;
  const Matrix flat = to_flat(train, card);
  const Matrix val_flat = to_flat(val, card);

  TrainHistory history;
  Rng rng(options.seed);
  AdamState adam;
  AdamOptions adam_opts;
  adam_opts.lr = options.lr;
  ParameterStore best = model.params();
  int since_best = 0;

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto n = static_cast<Eigen::Index>(train.size());

  for (int epoch = 1; epoch <= options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (Eigen::Index start = 0; start < n; start += options.batch_size) {
      const Eigen::Index rows = std::min<Eigen::Index>(options.batch_size, n - start);
      Matrix xb(rows, flat.cols());
      std::vector<int> yb(static_cast<std::size_t>(rows));
      for (Eigen::Index r = 0; r < rows; ++r) {
        const std::size_t src = order[static_cast<std::size_t>(start + r)];
        xb.row(r) = flat.row(static_cast<Eigen::Index>(src));
        yb[static_cast<std::size_t>(r)] = train.y[src];
      }
      ad::Tape tape;
      Binder bind(tape, model.params(), true);
      double loss = 0.0;
      try {
        const ad::Var l = ad::softmax_crossentropy(model.forward(bind, tape.constant_ref(xb)), yb);
        loss = l.scalar();
        tape.backward(l);
      } catch (const NumericError& e) {
        throw TrainingError("target training diverged at epoch " + std::to_string(epoch) + ": " + e.what());
      }
      if (!std::isfinite(loss)) throw TrainingError("target training loss is NaN at epoch " + std::to_string(epoch));
      const auto grads = bind.gradients();
      auto params = model.params().trainable_values();
      adam_step(params, grads, adam, adam_opts);
      loss_sum += loss * static_cast<double>(rows);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = loss_sum / static_cast<double>(n);
    rec.train_accuracy = evaluate(model.predict(flat), train.y, model.class_count()).accuracy;
    rec.val_accuracy = val.size() ? evaluate(model.predict(val_flat), val.y, model.class_count()).accuracy : 0.0;
    history.epochs.push_back(rec);
    spdlog::debug("target epoch {} loss {:.5f} train_acc {:.4f} val_acc {:.4f}", epoch, rec.loss,
                  rec.train_accuracy, rec.val_accuracy);

    if (history.best_epoch < 0 || rec.val_accuracy > history.best_val_accuracy) {
      history.best_epoch = epoch;
      history.best_val_accuracy = rec.val_accuracy;
      best = model.params();
      since_best = 0;
    } else if (options.patience > 0 && ++since_best >= options.patience) {
      history.stopped_early = true;
      break;
    }
  }
  if (history.best_epoch > 0) model.params() = best;
  return history;
}

}  // namespace tabattack
