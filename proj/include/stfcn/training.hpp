#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "stfcn/datapipe.hpp"
#include "stfcn/model.hpp"

namespace stfcn {

struct TrainConfig {
  Index batch_size = 32;
  double learning_rate = 0.01;
  double adagrad_epsilon = 1e-8;
  Index max_epochs = 200;
  Index patience = 10;
  /// Taken from the time-ordered tail of the samples, never shuffled in.
  double validation_fraction = 0.1;
  std::uint64_t seed = 1;
  /// Worker threads for per-sample passes; results do not depend on it.
  unsigned threads = 1;

  void validate() const;
};

struct EpochRecord {
  Index epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  Index stopped_epoch = 0;
  Index best_epoch = 0;
  std::uint64_t checksum = 0;
};

/// Mean squared error over cells.
double mse_loss(const Tensord& pred, const Tensord& target);
/// d(mse_loss)/d(pred).
Tensord mse_gradient(const Tensord& pred, const Tensord& target);

struct AdagradState {
  std::vector<Tensord> accumulators;
};

AdagradState make_adagrad_state(const ModelGraph& model);

/// acc += g^2; p -= lr * g / (sqrt(acc) + eps), elementwise.
void adagrad_step(std::span<Tensord* const> params, std::span<const Tensord> grads, AdagradState& state, double lr,
                  double eps);

/// Loss of one sample and its parameter gradient.
double sample_gradient(const ModelGraph& model, const VolumeSample& sample, Gradients& grads);

/// Mean loss and mean gradient over `indices`. Per-sample gradients are summed
/// in the order of `indices` whatever the thread count.
double batch_gradient(const ModelGraph& model, std::span<const VolumeSample> samples, std::span<const std::size_t> indices,
                      unsigned threads, Gradients& grads);

/// Mean loss over a set of samples.
double mean_loss(const ModelGraph& model, std::span<const VolumeSample> samples, unsigned threads);

/// Minibatch Adagrad with early stopping on the validation tail. The
/// parameters of the best validation epoch are left in `model`.
TrainReport train(ModelGraph& model, std::span<const VolumeSample> samples, const TrainConfig& config,
                  std::ostream* log = nullptr);

/// `epoch,train_loss,val_loss` lines.
void write_train_report(std::ostream& out, const TrainReport& report);

/// Runs fn(k) for k in [0, n) on up to `threads` threads.
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

}  // namespace stfcn
