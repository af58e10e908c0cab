#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "handover/intent_model.hpp"
#include "handover/parallel.hpp"

namespace handover {

struct TrainConfig {
  int epochs = 80;
  double learning_rate = 1e-3;
  int batch_size = 4;
  std::uint64_t seed = 1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double clip_norm = 5.0;
  int hidden_dim = 64;

  void validate() const;
};

struct TrainResult {
  IntentModel model;
  std::vector<double> epoch_loss;  // mean per-trajectory sequence loss
};

using EpochCallback = std::function<void(int epoch, double mean_loss)>;

/// Adam over full-BPTT gradients of the confidence-weighted sequence loss.
/// Per-trajectory gradients of a batch are computed under `exec` and summed in
/// batch order, so the result does not depend on the thread count.
/// Throws EmptyDataset, NonFiniteLoss.
TrainResult train(std::span<const TrainingSequence> data, const GridSpec& grid,
                  const TrainConfig& config, Exec exec = Exec::Parallel,
                  const EpochCallback& on_epoch = {});

/// Sum of per-sequence gradients for one batch (the data-parallel kernel of
/// training). Returns the summed loss.
double batch_gradient(const IntentModel& model, std::span<const TrainingSequence> data,
                      std::span<const std::size_t> batch, std::span<double> grad, Exec exec);

}  // namespace handover
