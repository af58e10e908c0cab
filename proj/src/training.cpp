#include "handover/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace handover {

void TrainConfig::validate() const {
  if (epochs < 1 || !(learning_rate > 0.0) || batch_size < 1 || hidden_dim < 1 ||
      !(clip_norm > 0.0) || beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
    throw Error(ErrorCode::InvalidConfig, "invalid training configuration");
  }
}

double batch_gradient(const IntentModel& model, std::span<const TrainingSequence> data,
                      std::span<const std::size_t> batch, std::span<double> grad, Exec exec) {
  const std::size_t P = model.param_count();
  std::vector<std::vector<double>> partial(batch.size());
  std::vector<double> losses(batch.size(), 0.0);
  parallel_for(exec, batch.size(), [&](std::size_t b) {
    partial[b].assign(P, 0.0);
    losses[b] = sequence_loss_and_gradient(model, data[batch[b]], partial[b]);
  });
  double loss = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    loss += losses[b];
    for (std::size_t i = 0; i < P; ++i) grad[i] += partial[b][i];
  }
  return loss;
}

TrainResult train(std::span<const TrainingSequence> data, const GridSpec& grid,
                  const TrainConfig& config, Exec exec, const EpochCallback& on_epoch) {
  config.validate();
  if (data.empty()) throw Error(ErrorCode::EmptyDataset, "no training trajectories");
  for (const auto& seq : data) {
    if (seq.inputs.size() < 2) {
      throw Error(ErrorCode::EmptyDataset, "every trajectory needs at least two frames");
    }
  }

  ModelShape shape;
  shape.grid = grid;
  shape.hidden_dim = config.hidden_dim;
  TrainResult result{IntentModel::initialized(shape, config.seed), {}};
  IntentModel& model = result.model;
  auto params = model.params();
  const std::size_t P = params.size();

  std::vector<double> grad(P), m1(P, 0.0), m2(P, 0.0);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  long step = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t end = std::min(order.size(), start + config.batch_size);
      const std::span<const std::size_t> batch(order.data() + start, end - start);
      std::fill(grad.begin(), grad.end(), 0.0);
      const double loss = batch_gradient(model, data, batch, grad, exec);
      if (!std::isfinite(loss)) {
        throw Error(ErrorCode::NonFiniteLoss, "loss diverged in epoch " + std::to_string(epoch));
      }
      epoch_loss += loss;

      const double inv = 1.0 / static_cast<double>(batch.size());
      double norm2 = 0.0;
      for (double& g : grad) {
        g *= inv;
        norm2 += g * g;
      }
      const double norm = std::sqrt(norm2);
      if (!std::isfinite(norm)) throw Error(ErrorCode::NonFiniteLoss, "non-finite gradient");
      const double clip = norm > config.clip_norm ? config.clip_norm / norm : 1.0;

      ++step;
      const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
      for (std::size_t i = 0; i < P; ++i) {
        const double g = grad[i] * clip;
        m1[i] = config.beta1 * m1[i] + (1.0 - config.beta1) * g;
        m2[i] = config.beta2 * m2[i] + (1.0 - config.beta2) * g * g;
        params[i] -= config.learning_rate * (m1[i] / bc1) / (std::sqrt(m2[i] / bc2) + config.adam_eps);
      }
    }
    const double mean = epoch_loss / static_cast<double>(data.size());
    result.epoch_loss.push_back(mean);
    if (on_epoch) on_epoch(epoch, mean);
  }
  return result;
}

}  // namespace handover
