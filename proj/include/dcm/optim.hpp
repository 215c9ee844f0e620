#pragma once

#include <cstdint>
#include <vector>

#include "dcm/data.hpp"
#include "dcm/featurenet.hpp"
#include "dcm/heads.hpp"
#include "dcm/tensor.hpp"

namespace dcm {

struct TrainConfig {
  double learning_rate = 0.01;
  double decay = 1e-6;   // per-update rate decay: eta_t = lr / (1 + decay * t)
  double momentum = 0.9;
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;
};

void validate(const TrainConfig& cfg);

struct OptimizerState {
  std::vector<std::vector<double>> velocity;  // parallel to the parameter list
  std::size_t step_count = 0;
};

OptimizerState make_state(const std::vector<Parameter*>& params);

/// One Nesterov update from the gradients currently stored on the parameters:
/// v <- m*v - eta_t*g, theta <- theta + m*v - eta_t*g. Frozen parameters and
/// their velocities are untouched.
void nesterov_step(const std::vector<Parameter*>& params, OptimizerState& state,
                   const TrainConfig& cfg);

struct EpochStats {
  double loss = 0.0;
  double accuracy = 0.0;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
};

/// Minibatched supervised training of net + head on one-hot labels. Shuffles
/// with seed + epoch each epoch; records running train loss/accuracy.
TrainHistory fit(FeatureNet& net, CategorizationHead& head, const LabeledDataset& data,
                 const TrainConfig& cfg);

}  // namespace dcm
