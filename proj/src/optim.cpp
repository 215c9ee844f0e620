#include "dcm/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "dcm/errors.hpp"

namespace dcm {

void validate(const TrainConfig& cfg) {
  if (!(cfg.learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (cfg.momentum < 0.0 || cfg.momentum >= 1.0) {
    throw ConfigError("momentum must lie in [0, 1)");
  }
  if (cfg.decay < 0.0) throw ConfigError("decay must be non-negative");
  if (cfg.batch_size < 1) throw ConfigError("batch_size must be positive");
}

OptimizerState make_state(const std::vector<Parameter*>& params) {
  OptimizerState state;
  state.velocity.reserve(params.size());
  for (const Parameter* p : params) {
    state.velocity.emplace_back(p->value.size(), 0.0);
  }
  return state;
}

void nesterov_step(const std::vector<Parameter*>& params, OptimizerState& state,
                   const TrainConfig& cfg) {
  if (state.velocity.size() != params.size()) {
    throw DimensionError("optimizer state tracks " +
                         std::to_string(state.velocity.size()) + " parameters, got " +
                         std::to_string(params.size()));
  }
  const double eta = cfg.learning_rate /
                     (1.0 + cfg.decay * static_cast<double>(state.step_count));
  const double m = cfg.momentum;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    if (p.frozen) continue;
    std::vector<double>& v = state.velocity[i];
    if (v.size() != p.value.size()) {
      throw DimensionError("velocity shape does not match parameter " + p.name);
    }
    const std::vector<double>& g = p.value.grad();
    std::vector<double>& theta = p.value.values();
    for (std::size_t j = 0; j < v.size(); ++j) {
      v[j] = m * v[j] - eta * g[j];
      theta[j] += m * v[j] - eta * g[j];
    }
  }
  ++state.step_count;
}

TrainHistory fit(FeatureNet& net, CategorizationHead& head, const LabeledDataset& data,
                 const TrainConfig& cfg) {
  validate(cfg);
  if (data.size() == 0) throw DataError("cannot fit on an empty dataset");
  const std::size_t classes = head.config().classes;
  for (std::size_t l : data.labels) {
    if (l >= classes) {
      throw DataError("label " + std::to_string(l) + " out of range for " +
                      std::to_string(classes) + " classes");
    }
  }

  std::vector<Parameter*> params = net.parameters();
  for (Parameter* p : head.parameters()) params.push_back(p);
  OptimizerState state = make_state(params);

  TrainHistory history;
  const std::size_t n = data.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::mt19937_64 shuffle_rng(cfg.seed + epoch);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t stop = std::min(n, start + cfg.batch_size);
      std::vector<std::size_t> rows(order.begin() + start, order.begin() + stop);
      std::vector<std::size_t> labels;
      labels.reserve(rows.size());
      for (std::size_t r : rows) labels.push_back(data.labels[r]);

      for (Parameter* p : params) p->value.zero_grad();
      Tape tape;
      Var x = tape.constant(take_rows(data.inputs, rows));
      Var logits = head.logits(tape, net.forward(tape, x));

      // running train accuracy from the pre-update forward pass
      const std::vector<double>& lv = logits.values();
      for (std::size_t r = 0; r < rows.size(); ++r) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < classes; ++c) {
          if (lv[r * classes + c] > lv[r * classes + best]) best = c;
        }
        if (best == labels[r]) ++correct;
      }

      Var loss = loss_onehot(tape, logits, labels);
      loss_sum += loss.item() * static_cast<double>(rows.size());
      tape.backward(loss);
      nesterov_step(params, state, cfg);
    }
    history.epochs.push_back(EpochStats{loss_sum / static_cast<double>(n),
                                        static_cast<double>(correct) /
                                            static_cast<double>(n)});
  }
  return history;
}

}  // namespace dcm
