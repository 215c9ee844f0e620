#include "doctest.h"

#include <cmath>
#include <vector>

#include "dcm/data.hpp"
#include "dcm/errors.hpp"
#include "dcm/featurenet.hpp"
#include "dcm/heads.hpp"
#include "dcm/optim.hpp"

using namespace dcm;

namespace {

Parameter scalar_param(double value, double grad) {
  Parameter p("p", Tensor({1}, {value}));
  p.value.enable_grad();
  p.value.grad()[0] = grad;
  return p;
}

TrainConfig plain_sgd(double lr) {
  TrainConfig cfg;
  cfg.learning_rate = lr;
  cfg.momentum = 0.0;
  cfg.decay = 0.0;
  return cfg;
}

}  // namespace

TEST_CASE("validate rejects out-of-range settings") {
  TrainConfig cfg;
  CHECK_NOTHROW(validate(cfg));
  cfg.learning_rate = 0.0;
  CHECK_THROWS_AS(validate(cfg), ConfigError);
  cfg = TrainConfig{};
  cfg.momentum = 1.0;
  CHECK_THROWS_AS(validate(cfg), ConfigError);
  cfg.momentum = -0.1;
  CHECK_THROWS_AS(validate(cfg), ConfigError);
  cfg = TrainConfig{};
  cfg.decay = -1e-9;
  CHECK_THROWS_AS(validate(cfg), ConfigError);
  cfg = TrainConfig{};
  cfg.batch_size = 0;
  CHECK_THROWS_AS(validate(cfg), ConfigError);
}

TEST_CASE("nesterov_step hand example") {
  // theta = 0, v = 0, g = 1, lr = 0.01, momentum = 0.9:
  // v' = -0.01, theta' = 0.9 * v' - 0.01 = -0.019
  Parameter p = scalar_param(0.0, 1.0);
  std::vector<Parameter*> params{&p};
  OptimizerState state = make_state(params);
  TrainConfig cfg;
  cfg.decay = 0.0;
  nesterov_step(params, state, cfg);
  CHECK(state.velocity[0][0] == doctest::Approx(-0.01).epsilon(1e-12));
  CHECK(p.value[0] == doctest::Approx(-0.019).epsilon(1e-12));
  CHECK(state.step_count == 1);

  // second identical gradient: v = 0.9*(-0.01) - 0.01 = -0.019,
  // theta += 0.9*(-0.019) - 0.01 -> -0.0461
  nesterov_step(params, state, cfg);
  CHECK(state.velocity[0][0] == doctest::Approx(-0.019).epsilon(1e-12));
  CHECK(p.value[0] == doctest::Approx(-0.0461).epsilon(1e-12));
}

TEST_CASE("momentum-free steps reduce to vanilla gradient descent") {
  // loss = theta^2 / 2 so g = theta; ten steps at lr 0.1 give 0.9^10
  Parameter p = scalar_param(1.0, 1.0);
  std::vector<Parameter*> params{&p};
  OptimizerState state = make_state(params);
  TrainConfig cfg = plain_sgd(0.1);
  for (int i = 0; i < 10; ++i) {
    p.value.grad()[0] = p.value[0];
    nesterov_step(params, state, cfg);
  }
  CHECK(p.value[0] == doctest::Approx(std::pow(0.9, 10)).epsilon(1e-12));
}

TEST_CASE("learning-rate decay follows 1 / (1 + decay * t)") {
  Parameter p = scalar_param(0.0, 1.0);
  std::vector<Parameter*> params{&p};
  OptimizerState state = make_state(params);
  state.step_count = 1000000;  // decay 1e-6 halves the rate here
  TrainConfig cfg = plain_sgd(0.01);
  cfg.decay = 1e-6;
  nesterov_step(params, state, cfg);
  CHECK(p.value[0] == doctest::Approx(-0.005).epsilon(1e-12));
}

TEST_CASE("frozen parameters are skipped entirely") {
  Parameter live = scalar_param(1.0, 1.0);
  Parameter iced = scalar_param(1.0, 1.0);
  iced.frozen = true;
  std::vector<Parameter*> params{&live, &iced};
  OptimizerState state = make_state(params);
  TrainConfig cfg = plain_sgd(0.1);
  nesterov_step(params, state, cfg);
  CHECK(live.value[0] == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(iced.value[0] == 1.0);
  CHECK(state.velocity[1][0] == 0.0);
}

TEST_CASE("state must track the same parameter list") {
  Parameter a = scalar_param(0.0, 1.0);
  Parameter b = scalar_param(0.0, 1.0);
  std::vector<Parameter*> one{&a};
  OptimizerState state = make_state(one);
  std::vector<Parameter*> two{&a, &b};
  TrainConfig cfg;
  CHECK_THROWS_AS(nesterov_step(two, state, cfg), DimensionError);
}

namespace {

struct FitRun {
  TrainHistory history;
  std::vector<double> final_params;
};

FitRun run_mixture_fit(const LabeledDataset& data, std::size_t epochs) {
  FeatureNet net = FeatureNet::identity();
  HeadConfig hc;
  hc.kind = HeadKind::Mixture;
  hc.classes = data.classes;
  hc.feature_dim = data.inputs.shape()[1];
  hc.components = 2;
  CategorizationHead head = CategorizationHead::create(hc, 3);
  init_centers(head, CenterInit::FromProjections, net, data, 3);

  TrainConfig cfg;
  cfg.epochs = epochs;
  FitRun out;
  out.history = fit(net, head, data, cfg);
  for (Parameter* p : head.parameters()) {
    out.final_params.insert(out.final_params.end(), p->value.values().begin(),
                            p->value.values().end());
  }
  return out;
}

}  // namespace

TEST_CASE("fit is deterministic bit for bit") {
  LabeledDataset data = gen_blobs(3, 30, 2, 8.0, 3);
  FitRun a = run_mixture_fit(data, 5);
  FitRun b = run_mixture_fit(data, 5);
  REQUIRE(a.history.epochs.size() == 5);
  for (std::size_t e = 0; e < 5; ++e) {
    CHECK(a.history.epochs[e].loss == b.history.epochs[e].loss);
    CHECK(a.history.epochs[e].accuracy == b.history.epochs[e].accuracy);
  }
  CHECK(a.final_params == b.final_params);
}

TEST_CASE("fit learns well-separated blobs") {
  LabeledDataset data = gen_blobs(3, 40, 2, 8.0, 3);
  FitRun run = run_mixture_fit(data, 10);
  const auto& epochs = run.history.epochs;
  REQUIRE(epochs.size() == 10);
  for (const EpochStats& e : epochs) {
    CHECK(std::isfinite(e.loss));
    CHECK(e.accuracy >= 0.0);
    CHECK(e.accuracy <= 1.0);
  }
  CHECK(epochs.back().accuracy >= 0.95);
  CHECK(epochs.back().loss < epochs.front().loss);
}

TEST_CASE("fit leaves frozen centers exactly at their initialization") {
  LabeledDataset data = gen_blobs(2, 20, 2, 8.0, 5);
  FeatureNet net = FeatureNet::identity();
  HeadConfig hc;
  hc.kind = HeadKind::Prototype;
  hc.classes = 2;
  hc.feature_dim = 2;
  hc.covariance = CovarianceMode::SharedScalar;  // leaves something learnable
  hc.frozen_centers = true;
  CategorizationHead head = CategorizationHead::create(hc, 3);
  init_centers(head, CenterInit::FromProjections, net, data, 3);
  std::vector<double> before0 = head.centers_of(0).values();
  std::vector<double> before1 = head.centers_of(1).values();
  std::vector<double> logvar_before = head.parameters()[2]->value.values();

  TrainConfig cfg;
  cfg.epochs = 3;
  fit(net, head, data, cfg);
  CHECK(head.centers_of(0).values() == before0);
  CHECK(head.centers_of(1).values() == before1);
  CHECK(head.parameters()[2]->value.values() != logvar_before);
}

TEST_CASE("fit input validation") {
  FeatureNet net = FeatureNet::identity();
  HeadConfig hc;
  hc.kind = HeadKind::Prototype;
  hc.classes = 2;
  hc.feature_dim = 2;
  CategorizationHead head = CategorizationHead::create(hc, 1);
  TrainConfig cfg;

  LabeledDataset empty;
  empty.classes = 2;
  empty.inputs = Tensor({0, 2});
  CHECK_THROWS_AS(fit(net, head, empty, cfg), DataError);

  LabeledDataset bad;
  bad.classes = 2;
  bad.inputs = Tensor({2, 2}, {0, 0, 1, 1});
  bad.labels = {0, 5};
  CHECK_THROWS_AS(fit(net, head, bad, cfg), DataError);

  LabeledDataset ok = gen_blobs(2, 5, 2, 8.0, 1);
  cfg.learning_rate = -1.0;
  CHECK_THROWS_AS(fit(net, head, ok, cfg), ConfigError);
}
