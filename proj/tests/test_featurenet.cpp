#include "doctest.h"

#include <cmath>
#include <string>
#include <vector>

#include "dcm/autodiff.hpp"
#include "dcm/errors.hpp"
#include "dcm/featurenet.hpp"

using namespace dcm;

namespace {

std::string error_of(const std::vector<LayerSpec>& layers) {
  try {
    FeatureNet::build(layers, 1);
    return "";
  } catch (const ConfigError& e) {
    return e.what();
  }
}

}  // namespace

TEST_CASE("build: parameter layout and counts") {
  FeatureNet net = FeatureNet::build(
      {LayerSpec::dense(2, 4), LayerSpec::relu(), LayerSpec::dense(4, 3)}, 7);
  // dense(2,4): 8 weights + 4 biases; dense(4,3): 12 + 3
  CHECK(net.param_count() == 27);
  CHECK(net.feature_dim() == 3);

  auto params = net.parameters();
  REQUIRE(params.size() == 4);
  CHECK(params[0]->name == "feature.0.weight");
  CHECK(params[0]->value.shape() == Shape{2, 4});
  CHECK(params[1]->name == "feature.0.bias");
  CHECK(params[1]->value.shape() == Shape{4});
  CHECK(params[2]->name == "feature.2.weight");
  CHECK(params[2]->value.shape() == Shape{4, 3});
  CHECK(params[3]->name == "feature.2.bias");

  // biases start at zero, weights do not
  for (double v : params[1]->value.values()) CHECK(v == 0.0);
  double wmax = 0;
  for (double v : params[0]->value.values()) wmax = std::max(wmax, std::abs(v));
  CHECK(wmax > 0.0);

  FeatureNet conv = FeatureNet::build(
      {LayerSpec::conv2d(1, 2, 3), LayerSpec::relu(), LayerSpec::flatten(),
       LayerSpec::dense(8, 5)},
      7);
  auto cp = conv.parameters();
  REQUIRE(cp.size() == 3);  // conv kernels carry no bias
  CHECK(cp[0]->name == "feature.0.kernel");
  CHECK(cp[0]->value.shape() == Shape{2, 1, 3, 3});
  CHECK(conv.param_count() == 2 * 9 + 8 * 5 + 5);
}

TEST_CASE("build: seeded init is reproducible and scaled to fan-in") {
  FeatureNet a = FeatureNet::build({LayerSpec::dense(100, 50)}, 3);
  FeatureNet b = FeatureNet::build({LayerSpec::dense(100, 50)}, 3);
  FeatureNet c = FeatureNet::build({LayerSpec::dense(100, 50)}, 4);
  CHECK(a.parameters()[0]->value.values() == b.parameters()[0]->value.values());
  CHECK(a.parameters()[0]->value.values() != c.parameters()[0]->value.values());

  // sample stddev of 5000 weights should land near sqrt(2/100)
  const auto& w = a.parameters()[0]->value.values();
  double mean = 0;
  for (double v : w) mean += v;
  mean /= static_cast<double>(w.size());
  double var = 0;
  for (double v : w) var += (v - mean) * (v - mean);
  var /= static_cast<double>(w.size());
  CHECK(std::sqrt(var) == doctest::Approx(std::sqrt(2.0 / 100.0)).epsilon(0.1));
  CHECK(std::abs(mean) < 0.01);
}

TEST_CASE("build: dimension-chain validation cites the layer") {
  CHECK(error_of({}) != "");

  std::string e = error_of({LayerSpec::dense(2, 4), LayerSpec::dense(5, 3)});
  CHECK(e.find("feature layer 1") != std::string::npos);
  CHECK(e.find("width 4") != std::string::npos);

  e = error_of({LayerSpec::conv2d(1, 2, 3), LayerSpec::dense(8, 5)});
  CHECK(e.find("feature layer 1") != std::string::npos);
  CHECK(e.find("flatten") != std::string::npos);

  e = error_of({LayerSpec::dense(2, 4), LayerSpec::conv2d(4, 2, 3)});
  CHECK(e.find("conv2d cannot follow") != std::string::npos);

  e = error_of({LayerSpec::conv2d(1, 2, 3), LayerSpec::conv2d(3, 2, 3)});
  CHECK(e.find("feature layer 1") != std::string::npos);
  CHECK(e.find("2 channels") != std::string::npos);

  CHECK(error_of({LayerSpec::dense(0, 4)}) != "");
  CHECK(error_of({LayerSpec::conv2d(1, 2, 0)}) != "");

  // relu and flatten are shape-preserving / resetting, so these chains pass
  CHECK(error_of({LayerSpec::flatten(), LayerSpec::dense(9, 2)}) == "");
  CHECK(error_of({LayerSpec::relu(), LayerSpec::dense(9, 2)}) == "");
}

TEST_CASE("identity net flattens and nothing else") {
  FeatureNet net = FeatureNet::identity();
  CHECK(net.param_count() == 0);
  CHECK(net.parameters().empty());
  CHECK(net.feature_dim() == 0);  // unknown until it sees data

  Tape tape;
  Var flat = tape.constant(Tensor({2, 3}, {1, 2, 3, 4, 5, 6}));
  Var out = net.forward(tape, flat);
  CHECK(out.shape() == Shape{2, 3});
  CHECK(out.values() == flat.values());

  // the width is pinned by the first batch it sees
  CHECK(net.feature_dim() == 3);

  FeatureNet image_net = FeatureNet::identity();
  Var img = tape.constant(Tensor({2, 1, 2, 2}, {1, 2, 3, 4, 5, 6, 7, 8}));
  Var fout = image_net.forward(tape, img);
  CHECK(fout.shape() == Shape{2, 4});
  CHECK(fout.values() == img.values());
  CHECK(image_net.feature_dim() == 4);
}

TEST_CASE("forward matches hand computation with planted weights") {
  FeatureNet net = FeatureNet::build({LayerSpec::dense(2, 2), LayerSpec::relu()}, 1);
  auto params = net.parameters();
  params[0]->value = Tensor({2, 2}, {1, 0, 0, 1});   // identity weights
  params[1]->value = Tensor({2}, {1, -10});          // bias pushes col 1 negative

  Tape tape;
  Var x = tape.constant(Tensor({2, 2}, {1, 2, 3, 4}));
  Var y = net.forward(tape, x);
  // x + b, then relu clamps the second column
  CHECK(y.values() == std::vector<double>{2, 0, 4, 0});
}

TEST_CASE("forward relu zeroes an all-negative activation") {
  FeatureNet net = FeatureNet::build({LayerSpec::dense(2, 3), LayerSpec::relu()}, 1);
  auto params = net.parameters();
  for (auto& v : params[0]->value.values()) v = 0.0;
  params[1]->value = Tensor({3}, {-1, -2, -3});

  Tape tape;
  Var x = tape.constant(Tensor({1, 2}, {5, 5}));
  CHECK(net.forward(tape, x).values() == std::vector<double>{0, 0, 0});
}

TEST_CASE("forward wires parameters into the tape gradient flow") {
  FeatureNet net = FeatureNet::build({LayerSpec::dense(2, 2)}, 9);
  Tape tape;
  Var x = tape.constant(Tensor({3, 2}, {1, 2, 3, 4, 5, 6}));
  Var loss = reduce_sum(net.forward(tape, x));
  auto params = net.parameters();
  for (auto* p : params) {
    p->value.enable_grad();
    p->value.zero_grad();
  }
  tape.backward(loss);
  // d(sum(XW + b))/dW = column sums of X in every output column
  CHECK(params[0]->value.grad() == std::vector<double>{9, 9, 12, 12});
  CHECK(params[1]->value.grad() == std::vector<double>{3, 3});
}

TEST_CASE("conv stack forward shape and feature_dim discovery") {
  FeatureNet net = FeatureNet::build(
      {LayerSpec::conv2d(1, 2, 2), LayerSpec::relu(), LayerSpec::flatten(),
       LayerSpec::dense(8, 5)},
      2);
  CHECK(net.feature_dim() == 5);

  Tape tape;
  std::vector<double> img(9);
  for (std::size_t i = 0; i < 9; ++i) img[i] = static_cast<double>(i) / 9.0;
  Var x = tape.constant(Tensor({1, 1, 3, 3}, img));
  Var y = net.forward(tape, x);
  CHECK(y.shape() == Shape{1, 5});

  // a stack that never reaches [B x D] is rejected at forward time
  FeatureNet convs = FeatureNet::build({LayerSpec::conv2d(1, 2, 2)}, 2);
  Tape t2;
  Var x2 = t2.constant(Tensor({1, 1, 3, 3}, img));
  CHECK_THROWS_AS(convs.forward(t2, x2), DimensionError);
}
