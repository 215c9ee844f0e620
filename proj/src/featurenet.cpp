#include "dcm/featurenet.hpp"

#include <cmath>
#include <random>
#include <string>

#include "dcm/errors.hpp"

namespace dcm {

LayerSpec LayerSpec::dense(std::size_t in, std::size_t out) {
  LayerSpec s;
  s.kind = Kind::Dense;
  s.in = in;
  s.out = out;
  return s;
}

LayerSpec LayerSpec::relu() {
  LayerSpec s;
  s.kind = Kind::Relu;
  return s;
}

LayerSpec LayerSpec::conv2d(std::size_t in_channels, std::size_t out_channels,
                            std::size_t kernel, std::size_t stride) {
  LayerSpec s;
  s.kind = Kind::Conv2d;
  s.in_channels = in_channels;
  s.out_channels = out_channels;
  s.kernel = kernel;
  s.stride = stride;
  return s;
}

LayerSpec LayerSpec::flatten() {
  LayerSpec s;
  s.kind = Kind::Flatten;
  return s;
}

namespace {

// Width tracking while validating the chain: vector width, image channels, or
// unknown (after flatten, before the next dense pins it down).
struct ChainState {
  enum class Kind { Unset, Vector, Image, UnknownVector } kind = Kind::Unset;
  std::size_t width = 0;  // vector width or image channels
};

[[noreturn]] void chain_error(std::size_t index, const std::string& what) {
  throw ConfigError("feature layer " + std::to_string(index) + ": " + what);
}

}  // namespace

FeatureNet FeatureNet::build(const std::vector<LayerSpec>& layers, std::uint64_t seed) {
  if (layers.empty()) throw ConfigError("feature net needs at least one layer");

  ChainState state;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    switch (l.kind) {
      case LayerSpec::Kind::Dense:
        if (l.in == 0 || l.out == 0) chain_error(i, "dense extents must be positive");
        if (state.kind == ChainState::Kind::Vector && state.width != l.in) {
          chain_error(i, "dense expects width " + std::to_string(state.width) +
                             " from the previous layer, declared " + std::to_string(l.in));
        }
        if (state.kind == ChainState::Kind::Image) {
          chain_error(i, "dense cannot follow an image layer without flatten");
        }
        state = {ChainState::Kind::Vector, l.out};
        break;
      case LayerSpec::Kind::Conv2d:
        if (l.in_channels == 0 || l.out_channels == 0 || l.kernel == 0 || l.stride == 0) {
          chain_error(i, "conv2d extents must be positive");
        }
        if (state.kind == ChainState::Kind::Vector ||
            state.kind == ChainState::Kind::UnknownVector) {
          chain_error(i, "conv2d cannot follow a vector-producing layer");
        }
        if (state.kind == ChainState::Kind::Image && state.width != l.in_channels) {
          chain_error(i, "conv2d expects " + std::to_string(state.width) +
                             " channels from the previous layer, declared " +
                             std::to_string(l.in_channels));
        }
        state = {ChainState::Kind::Image, l.out_channels};
        break;
      case LayerSpec::Kind::Relu:
        break;  // shape-preserving
      case LayerSpec::Kind::Flatten:
        state = {ChainState::Kind::UnknownVector, 0};
        break;
    }
  }

  FeatureNet net;
  net.layers_ = layers;
  net.feature_dim_ = state.kind == ChainState::Kind::Vector ? state.width : 0;

  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    const std::string prefix = "feature." + std::to_string(i);
    switch (l.kind) {
      case LayerSpec::Kind::Dense: {
        net.first_param_.push_back(static_cast<int>(net.params_.size()));
        const double stddev = std::sqrt(2.0 / static_cast<double>(l.in));
        net.params_.emplace_back(prefix + ".weight",
                                 Tensor::randn({l.in, l.out}, rng, stddev));
        net.params_.emplace_back(prefix + ".bias", Tensor::zeros({l.out}));
        break;
      }
      case LayerSpec::Kind::Conv2d: {
        net.first_param_.push_back(static_cast<int>(net.params_.size()));
        const double fan_in =
            static_cast<double>(l.in_channels) * static_cast<double>(l.kernel * l.kernel);
        net.params_.emplace_back(
            prefix + ".kernel",
            Tensor::randn({l.out_channels, l.in_channels, l.kernel, l.kernel}, rng,
                          std::sqrt(2.0 / fan_in)));
        break;
      }
      default:
        net.first_param_.push_back(-1);
        break;
    }
  }
  return net;
}

FeatureNet FeatureNet::identity() {
  FeatureNet net;
  net.layers_ = {LayerSpec::flatten()};
  net.first_param_ = {-1};
  return net;
}

Var FeatureNet::forward(Tape& tape, const Var& batch) {
  if (batch.shape().empty()) {
    throw DimensionError("feature net input needs a leading batch axis");
  }
  Var x = batch;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const LayerSpec& l = layers_[i];
    switch (l.kind) {
      case LayerSpec::Kind::Dense: {
        Var w = tape.param(params_[first_param_[i]]);
        Var b = tape.param(params_[first_param_[i] + 1]);
        x = add(matmul(x, w), b);
        break;
      }
      case LayerSpec::Kind::Conv2d:
        x = conv2d(x, tape.param(params_[first_param_[i]]), l.stride);
        break;
      case LayerSpec::Kind::Relu:
        x = relu(x);
        break;
      case LayerSpec::Kind::Flatten: {
        const std::size_t rows = x.shape()[0];
        x = reshape(x, {rows, rows == 0 ? 0 : x.size() / rows});
        break;
      }
    }
  }
  if (x.shape().size() != 2) {
    throw DimensionError("feature stack must end in [B x D] features, got " +
                         shape_str(x.shape()));
  }
  if (feature_dim_ == 0) feature_dim_ = x.shape()[1];
  return x;
}

std::vector<Parameter*> FeatureNet::parameters() {
  std::vector<Parameter*> out;
  out.reserve(params_.size());
  for (Parameter& p : params_) out.push_back(&p);
  return out;
}

std::size_t FeatureNet::param_count() const {
  std::size_t n = 0;
  for (const Parameter& p : params_) n += p.value.size();
  return n;
}

}  // namespace dcm
