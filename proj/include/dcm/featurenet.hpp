#pragma once

#include <cstdint>
#include <vector>

#include "dcm/autodiff.hpp"
#include "dcm/tensor.hpp"

namespace dcm {

struct LayerSpec {
  enum class Kind { Dense, Relu, Conv2d, Flatten };
  Kind kind = Kind::Relu;
  std::size_t in = 0, out = 0;                     // dense
  std::size_t in_channels = 0, out_channels = 0;   // conv2d
  std::size_t kernel = 0, stride = 1;              // conv2d

  static LayerSpec dense(std::size_t in, std::size_t out);
  static LayerSpec relu();
  static LayerSpec conv2d(std::size_t in_channels, std::size_t out_channels,
                          std::size_t kernel, std::size_t stride = 1);
  static LayerSpec flatten();
};

/// The learnable stimulus transformation: an ordered layer stack mapping a
/// batch of raw inputs to [B x feature_dim] features on the active tape.
class FeatureNet {
 public:
  /// Empty net; use build() or identity() to get a usable one.
  FeatureNet() = default;

  /// Validates the dimension chain and initializes parameters from the seed
  /// (weights ~ Normal(0, sqrt(2 / fan_in)), biases zero, conv kernels
  /// bias-free).
  static FeatureNet build(const std::vector<LayerSpec>& layers, std::uint64_t seed);

  /// Parameter-free net that only flattens its input: features == raw values.
  static FeatureNet identity();

  Var forward(Tape& tape, const Var& batch);

  std::vector<Parameter*> parameters();
  std::size_t param_count() const;  // total scalar parameters

  /// Output width when statically known (stack ends in a dense layer), else 0.
  std::size_t feature_dim() const { return feature_dim_; }
  const std::vector<LayerSpec>& layers() const { return layers_; }

 private:
  std::vector<LayerSpec> layers_;
  std::vector<Parameter> params_;
  std::vector<int> first_param_;  // index into params_ per layer, -1 if none
  std::size_t feature_dim_ = 0;
};

}  // namespace dcm
