#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dcm/autodiff.hpp"
#include "dcm/data.hpp"
#include "dcm/featurenet.hpp"
#include "dcm/tensor.hpp"

namespace dcm {

enum class HeadKind { Baseline, Prototype, Mixture, Exemplar };

/// Covariance structure of prototype heads: identity, one shared variance per
/// class, or one variance per class and feature dimension. Mixture and
/// exemplar heads always use identity covariance.
enum class CovarianceMode { Identity, SharedScalar, AxisAligned };

/// How multi-center class scores combine: log-sum-exp over centers (a proper
/// uniform-weight mixture likelihood, with a -log K offset) or the plain sum
/// of negative squared distances.
enum class LogitMode { LogSumExp, NegSum };

enum class CenterInit { RandomNormal, FromProjections };

const char* to_string(HeadKind k);
const char* to_string(CovarianceMode m);
const char* to_string(LogitMode m);

struct HeadConfig {
  HeadKind kind = HeadKind::Prototype;
  std::size_t classes = 0;
  std::size_t feature_dim = 0;
  std::size_t components = 1;  // centers per class; exemplar counts come from data
  CovarianceMode covariance = CovarianceMode::Identity;
  LogitMode logit_mode = LogitMode::LogSumExp;
  bool use_logdet = true;       // include the -1/2 log-det term (prototype)
  bool frozen_centers = false;  // centers stay at their initialization
  std::vector<double> log_prior;  // constant per-class offsets; empty = zeros
};

/// Posterior over classes from learned centers (or a linear map for the
/// baseline kind). Center parameters are stored per class so exemplar heads
/// can hold a different center count for every class.
class CategorizationHead {
 public:
  /// Empty head; use create() to get a usable one.
  CategorizationHead() = default;

  static CategorizationHead create(const HeadConfig& cfg, std::uint64_t seed);

  /// Class logits [B x C] for a feature batch [B x D], recorded on the tape.
  Var logits(Tape& tape, const Var& features);

  /// Replaces all centers; per_class[c] must be [K_c x D]. Velocity-free
  /// reshaping used by from-projections initialization and model loading.
  void set_centers(const std::vector<Tensor>& per_class);

  std::vector<Parameter*> parameters();
  const HeadConfig& config() const { return cfg_; }
  std::size_t components_of(std::size_t cls) const;
  const Tensor& centers_of(std::size_t cls) const;

  /// Squared Mahalanobis distance under this head's covariance for one class,
  /// evaluated outside any tape.
  double mahalanobis_sq(const std::vector<double>& x, const std::vector<double>& center,
                        std::size_t cls) const;

 private:
  HeadConfig cfg_;
  std::vector<Parameter> params_;  // baseline: weight, bias; else centers.<c> [+ head.logvar]
  int logvar_index_ = -1;
};

/// Draws random-normal centers or projects training examples through the
/// (typically untrained) net. Exemplar heads require from-projections and
/// adopt one center per training example of each class.
void init_centers(CategorizationHead& head, CenterInit scheme, FeatureNet& net,
                  const LabeledDataset& data, std::uint64_t seed);

/// Row-wise max-shifted softmax. Throws on non-finite logits.
Tensor posterior_from_logits(const Tensor& logits);

/// Mean cross-entropy between one-hot labels and the softmax of the logits,
/// computed along the log-softmax path.
Var loss_onehot(Tape& tape, const Var& logits, const std::vector<std::size_t>& labels);

/// Mean over rows of -sum_c h[c] * log(max(y[c], 1e-12)). Rows of h must each
/// sum to 1 within 1e-6.
double human_fit_crossentropy(const Tensor& y, const Tensor& h);

}  // namespace dcm
