#include "dcm/heads.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "dcm/errors.hpp"

namespace dcm {

const char* to_string(HeadKind k) {
  switch (k) {
    case HeadKind::Baseline: return "baseline";
    case HeadKind::Prototype: return "prototype";
    case HeadKind::Mixture: return "mixture";
    case HeadKind::Exemplar: return "exemplar";
  }
  return "?";
}

const char* to_string(CovarianceMode m) {
  switch (m) {
    case CovarianceMode::Identity: return "identity";
    case CovarianceMode::SharedScalar: return "shared_scalar";
    case CovarianceMode::AxisAligned: return "axis_aligned";
  }
  return "?";
}

const char* to_string(LogitMode m) {
  switch (m) {
    case LogitMode::LogSumExp: return "lse";
    case LogitMode::NegSum: return "negsum";
  }
  return "?";
}

CategorizationHead CategorizationHead::create(const HeadConfig& cfg, std::uint64_t seed) {
  if (cfg.classes < 1) throw ConfigError("head needs at least one class");
  if (cfg.feature_dim < 1) throw ConfigError("head needs a positive feature dimension");
  if (cfg.components < 1) throw ConfigError("head needs at least one center per class");
  if (cfg.kind == HeadKind::Prototype && cfg.components != 1) {
    throw ConfigError("prototype heads use exactly one center per class");
  }
  if ((cfg.kind == HeadKind::Mixture || cfg.kind == HeadKind::Exemplar) &&
      cfg.covariance != CovarianceMode::Identity) {
    throw ConfigError(std::string(to_string(cfg.kind)) +
                      " heads always use identity covariance");
  }
  if (!cfg.log_prior.empty() && cfg.log_prior.size() != cfg.classes) {
    throw ConfigError("log_prior needs one entry per class");
  }

  CategorizationHead head;
  head.cfg_ = cfg;
  std::mt19937_64 rng(seed);
  if (cfg.kind == HeadKind::Baseline) {
    const double stddev = 1.0 / std::sqrt(static_cast<double>(cfg.feature_dim));
    head.params_.emplace_back("head.weight",
                              Tensor::randn({cfg.feature_dim, cfg.classes}, rng, stddev));
    head.params_.emplace_back("head.bias", Tensor::zeros({cfg.classes}));
    return head;
  }

  for (std::size_t c = 0; c < cfg.classes; ++c) {
    head.params_.emplace_back("centers." + std::to_string(c),
                              Tensor::randn({cfg.components, cfg.feature_dim}, rng));
    head.params_.back().frozen = cfg.frozen_centers;
  }
  if (cfg.kind == HeadKind::Prototype && cfg.covariance != CovarianceMode::Identity) {
    Shape lv_shape = cfg.covariance == CovarianceMode::SharedScalar
                         ? Shape{cfg.classes}
                         : Shape{cfg.classes, cfg.feature_dim};
    head.logvar_index_ = static_cast<int>(head.params_.size());
    head.params_.emplace_back("head.logvar", Tensor::zeros(lv_shape));
  }
  return head;
}

std::size_t CategorizationHead::components_of(std::size_t cls) const {
  if (cfg_.kind == HeadKind::Baseline || cls >= cfg_.classes) {
    throw UsageError("components_of: no centers for this head/class");
  }
  return params_[cls].value.shape()[0];
}

const Tensor& CategorizationHead::centers_of(std::size_t cls) const {
  if (cfg_.kind == HeadKind::Baseline || cls >= cfg_.classes) {
    throw UsageError("centers_of: no centers for this head/class");
  }
  return params_[cls].value;
}

void CategorizationHead::set_centers(const std::vector<Tensor>& per_class) {
  if (cfg_.kind == HeadKind::Baseline) {
    throw UsageError("baseline heads have no centers");
  }
  if (per_class.size() != cfg_.classes) {
    throw DimensionError("set_centers: got " + std::to_string(per_class.size()) +
                         " center blocks for " + std::to_string(cfg_.classes) +
                         " classes");
  }
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    const Shape& s = per_class[c].shape();
    if (s.size() != 2 || s[0] < 1 || s[1] != cfg_.feature_dim) {
      throw DimensionError("set_centers: class " + std::to_string(c) + " block is " +
                           shape_str(s) + ", expected [K x " +
                           std::to_string(cfg_.feature_dim) + "]");
    }
  }
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    params_[c] = Parameter("centers." + std::to_string(c), per_class[c]);
    params_[c].frozen = cfg_.frozen_centers;
  }
}

Var CategorizationHead::logits(Tape& tape, const Var& features) {
  if (features.shape().size() != 2 || features.shape()[1] != cfg_.feature_dim) {
    throw DimensionError("head expects [B x " + std::to_string(cfg_.feature_dim) +
                         "] features, got " + shape_str(features.shape()));
  }
  const std::size_t batch = features.shape()[0];
  const std::size_t C = cfg_.classes;
  const std::size_t D = cfg_.feature_dim;

  auto prior_row = [&]() -> Tensor {
    Tensor t = Tensor::zeros({C});
    for (std::size_t c = 0; c < cfg_.log_prior.size(); ++c) t[c] = cfg_.log_prior[c];
    return t;
  };
  const bool has_prior = !cfg_.log_prior.empty();

  if (cfg_.kind == HeadKind::Baseline) {
    Var out = add(matmul(features, tape.param(params_[0])), tape.param(params_[1]));
    if (has_prior) out = add(out, tape.constant(prior_row()));
    return out;
  }

  std::vector<Var> center_vars;
  center_vars.reserve(C);
  for (std::size_t c = 0; c < C; ++c) center_vars.push_back(tape.param(params_[c]));
  Var stack = C == 1 ? center_vars[0] : concat_rows(center_vars);

  if (cfg_.kind == HeadKind::Prototype) {
    Var out;
    if (cfg_.covariance == CovarianceMode::Identity) {
      out = scale(pairwise_sqdist(features, stack), -1.0);
    } else {
      Var lv = tape.param(params_[logvar_index_]);
      Var lv_mat;  // per-class, per-dimension log variances [C x D]
      if (cfg_.covariance == CovarianceMode::SharedScalar) {
        lv_mat = matmul(reshape(lv, {C, 1}), tape.constant(Tensor::full({1, D}, 1.0)));
      } else {
        lv_mat = lv;
      }
      Var weights = exp(scale(lv_mat, -1.0));
      out = scale(pairwise_sqdist(features, stack, weights), -1.0);
      if (cfg_.use_logdet) {
        Var logdet = cfg_.covariance == CovarianceMode::SharedScalar
                         ? scale(lv, static_cast<double>(D))
                         : reduce_sum(lv, 1);
        out = sub(out, scale(logdet, 0.5));
      }
    }
    if (has_prior) out = add(out, tape.constant(prior_row()));
    return out;
  }

  // mixture / exemplar: per-class center blocks of possibly unequal size
  Var dists = pairwise_sqdist(features, stack);  // [B x M]
  Tensor offsets = prior_row();
  std::vector<Var> per_class;
  per_class.reserve(C);
  std::size_t at = 0;
  for (std::size_t c = 0; c < C; ++c) {
    const std::size_t k = params_[c].value.shape()[0];
    Var block = slice_cols(dists, at, k);
    at += k;
    Var score;
    if (cfg_.logit_mode == LogitMode::LogSumExp) {
      score = logsumexp(scale(block, -1.0), 1);
      offsets[c] -= std::log(static_cast<double>(k));  // uniform mixture weights
    } else {
      score = scale(reduce_sum(block, 1), -1.0);
    }
    per_class.push_back(reshape(score, {batch, 1}));
  }
  Var out = C == 1 ? per_class[0] : concat_cols(per_class);
  return add(out, tape.constant(std::move(offsets)));
}

std::vector<Parameter*> CategorizationHead::parameters() {
  std::vector<Parameter*> out;
  out.reserve(params_.size());
  for (Parameter& p : params_) out.push_back(&p);
  return out;
}

double CategorizationHead::mahalanobis_sq(const std::vector<double>& x,
                                          const std::vector<double>& center,
                                          std::size_t cls) const {
  const std::size_t D = cfg_.feature_dim;
  if (x.size() != D || center.size() != D) {
    throw DimensionError("mahalanobis_sq expects two length-" + std::to_string(D) +
                         " rows");
  }
  if (cls >= cfg_.classes) {
    throw DimensionError("mahalanobis_sq: class " + std::to_string(cls) +
                         " out of range");
  }
  const Tensor* lv = logvar_index_ >= 0 ? &params_[logvar_index_].value : nullptr;
  double acc = 0.0;
  for (std::size_t d = 0; d < D; ++d) {
    double var = 1.0;
    if (lv != nullptr) {
      var = cfg_.covariance == CovarianceMode::SharedScalar
                ? std::exp((*lv)[cls])
                : std::exp((*lv)[cls * D + d]);
    }
    const double diff = x[d] - center[d];
    acc += diff * diff / var;
  }
  return acc;
}

void init_centers(CategorizationHead& head, CenterInit scheme, FeatureNet& net,
                  const LabeledDataset& data, std::uint64_t seed) {
  const HeadConfig& cfg = head.config();
  if (cfg.kind == HeadKind::Baseline) return;
  if (cfg.kind == HeadKind::Exemplar && scheme != CenterInit::FromProjections) {
    throw ConfigError("exemplar centers must be initialized from projections");
  }

  const std::size_t D = cfg.feature_dim;
  std::vector<Tensor> blocks;
  blocks.reserve(cfg.classes);

  if (scheme == CenterInit::RandomNormal) {
    std::mt19937_64 rng(seed);
    for (std::size_t c = 0; c < cfg.classes; ++c) {
      blocks.push_back(Tensor::randn({head.components_of(c), D}, rng));
    }
    head.set_centers(blocks);
    return;
  }

  std::vector<std::vector<std::size_t>> members(cfg.classes);
  for (std::size_t i = 0; i < data.labels.size(); ++i) {
    if (data.labels[i] < cfg.classes) members[data.labels[i]].push_back(i);
  }
  for (std::size_t c = 0; c < cfg.classes; ++c) {
    const std::size_t need =
        cfg.kind == HeadKind::Exemplar ? members[c].size() : head.components_of(c);
    if (members[c].size() < need || need == 0) {
      throw DataError("class " + std::to_string(c) + " has " +
                      std::to_string(members[c].size()) +
                      " training examples, cannot seed " + std::to_string(need) +
                      " centers");
    }
    std::vector<std::size_t> rows(members[c].begin(), members[c].begin() + need);
    Tape tape;
    Var feats = net.forward(tape, tape.constant(take_rows(data.inputs, rows)));
    if (feats.shape()[1] != D) {
      throw DimensionError("projection features are " + shape_str(feats.shape()) +
                           ", head wants width " + std::to_string(D));
    }
    blocks.push_back(feats.tensor());
  }
  head.set_centers(blocks);
}

Tensor posterior_from_logits(const Tensor& logits) {
  if (logits.rank() != 2) {
    throw DimensionError("posterior expects [B x C] logits, got " +
                         shape_str(logits.shape()));
  }
  const std::size_t rows = logits.shape()[0], cols = logits.shape()[1];
  Tensor out(logits.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < cols; ++c) {
      const double v = logits[r * cols + c];
      if (!std::isfinite(v)) {
        throw DomainError("non-finite logit at row " + std::to_string(r));
      }
      m = v > m ? v : m;
    }
    double sum = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double e = std::exp(logits[r * cols + c] - m);
      out[r * cols + c] = e;
      sum += e;
    }
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] /= sum;
  }
  return out;
}

Var loss_onehot(Tape& tape, const Var& logits, const std::vector<std::size_t>& labels) {
  if (logits.shape().size() != 2) {
    throw DimensionError("loss expects [B x C] logits, got " + shape_str(logits.shape()));
  }
  const std::size_t rows = logits.shape()[0], cols = logits.shape()[1];
  if (labels.size() != rows) {
    throw DataError("got " + std::to_string(labels.size()) + " labels for " +
                    std::to_string(rows) + " rows");
  }
  Tensor onehot = Tensor::zeros({rows, cols});
  for (std::size_t r = 0; r < rows; ++r) {
    if (labels[r] >= cols) {
      throw DataError("label " + std::to_string(labels[r]) + " out of range for " +
                      std::to_string(cols) + " classes");
    }
    onehot[r * cols + labels[r]] = 1.0;
  }
  Var picked = reduce_sum(mul(logits, tape.constant(std::move(onehot))), 1);
  return reduce_mean(sub(logsumexp(logits, 1), picked));
}

double human_fit_crossentropy(const Tensor& y, const Tensor& h) {
  if (y.rank() != 2 || h.rank() != 2 || y.shape() != h.shape()) {
    throw DataError("posterior rows " + shape_str(y.shape()) +
                    " and human rows " + shape_str(h.shape()) + " are misaligned");
  }
  const std::size_t rows = y.shape()[0], cols = y.shape()[1];
  if (rows == 0) throw DataError("no stimuli to score");
  double acc = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    double hsum = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      const double hv = h[r * cols + c];
      if (hv < 0) throw DataError("negative human probability at row " + std::to_string(r));
      hsum += hv;
    }
    if (std::abs(hsum - 1.0) > 1e-6) {
      throw DataError("human row " + std::to_string(r) + " sums to " +
                      std::to_string(hsum) + ", expected 1");
    }
    for (std::size_t c = 0; c < cols; ++c) {
      const double hv = h[r * cols + c];
      if (hv == 0.0) continue;
      acc -= hv * std::log(std::max(y[r * cols + c], 1e-12));
    }
  }
  return acc / static_cast<double>(rows);
}

}  // namespace dcm
