#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dcm/data.hpp"
#include "dcm/featurenet.hpp"
#include "dcm/heads.hpp"
#include "dcm/optim.hpp"

namespace dcm {

/// Fraction of examples whose argmax posterior matches the label; argmax ties
/// break toward the lowest class index.
double accuracy(FeatureNet& net, CategorizationHead& head, const LabeledDataset& data);

/// Posterior rows [N x C] for all inputs.
Tensor predict_posterior(FeatureNet& net, CategorizationHead& head, const Tensor& inputs);

/// Mean human cross-entropy over the stimuli named by human.indices, which
/// refer to rows of `data`.
double human_fit(FeatureNet& net, CategorizationHead& head, const LabeledDataset& data,
                 const HumanLabelSet& human);

struct RunMetrics {
  std::string run_id;
  std::uint64_t seed = 0;
  HeadKind head_kind = HeadKind::Mixture;
  CovarianceMode covariance = CovarianceMode::Identity;
  std::size_t k = 1;
  LogitMode logit_mode = LogitMode::LogSumExp;
  std::size_t epochs = 0;
  double validation_accuracy = 0.0;
  double human_crossentropy = -1.0;  // negative = not measured
  std::vector<EpochStats> per_epoch;
  std::string error;  // non-empty marks a failed run
};

/// Everything a sweep run needs besides K and the replication seed.
struct SweepSpec {
  std::vector<LayerSpec> feature_layers;  // empty = identity features
  TrainConfig train;                      // seed is replaced per run
  LogitMode logit_mode = LogitMode::LogSumExp;
  CenterInit center_init = CenterInit::FromProjections;
  std::string run_id_prefix = "sweep";
};

/// Trains one mixture-head model per (K, replication) with run seed
/// base_seed + replication; failures are recorded per run and the sweep
/// continues. Results are ordered by (K, replication) and identical at any
/// job count.
std::vector<RunMetrics> centers_sweep(const SweepSpec& spec,
                                      const LabeledDataset& train_data,
                                      const LabeledDataset& validation_data,
                                      const HumanLabelSet* human,
                                      const std::vector<std::size_t>& k_values,
                                      std::size_t replications, std::uint64_t base_seed,
                                      std::size_t jobs = 1);

struct SweepSummaryRow {
  std::size_t k = 0;
  std::size_t runs = 0;
  std::size_t failed = 0;
  double mean_accuracy = 0.0;
  double min_accuracy = 0.0;
  double max_accuracy = 0.0;
  double mean_human = -1.0;  // negative = not measured
};

std::vector<SweepSummaryRow> summarize_sweep(const std::vector<RunMetrics>& runs);
std::string format_summary(const std::vector<SweepSummaryRow>& rows);

/// Serializes runs as a JSON list with the RunMetrics field names.
std::string metrics_json(const std::vector<RunMetrics>& runs);

/// Writes sampled stimulus features plus every center to a CSV with header
/// "tag,class,index,f0,...". The sample is drawn without replacement.
void export_embeddings(FeatureNet& net, CategorizationHead& head,
                       const LabeledDataset& data, std::size_t sample,
                       std::uint64_t seed, const std::string& path);

}  // namespace dcm
