#pragma once

#include <string>
#include <vector>

#include "dcm/config.hpp"
#include "dcm/data.hpp"
#include "dcm/eval.hpp"
#include "dcm/heads.hpp"

namespace dcm {

/// A fully assembled run: the effective config, the split data, and the
/// initialized (or restored) model.
struct Experiment {
  ExperimentConfig cfg;
  SplitResult data;
  FeatureNet net;
  CategorizationHead head;

  std::vector<Parameter*> parameters();
};

LabeledDataset build_dataset(const DataConfig& cfg);

/// Layer stack for a feature mode. "identity" gives an empty stack (raw
/// inputs, flattened); "auto" picks a small dense stack for vector data and a
/// conv stack for image data based on the dataset shape.
std::vector<LayerSpec> resolve_feature_layers(const std::string& features,
                                              const Shape& input_shape);

/// Loads and splits the data, builds the feature net and head, and runs
/// center initialization. Deterministic in the config seeds.
Experiment build_experiment(const ExperimentConfig& cfg);

/// Trains the experiment in place; returns per-epoch stats, validation
/// accuracy, and the human fit when label distributions are supplied.
/// Human indices refer to rows of the validation split.
RunMetrics run_training(Experiment& ex, const HumanLabelSet* human);

/// Writes <output.dir>/<run_id>.dcm and <run_id>.metrics.json atomically.
void write_train_outputs(Experiment& ex, const RunMetrics& metrics);

/// Rebuilds the model recorded in a checkpoint and restores every parameter
/// by name; name or shape mismatches against the rebuilt model are format
/// errors.
Experiment load_trained(const std::string& path);

void write_text_atomic(const std::string& path, const std::string& text);

}  // namespace dcm
