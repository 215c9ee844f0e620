#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dcm/heads.hpp"
#include "dcm/optim.hpp"

namespace dcm {

struct DataConfig {
  std::string source = "blobs";  // blobs | multimodal | idx | cifar10
  std::size_t classes = 3;
  std::size_t per_class = 100;
  std::size_t dim = 2;
  double separation = 6.0;
  std::size_t modes_per_class = 4;
  std::size_t per_mode = 25;
  std::string images;  // idx
  std::string labels;  // idx
  std::vector<std::string> batches;  // cifar10
  double split_fraction = 0.8;
  std::uint64_t seed = 42;
};

struct ModelConfig {
  std::string features = "auto";  // auto | identity
  HeadKind head = HeadKind::Prototype;
  std::size_t k = 4;  // mixture centers per class
  CovarianceMode covariance = CovarianceMode::Identity;
  LogitMode logit_mode = LogitMode::LogSumExp;
  std::string center_init = "auto";  // auto | normal | projections
  bool use_logdet = true;
  bool frozen_centers = false;
  std::uint64_t seed = 0;  // 0 = follow train.seed
};

struct EvalSection {
  std::string human;  // optional CSV path
  std::vector<std::size_t> sweep_k;
  std::size_t replications = 5;
};

struct OutputSection {
  std::string dir = "runs";
  std::string run_id = "run";
};

struct ExperimentConfig {
  DataConfig data;
  ModelConfig model;
  TrainConfig train;
  EvalSection eval;
  OutputSection output;
};

/// Flat "section.key = value" format with '#' comments. Unknown keys, type
/// mismatches, and head-kind constraint violations are configuration errors
/// citing the line number. Omitted keys take the documented defaults.
ExperimentConfig parse_config(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text, const std::string& origin);

/// Emits the effective configuration (defaults resolved, auto values and
/// sentinel seeds replaced) in a stable order; parse_config_text of the
/// result reproduces the same effective configuration.
std::string emit_config(const ExperimentConfig& cfg);

std::uint64_t resolved_model_seed(const ExperimentConfig& cfg);
CenterInit resolved_center_init(const ExperimentConfig& cfg);

}  // namespace dcm
