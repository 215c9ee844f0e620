#include "dcm/experiment.hpp"

#include <filesystem>
#include <fstream>
#include <map>

#include "dcm/errors.hpp"
#include "dcm/model_io.hpp"
#include "dcm/optim.hpp"

namespace dcm {

std::vector<Parameter*> Experiment::parameters() {
  std::vector<Parameter*> out = net.parameters();
  for (Parameter* p : head.parameters()) out.push_back(p);
  return out;
}

LabeledDataset build_dataset(const DataConfig& cfg) {
  if (cfg.source == "blobs")
    return gen_blobs(cfg.classes, cfg.per_class, cfg.dim, cfg.separation, cfg.seed);
  if (cfg.source == "multimodal")
    return gen_multimodal(cfg.classes, cfg.modes_per_class, cfg.per_mode, cfg.dim, cfg.seed);
  if (cfg.source == "idx") return load_idx(cfg.images, cfg.labels);
  if (cfg.source == "cifar10") return load_cifar10_binary(cfg.batches);
  throw ConfigError("unknown data source: " + cfg.source);
}

std::vector<LayerSpec> resolve_feature_layers(const std::string& features,
                                              const Shape& input_shape) {
  if (features == "identity") return {};
  if (features != "auto")
    throw ConfigError("unknown feature mode: " + features);
  if (input_shape.size() == 2) {
    std::size_t f = input_shape[1];
    return {LayerSpec::dense(f, 64), LayerSpec::relu(), LayerSpec::dense(64, 32),
            LayerSpec::relu(), LayerSpec::dense(32, 8)};
  }
  if (input_shape.size() == 4) {
    std::size_t c = input_shape[1], h = input_shape[2], w = input_shape[3];
    if (h < 3 || w < 3)
      throw ConfigError("auto features need images of at least 3x3, got " +
                        shape_str(input_shape));
    std::size_t flat = 8 * (h - 2) * (w - 2);
    return {LayerSpec::conv2d(c, 8, 3), LayerSpec::relu(), LayerSpec::flatten(),
            LayerSpec::dense(flat, 32)};
  }
  throw DimensionError("auto features expect [N x F] or [N x c x h x w] inputs, got " +
                       shape_str(input_shape));
}

Experiment build_experiment(const ExperimentConfig& cfg) {
  Experiment ex;
  ex.cfg = cfg;
  LabeledDataset all = build_dataset(cfg.data);
  ex.data = split(all, cfg.data.split_fraction, cfg.data.seed);

  std::uint64_t model_seed = resolved_model_seed(cfg);
  std::vector<LayerSpec> layers = resolve_feature_layers(cfg.model.features, all.inputs.shape());
  ex.net = layers.empty() ? FeatureNet::identity() : FeatureNet::build(layers, model_seed);

  std::size_t feature_dim = ex.net.feature_dim();
  if (feature_dim == 0)
    feature_dim = shape_size(all.inputs.shape()) / all.inputs.shape()[0];

  HeadConfig hc;
  hc.kind = cfg.model.head;
  hc.classes = all.classes;
  hc.feature_dim = feature_dim;
  hc.components = cfg.model.head == HeadKind::Mixture ? cfg.model.k : 1;
  hc.covariance = cfg.model.head == HeadKind::Prototype ? cfg.model.covariance
                                                        : CovarianceMode::Identity;
  hc.logit_mode = cfg.model.logit_mode;
  hc.use_logdet = cfg.model.use_logdet;
  hc.frozen_centers = cfg.model.frozen_centers;
  ex.head = CategorizationHead::create(hc, model_seed + 1);
  init_centers(ex.head, resolved_center_init(cfg), ex.net, ex.data.train, model_seed + 2);
  return ex;
}

namespace {

std::size_t max_components(CategorizationHead& head, std::size_t classes) {
  if (head.config().kind == HeadKind::Baseline) return 1;
  std::size_t k = 0;
  for (std::size_t c = 0; c < classes; ++c) k = std::max(k, head.components_of(c));
  return k;
}

}  // namespace

RunMetrics run_training(Experiment& ex, const HumanLabelSet* human) {
  RunMetrics m;
  m.run_id = ex.cfg.output.run_id;
  m.seed = ex.cfg.train.seed;
  m.head_kind = ex.cfg.model.head;
  m.covariance = ex.head.config().covariance;
  m.k = max_components(ex.head, ex.data.train.classes);
  m.logit_mode = ex.cfg.model.logit_mode;
  m.epochs = ex.cfg.train.epochs;

  TrainHistory history = fit(ex.net, ex.head, ex.data.train, ex.cfg.train);
  m.per_epoch = history.epochs;
  m.validation_accuracy = accuracy(ex.net, ex.head, ex.data.validation);
  if (human != nullptr)
    m.human_crossentropy = human_fit(ex.net, ex.head, ex.data.validation, *human);
  return m;
}

void write_text_atomic(const std::string& path, const std::string& text) {
  namespace fs = std::filesystem;
  fs::path target(path);
  if (target.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(target.parent_path(), ec);
  }
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + tmp.string() + " for writing");
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!f) throw IoError("short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path + ": " + ec.message());
}

void write_train_outputs(Experiment& ex, const RunMetrics& metrics) {
  namespace fs = std::filesystem;
  fs::path dir(ex.cfg.output.dir);
  std::error_code ec;
  fs::create_directories(dir, ec);

  Checkpoint ckpt;
  ckpt.config_text = emit_config(ex.cfg);
  for (Parameter* p : ex.parameters()) ckpt.params.push_back(*p);
  save_checkpoint((dir / (ex.cfg.output.run_id + ".dcm")).string(), ckpt);

  write_text_atomic((dir / (ex.cfg.output.run_id + ".metrics.json")).string(),
                    metrics_json({metrics}));
}

Experiment load_trained(const std::string& path) {
  Checkpoint ckpt = load_checkpoint(path);
  ExperimentConfig cfg = parse_config_text(ckpt.config_text, path + ": embedded config");
  Experiment ex = build_experiment(cfg);

  std::map<std::string, Parameter*> by_name;
  for (Parameter* p : ex.parameters()) by_name[p->name] = p;

  for (const Parameter& loaded : ckpt.params) {
    auto it = by_name.find(loaded.name);
    if (it == by_name.end())
      throw FormatError(path + ": checkpoint parameter '" + loaded.name +
                        "' does not exist in the rebuilt model");
    Parameter* dst = it->second;
    if (dst->value.shape() != loaded.value.shape())
      throw FormatError(path + ": parameter '" + loaded.name + "' has shape " +
                        shape_str(loaded.value.shape()) + " but the rebuilt model expects " +
                        shape_str(dst->value.shape()));
    dst->value.values() = loaded.value.values();
    by_name.erase(it);
  }
  if (!by_name.empty())
    throw FormatError(path + ": checkpoint is missing parameter '" +
                      by_name.begin()->first + "'");
  return ex;
}

}  // namespace dcm
