#include "doctest.h"

#include <string>

#include "dcm/config.hpp"
#include "dcm/errors.hpp"

using namespace dcm;

TEST_CASE("defaults fill everything from a one-line config") {
  ExperimentConfig cfg = parse_config_text("model.head = prototype\n", "t");
  CHECK(cfg.data.source == "blobs");
  CHECK(cfg.data.classes == 3);
  CHECK(cfg.data.per_class == 100);
  CHECK(cfg.data.dim == 2);
  CHECK(cfg.data.separation == 6.0);
  CHECK(cfg.data.split_fraction == 0.8);
  CHECK(cfg.data.seed == 42);
  CHECK(cfg.model.head == HeadKind::Prototype);
  CHECK(cfg.model.features == "auto");
  CHECK(cfg.model.covariance == CovarianceMode::Identity);
  CHECK(cfg.model.use_logdet);
  CHECK_FALSE(cfg.model.frozen_centers);
  CHECK(cfg.train.learning_rate == 0.01);
  CHECK(cfg.train.decay == 1e-6);
  CHECK(cfg.train.momentum == 0.9);
  CHECK(cfg.train.epochs == 30);
  CHECK(cfg.train.batch_size == 32);
  CHECK(cfg.train.seed == 1);
  CHECK(cfg.eval.replications == 5);
  CHECK(cfg.output.dir == "runs");
  CHECK(cfg.output.run_id == "run");
}

TEST_CASE("values parse exactly; comments and blank lines are ignored") {
  ExperimentConfig cfg = parse_config_text(
      "# experiment\n"
      "\n"
      "train.learning_rate = 0.01   # keep default\n"
      "data.separation = 2.5\n"
      "eval.sweep_k = 1, 2,4\n",
      "t");
  CHECK(cfg.train.learning_rate == 0.01);
  CHECK(cfg.data.separation == 2.5);
  REQUIRE(cfg.eval.sweep_k.size() == 3);
  CHECK(cfg.eval.sweep_k[0] == 1);
  CHECK(cfg.eval.sweep_k[1] == 2);
  CHECK(cfg.eval.sweep_k[2] == 4);
}

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_config_text(text, "cfg");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("unknown keys, bad types, and malformed lines cite the line number") {
  CHECK(error_of("model.heads = prototype\n").find("cfg:1") != std::string::npos);
  CHECK(error_of("model.heads = prototype\n").find("unknown key") != std::string::npos);
  CHECK(error_of("\ntrain.epochs = soon\n").find("cfg:2") != std::string::npos);
  CHECK(error_of("train.epochs = -3\n").find("non-negative integer") != std::string::npos);
  CHECK(error_of("data.separation = wide\n").find("number") != std::string::npos);
  CHECK(error_of("model.use_logdet = yes\n").find("true or false") != std::string::npos);
  CHECK(error_of("model.head = gmm\n").find("must be one of") != std::string::npos);
  CHECK(error_of("just words\n").find("expected 'section.key = value'") != std::string::npos);
  CHECK(error_of("train.seed = 1\ntrain.seed = 2\n").find("duplicate key") != std::string::npos);
}

TEST_CASE("head-kind constraints are enforced at parse time") {
  // prototype forces K = 1
  CHECK(error_of("model.head = prototype\nmodel.k = 5\n").find("model.k") != std::string::npos);
  CHECK_NOTHROW(parse_config_text("model.head = prototype\nmodel.k = 1\n", "t"));
  CHECK_NOTHROW(parse_config_text("model.head = mixture\nmodel.k = 5\n", "t"));
  CHECK(error_of("model.head = exemplar\nmodel.k = 2\n") != "");
  CHECK(error_of("model.head = mixture\nmodel.covariance = axis_aligned\n")
            .find("prototype") != std::string::npos);
  CHECK(error_of("model.head = baseline\nmodel.use_logdet = false\n") != "");
  CHECK(error_of("model.head = prototype\nmodel.logit_mode = negsum\n")
            .find("mixture and exemplar") != std::string::npos);
  CHECK(error_of("model.head = baseline\nmodel.frozen_centers = true\n") != "");
  CHECK(error_of("model.head = exemplar\nmodel.center_init = normal\n")
            .find("exemplar") != std::string::npos);
  CHECK_NOTHROW(parse_config_text("model.head = exemplar\nmodel.center_init = projections\n", "t"));
}

TEST_CASE("data-source constraints") {
  CHECK(error_of("data.source = idx\n").find("data.images") != std::string::npos);
  CHECK(error_of("data.source = idx\ndata.images = a\n").find("data.labels") != std::string::npos);
  CHECK(error_of("data.source = cifar10\n").find("data.batches") != std::string::npos);
  CHECK(error_of("data.source = blobs\ndata.images = a\n").find("applies only") !=
        std::string::npos);
  CHECK(error_of("data.source = multimodal\ndata.separation = 3\n").find("applies only") !=
        std::string::npos);
  CHECK(error_of("data.source = blobs\ndata.modes_per_class = 4\n") != "");
  CHECK_NOTHROW(parse_config_text("data.source = idx\ndata.images = a\ndata.labels = b\n", "t"));
  ExperimentConfig cfg = parse_config_text(
      "data.source = cifar10\ndata.batches = b1.bin, b2.bin\n", "t");
  REQUIRE(cfg.data.batches.size() == 2);
  CHECK(cfg.data.batches[1] == "b2.bin");
}

TEST_CASE("value range checks") {
  CHECK(error_of("train.epochs = 0\n") != "");
  CHECK(error_of("data.split_fraction = 1\n") != "");
  CHECK(error_of("data.split_fraction = 0\n") != "");
  CHECK(error_of("data.classes = 1\n") != "");
  CHECK(error_of("data.source = multimodal\ndata.modes_per_class = 1\n") != "");
  CHECK(error_of("train.learning_rate = 0\n") != "");
  CHECK(error_of("train.momentum = 1\n") != "");
  CHECK(error_of("eval.replications = 0\n") != "");
  CHECK(error_of("eval.sweep_k = 1,0\n") != "");
}

TEST_CASE("seed and center-init resolution") {
  ExperimentConfig cfg = parse_config_text("train.seed = 9\n", "t");
  CHECK(resolved_model_seed(cfg) == 9);
  cfg = parse_config_text("train.seed = 9\nmodel.seed = 4\n", "t");
  CHECK(resolved_model_seed(cfg) == 4);

  cfg = parse_config_text("model.head = prototype\n", "t");
  CHECK(resolved_center_init(cfg) == CenterInit::RandomNormal);
  cfg = parse_config_text("model.head = exemplar\n", "t");
  CHECK(resolved_center_init(cfg) == CenterInit::FromProjections);
  cfg = parse_config_text("model.head = mixture\nmodel.center_init = projections\n", "t");
  CHECK(resolved_center_init(cfg) == CenterInit::FromProjections);
}

TEST_CASE("emit is stable under reparse and resolves auto values") {
  ExperimentConfig cfg = parse_config_text(
      "model.head = mixture\nmodel.k = 3\ntrain.seed = 5\neval.sweep_k = 1,2\n", "t");
  std::string text = emit_config(cfg);
  CHECK(text.find("model.k = 3") != std::string::npos);
  CHECK(text.find("model.seed = 5") != std::string::npos);     // resolved sentinel
  CHECK(text.find("center_init = auto") == std::string::npos);  // auto never emitted
  ExperimentConfig back = parse_config_text(text, "emitted");
  CHECK(emit_config(back) == text);
  CHECK(back.model.k == 3);
  CHECK(back.eval.sweep_k == cfg.eval.sweep_k);

  // per-head conditional keys: baseline emits no center/covariance keys
  ExperimentConfig base = parse_config_text("model.head = baseline\n", "t");
  std::string bt = emit_config(base);
  CHECK(bt.find("model.covariance") == std::string::npos);
  CHECK(bt.find("model.k") == std::string::npos);
  CHECK(bt.find("center_init") == std::string::npos);
  CHECK(emit_config(parse_config_text(bt, "e")) == bt);

  // idx configs round-trip their paths
  ExperimentConfig idx = parse_config_text(
      "data.source = idx\ndata.images = im.idx\ndata.labels = lb.idx\n", "t");
  std::string it = emit_config(idx);
  ExperimentConfig iback = parse_config_text(it, "e");
  CHECK(iback.data.images == "im.idx");
  CHECK(emit_config(iback) == it);
}
