#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "dcm/errors.hpp"
#include "dcm/eval.hpp"
#include "dcm/experiment.hpp"
#include "dcm/gradcheck.hpp"

namespace {

using nlohmann::ordered_json;

dcm::HumanLabelSet load_human(const std::string& path, std::size_t classes) {
  return dcm::load_human_csv(path, classes);
}

int cmd_train(const std::string& config_path, const std::string& out_dir,
              const std::string& human_path, std::uint64_t seed, bool seed_set) {
  dcm::ExperimentConfig cfg = dcm::parse_config(config_path);
  if (!out_dir.empty()) cfg.output.dir = out_dir;
  if (seed_set) cfg.train.seed = seed;
  if (!human_path.empty()) cfg.eval.human = human_path;

  dcm::Experiment ex = dcm::build_experiment(cfg);
  dcm::HumanLabelSet human;
  bool have_human = !ex.cfg.eval.human.empty();
  if (have_human) human = load_human(ex.cfg.eval.human, ex.data.validation.classes);

  dcm::RunMetrics metrics = dcm::run_training(ex, have_human ? &human : nullptr);
  dcm::write_train_outputs(ex, metrics);

  ordered_json out;
  out["run_id"] = metrics.run_id;
  out["validation_accuracy"] = metrics.validation_accuracy;
  if (metrics.human_crossentropy >= 0.0)
    out["human_crossentropy"] = metrics.human_crossentropy;
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_eval(const std::string& model_path, const std::string& human_path) {
  dcm::Experiment ex = dcm::load_trained(model_path);

  ordered_json out;
  out["accuracy"] = dcm::accuracy(ex.net, ex.head, ex.data.validation);
  std::string human_src = !human_path.empty() ? human_path : ex.cfg.eval.human;
  if (!human_src.empty()) {
    dcm::HumanLabelSet human = load_human(human_src, ex.data.validation.classes);
    out["human_crossentropy"] = dcm::human_fit(ex.net, ex.head, ex.data.validation, human);
  }
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& out_dir,
              const std::string& human_path, std::uint64_t seed, bool seed_set,
              std::size_t jobs) {
  dcm::ExperimentConfig cfg = dcm::parse_config(config_path);
  if (!out_dir.empty()) cfg.output.dir = out_dir;
  if (seed_set) cfg.train.seed = seed;
  if (!human_path.empty()) cfg.eval.human = human_path;
  if (cfg.eval.sweep_k.empty())
    throw dcm::ConfigError(config_path + ": sweep requires a non-empty eval.sweep_k grid");

  dcm::LabeledDataset all = dcm::build_dataset(cfg.data);
  dcm::SplitResult parts = dcm::split(all, cfg.data.split_fraction, cfg.data.seed);

  dcm::SweepSpec spec;
  spec.feature_layers = dcm::resolve_feature_layers(cfg.model.features, all.inputs.shape());
  spec.train = cfg.train;
  spec.logit_mode = cfg.model.logit_mode;
  spec.center_init = cfg.model.center_init == "auto" ? dcm::CenterInit::FromProjections
                                                     : dcm::resolved_center_init(cfg);
  spec.run_id_prefix = cfg.output.run_id;

  dcm::HumanLabelSet human;
  bool have_human = !cfg.eval.human.empty();
  if (have_human) human = load_human(cfg.eval.human, parts.validation.classes);

  std::vector<dcm::RunMetrics> runs =
      dcm::centers_sweep(spec, parts.train, parts.validation,
                         have_human ? &human : nullptr, cfg.eval.sweep_k,
                         cfg.eval.replications, cfg.train.seed, jobs);

  namespace fs = std::filesystem;
  fs::path dir(cfg.output.dir);
  dcm::write_text_atomic((dir / (cfg.output.run_id + ".sweep.json")).string(),
                         dcm::metrics_json(runs));
  std::string table = dcm::format_summary(dcm::summarize_sweep(runs));
  dcm::write_text_atomic((dir / (cfg.output.run_id + ".summary.txt")).string(), table);
  std::cout << table;
  return 0;
}

int cmd_gradcheck(bool inject_fault) {
  std::vector<dcm::GradCaseResult> results = dcm::run_gradcheck_suite(1e-5, inject_fault);
  for (const dcm::GradCaseResult& r : results)
    std::printf("%-32s max rel err %.3e  %s\n", r.name.c_str(), r.max_rel_err,
                r.pass ? "ok" : "FAIL");
  return dcm::all_passed(results) ? 0 : 3;
}

int cmd_export(const std::string& model_path, const std::string& out_path,
               std::size_t sample, bool sample_set, std::uint64_t seed) {
  dcm::Experiment ex = dcm::load_trained(model_path);
  std::size_t n = ex.data.validation.size();
  if (!sample_set) sample = std::min<std::size_t>(256, n);
  dcm::export_embeddings(ex.net, ex.head, ex.data.validation, sample, seed, out_path);
  std::cerr << "wrote " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deep categorization models: prototype, mixture, and exemplar heads "
               "over learned features"};
  app.require_subcommand(1);

  std::string config_path, model_path, human_path, out_dir, out_path;
  std::uint64_t seed = 0;
  std::size_t jobs = 1, sample = 256;
  bool inject_fault = false;

  CLI::App* train = app.add_subcommand("train", "train one model from a config file");
  train->add_option("--config", config_path, "experiment config file")->required();
  train->add_option("--out", out_dir, "output directory (overrides output.dir)");
  train->add_option("--human", human_path, "human label CSV (overrides eval.human)");
  train->add_option("--seed", seed, "training seed (overrides train.seed)");

  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a saved model on its validation split");
  eval_cmd->add_option("--model", model_path, "saved .dcm checkpoint")->required();
  eval_cmd->add_option("--human", human_path, "human label CSV (overrides eval.human)");

  CLI::App* sweep = app.add_subcommand("sweep", "train mixture heads across a grid of center counts");
  sweep->add_option("--config", config_path, "experiment config file with eval.sweep_k")->required();
  sweep->add_option("--out", out_dir, "output directory (overrides output.dir)");
  sweep->add_option("--human", human_path, "human label CSV (overrides eval.human)");
  sweep->add_option("--seed", seed, "base seed (overrides train.seed)");
  sweep->add_option("--jobs", jobs, "parallel runs (results identical at any value)")
      ->check(CLI::PositiveNumber);

  CLI::App* gradcheck = app.add_subcommand("gradcheck", "verify analytic gradients against finite differences");
  gradcheck->add_flag("--inject-fault", inject_fault,
                      "perturb one analytic gradient to demonstrate detection")
      ->group("");  // hidden: harness self-test only

  CLI::App* exp = app.add_subcommand("export-embeddings",
                                     "write learned features and centers as CSV");
  exp->add_option("--model", model_path, "saved .dcm checkpoint")->required();
  exp->add_option("--out", out_path, "output CSV path")->required();
  exp->add_option("--sample", sample, "stimuli to sample (default min(256, N))");
  exp->add_option("--seed", seed, "sampling seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (train->parsed())
      return cmd_train(config_path, out_dir, human_path, seed, train->count("--seed") > 0);
    if (eval_cmd->parsed()) return cmd_eval(model_path, human_path);
    if (sweep->parsed())
      return cmd_sweep(config_path, out_dir, human_path, seed, sweep->count("--seed") > 0, jobs);
    if (gradcheck->parsed()) return cmd_gradcheck(inject_fault);
    if (exp->parsed())
      return cmd_export(model_path, out_path, sample, exp->count("--sample") > 0, seed);
  } catch (const dcm::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const dcm::FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
