#include "dcm/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "dcm/errors.hpp"

namespace dcm {

namespace {

constexpr std::size_t kEvalChunk = 512;

Tensor features_for(FeatureNet& net, const Tensor& inputs) {
  const std::size_t n = inputs.shape()[0];
  Tensor out;
  std::size_t at = 0;
  while (at < n) {
    const std::size_t stop = std::min(n, at + kEvalChunk);
    std::vector<std::size_t> rows(stop - at);
    std::iota(rows.begin(), rows.end(), at);
    Tape tape;
    Var feats = net.forward(tape, tape.constant(take_rows(inputs, rows)));
    Tensor chunk = feats.tensor();
    if (at == 0) {
      Shape s = chunk.shape();
      s[0] = n;
      out = Tensor(s);
    }
    std::copy(chunk.values().begin(), chunk.values().end(),
              out.values().begin() + at * chunk.shape()[1]);
    at = stop;
  }
  return out;
}

Tensor logits_for(FeatureNet& net, CategorizationHead& head, const Tensor& inputs) {
  const std::size_t n = inputs.shape()[0];
  Tensor out;
  std::size_t at = 0;
  while (at < n) {
    const std::size_t stop = std::min(n, at + kEvalChunk);
    std::vector<std::size_t> rows(stop - at);
    std::iota(rows.begin(), rows.end(), at);
    Tape tape;
    Var lg = head.logits(tape, net.forward(tape, tape.constant(take_rows(inputs, rows))));
    Tensor chunk = lg.tensor();
    if (at == 0) {
      out = Tensor({n, chunk.shape()[1]});
    }
    std::copy(chunk.values().begin(), chunk.values().end(),
              out.values().begin() + at * chunk.shape()[1]);
    at = stop;
  }
  return out;
}

}  // namespace

double accuracy(FeatureNet& net, CategorizationHead& head, const LabeledDataset& data) {
  if (head.config().classes != data.classes) {
    throw DimensionError("head classifies " + std::to_string(head.config().classes) +
                         " classes, dataset has " + std::to_string(data.classes));
  }
  if (data.size() == 0) throw DataError("cannot score an empty dataset");
  const Tensor logits = logits_for(net, head, data.inputs);
  const std::size_t cols = logits.shape()[1];
  std::size_t correct = 0;
  for (std::size_t r = 0; r < data.size(); ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < cols; ++c) {
      if (logits[r * cols + c] > logits[r * cols + best]) best = c;
    }
    if (best == data.labels[r]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

Tensor predict_posterior(FeatureNet& net, CategorizationHead& head, const Tensor& inputs) {
  return posterior_from_logits(logits_for(net, head, inputs));
}

double human_fit(FeatureNet& net, CategorizationHead& head, const LabeledDataset& data,
                 const HumanLabelSet& human) {
  if (human.size() == 0) throw DataError("human label set is empty");
  for (std::size_t idx : human.indices) {
    if (idx >= data.size()) {
      throw DataError("human stimulus index " + std::to_string(idx) +
                      " outside the dataset of " + std::to_string(data.size()) +
                      " rows");
    }
  }
  const Tensor posterior = predict_posterior(net, head, data.inputs);
  const std::size_t cols = posterior.shape()[1];
  Tensor y({human.size(), cols});
  for (std::size_t i = 0; i < human.size(); ++i) {
    for (std::size_t c = 0; c < cols; ++c) {
      y[i * cols + c] = posterior[human.indices[i] * cols + c];
    }
  }
  return human_fit_crossentropy(y, human.probs);
}

namespace {

std::size_t flattened_width(const Tensor& inputs) {
  std::size_t w = 1;
  for (std::size_t d = 1; d < inputs.rank(); ++d) w *= inputs.shape()[d];
  return w;
}

RunMetrics run_one(const SweepSpec& spec, const LabeledDataset& train_data,
                   const LabeledDataset& validation_data, const HumanLabelSet* human,
                   std::size_t k, std::size_t replication, std::uint64_t base_seed) {
  RunMetrics m;
  m.k = k;
  m.seed = base_seed + replication;
  m.logit_mode = spec.logit_mode;
  m.epochs = spec.train.epochs;
  m.run_id = spec.run_id_prefix + "-k" + std::to_string(k) + "-r" +
             std::to_string(replication);
  try {
    FeatureNet net = spec.feature_layers.empty()
                         ? FeatureNet::identity()
                         : FeatureNet::build(spec.feature_layers, m.seed);
    HeadConfig hc;
    hc.kind = HeadKind::Mixture;
    hc.classes = train_data.classes;
    hc.feature_dim = spec.feature_layers.empty() ? flattened_width(train_data.inputs)
                                                 : net.feature_dim();
    hc.components = k;
    hc.logit_mode = spec.logit_mode;
    CategorizationHead head = CategorizationHead::create(hc, m.seed);
    init_centers(head, spec.center_init, net, train_data, m.seed);

    TrainConfig tc = spec.train;
    tc.seed = m.seed;
    TrainHistory history = fit(net, head, train_data, tc);
    m.per_epoch = history.epochs;
    m.validation_accuracy = accuracy(net, head, validation_data);
    if (human != nullptr && human->size() > 0) {
      m.human_crossentropy = human_fit(net, head, validation_data, *human);
    }
  } catch (const std::exception& e) {
    m.error = e.what();
  }
  return m;
}

}  // namespace

std::vector<RunMetrics> centers_sweep(const SweepSpec& spec,
                                      const LabeledDataset& train_data,
                                      const LabeledDataset& validation_data,
                                      const HumanLabelSet* human,
                                      const std::vector<std::size_t>& k_values,
                                      std::size_t replications, std::uint64_t base_seed,
                                      std::size_t jobs) {
  if (k_values.empty()) throw ConfigError("sweep needs at least one K value");
  for (std::size_t k : k_values) {
    if (k < 1) throw ConfigError("sweep K values must be positive");
  }
  if (replications < 1) throw ConfigError("sweep needs at least one replication");

  struct Job {
    std::size_t k, replication;
  };
  std::vector<Job> plan;
  for (std::size_t k : k_values) {
    for (std::size_t r = 0; r < replications; ++r) plan.push_back({k, r});
  }
  std::vector<RunMetrics> results(plan.size());

  const std::size_t workers = std::max<std::size_t>(1, std::min(jobs, plan.size()));
  if (workers == 1) {
    for (std::size_t i = 0; i < plan.size(); ++i) {
      results[i] = run_one(spec, train_data, validation_data, human, plan[i].k,
                           plan[i].replication, base_seed);
    }
    return results;
  }

  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= plan.size()) return;
        results[i] = run_one(spec, train_data, validation_data, human, plan[i].k,
                             plan[i].replication, base_seed);
      }
    });
  }
  for (std::thread& t : pool) t.join();
  return results;
}

std::vector<SweepSummaryRow> summarize_sweep(const std::vector<RunMetrics>& runs) {
  std::vector<SweepSummaryRow> rows;
  for (const RunMetrics& m : runs) {
    SweepSummaryRow* row = nullptr;
    for (SweepSummaryRow& r : rows) {
      if (r.k == m.k) row = &r;
    }
    if (row == nullptr) {
      rows.push_back(SweepSummaryRow{});
      row = &rows.back();
      row->k = m.k;
      row->min_accuracy = 1.0;
    }
    ++row->runs;
    if (!m.error.empty()) {
      ++row->failed;
      continue;
    }
    const std::size_t ok = row->runs - row->failed;
    row->mean_accuracy += (m.validation_accuracy - row->mean_accuracy) /
                          static_cast<double>(ok);
    row->min_accuracy = std::min(row->min_accuracy, m.validation_accuracy);
    row->max_accuracy = std::max(row->max_accuracy, m.validation_accuracy);
    if (m.human_crossentropy >= 0.0) {
      if (row->mean_human < 0.0) row->mean_human = 0.0;
      // running mean over the runs that measured it
      row->mean_human += (m.human_crossentropy - row->mean_human) /
                         static_cast<double>(ok);
    }
  }
  return rows;
}

std::string format_summary(const std::vector<SweepSummaryRow>& rows) {
  std::string out = "     K  runs  fail  mean_acc   min_acc   max_acc  mean_human_ce\n";
  char line[160];
  for (const SweepSummaryRow& r : rows) {
    if (r.mean_human >= 0.0) {
      std::snprintf(line, sizeof(line), "%6zu %5zu %5zu  %8.4f  %8.4f  %8.4f  %13.4f\n",
                    r.k, r.runs, r.failed, r.mean_accuracy, r.min_accuracy,
                    r.max_accuracy, r.mean_human);
    } else {
      std::snprintf(line, sizeof(line), "%6zu %5zu %5zu  %8.4f  %8.4f  %8.4f  %13s\n",
                    r.k, r.runs, r.failed, r.mean_accuracy, r.min_accuracy,
                    r.max_accuracy, "-");
    }
    out += line;
  }
  return out;
}

std::string metrics_json(const std::vector<RunMetrics>& runs) {
  nlohmann::json list = nlohmann::json::array();
  for (const RunMetrics& m : runs) {
    nlohmann::json j;
    j["run_id"] = m.run_id;
    j["seed"] = m.seed;
    j["head_kind"] = to_string(m.head_kind);
    j["covariance"] = to_string(m.covariance);
    j["K"] = m.k;
    j["logit_mode"] = to_string(m.logit_mode);
    j["epochs"] = m.epochs;
    if (m.error.empty()) {
      j["validation_accuracy"] = m.validation_accuracy;
      if (m.human_crossentropy >= 0.0) j["human_crossentropy"] = m.human_crossentropy;
      nlohmann::json series = nlohmann::json::array();
      for (const EpochStats& e : m.per_epoch) {
        series.push_back({{"loss", e.loss}, {"accuracy", e.accuracy}});
      }
      j["per_epoch"] = series;
    } else {
      j["error"] = m.error;
    }
    list.push_back(std::move(j));
  }
  return list.dump(2) + "\n";
}

void export_embeddings(FeatureNet& net, CategorizationHead& head,
                       const LabeledDataset& data, std::size_t sample,
                       std::uint64_t seed, const std::string& path) {
  if (sample > data.size()) {
    throw DataError("cannot sample " + std::to_string(sample) + " of " +
                    std::to_string(data.size()) + " stimuli");
  }
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> chosen(order.begin(), order.begin() + sample);
  std::sort(chosen.begin(), chosen.end());

  const Tensor feats = features_for(net, take_rows(data.inputs, chosen));
  const std::size_t dim = feats.shape()[1];

  std::ostringstream csv;
  csv << "tag,class,index";
  for (std::size_t d = 0; d < dim; ++d) csv << ",f" << d;
  csv << "\n";
  char num[40];
  auto put = [&](double v) {
    std::snprintf(num, sizeof(num), "%.17g", v);
    csv << ',' << num;
  };
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    csv << "stim," << data.labels[chosen[i]] << ',' << chosen[i];
    for (std::size_t d = 0; d < dim; ++d) put(feats[i * dim + d]);
    csv << "\n";
  }
  if (head.config().kind != HeadKind::Baseline) {
    for (std::size_t c = 0; c < head.config().classes; ++c) {
      const Tensor& centers = head.centers_of(c);
      for (std::size_t j = 0; j < centers.shape()[0]; ++j) {
        csv << "center," << c << ',' << j;
        for (std::size_t d = 0; d < dim; ++d) put(centers[j * dim + d]);
        csv << "\n";
      }
    }
  }

  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp);
    out << csv.str();
    if (!out) throw IoError("write failed for " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp + " to " + path + ": " + ec.message());
}

}  // namespace dcm
