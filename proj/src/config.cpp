#include "dcm/config.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "dcm/errors.hpp"

namespace dcm {
namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct KeyInfo {
  std::string value;
  int line = 0;
};

struct Parsed {
  std::map<std::string, KeyInfo> keys;
  std::string origin;

  bool has(const std::string& key) const { return keys.count(key) != 0; }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw ConfigError(origin + ":" + std::to_string(keys.at(key).line) + ": " + what);
  }
};

std::uint64_t get_u64(const Parsed& p, const std::string& key, std::uint64_t fallback) {
  if (!p.has(key)) return fallback;
  const std::string& v = p.keys.at(key).value;
  try {
    std::size_t used = 0;
    if (v.empty() || v[0] == '-' || v[0] == '+') throw std::invalid_argument(v);
    unsigned long long n = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return n;
  } catch (const std::exception&) {
    p.fail(key, key + " expects a non-negative integer, got '" + v + "'");
  }
}

std::size_t get_size(const Parsed& p, const std::string& key, std::size_t fallback) {
  return static_cast<std::size_t>(get_u64(p, key, fallback));
}

double get_double(const Parsed& p, const std::string& key, double fallback) {
  if (!p.has(key)) return fallback;
  const std::string& v = p.keys.at(key).value;
  try {
    std::size_t used = 0;
    double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    p.fail(key, key + " expects a number, got '" + v + "'");
  }
}

bool get_bool(const Parsed& p, const std::string& key, bool fallback) {
  if (!p.has(key)) return fallback;
  const std::string& v = p.keys.at(key).value;
  if (v == "true") return true;
  if (v == "false") return false;
  p.fail(key, key + " expects true or false, got '" + v + "'");
}

std::string get_string(const Parsed& p, const std::string& key, const std::string& fallback) {
  if (!p.has(key)) return fallback;
  return p.keys.at(key).value;
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<std::size_t> get_size_list(const Parsed& p, const std::string& key) {
  std::vector<std::size_t> out;
  if (!p.has(key)) return out;
  for (const std::string& item : split_list(p.keys.at(key).value)) {
    try {
      std::size_t used = 0;
      if (item[0] == '-' || item[0] == '+') throw std::invalid_argument(item);
      unsigned long long n = std::stoull(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(static_cast<std::size_t>(n));
    } catch (const std::exception&) {
      p.fail(key, key + " expects a comma-separated list of integers, got '" + item + "'");
    }
  }
  return out;
}

template <typename T>
T get_enum(const Parsed& p, const std::string& key,
           const std::vector<std::pair<std::string, T>>& options, T fallback) {
  if (!p.has(key)) return fallback;
  const std::string& v = p.keys.at(key).value;
  std::string valid;
  for (const auto& [name, val] : options) {
    if (v == name) return val;
    if (!valid.empty()) valid += ", ";
    valid += name;
  }
  p.fail(key, key + " must be one of {" + valid + "}, got '" + v + "'");
}

const char* const kKnownKeys[] = {
    "data.source", "data.classes", "data.per_class", "data.dim", "data.separation",
    "data.modes_per_class", "data.per_mode", "data.images", "data.labels", "data.batches",
    "data.split_fraction", "data.seed",
    "model.features", "model.head", "model.k", "model.covariance", "model.logit_mode",
    "model.center_init", "model.use_logdet", "model.frozen_centers", "model.seed",
    "train.learning_rate", "train.decay", "train.momentum", "train.epochs",
    "train.batch_size", "train.seed",
    "eval.human", "eval.sweep_k", "eval.replications",
    "output.dir", "output.run_id",
};

void check_value(bool ok, const Parsed& p, const std::string& key, const std::string& what) {
  if (ok) return;
  if (p.has(key)) p.fail(key, what);
  throw ConfigError(p.origin + ": " + what);
}

void reject_if_set(const Parsed& p, const std::string& key, const std::string& why) {
  if (p.has(key)) p.fail(key, key + " " + why);
}

ExperimentConfig build(const Parsed& p) {
  ExperimentConfig cfg;

  cfg.data.source = get_enum<std::string>(
      p, "data.source",
      {{"blobs", "blobs"}, {"multimodal", "multimodal"}, {"idx", "idx"}, {"cifar10", "cifar10"}},
      "blobs");
  cfg.data.classes = get_size(p, "data.classes", cfg.data.classes);
  cfg.data.per_class = get_size(p, "data.per_class", cfg.data.per_class);
  cfg.data.dim = get_size(p, "data.dim", cfg.data.dim);
  cfg.data.separation = get_double(p, "data.separation", cfg.data.separation);
  cfg.data.modes_per_class = get_size(p, "data.modes_per_class", cfg.data.modes_per_class);
  cfg.data.per_mode = get_size(p, "data.per_mode", cfg.data.per_mode);
  cfg.data.images = get_string(p, "data.images", "");
  cfg.data.labels = get_string(p, "data.labels", "");
  if (p.has("data.batches")) cfg.data.batches = split_list(p.keys.at("data.batches").value);
  cfg.data.split_fraction = get_double(p, "data.split_fraction", cfg.data.split_fraction);
  cfg.data.seed = get_u64(p, "data.seed", cfg.data.seed);

  cfg.model.features = get_enum<std::string>(
      p, "model.features", {{"auto", "auto"}, {"identity", "identity"}}, "auto");
  cfg.model.head = get_enum<HeadKind>(p, "model.head",
                                      {{"baseline", HeadKind::Baseline},
                                       {"prototype", HeadKind::Prototype},
                                       {"mixture", HeadKind::Mixture},
                                       {"exemplar", HeadKind::Exemplar}},
                                      HeadKind::Prototype);
  cfg.model.k = get_size(p, "model.k", cfg.model.k);
  cfg.model.covariance = get_enum<CovarianceMode>(p, "model.covariance",
                                                  {{"identity", CovarianceMode::Identity},
                                                   {"shared_scalar", CovarianceMode::SharedScalar},
                                                   {"axis_aligned", CovarianceMode::AxisAligned}},
                                                  CovarianceMode::Identity);
  cfg.model.logit_mode = get_enum<LogitMode>(
      p, "model.logit_mode", {{"lse", LogitMode::LogSumExp}, {"negsum", LogitMode::NegSum}},
      LogitMode::LogSumExp);
  cfg.model.center_init = get_enum<std::string>(
      p, "model.center_init",
      {{"auto", "auto"}, {"normal", "normal"}, {"projections", "projections"}}, "auto");
  cfg.model.use_logdet = get_bool(p, "model.use_logdet", cfg.model.use_logdet);
  cfg.model.frozen_centers = get_bool(p, "model.frozen_centers", cfg.model.frozen_centers);
  cfg.model.seed = get_u64(p, "model.seed", cfg.model.seed);

  cfg.train.learning_rate = get_double(p, "train.learning_rate", cfg.train.learning_rate);
  cfg.train.decay = get_double(p, "train.decay", cfg.train.decay);
  cfg.train.momentum = get_double(p, "train.momentum", cfg.train.momentum);
  cfg.train.epochs = get_size(p, "train.epochs", cfg.train.epochs);
  cfg.train.batch_size = get_size(p, "train.batch_size", cfg.train.batch_size);
  cfg.train.seed = get_u64(p, "train.seed", cfg.train.seed);

  cfg.eval.human = get_string(p, "eval.human", "");
  cfg.eval.sweep_k = get_size_list(p, "eval.sweep_k");
  cfg.eval.replications = get_size(p, "eval.replications", cfg.eval.replications);

  cfg.output.dir = get_string(p, "output.dir", cfg.output.dir);
  cfg.output.run_id = get_string(p, "output.run_id", cfg.output.run_id);

  // Data-source consistency: keys that belong to another generator may not be
  // set explicitly.
  const std::string& src = cfg.data.source;
  auto only_for = [&](const std::string& key, const std::string& sources, bool allowed) {
    if (!allowed) reject_if_set(p, key, "applies only to data.source " + sources + " (have " + src + ")");
  };
  only_for("data.per_class", "blobs", src == "blobs");
  only_for("data.separation", "blobs", src == "blobs");
  only_for("data.classes", "blobs/multimodal", src == "blobs" || src == "multimodal");
  only_for("data.dim", "blobs/multimodal", src == "blobs" || src == "multimodal");
  only_for("data.modes_per_class", "multimodal", src == "multimodal");
  only_for("data.per_mode", "multimodal", src == "multimodal");
  only_for("data.images", "idx", src == "idx");
  only_for("data.labels", "idx", src == "idx");
  only_for("data.batches", "cifar10", src == "cifar10");
  if (src == "idx") {
    if (cfg.data.images.empty())
      throw ConfigError(p.origin + ": data.source idx requires data.images");
    if (cfg.data.labels.empty())
      throw ConfigError(p.origin + ": data.source idx requires data.labels");
  }
  if (src == "cifar10" && cfg.data.batches.empty())
    throw ConfigError(p.origin + ": data.source cifar10 requires data.batches");

  // Head-kind consistency for model keys set explicitly.
  HeadKind head = cfg.model.head;
  if (p.has("model.k")) {
    bool ok = head == HeadKind::Mixture ||
              (head == HeadKind::Prototype && cfg.model.k == 1);
    if (!ok)
      p.fail("model.k", "model.k applies only to mixture heads (prototype allows model.k = 1)");
  }
  if (head != HeadKind::Prototype) {
    reject_if_set(p, "model.covariance", "applies only to prototype heads");
    reject_if_set(p, "model.use_logdet", "applies only to prototype heads");
  }
  if (head != HeadKind::Mixture && head != HeadKind::Exemplar)
    reject_if_set(p, "model.logit_mode", "applies only to mixture and exemplar heads");
  if (head == HeadKind::Baseline) {
    reject_if_set(p, "model.frozen_centers", "applies only to heads with centers");
    reject_if_set(p, "model.center_init", "applies only to heads with centers");
  }
  if (head == HeadKind::Exemplar && cfg.model.center_init == "normal")
    p.fail("model.center_init", "exemplar centers come from training stimuli; "
                                "center_init normal is not available");

  // Value ranges.
  check_value(cfg.data.classes >= 2, p, "data.classes", "data.classes must be at least 2");
  check_value(cfg.data.per_class >= 1, p, "data.per_class", "data.per_class must be at least 1");
  check_value(cfg.data.dim >= 1, p, "data.dim", "data.dim must be at least 1");
  check_value(cfg.data.separation > 0.0, p, "data.separation", "data.separation must be positive");
  check_value(cfg.data.modes_per_class >= 2, p, "data.modes_per_class",
              "data.modes_per_class must be at least 2");
  check_value(cfg.data.per_mode >= 1, p, "data.per_mode", "data.per_mode must be at least 1");
  check_value(cfg.data.split_fraction > 0.0 && cfg.data.split_fraction < 1.0, p,
              "data.split_fraction", "data.split_fraction must lie in (0, 1)");
  check_value(cfg.model.k >= 1, p, "model.k", "model.k must be at least 1");
  check_value(cfg.train.epochs >= 1, p, "train.epochs", "train.epochs must be at least 1");
  check_value(cfg.eval.replications >= 1, p, "eval.replications",
              "eval.replications must be at least 1");
  for (std::size_t k : cfg.eval.sweep_k)
    check_value(k >= 1, p, "eval.sweep_k", "eval.sweep_k entries must be at least 1");
  try {
    validate(cfg.train);
  } catch (const ConfigError& e) {
    throw ConfigError(p.origin + ": " + e.what());
  }
  return cfg;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin) {
  Parsed p;
  p.origin = origin.empty() ? "config" : origin;
  std::stringstream ss(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(ss, raw)) {
    ++line_no;
    std::size_t hash = raw.find('#');
    if (hash != std::string::npos) raw = raw.substr(0, hash);
    std::string line = trim(raw);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(p.origin + ":" + std::to_string(line_no) +
                        ": expected 'section.key = value', got '" + line + "'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    bool known = false;
    for (const char* k : kKnownKeys)
      if (key == k) { known = true; break; }
    if (!known)
      throw ConfigError(p.origin + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
    if (p.keys.count(key))
      throw ConfigError(p.origin + ":" + std::to_string(line_no) + ": duplicate key '" + key +
                        "' (first set on line " + std::to_string(p.keys[key].line) + ")");
    p.keys[key] = {value, line_no};
  }
  return build(p);
}

ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path);
}

std::uint64_t resolved_model_seed(const ExperimentConfig& cfg) {
  return cfg.model.seed != 0 ? cfg.model.seed : cfg.train.seed;
}

CenterInit resolved_center_init(const ExperimentConfig& cfg) {
  if (cfg.model.center_init == "normal") return CenterInit::RandomNormal;
  if (cfg.model.center_init == "projections") return CenterInit::FromProjections;
  // auto: exemplar heads memorize training stimuli, everything else starts
  // from fresh gaussian draws.
  return cfg.model.head == HeadKind::Exemplar ? CenterInit::FromProjections
                                              : CenterInit::RandomNormal;
}

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%g", v);
  try {
    std::size_t used = 0;
    if (std::stod(buf, &used) == v && used == std::string(buf).size()) return buf;
  } catch (const std::exception&) {
  }
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string emit_config(const ExperimentConfig& cfg) {
  std::ostringstream out;
  auto kv = [&](const std::string& key, const std::string& value) {
    out << key << " = " << value << "\n";
  };
  auto kn = [&](const std::string& key, std::uint64_t value) {
    kv(key, std::to_string(value));
  };
  auto kd = [&](const std::string& key, double value) { kv(key, fmt_double(value)); };

  const std::string& src = cfg.data.source;
  kv("data.source", src);
  if (src == "blobs" || src == "multimodal") {
    kn("data.classes", cfg.data.classes);
    kn("data.dim", cfg.data.dim);
  }
  if (src == "blobs") {
    kn("data.per_class", cfg.data.per_class);
    kd("data.separation", cfg.data.separation);
  }
  if (src == "multimodal") {
    kn("data.modes_per_class", cfg.data.modes_per_class);
    kn("data.per_mode", cfg.data.per_mode);
  }
  if (src == "idx") {
    kv("data.images", cfg.data.images);
    kv("data.labels", cfg.data.labels);
  }
  if (src == "cifar10") {
    std::string joined;
    for (const std::string& b : cfg.data.batches) {
      if (!joined.empty()) joined += ",";
      joined += b;
    }
    kv("data.batches", joined);
  }
  kd("data.split_fraction", cfg.data.split_fraction);
  kn("data.seed", cfg.data.seed);

  kv("model.features", cfg.model.features);
  kv("model.head", to_string(cfg.model.head));
  if (cfg.model.head == HeadKind::Mixture) kn("model.k", cfg.model.k);
  if (cfg.model.head == HeadKind::Prototype) {
    kv("model.covariance", to_string(cfg.model.covariance));
    kv("model.use_logdet", cfg.model.use_logdet ? "true" : "false");
  }
  if (cfg.model.head == HeadKind::Mixture || cfg.model.head == HeadKind::Exemplar)
    kv("model.logit_mode", to_string(cfg.model.logit_mode));
  if (cfg.model.head != HeadKind::Baseline) {
    kv("model.center_init", resolved_center_init(cfg) == CenterInit::FromProjections
                                ? "projections"
                                : "normal");
    kv("model.frozen_centers", cfg.model.frozen_centers ? "true" : "false");
  }
  kn("model.seed", resolved_model_seed(cfg));

  kd("train.learning_rate", cfg.train.learning_rate);
  kd("train.decay", cfg.train.decay);
  kd("train.momentum", cfg.train.momentum);
  kn("train.epochs", cfg.train.epochs);
  kn("train.batch_size", cfg.train.batch_size);
  kn("train.seed", cfg.train.seed);

  if (!cfg.eval.human.empty()) kv("eval.human", cfg.eval.human);
  if (!cfg.eval.sweep_k.empty()) {
    std::string joined;
    for (std::size_t k : cfg.eval.sweep_k) {
      if (!joined.empty()) joined += ",";
      joined += std::to_string(k);
    }
    kv("eval.sweep_k", joined);
  }
  kn("eval.replications", cfg.eval.replications);

  kv("output.dir", cfg.output.dir);
  kv("output.run_id", cfg.output.run_id);
  return out.str();
}

}  // namespace dcm
