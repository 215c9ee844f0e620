// Acceptance gate: exercises the full pipeline end-to-end at small scale and
// prints one PASS/FAIL line per criterion. Tolerances are pinned here, not
// configurable. Exit status is 0 only if every gating criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

#include "dcm/autodiff.hpp"
#include "dcm/config.hpp"
#include "dcm/data.hpp"
#include "dcm/errors.hpp"
#include "dcm/eval.hpp"
#include "dcm/experiment.hpp"
#include "dcm/featurenet.hpp"
#include "dcm/gradcheck.hpp"
#include "dcm/heads.hpp"
#include "dcm/model_io.hpp"
#include "dcm/optim.hpp"

namespace fs = std::filesystem;
using namespace dcm;

namespace {

int g_gating_failures = 0;

void report(int id, bool pass, bool gating, const std::string& text) {
  std::printf("%s criterion %d: %s\n",
              pass ? "PASS" : (gating ? "FAIL" : "FAIL (not gating)"), id,
              text.c_str());
  std::fflush(stdout);
  if (!pass && gating) ++g_gating_failures;
}

template <typename Fn>
void criterion(int id, bool gating, Fn body) {
  std::string detail;
  bool pass = false;
  try {
    pass = body(detail);
  } catch (const std::exception& e) {
    detail += std::string(detail.empty() ? "" : "; ") + "exception: " + e.what();
  }
  report(id, pass, gating, detail);
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list args;
  va_start(args, f);
  std::vsnprintf(buf, sizeof(buf), f, args);
  va_end(args);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

fs::path scratch_dir(const std::string& tag) {
  auto dir = fs::temp_directory_path() /
             ("dcm_acceptance_" + tag + "_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// 1. gradient suite
// ---------------------------------------------------------------------------

bool criterion_gradients(std::string& detail) {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<GradCaseResult> results = run_gradcheck_suite(1e-5, false);
  const double secs = seconds_since(t0);
  double worst = 0.0;
  std::size_t failed = 0;
  for (const GradCaseResult& r : results) {
    worst = std::max(worst, r.max_rel_err);
    if (!r.pass) ++failed;
  }
  detail = fmt("%zu cases, worst rel err %.2e, %.1f s", results.size(), worst, secs);
  return failed == 0 && results.size() >= 35 && secs < 60.0;
}

// ---------------------------------------------------------------------------
// 2. posterior vs. brute-force oracle
// ---------------------------------------------------------------------------

bool criterion_posterior_oracle(std::string& detail) {
  std::mt19937_64 rng(7);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t B = 1 + rng() % 8;
    const std::size_t C = 2 + rng() % 3;  // 2..4
    const std::size_t D = 1 + rng() % 6;

    HeadConfig hc;
    hc.kind = HeadKind::Mixture;
    hc.classes = C;
    hc.feature_dim = D;
    hc.logit_mode = LogitMode::LogSumExp;
    std::vector<double> prior;
    if (rng() % 2 == 0) {
      std::uniform_real_distribution<double> uni(-0.5, 0.5);
      for (std::size_t c = 0; c < C; ++c) prior.push_back(uni(rng));
      hc.log_prior = prior;
    }
    CategorizationHead head = CategorizationHead::create(hc, rng());

    std::vector<Tensor> blocks;
    std::vector<std::size_t> ks;
    for (std::size_t c = 0; c < C; ++c) {
      ks.push_back(1 + rng() % 5);
      blocks.push_back(Tensor::randn({ks.back(), D}, rng));
    }
    head.set_centers(blocks);
    Tensor features = Tensor::randn({B, D}, rng);

    Tape tape;
    Tensor logits = head.logits(tape, tape.constant(features)).tensor();
    Tensor post = posterior_from_logits(logits);

    for (std::size_t b = 0; b < B; ++b) {
      std::vector<long double> score(C, 0.0L);
      long double total = 0.0L;
      for (std::size_t c = 0; c < C; ++c) {
        long double acc = 0.0L;
        for (std::size_t k = 0; k < ks[c]; ++k) {
          long double d2 = 0.0L;
          for (std::size_t d = 0; d < D; ++d) {
            const long double diff = (long double)features[b * D + d] -
                                     (long double)blocks[c][k * D + d];
            d2 += diff * diff;
          }
          acc += expl(-d2);
        }
        acc /= (long double)ks[c];
        if (!prior.empty()) acc *= expl((long double)prior[c]);
        score[c] = acc;
        total += acc;
      }
      for (std::size_t c = 0; c < C; ++c) {
        const double oracle = (double)(score[c] / total);
        worst = std::max(worst, std::abs(post[b * C + c] - oracle));
      }
    }
  }
  detail = fmt("200 instances, max abs deviation %.2e (tol 1e-10)", worst);
  return worst <= 1e-10;
}

// ---------------------------------------------------------------------------
// 3. head algebra
// ---------------------------------------------------------------------------

std::vector<double> head_logits(CategorizationHead& head, const Tensor& features) {
  Tape tape;
  return head.logits(tape, tape.constant(features)).tensor().values();
}

bool criterion_head_algebra(std::string& detail) {
  const std::size_t C = 3, D = 4;
  std::mt19937_64 rng(17);
  Tensor features = Tensor::randn({6, D}, rng);
  std::vector<Tensor> centers;
  for (std::size_t c = 0; c < C; ++c) centers.push_back(Tensor::randn({1, D}, rng));

  double worst = 0.0;
  auto compare = [&](const std::vector<double>& a, const std::vector<double>& b) {
    for (std::size_t i = 0; i < a.size(); ++i)
      worst = std::max(worst, std::abs(a[i] - b[i]));
  };

  HeadConfig pc;
  pc.kind = HeadKind::Prototype;
  pc.classes = C;
  pc.feature_dim = D;
  CategorizationHead proto = CategorizationHead::create(pc, 1);
  proto.set_centers(centers);
  const std::vector<double> proto_ref = head_logits(proto, features);

  // K = 1 mixture, both logit modes, reduces to the prototype head
  for (LogitMode mode : {LogitMode::LogSumExp, LogitMode::NegSum}) {
    HeadConfig mc;
    mc.kind = HeadKind::Mixture;
    mc.classes = C;
    mc.feature_dim = D;
    mc.logit_mode = mode;
    CategorizationHead mix = CategorizationHead::create(mc, 1);
    mix.set_centers(centers);
    compare(head_logits(mix, features), proto_ref);
  }

  // axis-aligned covariance with equal per-dimension variances == shared scalar
  std::vector<double> lv{0.3, -0.2, 0.1};
  for (bool logdet : {true, false}) {
    HeadConfig sc = pc;
    sc.covariance = CovarianceMode::SharedScalar;
    sc.use_logdet = logdet;
    CategorizationHead shared = CategorizationHead::create(sc, 1);
    shared.set_centers(centers);
    shared.parameters()[C]->value = Tensor({C}, lv);

    HeadConfig ac = sc;
    ac.covariance = CovarianceMode::AxisAligned;
    CategorizationHead axis = CategorizationHead::create(ac, 1);
    axis.set_centers(centers);
    Tensor lv_mat({C, D});
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t d = 0; d < D; ++d) lv_mat[c * D + d] = lv[c];
    axis.parameters()[C]->value = lv_mat;
    compare(head_logits(shared, features), head_logits(axis, features));
  }

  // unit variances reduce the shared head to the identity head (log-det = 0)
  HeadConfig uc = pc;
  uc.covariance = CovarianceMode::SharedScalar;
  CategorizationHead unit = CategorizationHead::create(uc, 1);
  unit.set_centers(centers);
  compare(head_logits(unit, features), proto_ref);

  // permuting centers within a class changes nothing
  Tensor block = Tensor::randn({3, D}, rng);
  Tensor permuted({3, D});
  const std::size_t order[3] = {2, 0, 1};
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t d = 0; d < D; ++d)
      permuted[r * D + d] = block[order[r] * D + d];
  for (LogitMode mode : {LogitMode::LogSumExp, LogitMode::NegSum}) {
    HeadConfig mc;
    mc.kind = HeadKind::Mixture;
    mc.classes = 2;
    mc.feature_dim = D;
    mc.components = 3;
    mc.logit_mode = mode;
    CategorizationHead a = CategorizationHead::create(mc, 1);
    a.set_centers({block, centers[0]});
    CategorizationHead b = CategorizationHead::create(mc, 1);
    b.set_centers({permuted, centers[0]});
    compare(head_logits(a, features), head_logits(b, features));
  }

  // duplicating a center K times cancels against the -log K mixture offset
  Tensor single = Tensor::randn({1, D}, rng);
  Tensor tripled({3, D});
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t d = 0; d < D; ++d) tripled[r * D + d] = single[d];
  HeadConfig ec;
  ec.kind = HeadKind::Exemplar;
  ec.classes = 2;
  ec.feature_dim = D;
  CategorizationHead dup = CategorizationHead::create(ec, 1);
  dup.set_centers({tripled, centers[0]});
  HeadConfig oc = ec;
  oc.kind = HeadKind::Mixture;
  CategorizationHead one = CategorizationHead::create(oc, 1);
  one.set_centers({single, centers[0]});
  compare(head_logits(dup, features), head_logits(one, features));

  detail = fmt("max abs deviation %.2e (tol 1e-12)", worst);
  return worst <= 1e-12;
}

// ---------------------------------------------------------------------------
// 4. separable benchmark, one model per head kind
// ---------------------------------------------------------------------------

bool criterion_separable(std::string& detail) {
  struct Plan {
    const char* label;
    const char* extra;
  };
  // The head kind is pinned; the feature/center configuration per head is the
  // library's recommended stable setup for this data.
  const Plan plans[] = {
      {"baseline", "model.features = auto\nmodel.head = baseline\n"},
      {"prototype", "model.features = auto\nmodel.head = prototype\n"},
      {"mixture",
       "model.features = identity\nmodel.head = mixture\nmodel.k = 4\n"
       "model.center_init = projections\n"},
      {"exemplar", "model.features = auto\nmodel.head = exemplar\n"},
  };
  bool ok = true;
  for (const Plan& plan : plans) {
    const std::string text =
        std::string("data.source = blobs\ntrain.epochs = 50\n") + plan.extra;
    ExperimentConfig cfg = parse_config_text(text, "acceptance-c4");
    const auto t0 = std::chrono::steady_clock::now();
    Experiment ex = build_experiment(cfg);
    RunMetrics m = run_training(ex, nullptr);
    const double secs = seconds_since(t0);
    const bool head_ok = m.validation_accuracy >= 0.95 && secs < 120.0;
    ok = ok && head_ok;
    if (!detail.empty()) detail += ", ";
    detail += fmt("%s %.4f/%.0fs%s", plan.label, m.validation_accuracy, secs,
                  head_ok ? "" : "(!)");
  }
  detail += " (need >= 0.95 within 50 epochs, < 120 s each)";
  return ok;
}

// ---------------------------------------------------------------------------
// 5. multimodal sweep: some K > 1 beats K = 1 decisively
// ---------------------------------------------------------------------------

bool criterion_multimodal_sweep(std::string& detail) {
  LabeledDataset all = gen_multimodal(2, 4, 25, 2, 42);
  SplitResult parts = split(all, 0.8, 42);

  SweepSpec spec;  // identity features, default training, from-projections
  spec.run_id_prefix = "acceptance";
  std::vector<RunMetrics> runs =
      centers_sweep(spec, parts.train, parts.validation, nullptr, {1, 2, 4, 8}, 5, 1, 4);

  std::size_t failed = 0;
  for (const RunMetrics& m : runs)
    if (!m.error.empty()) ++failed;

  double k1_mean = -1.0, best_mean = -1.0;
  std::size_t best_k = 0;
  for (const SweepSummaryRow& row : summarize_sweep(runs)) {
    if (row.k == 1) {
      k1_mean = row.mean_accuracy;
    } else if (row.mean_accuracy > best_mean) {
      best_mean = row.mean_accuracy;
      best_k = row.k;
    }
  }
  detail = fmt("K=1 mean %.3f, best K=%zu mean %.3f, gap %.3f (need >= 0.2), %zu failed",
               k1_mean, best_k, best_mean, best_mean - k1_mean, failed);
  return failed == 0 && k1_mean >= 0.0 && best_mean - k1_mean >= 0.2;
}

// ---------------------------------------------------------------------------
// 6. human-fit fixtures
// ---------------------------------------------------------------------------

bool criterion_human_fit(std::string& detail) {
  // fully confident judge against a 50/50 posterior: -log(1/2)
  const double ln2_case =
      human_fit_crossentropy(Tensor({1, 2}, {0.5, 0.5}), Tensor({1, 2}, {1, 0}));
  // fully confident judge against a uniform 10-way posterior: -log(1/10)
  Tensor y10 = Tensor::full({1, 10}, 0.1);
  Tensor h10 = Tensor::zeros({1, 10});
  h10[7] = 1.0;
  const double ln10_case = human_fit_crossentropy(y10, h10);

  // Gibbs: cross-entropy >= entropy, with equality exactly at y == h
  Tensor h({2, 3}, {0.2, 0.5, 0.3, 0.6, 0.1, 0.3});
  double entropy = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) entropy -= h[i] * std::log(h[i]);
  entropy /= 2.0;
  const double equal_case = human_fit_crossentropy(h, h);
  Tensor y({2, 3}, {0.3, 0.4, 0.3, 0.3, 0.3, 0.4});
  const double off_case = human_fit_crossentropy(y, h);

  const bool ok_ln2 = std::abs(ln2_case - 0.6931471805599453) <= 1e-6;
  const bool ok_ln10 = std::abs(ln10_case - 2.302585092994046) <= 1e-6;
  const bool ok_equal = std::abs(equal_case - entropy) <= 1e-10;
  const bool ok_bound = off_case > entropy;
  detail = fmt("ln2 dev %.1e, ln10 dev %.1e, equality dev %.1e, bound %s",
               std::abs(ln2_case - 0.6931471805599453),
               std::abs(ln10_case - 2.302585092994046),
               std::abs(equal_case - entropy), ok_bound ? "holds" : "violated");
  return ok_ln2 && ok_ln10 && ok_equal && ok_bound;
}

// ---------------------------------------------------------------------------
// 7. determinism and persistence
// ---------------------------------------------------------------------------

int run_binary(const std::string& args) {
  const std::string cmd = std::string(DCM_BINARY) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

bool criterion_determinism(std::string& detail) {
  const auto dir = scratch_dir("c7");
  const std::string text =
      "data.source = blobs\n"
      "data.per_class = 40\n"
      "data.separation = 8\n"
      "model.features = identity\n"
      "model.head = mixture\n"
      "model.k = 2\n"
      "model.center_init = projections\n"
      "train.epochs = 8\n"
      "output.dir = " + dir.string() + "\n";
  {
    std::ofstream out(dir / "c7.cfg");
    out << text;
  }

  if (run_binary("train --config " + (dir / "c7.cfg").string()) != 0) {
    detail = "first training run failed";
    return false;
  }
  const std::string first_model = read_file(dir / "run.dcm");
  const std::string first_metrics = read_file(dir / "run.metrics.json");
  if (run_binary("train --config " + (dir / "c7.cfg").string()) != 0) {
    detail = "second training run failed";
    return false;
  }
  const bool repeat_ok = read_file(dir / "run.dcm") == first_model &&
                         read_file(dir / "run.metrics.json") == first_metrics;

  // save/load may lose only the 64->32-bit float rounding
  ExperimentConfig cfg = parse_config_text(text, "acceptance-c7");
  Experiment ex = build_experiment(cfg);
  Checkpoint ck;
  ck.config_text = emit_config(ex.cfg);
  for (Parameter* p : ex.parameters()) ck.params.push_back(*p);
  const std::string ckpt_path = (dir / "roundtrip.dcm").string();
  save_checkpoint(ckpt_path, ck);
  Checkpoint back = load_checkpoint(ckpt_path);

  std::size_t mismatches = 0;
  bool names_ok = back.params.size() == ck.params.size() &&
                  back.config_text == ck.config_text;
  for (std::size_t i = 0; names_ok && i < ck.params.size(); ++i) {
    if (back.params[i].name != ck.params[i].name ||
        back.params[i].value.shape() != ck.params[i].value.shape()) {
      names_ok = false;
      break;
    }
    for (std::size_t j = 0; j < ck.params[i].value.size(); ++j) {
      const double expected = (double)(float)ck.params[i].value[j];
      if (back.params[i].value[j] != expected) ++mismatches;
    }
  }
  detail = fmt("repeat runs byte-identical: %s; round-trip rounding mismatches: %zu",
               repeat_ok ? "yes" : "no", mismatches);
  fs::remove_all(dir);
  return repeat_ok && names_ok && mismatches == 0;
}

// ---------------------------------------------------------------------------
// 8. loader fixtures
// ---------------------------------------------------------------------------

template <typename E, typename Fn>
bool throws_only(Fn fn) {
  try {
    fn();
  } catch (const E&) {
    return true;
  } catch (...) {
    return false;
  }
  return false;
}

void write_bytes(const fs::path& p, const std::vector<unsigned char>& b) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(b.data()),
            static_cast<std::streamsize>(b.size()));
}

bool criterion_loaders(std::string& detail) {
  const auto dir = scratch_dir("c8");
  std::size_t checks = 0, passed = 0;
  auto tally = [&](bool ok) {
    ++checks;
    if (ok) ++passed;
  };

  // --- IDX ---
  auto be32 = [](std::vector<unsigned char>& v, std::uint32_t x) {
    v.push_back((x >> 24) & 0xff);
    v.push_back((x >> 16) & 0xff);
    v.push_back((x >> 8) & 0xff);
    v.push_back(x & 0xff);
  };
  std::vector<unsigned char> img;
  be32(img, 0x00000803);
  be32(img, 2);
  be32(img, 2);
  be32(img, 2);
  for (unsigned char b : {0, 128, 255, 64, 1, 2, 3, 4}) img.push_back(b);
  std::vector<unsigned char> lab;
  be32(lab, 0x00000801);
  be32(lab, 2);
  lab.push_back(3);
  lab.push_back(0);
  const auto ip = dir / "i.idx", lp = dir / "l.idx";
  write_bytes(ip, img);
  write_bytes(lp, lab);
  {
    LabeledDataset d = load_idx(ip.string(), lp.string());
    tally(d.inputs.shape() == Shape{2, 1, 2, 2} &&
          d.inputs[0] == 0.0 && d.inputs[1] == 128.0 / 255.0 &&
          d.inputs[2] == 1.0 && d.inputs[3] == 64.0 / 255.0 &&
          d.labels == std::vector<std::size_t>{3, 0});
  }
  {
    auto bad = img;
    bad[3] = 0x42;
    write_bytes(ip, bad);
    tally(throws_only<FormatError>([&] { load_idx(ip.string(), lp.string()); }));
    write_bytes(ip, img);
  }
  {
    auto bad = img;
    bad.resize(bad.size() - 2);
    write_bytes(ip, bad);
    tally(throws_only<FormatError>([&] { load_idx(ip.string(), lp.string()); }));
    write_bytes(ip, img);
  }
  {
    auto bad = lab;
    bad[7] = 5;  // claims five labels for two images
    write_bytes(lp, bad);
    tally(throws_only<FormatError>([&] { load_idx(ip.string(), lp.string()); }));
    write_bytes(lp, lab);
  }

  // --- CIFAR-10 binary ---
  std::vector<unsigned char> rec(3073, 0);
  rec[0] = 7;
  rec[1] = 255;
  rec[1 + 1024] = 128;
  rec[1 + 2048] = 64;
  const auto cp = dir / "c.bin";
  write_bytes(cp, rec);
  {
    LabeledDataset d = load_cifar10_binary({cp.string()});
    tally(d.inputs.shape() == Shape{1, 3, 32, 32} && d.labels[0] == 7 &&
          d.inputs[0] == 1.0 && d.inputs[1024] == 128.0 / 255.0 &&
          d.inputs[2048] == 64.0 / 255.0);
  }
  {
    auto bad = rec;
    bad.pop_back();
    write_bytes(cp, bad);
    tally(throws_only<FormatError>([&] { load_cifar10_binary({cp.string()}); }));
  }
  {
    auto bad = rec;
    bad[0] = 10;
    write_bytes(cp, bad);
    tally(throws_only<DataError>([&] { load_cifar10_binary({cp.string()}); }));
    write_bytes(cp, rec);
  }

  // --- human CSV ---
  const auto hp = dir / "h.csv";
  auto write_text = [&](const std::string& s) {
    std::ofstream out(hp, std::ios::trunc);
    out << s;
  };
  write_text("1, 0.25, 0.75\n0, 30, 20\n");
  {
    HumanLabelSet h = load_human_csv(hp.string(), 2);
    tally(h.indices == std::vector<std::size_t>{0, 1} && h.probs[0] == 30.0 / 50.0 &&
          h.probs[1] == 20.0 / 50.0 && h.probs[2] == 0.25 && h.probs[3] == 0.75);
  }
  write_text("0, 5, -1\n");
  tally(throws_only<FormatError>([&] { load_human_csv(hp.string(), 2); }));
  write_text("0, 1, 0\n0, 0, 1\n");
  tally(throws_only<FormatError>([&] { load_human_csv(hp.string(), 2); }));
  write_text("0, 1, 0, 0\n");
  tally(throws_only<FormatError>([&] { load_human_csv(hp.string(), 2); }));
  write_text("0, 0.5, 0.4\n");
  tally(throws_only<FormatError>([&] { load_human_csv(hp.string(), 2); }));

  fs::remove_all(dir);
  detail = fmt("%zu/%zu fixture checks passed", passed, checks);
  return passed == checks;
}

// ---------------------------------------------------------------------------
// 9. image-path smoke on synthetic CIFAR-format data (not gating)
// ---------------------------------------------------------------------------

void write_synthetic_batch(const fs::path& path, std::size_t records,
                           std::size_t first_index, std::mt19937_64& rng) {
  std::normal_distribution<double> noise(0.0, 18.0);
  std::vector<unsigned char> bytes;
  bytes.reserve(records * 3073);
  const double scales[3] = {1.0, 0.85, 0.7};
  for (std::size_t r = 0; r < records; ++r) {
    const std::size_t label = (first_index + r) % 10;
    bytes.push_back(static_cast<unsigned char>(label));
    // each class gets a brightness gradient along its own direction
    const double angle = 2.0 * M_PI * static_cast<double>(label) / 10.0;
    const double gx = std::cos(angle), gy = std::sin(angle);
    for (double scale : scales) {
      for (std::size_t y = 0; y < 32; ++y) {
        for (std::size_t x = 0; x < 32; ++x) {
          const double proj = (static_cast<double>(x) / 31.0 - 0.5) * gx +
                              (static_cast<double>(y) / 31.0 - 0.5) * gy;
          const double v = 128.0 + 110.0 * proj * scale + noise(rng);
          bytes.push_back(static_cast<unsigned char>(
              std::lround(std::clamp(v, 0.0, 255.0))));
        }
      }
    }
  }
  write_bytes(path, bytes);
}

bool criterion_image_smoke(std::string& detail) {
  const auto dir = scratch_dir("c9");
  std::mt19937_64 rng(5);
  write_synthetic_batch(dir / "b1.bin", 1000, 0, rng);
  write_synthetic_batch(dir / "b2.bin", 1000, 1000, rng);

  const std::string text =
      "data.source = cifar10\n"
      "data.batches = " + (dir / "b1.bin").string() + ", " +
      (dir / "b2.bin").string() + "\n"
      "model.features = auto\n"
      "model.head = mixture\n"
      "model.k = 2\n"
      "model.center_init = projections\n"
      "train.epochs = 10\n"
      "train.learning_rate = 0.001\n";
  ExperimentConfig cfg = parse_config_text(text, "acceptance-c9");
  const auto t0 = std::chrono::steady_clock::now();
  Experiment ex = build_experiment(cfg);
  RunMetrics m = run_training(ex, nullptr);
  const double secs = seconds_since(t0);
  fs::remove_all(dir);
  detail = fmt("2000 synthetic records, validation accuracy %.3f in %.0f s "
               "(need > 0.15; real CIFAR-10 not bundled)",
               m.validation_accuracy, secs);
  return m.validation_accuracy > 0.15;
}

}  // namespace

int main() {
  std::printf("acceptance suite\n");
  criterion(1, true, criterion_gradients);
  criterion(2, true, criterion_posterior_oracle);
  criterion(3, true, criterion_head_algebra);
  criterion(4, true, criterion_separable);
  criterion(5, true, criterion_multimodal_sweep);
  criterion(6, true, criterion_human_fit);
  criterion(7, true, criterion_determinism);
  criterion(8, true, criterion_loaders);
  criterion(9, false, criterion_image_smoke);
  if (g_gating_failures == 0) {
    std::printf("acceptance: all gating criteria passed\n");
    return 0;
  }
  std::printf("acceptance: %d gating criteria FAILED\n", g_gating_failures);
  return 1;
}
