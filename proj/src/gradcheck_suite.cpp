#include "dcm/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "dcm/autodiff.hpp"
#include "dcm/heads.hpp"

namespace dcm {
namespace {

constexpr double kStep = 1e-5;

Tensor randn(Shape shape, std::uint64_t seed, double stddev = 1.0, double offset = 0.0) {
  std::mt19937_64 rng(seed);
  Tensor t = Tensor::randn(std::move(shape), rng, stddev);
  for (double& v : t.values()) v += offset;
  return t;
}

/// Weighted scalar readout so per-coordinate gradient errors cannot cancel.
Var pin(Tape& tape, const Var& v, std::uint64_t seed) {
  Tensor w = randn(v.shape(), seed);
  return reduce_sum(mul(v, tape.constant(std::move(w))));
}

void run_primitive(std::vector<GradCaseResult>& out, const std::string& name,
                   const ScalarFn& f, const Tensor& x, double tolerance) {
  GradCheckReport r = grad_check(f, x, kStep, tolerance);
  out.push_back({"op." + name, r.max_rel_err, r.pass});
}

void primitive_cases(std::vector<GradCaseResult>& out, double tolerance) {
  Tensor a23 = randn({2, 3}, 11);
  Tensor b23 = randn({2, 3}, 12);
  Tensor row3 = randn({1, 3}, 13);
  Tensor pos23 = randn({2, 3}, 14, 0.5, 2.0);  // strictly positive for log
  Tensor off23 = randn({2, 3}, 15, 1.0, 0.5);  // away from the relu kink

  run_primitive(out, "add", [&](Tape& t, const Var& x) {
    return pin(t, add(x, t.constant(b23)), 101);
  }, a23, tolerance);
  run_primitive(out, "add.row_broadcast", [&](Tape& t, const Var& x) {
    return pin(t, add(t.constant(a23), x), 102);
  }, row3, tolerance);
  run_primitive(out, "sub", [&](Tape& t, const Var& x) {
    return pin(t, sub(t.constant(b23), x), 103);
  }, a23, tolerance);
  run_primitive(out, "mul", [&](Tape& t, const Var& x) {
    return pin(t, mul(x, t.constant(b23)), 104);
  }, a23, tolerance);
  run_primitive(out, "mul.scalar_broadcast", [&](Tape& t, const Var& x) {
    return pin(t, mul(t.constant(a23), x), 105);
  }, Tensor::scalar(1.7), tolerance);
  run_primitive(out, "scale", [&](Tape& t, const Var& x) {
    return pin(t, scale(x, -2.5), 106);
  }, a23, tolerance);
  run_primitive(out, "exp", [&](Tape& t, const Var& x) {
    return pin(t, exp(x), 107);
  }, a23, tolerance);
  run_primitive(out, "log", [&](Tape& t, const Var& x) {
    return pin(t, log(x), 108);
  }, pos23, tolerance);
  run_primitive(out, "square", [&](Tape& t, const Var& x) {
    return pin(t, square(x), 109);
  }, a23, tolerance);
  run_primitive(out, "relu", [&](Tape& t, const Var& x) {
    return pin(t, relu(x), 110);
  }, off23, tolerance);

  Tensor m34 = randn({3, 4}, 16);
  run_primitive(out, "matmul.lhs", [&](Tape& t, const Var& x) {
    return pin(t, matmul(x, t.constant(m34)), 111);
  }, a23, tolerance);
  run_primitive(out, "matmul.rhs", [&](Tape& t, const Var& x) {
    return pin(t, matmul(t.constant(a23), x), 112);
  }, m34, tolerance);

  Tensor img = randn({2, 1, 5, 5}, 17);
  Tensor ker = randn({2, 1, 3, 3}, 18);
  run_primitive(out, "conv2d.input", [&](Tape& t, const Var& x) {
    return pin(t, conv2d(x, t.constant(ker), 1), 113);
  }, img, tolerance);
  run_primitive(out, "conv2d.kernel", [&](Tape& t, const Var& x) {
    return pin(t, conv2d(t.constant(img), x, 1), 114);
  }, ker, tolerance);
  run_primitive(out, "conv2d.stride2", [&](Tape& t, const Var& x) {
    return pin(t, conv2d(t.constant(img), x, 2), 115);
  }, ker, tolerance);

  run_primitive(out, "reshape", [&](Tape& t, const Var& x) {
    return pin(t, reshape(x, {3, 2}), 116);
  }, a23, tolerance);
  run_primitive(out, "reduce_sum", [&](Tape& t, const Var& x) {
    return reduce_sum(x);
  }, a23, tolerance);
  run_primitive(out, "reduce_sum.axis0", [&](Tape& t, const Var& x) {
    return pin(t, reduce_sum(x, 0), 117);
  }, a23, tolerance);
  run_primitive(out, "reduce_mean.axis1", [&](Tape& t, const Var& x) {
    return pin(t, reduce_mean(x, 1), 118);
  }, a23, tolerance);
  run_primitive(out, "reduce_max.axis1", [&](Tape& t, const Var& x) {
    return pin(t, reduce_max(x, 1), 119);
  }, a23, tolerance);
  run_primitive(out, "logsumexp.axis1", [&](Tape& t, const Var& x) {
    return pin(t, logsumexp(x, 1), 120);
  }, a23, tolerance);

  Tensor feats = randn({3, 4}, 19);
  Tensor cents = randn({2, 4}, 20);
  Tensor wts = randn({2, 4}, 21, 0.3, 1.0);  // positive per-dimension weights
  run_primitive(out, "sqdist.features", [&](Tape& t, const Var& x) {
    return pin(t, pairwise_sqdist(x, t.constant(cents)), 121);
  }, feats, tolerance);
  run_primitive(out, "sqdist.centers", [&](Tape& t, const Var& x) {
    return pin(t, pairwise_sqdist(t.constant(feats), x), 122);
  }, cents, tolerance);
  run_primitive(out, "sqdist.weights", [&](Tape& t, const Var& x) {
    return pin(t, pairwise_sqdist(t.constant(feats), t.constant(cents), x), 123);
  }, wts, tolerance);

  run_primitive(out, "slice_cols", [&](Tape& t, const Var& x) {
    return pin(t, slice_cols(x, 1, 2), 124);
  }, randn({2, 4}, 22), tolerance);
  run_primitive(out, "concat_cols", [&](Tape& t, const Var& x) {
    return pin(t, concat_cols({x, t.constant(b23), x}), 125);
  }, a23, tolerance);
  run_primitive(out, "concat_rows", [&](Tape& t, const Var& x) {
    return pin(t, concat_rows({t.constant(b23), x}), 126);
  }, a23, tolerance);
}

struct ModelCase {
  std::string name;
  FeatureNet net;
  CategorizationHead head;
  Tensor inputs;
  std::vector<std::size_t> labels;
};

double forward_loss(ModelCase& mc) {
  Tape tape;
  Var x = tape.constant(mc.inputs);
  Var f = mc.net.forward(tape, x);
  Var logits = mc.head.logits(tape, f);
  return loss_onehot(tape, logits, mc.labels).item();
}

/// Analytic gradients of the training loss for every parameter, flattened in
/// parameter order.
std::vector<double> analytic_grads(ModelCase& mc, std::vector<Parameter*>& params) {
  for (Parameter* p : params) {
    p->value.enable_grad();
    p->value.zero_grad();
  }
  Tape tape;
  Var x = tape.constant(mc.inputs);
  Var f = mc.net.forward(tape, x);
  Var logits = mc.head.logits(tape, f);
  tape.backward(loss_onehot(tape, logits, mc.labels));
  std::vector<double> out;
  for (Parameter* p : params)
    out.insert(out.end(), p->value.grad().begin(), p->value.grad().end());
  return out;
}

GradCaseResult check_model(ModelCase mc, double tolerance, bool fault) {
  std::vector<Parameter*> params = mc.net.parameters();
  for (Parameter* p : mc.head.parameters()) params.push_back(p);

  std::vector<double> analytic = analytic_grads(mc, params);
  if (fault && !analytic.empty()) analytic[0] += 1e-2;

  GradCaseResult r{"model." + mc.name, 0.0, true};
  std::size_t flat = 0;
  for (Parameter* p : params) {
    for (std::size_t i = 0; i < p->value.size(); ++i, ++flat) {
      double saved = p->value[i];
      p->value[i] = saved + kStep;
      double up = forward_loss(mc);
      p->value[i] = saved - kStep;
      double down = forward_loss(mc);
      p->value[i] = saved;
      double numeric = (up - down) / (2.0 * kStep);
      double a = analytic[flat];
      double rel = std::abs(a - numeric) /
                   std::max({1.0, std::abs(a), std::abs(numeric)});
      if (rel > r.max_rel_err) r.max_rel_err = rel;
    }
  }
  r.pass = r.max_rel_err < tolerance;
  return r;
}

FeatureNet small_net(std::uint64_t seed) {
  return FeatureNet::build(
      {LayerSpec::dense(3, 5), LayerSpec::relu(), LayerSpec::dense(5, 4)}, seed);
}

ModelCase make_case(std::string name, const HeadConfig& hc, std::uint64_t seed) {
  ModelCase mc;
  mc.name = std::move(name);
  mc.net = small_net(seed);
  mc.head = CategorizationHead::create(hc, seed + 1);
  mc.inputs = randn({6, 3}, seed + 2);
  mc.labels = {0, 1, 2, 0, 1, 2};
  return mc;
}

void model_cases(std::vector<GradCaseResult>& out, double tolerance, bool fault) {
  auto push = [&](ModelCase mc) {
    out.push_back(check_model(std::move(mc), tolerance, fault));
    fault = false;  // only the first model case gets the injected fault
  };

  HeadConfig hc;
  hc.classes = 3;
  hc.feature_dim = 4;

  hc.kind = HeadKind::Baseline;
  push(make_case("baseline", hc, 31));

  hc.kind = HeadKind::Prototype;
  hc.log_prior = {-0.1, 0.2, -0.3};
  hc.covariance = CovarianceMode::Identity;
  push(make_case("prototype.identity", hc, 32));
  hc.covariance = CovarianceMode::SharedScalar;
  push(make_case("prototype.shared.logdet", hc, 33));
  hc.use_logdet = false;
  push(make_case("prototype.shared.nologdet", hc, 34));
  hc.use_logdet = true;
  hc.covariance = CovarianceMode::AxisAligned;
  push(make_case("prototype.axis.logdet", hc, 35));
  hc.use_logdet = false;
  push(make_case("prototype.axis.nologdet", hc, 36));
  hc.use_logdet = true;
  hc.covariance = CovarianceMode::Identity;
  hc.log_prior.clear();

  hc.kind = HeadKind::Mixture;
  for (std::size_t k : {std::size_t{1}, std::size_t{3}}) {
    hc.components = k;
    hc.logit_mode = LogitMode::LogSumExp;
    push(make_case("mixture.lse.k" + std::to_string(k), hc, 37 + k));
    hc.logit_mode = LogitMode::NegSum;
    push(make_case("mixture.negsum.k" + std::to_string(k), hc, 47 + k));
  }
  hc.components = 1;

  hc.kind = HeadKind::Exemplar;
  hc.components = 2;
  hc.logit_mode = LogitMode::LogSumExp;
  push(make_case("exemplar.lse", hc, 51));
  hc.logit_mode = LogitMode::NegSum;
  push(make_case("exemplar.negsum", hc, 52));

  // Unequal per-class center counts exercise the slice/concat logit path.
  hc.logit_mode = LogitMode::LogSumExp;
  ModelCase uneq = make_case("exemplar.unequal", hc, 53);
  std::mt19937_64 rng(54);
  uneq.head.set_centers({Tensor::randn({1, 4}, rng), Tensor::randn({3, 4}, rng),
                         Tensor::randn({2, 4}, rng)});
  push(std::move(uneq));

  // Convolutional front end feeding a mixture head.
  ModelCase conv;
  conv.name = "conv.mixture";
  conv.net = FeatureNet::build({LayerSpec::conv2d(1, 2, 3), LayerSpec::relu(),
                                LayerSpec::flatten(), LayerSpec::dense(18, 4)},
                               55);
  HeadConfig mc2;
  mc2.kind = HeadKind::Mixture;
  mc2.classes = 3;
  mc2.feature_dim = 4;
  mc2.components = 2;
  conv.head = CategorizationHead::create(mc2, 56);
  conv.inputs = randn({4, 1, 5, 5}, 57);
  conv.labels = {0, 1, 2, 1};
  push(std::move(conv));
}

}  // namespace

std::vector<GradCaseResult> run_gradcheck_suite(double tolerance, bool inject_fault) {
  std::vector<GradCaseResult> out;
  primitive_cases(out, tolerance);
  model_cases(out, tolerance, inject_fault);
  return out;
}

bool all_passed(const std::vector<GradCaseResult>& results) {
  for (const GradCaseResult& r : results)
    if (!r.pass) return false;
  return true;
}

}  // namespace dcm
