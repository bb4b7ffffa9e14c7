#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "gradcheck.hpp"
#include "lsrlab/error.hpp"
#include "lsrlab/ndgrad/layers.hpp"
#include "lsrlab/ndgrad/ops.hpp"
#include "lsrlab/ndgrad/param_store.hpp"

using namespace lsrlab;
using namespace lsrlab::ndgrad;
using lsrlab::testkit::gradcheck;
using lsrlab::testkit::random_tensor;

namespace {

constexpr double kOpTolerance = 1e-4;

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::Io;
}

// Reduces a tensor-valued op to a scalar with fixed random weights so every
// output element contributes a distinct gradient.
Var weighted_sum(Var v, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sum(mul(v, v.tape->constant(random_tensor(v.value().shape, rng))));
}

}  // namespace

TEST(Ops, MatmulIdentity) {
  Tape t;
  Tensor eye({3, 3}, 0.0);
  for (int i = 0; i < 3; ++i) eye(i, i) = 1.0;
  std::mt19937_64 rng(1);
  const Tensor a = random_tensor({3, 5}, rng);
  EXPECT_EQ(matmul(t.constant(eye), t.constant(a)).value(), a);
}

TEST(Ops, TanhAtZero) {
  Tape t;
  Var x = t.parameter("x", Tensor::scalar(0.0));
  Var y = tanh(x);
  EXPECT_EQ(y.value().item(), 0.0);
  EXPECT_EQ(t.backward(sum(y)).at("x").item(), 1.0);
}

TEST(Ops, UniformLogitsCrossEntropyIsLogV) {
  for (std::size_t v : {2u, 7u, 40u}) {
    Tape t;
    const std::vector<int> targets = {0, 1};
    Var loss = softmax_cross_entropy(t.constant(Tensor({2, v}, 3.25)), targets);
    EXPECT_NEAR(loss.value().item(), std::log(static_cast<double>(v)), 1e-15);
  }
}

TEST(Ops, CrossEntropyIsStableForLargeLogits) {
  Tape t;
  Tensor logits = Tensor::matrix(1, 3, {1000.0, -1000.0, 0.0});
  const std::vector<int> target = {0};
  EXPECT_NEAR(softmax_cross_entropy(t.constant(logits), target).value().item(), 0.0, 1e-12);
}

TEST(Backward, SquareAtThree) {
  Tape t;
  Var x = t.parameter("x", Tensor::scalar(3.0));
  EXPECT_EQ(t.backward(mul(x, x)).at("x").item(), 6.0);
}

TEST(Backward, ErrorPaths) {
  {
    Tape t;
    Var x = t.parameter("x", Tensor({2, 2}, 1.0));
    EXPECT_EQ(code_of([&] { t.backward(x); }), ErrorCode::NotScalarRoot);
  }
  {
    Tape t;
    Var x = t.parameter("x", Tensor::scalar(1.0));
    Var y = mul(x, x);
    t.backward(y);
    EXPECT_EQ(code_of([&] { t.backward(y); }), ErrorCode::TapeConsumed);
  }
  {
    Tape t;
    EXPECT_EQ(code_of([&] { exp(t.constant(Tensor::scalar(1000.0))); }), ErrorCode::NonFinite);
    EXPECT_EQ(code_of([&] { matmul(t.constant(Tensor({2, 3})), t.constant(Tensor({2, 3}))); }),
              ErrorCode::ShapeMismatch);
    EXPECT_EQ(code_of([&] { add(t.constant(Tensor({2, 3})), t.constant(Tensor({3, 2}))); }),
              ErrorCode::ShapeMismatch);
  }
}

TEST(Backward, UnusedParameterGetsZeroGradient) {
  Tape t;
  Var x = t.parameter("x", Tensor::scalar(2.0));
  t.parameter("unused", Tensor({2}, 5.0));
  const auto g = t.backward(mul(x, x));
  EXPECT_EQ(g.at("unused"), Tensor({2}, 0.0));
}

TEST(Backward, FrozenPrefixBindsConstants) {
  Tape t;
  t.freeze_prefix("disc.");
  Var a = t.parameter("disc.w", Tensor::scalar(2.0));
  Var b = t.parameter("enc.w", Tensor::scalar(3.0));
  const auto g = t.backward(mul(a, b));
  EXPECT_EQ(g.size(), 1u);
  EXPECT_EQ(g.at("enc.w").item(), 2.0);
}

TEST(Backward, SignHasZeroGradient) {
  Tape t;
  Var x = t.parameter("x", Tensor::matrix(1, 3, {-2.0, 0.0, 4.0}));
  Var s = sign(x);
  EXPECT_EQ(s.value(), Tensor::matrix(1, 3, {-1.0, 0.0, 1.0}));
  const auto g = t.backward(sum(mul(s, s)));
  EXPECT_EQ(g.at("x"), Tensor({1, 3}, 0.0));
}

TEST(Backward, DeterministicBitIdentical) {
  std::mt19937_64 rng(17);
  ParamStore store;
  store.add("a", random_tensor({4, 6}, rng));
  store.add("b", random_tensor({6, 3}, rng));
  auto run = [&] {
    Tape t;
    store.bind(t);
    Var y = tanh(matmul(store.var(t, "a"), store.var(t, "b")));
    return t.backward(weighted_sum(y, 3));
  };
  const auto g1 = run();
  const auto g2 = run();
  for (const auto& [name, g] : g1) EXPECT_TRUE(bitwise_equal(g, g2.at(name))) << name;
}

// Every differentiable op against central differences, h = 1e-5.
TEST(GradCheck, EveryOp) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 3; ++trial) {
    std::uniform_int_distribution<std::size_t> dim(1, 5);
    const std::size_t n = dim(rng) + 1, k = dim(rng), m = dim(rng);
    ParamStore s;
    s.add("a", random_tensor({n, k}, rng));
    s.add("b", random_tensor({k, m}, rng));
    s.add("c", random_tensor({n, k}, rng));
    s.add("bias", random_tensor({k}, rng));
    s.add("table", random_tensor({6, m}, rng));
    s.add("col", random_tensor({n, 1}, rng));
    Tensor probs_init({n, k});
    std::uniform_real_distribution<double> u(0.05, 0.95);
    for (double& p : probs_init.data) p = u(rng);
    s.add("p", probs_init);
    Tensor bce_targets({n, k});
    for (double& y : bce_targets.data) y = static_cast<double>(rng() % 2);
    std::vector<int> ce_targets(n);
    for (auto& c : ce_targets) c = static_cast<int>(rng() % k);
    const std::vector<int> gather_idx = {0, 3, 3, 5, 1};

    std::map<std::string, testkit::LossBuilder> cases = {
        {"matmul", [](Tape& t, const ParamStore& s) { return weighted_sum(matmul(s.var(t, "a"), s.var(t, "b")), 1); }},
        {"add", [](Tape& t, const ParamStore& s) { return weighted_sum(add(s.var(t, "a"), s.var(t, "c")), 2); }},
        {"sub", [](Tape& t, const ParamStore& s) { return weighted_sum(sub(s.var(t, "a"), s.var(t, "c")), 3); }},
        {"mul", [](Tape& t, const ParamStore& s) { return weighted_sum(mul(s.var(t, "a"), s.var(t, "c")), 4); }},
        {"add_bias", [](Tape& t, const ParamStore& s) { return weighted_sum(add_bias(s.var(t, "a"), s.var(t, "bias")), 5); }},
        {"affine", [](Tape& t, const ParamStore& s) { return weighted_sum(affine(s.var(t, "a"), -1.7, 0.3), 6); }},
        {"concat_cols", [](Tape& t, const ParamStore& s) { return weighted_sum(concat_cols({s.var(t, "a"), s.var(t, "c"), s.var(t, "a")}), 7); }},
        {"concat_rows", [](Tape& t, const ParamStore& s) { return weighted_sum(concat_rows({s.var(t, "a"), s.var(t, "c"), s.var(t, "a")}), 16); }},
        {"slice_cols", [](Tape& t, const ParamStore& s) {
           Var a = s.var(t, "a");
           return weighted_sum(slice_cols(a, a.value().cols() - 1, a.value().cols()), 8); }},
        {"slice_rows", [](Tape& t, const ParamStore& s) { return weighted_sum(slice_rows(s.var(t, "a"), 1, 2), 9); }},
        {"gather_rows", [gather_idx](Tape& t, const ParamStore& s) { return weighted_sum(gather_rows(s.var(t, "table"), gather_idx), 10); }},
        {"tanh", [](Tape& t, const ParamStore& s) { return weighted_sum(tanh(s.var(t, "a")), 11); }},
        {"sigmoid", [](Tape& t, const ParamStore& s) { return weighted_sum(sigmoid(s.var(t, "a")), 12); }},
        {"exp", [](Tape& t, const ParamStore& s) { return weighted_sum(exp(s.var(t, "a")), 13); }},
        {"abs", [](Tape& t, const ParamStore& s) { return weighted_sum(abs(s.var(t, "a")), 14); }},
        {"sum", [](Tape& t, const ParamStore& s) { Var a = s.var(t, "a"); return sum(mul(a, a)); }},
        {"mean", [](Tape& t, const ParamStore& s) { Var a = s.var(t, "a"); return mean(mul(a, tanh(a))); }},
        {"softmax_cross_entropy", [ce_targets](Tape& t, const ParamStore& s) { return softmax_cross_entropy(s.var(t, "a"), ce_targets); }},
        {"binary_cross_entropy", [bce_targets](Tape& t, const ParamStore& s) { return binary_cross_entropy(s.var(t, "p"), bce_targets, 1e-7); }},
        {"pairwise_diff", [](Tape& t, const ParamStore& s) { return weighted_sum(pairwise_diff(s.var(t, "col")), 15); }},
    };
    for (const auto& [op, build] : cases) {
      const auto r = gradcheck(s, build);
      EXPECT_LT(r.max_rel_error, kOpTolerance) << op << " trial " << trial << ": " << r.worst;
    }
  }
}

TEST(GradCheck, TwoLayerTanhNet) {
  std::mt19937_64 rng(31);
  ParamStore s;
  s.add("l1.w", random_tensor({4, 8}, rng, 0.5));
  s.add("l1.b", random_tensor({8}, rng, 0.1));
  s.add("l2.w", random_tensor({8, 3}, rng, 0.5));
  s.add("l2.b", random_tensor({3}, rng, 0.1));
  const Tensor x = random_tensor({5, 4}, rng);
  const std::vector<int> y = {0, 2, 1, 1, 0};
  const auto r = gradcheck(s, [&](Tape& t, const ParamStore& st) {
    Var h = tanh(linear(t, st, "l1", t.constant(x)));
    return softmax_cross_entropy(linear(t, st, "l2", h), y);
  });
  EXPECT_LT(r.max_rel_error, kOpTolerance) << r.worst;
  EXPECT_EQ(r.checked, 4u * 8 + 8 + 8 * 3 + 3);
}

TEST(Gru, ZeroWeightsHalveHidden) {
  ParamStore s;
  s.add("g.w_x", Tensor({3, 12}, 0.0));
  s.add("g.w_h", Tensor({4, 12}, 0.0));
  s.add("g.b_x", Tensor({12}, 0.0));
  s.add("g.b_h", Tensor({12}, 0.0));
  Tape t;
  const GruWeights w = GruWeights::bind(t, s, "g");
  const Tensor h_prev = Tensor::matrix(2, 4, {1, -2, 3, 0.5, 0, 8, -1, 2});
  const Tensor x = Tensor::matrix(2, 3, {5, 6, 7, -1, -2, -3});
  const Tensor h = gru_cell(t.constant(x), t.constant(h_prev), w).value();
  for (std::size_t i = 0; i < h.size(); ++i) EXPECT_EQ(h.data[i], 0.5 * h_prev.data[i]);
  const Tensor h0 = gru_cell(t.constant(x), t.constant(Tensor({2, 4}, 0.0)), w).value();
  EXPECT_EQ(h0, Tensor({2, 4}, 0.0));
}

TEST(Gru, GradCheckRandomParams) {
  std::mt19937_64 rng(77);
  ParamStore s;
  add_gru_params(s, "g", 3, 5, rng);
  s.add("h0", random_tensor({2, 5}, rng, 0.5));
  s.add("x", random_tensor({2, 3}, rng));
  const auto r = gradcheck(s, [](Tape& t, const ParamStore& st) {
    const GruWeights w = GruWeights::bind(t, st, "g");
    Var h = st.var(t, "h0");
    Var x = st.var(t, "x");
    for (int step = 0; step < 3; ++step) h = gru_cell(x, h, w);
    return weighted_sum(h, 21);
  });
  EXPECT_LT(r.max_rel_error, kOpTolerance) << r.worst;
  EXPECT_THROW(
      {
        Tape t;
        const GruWeights w = GruWeights::bind(t, s, "g");
        gru_cell(t.constant(Tensor({2, 4})), t.constant(Tensor({2, 5})), w);
      },
      Error);
}

TEST(Reparameterize, Examples) {
  Tape t;
  const Tensor mean = Tensor::matrix(1, 3, {0.5, -1.0, 2.0});
  const Tensor noise = Tensor::matrix(1, 3, {0.3, -0.7, 1.1});
  Var m = t.constant(mean);
  EXPECT_EQ(reparameterize(m, t.constant(Tensor({1, 3}, 1.7)), Tensor({1, 3}, 0.0)).value(), mean);
  const Tensor z = reparameterize(m, t.constant(Tensor({1, 3}, 0.0)), noise).value();
  for (int i = 0; i < 3; ++i) EXPECT_EQ(z.data[i], mean.data[i] + noise.data[i]);
  EXPECT_EQ(code_of([&] { reparameterize(m, m, Tensor({1, 2}, 0.0)); }), ErrorCode::ShapeMismatch);
}

TEST(Reparameterize, Gradients) {
  std::mt19937_64 rng(5);
  ParamStore s;
  s.add("mean", random_tensor({3, 4}, rng));
  s.add("logvar", random_tensor({3, 4}, rng, 0.5));
  const Tensor noise = random_tensor({3, 4}, rng);
  {
    Tape t;
    s.bind(t);
    const auto g = t.backward(sum(reparameterize(s.var(t, "mean"), s.var(t, "logvar"), noise)));
    EXPECT_EQ(g.at("mean"), Tensor({3, 4}, 1.0));  // dz/dmean = I
  }
  const auto r = gradcheck(s, [&](Tape& t, const ParamStore& st) {
    return weighted_sum(reparameterize(st.var(t, "mean"), st.var(t, "logvar"), noise), 2);
  });
  EXPECT_LT(r.max_rel_error, kOpTolerance) << r.worst;
}

TEST(Kld, AnalyticExamples) {
  Tape t;
  EXPECT_EQ(kld_standard_normal(t.constant(Tensor({1, 4}, 0.0)), t.constant(Tensor({1, 4}, 0.0)))
                .value()
                .item(),
            0.0);
  EXPECT_EQ(kld_standard_normal(t.constant(Tensor::matrix(1, 3, {1, 0, 0})),
                                t.constant(Tensor({1, 3}, 0.0)))
                .value()
                .item(),
            0.5);
}

namespace {

// KL(N(m, s^2) || N(0, 1)) by composite Simpson quadrature of q log(q/p).
double kl_quadrature(double m, double logvar) {
  const double s = std::exp(0.5 * logvar);
  const double lo = std::min(m - 14 * s, -14.0), hi = std::max(m + 14 * s, 14.0);
  const int n = 40000;
  const double h = (hi - lo) / n;
  auto f = [&](double x) {
    const double log_q = -0.5 * std::log(2 * std::numbers::pi) - std::log(s) - 0.5 * ((x - m) / s) * ((x - m) / s);
    const double log_p = -0.5 * std::log(2 * std::numbers::pi) - 0.5 * x * x;
    return std::exp(log_q) * (log_q - log_p);
  };
  double acc = f(lo) + f(hi);
  for (int i = 1; i < n; ++i) acc += f(lo + i * h) * (i % 2 ? 4 : 2);
  return acc * h / 3;
}

}  // namespace

TEST(Kld, QuadratureOracleAndNonNegativity) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int i = 0; i < 30; ++i) {
    const double m = 2 * g(rng), lv = g(rng);
    Tape t;
    const double kld = kld_standard_normal(t.constant(Tensor::matrix(1, 1, {m})),
                                           t.constant(Tensor::matrix(1, 1, {lv})))
                           .value()
                           .item();
    EXPECT_GE(kld, 0.0);
    EXPECT_NEAR(kld, kl_quadrature(m, lv), 1e-3) << "m=" << m << " lv=" << lv;
  }
  for (int i = 0; i < 10000; ++i) {
    Tape t;
    Var mean = t.constant(random_tensor({2, 3}, rng, 3.0));
    Var lv = t.constant(random_tensor({2, 3}, rng, 3.0));
    ASSERT_GE(kld_standard_normal(mean, lv).value().item(), 0.0);
  }
}

TEST(Kld, GradCheck) {
  std::mt19937_64 rng(9);
  ParamStore s;
  s.add("mean", random_tensor({3, 4}, rng));
  s.add("logvar", random_tensor({3, 4}, rng, 0.5));
  const auto r = gradcheck(s, [](Tape& t, const ParamStore& st) {
    return kld_standard_normal(st.var(t, "mean"), st.var(t, "logvar"));
  });
  EXPECT_LT(r.max_rel_error, kOpTolerance) << r.worst;
}

TEST(Adam, ZeroGradientLeavesParameters) {
  ParamStore s;
  s.add("w", Tensor::matrix(1, 2, {1.5, -2.0}));
  const Tensor before = s.get("w");
  adam_step(s, {{"w", Tensor({1, 2}, 0.0)}}, AdamConfig{});
  EXPECT_EQ(s.get("w"), before);
  EXPECT_EQ(s.step_count, 1u);
}

TEST(Adam, FirstStepMagnitude) {
  // With g = 1: m = 1 - b1, v = 1 - b2, so m_hat = v_hat = 1 and the update is lr / (1 + eps).
  for (const AdamConfig cfg : {AdamConfig{1e-3, 0.9, 0.999, 1e-8}, AdamConfig{1e-5, 0.9999, 0.999, 1e-8}}) {
    ParamStore s;
    s.add("w", Tensor({2, 2}, 0.25));
    adam_step(s, {{"w", Tensor({2, 2}, 1.0)}}, cfg);
    for (double x : s.get("w").data) EXPECT_NEAR(0.25 - x, cfg.lr / (1.0 + cfg.eps), 1e-15);
  }
}

TEST(Adam, MatchesScalarReferenceTrajectory) {
  const AdamConfig cfg{0.01, 0.9, 0.999, 1e-8};
  // Independent scalar reimplementation of the textbook update.
  double w = 0.7, m = 0, v = 0;
  const double g = 0.3;
  for (int t = 1; t <= 2; ++t) {
    m = cfg.beta1 * m + (1 - cfg.beta1) * g;
    v = cfg.beta2 * v + (1 - cfg.beta2) * g * g;
    const double mh = m / (1 - std::pow(cfg.beta1, t));
    const double vh = v / (1 - std::pow(cfg.beta2, t));
    w -= cfg.lr * mh / (std::sqrt(vh) + cfg.eps);
  }
  ParamStore s;
  s.add("w", Tensor::scalar(0.7));
  adam_step(s, {{"w", Tensor::scalar(g)}}, cfg);
  adam_step(s, {{"w", Tensor::scalar(g)}}, cfg);
  EXPECT_DOUBLE_EQ(s.get("w").item(), w);
  EXPECT_EQ(s.step_count, 2u);
}

TEST(Adam, KeyMismatch) {
  ParamStore s;
  s.add("w", Tensor::scalar(1.0));
  EXPECT_EQ(code_of([&] { adam_step(s, {{"v", Tensor::scalar(1.0)}}, AdamConfig{}); }), ErrorCode::KeyMismatch);
  EXPECT_EQ(code_of([&] { adam_step(s, {}, AdamConfig{}); }), ErrorCode::KeyMismatch);
}

TEST(Checkpoint, BitExactRoundTrip) {
  std::mt19937_64 rng(44);
  ParamStore s;
  add_gru_params(s, "enc", 3, 4, rng);
  add_linear_params(s, "head", 4, 2, rng);
  s.add("scalar", Tensor::scalar(-0.0));
  Gradients g;
  for (const auto& [name, e] : s.entries()) g[name] = random_tensor(e.value.shape, rng);
  adam_step(s, g, AdamConfig{});
  std::stringstream buf;
  write_checkpoint(buf, s);
  const ParamStore back = read_checkpoint(buf);
  EXPECT_TRUE(bitwise_equal(s, back));
  EXPECT_EQ(back.step_count, 1u);

  std::stringstream truncated(buf.str().substr(0, 40));
  EXPECT_EQ(code_of([&] { read_checkpoint(truncated); }), ErrorCode::BadCheckpoint);
  std::stringstream junk("not a checkpoint at all");
  EXPECT_EQ(code_of([&] { read_checkpoint(junk); }), ErrorCode::BadCheckpoint);
}
