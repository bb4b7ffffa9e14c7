#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <numbers>
#include <random>

#include "gradcheck.hpp"
#include "lsrlab/datasets.hpp"
#include "lsrlab/error.hpp"
#include "lsrlab/models.hpp"
#include "lsrlab/ndgrad/ops.hpp"

using namespace lsrlab;
using lsrlab::testkit::gradcheck;
using lsrlab::testkit::random_tensor;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::Io;
}

ArchConfig tiny_arch() {
  ArchConfig a;
  a.embedding = 3;
  a.hidden = 4;
  a.disc_hidden = 5;
  a.disc_layers = 2;
  return a;
}

LatentConfig two_reg(int d = 4) {
  LatentConfig c;
  c.d = d;
  c.regularised = {{AttributeId::ND, 0}, {AttributeId::RC, 1}};
  return c;
}

struct Fixture {
  Corpus corpus;
  Vocabulary vocab;
  Batch batch;
};

Fixture make_fixture(std::size_t n, std::uint64_t seed = 3) {
  SyntheticProfile p;
  p.pitch_spread = 5;
  Fixture f;
  f.corpus = synthetic_corpus(seed, n, p);
  f.vocab = Vocabulary::from_measures(f.corpus.measures);
  f.batch = make_batch(f.corpus.measures, f.vocab);
  return f;
}

// Token-level agreement in percent, counted directly.
double percent_equal(const std::vector<IndexSequence>& a, const std::vector<IndexSequence>& b) {
  std::size_t same = 0, total = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t t = 0; t < 24; ++t) {
      same += a[i][t] == b[i][t];
      ++total;
    }
  }
  return 100.0 * static_cast<double>(same) / static_cast<double>(total);
}

std::vector<IndexSequence> reconstruct(const Autoencoder& m, const Batch& b) {
  const Tensor z = m.latent_means(b.tokens);
  const Tensor t = m.targets_for(b.attributes);
  return m.decode(z, &t).tokens;
}

Var lsr_of(Tape& t, std::vector<double> z, std::vector<double> a, double delta = 10.0) {
  Tensor col({z.size(), 1}, z);
  return lsr_loss(t.constant(col), a, delta);
}

}  // namespace

TEST(LatentConfigTest, Validation) {
  LatentConfig ok = two_reg(8);
  EXPECT_NO_THROW(ok.validate());
  LatentConfig c = ok;
  c.d = 5;
  EXPECT_EQ(code_of([&] { c.validate(); }), ErrorCode::ConfigInvalid);
  c = ok;
  c.regularised.push_back({AttributeId::NR, 2});
  EXPECT_EQ(code_of([&] { c.validate(); }), ErrorCode::ConfigInvalid);
  c = ok;
  c.regularised[1].dimension = 0;
  EXPECT_EQ(code_of([&] { c.validate(); }), ErrorCode::ConfigInvalid);
  c = ok;
  c.regularised[1].dimension = 8;
  EXPECT_EQ(code_of([&] { c.validate(); }), ErrorCode::ConfigInvalid);
  EXPECT_EQ(ok.dimension_of(AttributeId::RC), 1);
  EXPECT_EQ(ok.dimension_of(AttributeId::AIJ), -1);
}

TEST(LsrLoss, ConstantEverything) {
  Tape t;
  EXPECT_EQ(lsr_of(t, {0.3, 0.3, 0.3}, {4, 4, 4}).value().item(), 0.0);
}

TEST(LsrLoss, MatchingOrderIsNearZero) {
  Tape t;
  EXPECT_LT(lsr_of(t, {1, -1}, {5, 2}).value().item(), 1e-8);
}

TEST(LsrLoss, ReversedOrderIsNearOne) {
  Tape t;
  EXPECT_NEAR(lsr_of(t, {-1, 1}, {5, 2}).value().item(), 1.0, 1e-8);
}

TEST(LsrLoss, BatchTooSmall) {
  Tape t;
  EXPECT_EQ(code_of([&] { lsr_of(t, {1.0}, {2.0}); }), ErrorCode::BatchTooSmall);
}

TEST(LsrLoss, ShiftInvariantAndBounded) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = 2 + trial % 9;
    std::vector<double> z(m), a(m), shifted(m);
    for (std::size_t i = 0; i < m; ++i) {
      z[i] = g(rng);
      a[i] = std::round(3 * g(rng));
      shifted[i] = a[i] + 17.0;
    }
    Tape t;
    const double l = lsr_of(t, z, a).value().item();
    EXPECT_EQ(l, lsr_of(t, z, shifted).value().item());
    EXPECT_GE(l, 0.0);
    EXPECT_LE(l, 2.0);
  }
}

TEST(Encode, ShapesAndDeterminism) {
  const Fixture f = make_fixture(6);
  MeasureVae model(f.vocab, two_reg(8), tiny_arch(), 1);
  std::vector<IndexSequence> same(3, f.batch.tokens[0]);
  Tape t;
  const Posterior p = model.core().encode(t, same);
  EXPECT_EQ(p.mean.value().shape, (std::vector<std::size_t>{3, 8}));
  EXPECT_EQ(p.logvar.value().shape, (std::vector<std::size_t>{3, 8}));
  for (std::size_t j = 0; j < 8; ++j) {
    EXPECT_EQ(p.mean.value()(0, j), p.mean.value()(2, j));
  }
}

TEST(Encode, ZeroHeadsGiveStandardPosterior) {
  const Fixture f = make_fixture(5);
  MeasureVae model(f.vocab, LatentConfig{}, tiny_arch(), 2);
  for (const char* name : {"enc.mean.w", "enc.mean.b", "enc.logvar.w", "enc.logvar.b"}) {
    for (double& x : model.core().params().get_mut(name).data) x = 0.0;
  }
  Tape t;
  const Posterior p = model.core().encode(t, f.batch.tokens);
  for (double x : p.mean.value().data) EXPECT_EQ(x, 0.0);
  for (double x : p.logvar.value().data) EXPECT_EQ(x, 0.0);

  // With a standard posterior and no regularised dims, total = L_R.
  LossWeights w;
  Tape t2;
  const LossGraph g = measurevae_loss(t2, model, f.batch, Tensor({5, 8}, 0.0), w);
  EXPECT_EQ(g.breakdown.kld, 0.0);
  EXPECT_EQ(g.breakdown.total, g.breakdown.reconstruction);
}

TEST(Encode, IndexOutOfVocab) {
  const Fixture f = make_fixture(4);
  MeasureVae model(f.vocab, LatentConfig{}, tiny_arch(), 2);
  std::vector<IndexSequence> bad = {f.batch.tokens[0]};
  bad[0][5] = f.vocab.size();
  Tape t;
  EXPECT_EQ(code_of([&] { model.core().encode(t, bad); }), ErrorCode::IndexOutOfVocab);
}

TEST(Decode, ShapesDeterminismValidity) {
  const Fixture f = make_fixture(8);
  MeasureVae model(f.vocab, LatentConfig{}, tiny_arch(), 5);
  std::mt19937_64 rng(1);
  const Tensor z = random_tensor({7, 8}, rng, 2.0);
  const Decoded a = model.decode(z);
  const Decoded b = model.decode(z);
  EXPECT_EQ(a.logits.shape, (std::vector<std::size_t>{7, 24, static_cast<std::size_t>(f.vocab.size())}));
  EXPECT_TRUE(ndgrad::bitwise_equal(a.logits, b.logits));
  ASSERT_EQ(a.tokens.size(), 7u);
  for (const auto& seq : a.tokens) EXPECT_NO_THROW(decode_indices(seq, f.vocab));
  EXPECT_EQ(code_of([&] { model.decode(Tensor({2, 4}, 0.0)); }), ErrorCode::ShapeMismatch);
}

TEST(Decode, AdversarialNeedsTargets) {
  const Fixture f = make_fixture(60);
  const auto bins = fit_attribute_bins(f.batch.attributes, 4);
  AdversarialVae model(f.vocab, LatentConfig{}, bins, tiny_arch(), 5);
  const Tensor z({3, 8}, 0.0);
  EXPECT_EQ(code_of([&] { model.decode(z, nullptr); }), ErrorCode::MissingTargets);
  const Tensor targets = model.targets_for(std::span(f.batch.attributes).first(3));
  EXPECT_EQ(targets.shape, (std::vector<std::size_t>{3, 16}));
  EXPECT_EQ(model.decode(z, &targets).tokens.size(), 3u);
}

TEST(MeasureVaeLoss, PartsResumToTotal) {
  const Fixture f = make_fixture(6);
  MeasureVae model(f.vocab, two_reg(8), tiny_arch(), 7);
  std::mt19937_64 rng(2);
  LossWeights w{0.0, 0.37, 0.6};
  Tape t;
  const LossGraph g = measurevae_loss(t, model, f.batch, random_tensor({6, 8}, rng), w);
  EXPECT_EQ(g.breakdown.lsr_per_attribute.size(), 2u);
  EXPECT_NEAR(g.breakdown.weighted_sum(w), g.breakdown.total, 1e-12);
  for (const auto& [a, v] : g.breakdown.lsr_per_attribute) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 2.0);
  }
}

TEST(MeasureVaeLoss, GradientCheck) {
  const Fixture f = make_fixture(3);
  const MeasureVae model(f.vocab, two_reg(4), tiny_arch(), 11);
  std::mt19937_64 rng(6);
  const Tensor noise = random_tensor({3, 4}, rng);
  const LossWeights w{0.0, 0.5, 0.3};
  LatentConfig latent = two_reg(4);
  latent.delta = 1.5;
  const auto build = [&](Tape& t, const ParamStore& s) {
    const MeasureVae m(f.vocab, latent, tiny_arch(), s);
    return measurevae_loss(t, m, f.batch, noise, w).total;
  };
  const auto r = gradcheck(model.core().params(), build, 1e-5, 20, 3);
  EXPECT_EQ(r.checked, 20u);
  EXPECT_LT(r.max_rel_error, 1e-3) << r.worst;
}

TEST(AdversarialLoss, AnalyticValues) {
  Tape t;
  const Tensor b = Tensor::matrix(2, 4, {1, 0, 0, 0, 0, 0, 1, 0});
  Tensor flipped = b;
  for (double& x : flipped.data) x = 1.0 - x;
  EXPECT_EQ(ndgrad::binary_cross_entropy(t.constant(b), b, kProbabilityFloor).value().item(), 0.0);
  EXPECT_EQ(ndgrad::binary_cross_entropy(t.constant(flipped), flipped, kProbabilityFloor).value().item(), 0.0);
  // Outputs equal to B seen against 1 - B: the floor bounds the loss at -ln(1e-7).
  const double worst = ndgrad::binary_cross_entropy(t.constant(b), flipped, kProbabilityFloor).value().item();
  EXPECT_NEAR(worst, -std::log(1e-7), 1e-9);

  // A zeroed discriminator outputs 0.5 everywhere.
  Discriminator disc(4, 1, 4, tiny_arch(), 1);
  for (auto& [name, e] : disc.params().entries()) {
    if (name.rfind("disc.out", 0) == 0) std::fill(e.value.data.begin(), e.value.data.end(), 0.0);
  }
  std::mt19937_64 rng(3);
  Var z = t.constant(random_tensor({2, 4}, rng));
  const double d = discriminator_loss(t, disc, z, b).value().item();
  const double e = encoder_adversarial_loss(t, disc, z, b).value().item();
  EXPECT_NEAR(d, std::numbers::ln2, 1e-15);
  EXPECT_NEAR(d + e, 2 * std::numbers::ln2, 1e-15);
  EXPECT_EQ(code_of([&] { discriminator_loss(t, disc, z, Tensor({2, 3}, 0.0)); }),
            ErrorCode::ShapeMismatch);
}

TEST(AdversarialLoss, DiscriminatorGradientCheck) {
  std::mt19937_64 rng(8);
  const Discriminator disc(4, 2, 3, tiny_arch(), 9);
  const Tensor z = random_tensor({5, 4}, rng);
  Tensor b({5, 6}, 0.0);
  for (std::size_t i = 0; i < 5; ++i) {
    b(i, i % 3) = 1.0;
    b(i, 3 + (i * 2) % 3) = 1.0;
  }
  const ArchConfig arch = tiny_arch();
  const auto d_loss = [&](Tape& t, const ParamStore& s) {
    return discriminator_loss(t, Discriminator(4, 2, 3, arch, s), t.constant(z), b);
  };
  const auto e_loss = [&](Tape& t, const ParamStore& s) {
    return encoder_adversarial_loss(t, Discriminator(4, 2, 3, arch, s), t.constant(z), b);
  };
  const auto r1 = gradcheck(disc.params(), d_loss);
  const auto r2 = gradcheck(disc.params(), e_loss);
  EXPECT_LT(r1.max_rel_error, 1e-4) << r1.worst;
  EXPECT_LT(r2.max_rel_error, 1e-4) << r2.worst;
}

TEST(AdversarialLoss, FullLossGradientCheck) {
  const Fixture f = make_fixture(40);
  const auto bins = fit_attribute_bins(f.batch.attributes, 3);
  Batch small;
  small.tokens.assign(f.batch.tokens.begin(), f.batch.tokens.begin() + 3);
  small.attributes.assign(f.batch.attributes.begin(), f.batch.attributes.begin() + 3);
  LatentConfig latent;
  latent.d = 4;
  const AdversarialVae model(f.vocab, latent, bins, tiny_arch(), 13);
  std::mt19937_64 rng(2);
  const Tensor noise = random_tensor({3, 4}, rng);
  const LossWeights w{0.7, 0.2, 0.0};
  const auto build = [&](Tape& t, const ParamStore& s) {
    t.freeze_prefix(std::string(kDiscriminatorPrefix));
    const AdversarialVae m(f.vocab, latent, bins, tiny_arch(), s, model.discriminator().params());
    return adversarial_vae_loss(t, m, small, noise, w).total;
  };
  const auto r = gradcheck(model.core().params(), build, 1e-5, 20, 5);
  EXPECT_EQ(r.checked, 20u);
  EXPECT_LT(r.max_rel_error, 1e-3) << r.worst;
}

TEST(Training, LossDecreasesOnFixedBatch) {
  const Fixture f = make_fixture(16, 21);
  ArchConfig arch;
  arch.hidden = 16;
  arch.embedding = 8;
  MeasureVae model(f.vocab, two_reg(8), arch, 3);
  TrainSettings s;
  s.adam.lr = 2e-3;
  s.weights = {0.0, 1e-3, 0.2};
  const Tensor noise({16, 8}, 0.0);
  double prev = std::numeric_limits<double>::infinity();
  for (int step = 0; step < 50; ++step) {
    const double loss = model.train_step(f.batch, noise, s).total;
    EXPECT_LT(loss, prev) << "step " << step;
    prev = loss;
  }
}

TEST(Training, SameSeedSameTrajectory) {
  const Fixture f = make_fixture(8);
  TrainSettings s;
  MeasureVae a(f.vocab, two_reg(8), tiny_arch(), 4);
  MeasureVae b(f.vocab, two_reg(8), tiny_arch(), 4);
  for (std::uint64_t step = 0; step < 5; ++step) {
    const Tensor noise = step_noise(9, step, 8, 8);
    EXPECT_EQ(a.train_step(f.batch, noise, s).total, b.train_step(f.batch, noise, s).total);
  }
  EXPECT_TRUE(ndgrad::bitwise_equal(a.core().params(), b.core().params()));
}

TEST(Training, OverfitTenMeasures) {
  const Fixture f = make_fixture(10, 17);
  ArchConfig arch;
  arch.hidden = 32;
  MeasureVae model(f.vocab, LatentConfig{}, arch, 1);
  TrainSettings s;
  s.adam.lr = 5e-3;
  s.weights = {0.0, 1e-4, 0.0};
  const Tensor noise({10, 8}, 0.0);
  for (int step = 0; step < 400; ++step) model.train_step(f.batch, noise, s);
  EXPECT_EQ(reconstruct(model, f.batch), f.batch.tokens);
}

TEST(Adversarial, AlphaZeroMatchesPlainStep) {
  const Fixture f = make_fixture(40);
  const auto bins = fit_attribute_bins(f.batch.attributes, 4);
  AdversarialVae a(f.vocab, LatentConfig{}, bins, tiny_arch(), 21);
  AdversarialVae b = a;
  TrainSettings s;
  s.weights.alpha = 0.0;
  for (std::uint64_t step = 0; step < 3; ++step) {
    const Tensor noise = step_noise(1, step, 40, 8);
    a.train_step(f.batch, noise, s);
    b.train_step_plain(f.batch, noise, s);
    ASSERT_TRUE(ndgrad::bitwise_equal(a.core().params(), b.core().params())) << "step " << step;
  }
}

TEST(Adversarial, PhasesTouchOnlyTheirOwnParameters) {
  const Fixture f = make_fixture(30);
  const auto bins = fit_attribute_bins(f.batch.attributes, 4);
  AdversarialVae model(f.vocab, LatentConfig{}, bins, tiny_arch(), 2);
  TrainSettings s;
  const Tensor noise = step_noise(5, 0, 30, 8);

  // Reference phase 1 alone: discriminator step on the detached sample.
  Discriminator disc_only = model.discriminator();
  {
    Tape t;
    t.freeze_prefix("");
    const Posterior p = model.core().encode(t, f.batch.tokens);
    disc_only.train_step(ndgrad::reparameterize(p.mean, p.logvar, noise).value(),
                         model.targets_for(f.batch.attributes), s.disc_adam);
  }
  // Reference phase 2 alone, with the discriminator already updated.
  AdversarialVae vae_only = model;
  vae_only.discriminator() = disc_only;
  {
    Tape t;
    t.freeze_prefix(std::string(kDiscriminatorPrefix));
    const LossGraph g = adversarial_vae_loss(t, vae_only, f.batch, noise, s.weights);
    ndgrad::adam_step(vae_only.core().params(), t.backward(g.total), s.adam);
  }

  model.train_step(f.batch, noise, s);
  EXPECT_TRUE(ndgrad::bitwise_equal(model.discriminator().params(), disc_only.params()));
  EXPECT_TRUE(ndgrad::bitwise_equal(model.core().params(), vae_only.core().params()));
}

TEST(Adversarial, DiscriminatorLearnsSeparableLatents) {
  std::mt19937_64 rng(12);
  const std::size_t m = 256;
  const Tensor z = random_tensor({m, 4}, rng);
  std::vector<AttributeVector> attrs(m);
  for (std::size_t i = 0; i < m; ++i) {
    attrs[i] = {z(i, 0), z(i, 1), z(i, 2) + z(i, 3), z(i, 3)};
  }
  const auto bins = fit_attribute_bins(attrs);
  const Tensor targets = flat_targets(attrs, bins);
  Discriminator disc(4, 4, 8, ArchConfig{}, 1);
  AdamConfig adam;
  adam.lr = 1e-2;
  const double before = disc.accuracy(z, targets);
  for (int step = 0; step < 200; ++step) disc.train_step(z, targets, adam);
  const double after = disc.accuracy(z, targets);
  EXPECT_GT(after, 0.125 + 0.15) << "before " << before;
}

TEST(Adversarial, SmokeReconstructionAbove80) {
  const Fixture f = make_fixture(100, 33);
  const auto bins = fit_attribute_bins(f.batch.attributes);
  ArchConfig arch;
  arch.hidden = 32;
  AdversarialVae model(f.vocab, LatentConfig{}, bins, arch, 6);
  TrainSettings s;
  s.adam.lr = 1e-2;
  s.disc_adam.lr = 1e-3;
  s.weights = {0.1, 1e-3, 0.0};
  std::mt19937_64 rng(4);
  std::vector<std::size_t> order(100);
  std::iota(order.begin(), order.end(), 0);
  for (std::uint64_t step = 0; step < 300; ++step) {
    if (step % 5 == 0) std::shuffle(order.begin(), order.end(), rng);
    Batch b;
    for (std::size_t k = 0; k < 20; ++k) {
      const std::size_t i = order[(step % 5) * 20 + k];
      b.tokens.push_back(f.batch.tokens[i]);
      b.attributes.push_back(f.batch.attributes[i]);
    }
    model.train_step(b, step_noise(2, step, 20, 8), s);
  }
  EXPECT_GT(percent_equal(reconstruct(model, f.batch), f.batch.tokens), 80.0);
}

TEST(Noise, DeterministicPerStep) {
  EXPECT_TRUE(ndgrad::bitwise_equal(step_noise(1, 2, 3, 4), step_noise(1, 2, 3, 4)));
  EXPECT_FALSE(ndgrad::bitwise_equal(step_noise(1, 2, 3, 4), step_noise(1, 3, 3, 4)));
}
