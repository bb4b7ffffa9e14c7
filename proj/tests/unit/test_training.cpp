#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "lsrlab/datasets.hpp"
#include "lsrlab/error.hpp"
#include "lsrlab/training.hpp"

using namespace lsrlab;

namespace {

ArchConfig small_arch() {
  ArchConfig a;
  a.embedding = 4;
  a.hidden = 8;
  a.disc_hidden = 6;
  return a;
}

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("lsrlab_training_" + name);
  std::filesystem::remove_all(p);
  return p;
}

TrainConfig quick_config() {
  TrainConfig c;
  c.epochs = 3;
  c.batch_size = 8;
  c.seed = 77;
  c.settings.weights = {0.1, 1e-3, 0.2};
  return c;
}

LatentConfig reg_latent() {
  LatentConfig l;
  l.d = 4;
  l.regularised = {{AttributeId::ND, 0}, {AttributeId::RC, 2}};
  return l;
}

}  // namespace

TEST(EpochBatches, PartitionAndTrailingMerge) {
  const auto b = epoch_batches(17, 8, 1, 0);
  ASSERT_EQ(b.size(), 2u);
  EXPECT_EQ(b[0].size(), 8u);
  EXPECT_EQ(b[1].size(), 9u);
  std::set<std::size_t> seen;
  for (const auto& chunk : b) seen.insert(chunk.begin(), chunk.end());
  EXPECT_EQ(seen.size(), 17u);
  EXPECT_EQ(epoch_batches(17, 8, 1, 0), b);
  EXPECT_NE(epoch_batches(17, 8, 1, 1), b);
}

TEST(TrainerTest, ResumeMidEpochIsBitExact) {
  const Corpus c = synthetic_corpus(5, 30);
  const Vocabulary v = Vocabulary::from_measures(c.measures);
  const TrainConfig cfg = quick_config();

  MeasureVae straight(v, reg_latent(), small_arch(), 9);
  Trainer full(straight, cfg, c.measures);
  full.run();
  EXPECT_EQ(full.position().epoch, 3u);
  EXPECT_EQ(full.position().step, 12u);  // 30 measures -> batches 8,8,8,6

  MeasureVae interrupted(v, reg_latent(), small_arch(), 9);
  Trainer first(interrupted, cfg, c.measures);
  first.run(6);
  EXPECT_EQ(first.position().batch, 2u);
  const auto dir = scratch("resume");
  save_model(dir, interrupted, first.position(), "digest-1");

  LoadedModel loaded = load_model(dir);
  EXPECT_EQ(loaded.manifest.position, first.position());
  EXPECT_EQ(loaded.manifest.config_digest, "digest-1");
  Trainer second(*loaded.model, cfg, c.measures, loaded.manifest.position);
  second.run();
  EXPECT_TRUE(ndgrad::bitwise_equal(loaded.model->core().params(), straight.core().params()));
  std::filesystem::remove_all(dir);
}

TEST(TrainerTest, AdversarialRoundTrip) {
  const Corpus c = synthetic_corpus(6, 40);
  const Vocabulary v = Vocabulary::from_measures(c.measures);
  const Batch all = make_batch(c.measures, v);
  LatentConfig latent;
  latent.d = 4;
  AdversarialVae model(v, latent, fit_attribute_bins(all.attributes, 4), small_arch(), 3);
  TrainConfig cfg = quick_config();
  cfg.epochs = 1;
  Trainer t(model, cfg, c.measures);
  t.run();
  const auto dir = scratch("adv");
  save_model(dir, model, t.position());
  const LoadedModel back = load_model(dir);
  ASSERT_EQ(back.model->kind(), ModelKind::AdversarialVae);
  const auto& adv = dynamic_cast<const AdversarialVae&>(*back.model);
  EXPECT_TRUE(ndgrad::bitwise_equal(adv.core().params(), model.core().params()));
  EXPECT_TRUE(ndgrad::bitwise_equal(adv.discriminator().params(), model.discriminator().params()));
  ASSERT_EQ(adv.bins().size(), 4u);
  EXPECT_EQ(adv.bins()[3].edges, model.bins()[3].edges);
  EXPECT_EQ(adv.bins()[3].lo, model.bins()[3].lo);
  std::filesystem::remove_all(dir);
}

TEST(TrainerTest, ManifestRejectsTampering) {
  const Corpus c = synthetic_corpus(7, 10);
  const Vocabulary v = Vocabulary::from_measures(c.measures);
  MeasureVae model(v, reg_latent(), small_arch(), 1);
  ModelManifest m = manifest_of(model);
  std::string text = manifest_to_json(m);
  EXPECT_EQ(manifest_from_json(text).vocabulary, v);
  const auto pos = text.find("\"hash\": \"");
  ASSERT_NE(pos, std::string::npos);
  text[pos + 9] = text[pos + 9] == '0' ? '1' : '0';
  try {
    manifest_from_json(text);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BadCheckpoint);
  }
  try {
    load_model(scratch("missing"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Io);
  }
}

TEST(TrainerTest, DivergenceReportsStep) {
  const Corpus c = synthetic_corpus(8, 16);
  const Vocabulary v = Vocabulary::from_measures(c.measures);
  MeasureVae model(v, reg_latent(), small_arch(), 1);
  TrainConfig cfg = quick_config();
  cfg.settings.adam.lr = 1e250;
  Trainer t(model, cfg, c.measures);
  try {
    t.run();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TrainingDiverged);
    EXPECT_GE(e.location(), 1);
  }
}

TEST(TrainerTest, ConfigValidation) {
  const Corpus c = synthetic_corpus(8, 16);
  const Vocabulary v = Vocabulary::from_measures(c.measures);
  MeasureVae model(v, reg_latent(), small_arch(), 1);
  TrainConfig cfg = quick_config();
  cfg.batch_size = 1;
  EXPECT_THROW(Trainer(model, cfg, c.measures), Error);
  cfg = quick_config();
  EXPECT_THROW(Trainer(model, cfg, std::span(c.measures).first(1)), Error);
}
