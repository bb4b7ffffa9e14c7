#pragma once

// Epoch/batch loop over a training corpus with bit-exact checkpoint resume.
// Batch order and reparameterisation noise are pure functions of
// (seed, epoch) and (seed, step), so a checkpoint needs no RNG state.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "lsrlab/models.hpp"

namespace lsrlab {

struct TrainConfig {
  int epochs = 1;
  int batch_size = 64;
  TrainSettings settings;
  std::uint64_t seed = 0;

  void validate() const;  // ConfigInvalid
};

struct TrainPosition {
  std::uint64_t epoch = 0;
  std::uint64_t batch = 0;  // next batch within `epoch`
  std::uint64_t step = 0;   // optimizer steps taken

  friend bool operator==(const TrainPosition&, const TrainPosition&) = default;
};

/// Index batches for one epoch: a seeded permutation cut into batch_size
/// chunks; a trailing chunk of one joins the previous chunk.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size,
                                                    std::uint64_t seed, std::uint64_t epoch);

class Trainer {
 public:
  /// Throws TooSmall when fewer than two training measures are given.
  Trainer(Autoencoder& model, TrainConfig cfg, std::span<const Measure> train,
          TrainPosition start = {});

  bool done() const;
  /// One optimizer step. Throws TrainingDiverged (location = step) on a
  /// non-finite loss or intermediate value.
  LossBreakdown step();
  /// Steps until done or until `max_steps` further steps have run.
  void run(std::uint64_t max_steps = UINT64_MAX);

  const TrainPosition& position() const { return pos_; }
  const LossBreakdown& last() const { return last_; }
  const Batch& data() const { return data_; }

 private:
  void load_epoch();

  Autoencoder& model_;
  TrainConfig cfg_;
  Batch data_;
  TrainPosition pos_;
  LossBreakdown last_;
  std::vector<std::vector<std::size_t>> batches_;
  std::uint64_t batches_epoch_ = UINT64_MAX;
};

/// Saved alongside the parameters: everything needed to rebuild the model
/// and continue training.
struct ModelManifest {
  ModelKind kind = ModelKind::MeasureVae;
  LatentConfig latent;
  ArchConfig arch;
  Vocabulary vocabulary;
  std::vector<BinSpec> bins;
  TrainPosition position;
  std::string config_digest;
};

inline constexpr int kManifestVersion = 1;

ModelManifest manifest_of(const Autoencoder& model);

/// Writes manifest.json, vae.ckpt and (adversarial) disc.ckpt into `dir`.
void save_model(const std::filesystem::path& dir, const Autoencoder& model,
                const TrainPosition& position, const std::string& config_digest = {});

struct LoadedModel {
  std::unique_ptr<Autoencoder> model;
  ModelManifest manifest;
};

/// Throws Io or BadCheckpoint (including a vocabulary hash mismatch).
LoadedModel load_model(const std::filesystem::path& dir);

std::string manifest_to_json(const ModelManifest& m);
ModelManifest manifest_from_json(const std::string& text);

}  // namespace lsrlab
