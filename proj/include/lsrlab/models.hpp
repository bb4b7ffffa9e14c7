#pragma once

// Sequence VAEs over 24-token measures: MeasureVAE with latent-space
// regularisation and AdversarialVAE with attribute-conditioned decoding.

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lsrlab/attributes.hpp"
#include "lsrlab/ndgrad/layers.hpp"
#include "lsrlab/ndgrad/param_store.hpp"
#include "lsrlab/score.hpp"

namespace lsrlab {

using ndgrad::AdamConfig;
using ndgrad::ParamStore;
using ndgrad::Tape;
using ndgrad::Tensor;
using ndgrad::Var;

inline constexpr std::array<int, 7> kLatentDims = {4, 8, 16, 32, 64, 128, 256};
inline constexpr double kProbabilityFloor = 1e-7;

struct LatentBinding {
  AttributeId attribute = AttributeId::ND;
  int dimension = 0;

  friend bool operator==(const LatentBinding&, const LatentBinding&) = default;
};

struct LatentConfig {
  int d = 8;
  std::vector<LatentBinding> regularised;
  double delta = 10.0;

  /// Throws ConfigInvalid.
  void validate() const;
  /// Dimension bound to `a`, or -1.
  int dimension_of(AttributeId a) const;
};

struct ArchConfig {
  int embedding = 16;
  int hidden = 64;
  int disc_hidden = 64;
  int disc_layers = 2;  // linear+tanh layers before the sigmoid head

  void validate() const;
};

/// alpha: adversarial encoder term, beta: KLD, gamma: summed LSR terms.
struct LossWeights {
  double alpha = 0.1;
  double beta = 0.1;
  double gamma = 0.2;
};

struct LossBreakdown {
  double reconstruction = 0.0;
  double kld = 0.0;
  std::map<AttributeId, double> lsr_per_attribute;
  double adversarial_d = 0.0;
  double adversarial_enc = 0.0;
  double total = 0.0;

  double lsr_sum() const;
  /// reconstruction + beta*kld + gamma*sum(lsr) + alpha*adversarial_enc.
  double weighted_sum(const LossWeights& w) const;

  friend bool operator==(const LossBreakdown&, const LossBreakdown&) = default;
};

enum class ModelKind { MeasureVae, AdversarialVae };
std::string_view model_kind_name(ModelKind k);  // "measure_vae", "adversarial_vae"
ModelKind parse_model_kind(std::string_view s);  // throws ConfigInvalid

struct Batch {
  std::vector<IndexSequence> tokens;
  std::vector<AttributeVector> attributes;

  std::size_t size() const { return tokens.size(); }
};

Batch make_batch(std::span<const Measure> measures, const Vocabulary& vocab);

struct Posterior {
  Var mean;    // [m, d]
  Var logvar;  // [m, d]
};

/// Shared encoder/decoder. Encoder: embedding + bidirectional GRU, the final
/// forward and backward states feed linear mean/logvar heads. Decoder: two
/// stacked GRUs; each step reads the previous token's embedding and the
/// conditioning vector; the initial states are tanh(linear(conditioning)).
class SequenceVae {
 public:
  SequenceVae(Vocabulary vocab, int latent_dim, int condition_extra, ArchConfig arch,
              std::uint64_t seed);
  /// Wraps an existing parameter store (checkpoint restore).
  SequenceVae(Vocabulary vocab, int latent_dim, int condition_extra, ArchConfig arch,
              ParamStore params);

  const Vocabulary& vocabulary() const { return vocab_; }
  int latent_dim() const { return latent_dim_; }
  int condition_dim() const { return latent_dim_ + condition_extra_; }
  int condition_extra() const { return condition_extra_; }
  const ArchConfig& arch() const { return arch_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  /// Throws IndexOutOfVocab.
  Posterior encode(Tape& tape, std::span<const IndexSequence> tokens) const;
  /// Teacher-forced logits, time-major rows: row t*m + i is slot t of sequence i.
  Var decode_logits(Tape& tape, Var conditioning, std::span<const IndexSequence> targets) const;

  /// Greedy decoding. Continuation is never emitted after a Rest or at slot 0,
  /// so every output is a valid measure. `logits` receives [m, 24, V] when set.
  std::vector<IndexSequence> greedy(const Tensor& conditioning, Tensor* logits = nullptr) const;

  Tensor latent_means(std::span<const IndexSequence> tokens) const;

 private:
  void check_indices(std::span<const IndexSequence> tokens) const;

  Vocabulary vocab_;
  int latent_dim_;
  int condition_extra_;
  ArchConfig arch_;
  ParamStore params_;
};

/// Output of decode(): logits [m, 24, V] and the greedy token sequences.
struct Decoded {
  Tensor logits;
  std::vector<IndexSequence> tokens;
};

struct TrainSettings {
  AdamConfig adam;
  AdamConfig disc_adam;
  LossWeights weights;
};

class Autoencoder {
 public:
  virtual ~Autoencoder() = default;

  virtual ModelKind kind() const = 0;
  virtual const LatentConfig& latent() const = 0;
  virtual SequenceVae& core() = 0;
  virtual const SequenceVae& core() const = 0;
  virtual bool needs_targets() const = 0;
  /// Flattened N*K one-hot targets per measure, [m, N*K]; [m, 0] when unconditioned.
  virtual Tensor targets_for(std::span<const AttributeVector> attrs) const = 0;
  /// Throws MissingTargets when the decoder is conditioned and `targets` is null.
  virtual Decoded decode(const Tensor& z, const Tensor* targets) const = 0;
  virtual LossBreakdown train_step(const Batch& batch, const Tensor& noise,
                                   const TrainSettings& s) = 0;
  virtual std::unique_ptr<Autoencoder> clone() const = 0;

  const Vocabulary& vocabulary() const { return core().vocabulary(); }
  int latent_dim() const { return core().latent_dim(); }
  Tensor latent_means(std::span<const IndexSequence> tokens) const {
    return core().latent_means(tokens);
  }
};

class MeasureVae final : public Autoencoder {
 public:
  MeasureVae(Vocabulary vocab, LatentConfig latent, ArchConfig arch = {}, std::uint64_t seed = 0);
  MeasureVae(Vocabulary vocab, LatentConfig latent, ArchConfig arch, ParamStore params);

  ModelKind kind() const override { return ModelKind::MeasureVae; }
  const LatentConfig& latent() const override { return latent_; }
  SequenceVae& core() override { return core_; }
  const SequenceVae& core() const override { return core_; }
  bool needs_targets() const override { return false; }
  Tensor targets_for(std::span<const AttributeVector> attrs) const override;
  Decoded decode(const Tensor& z, const Tensor* targets = nullptr) const override;
  LossBreakdown train_step(const Batch& batch, const Tensor& noise,
                           const TrainSettings& s) override;
  std::unique_ptr<Autoencoder> clone() const override;

 private:
  LatentConfig latent_;
  SequenceVae core_;
};

/// Linear+tanh stack reading z, ending in N*K sigmoid outputs.
class Discriminator {
 public:
  Discriminator(int latent_dim, int n_attributes, int k, const ArchConfig& arch,
                std::uint64_t seed);
  Discriminator(int latent_dim, int n_attributes, int k, const ArchConfig& arch,
                ParamStore params);

  /// Probabilities [m, N*K].
  Var forward(Tape& tape, Var z) const;
  Tensor predict(const Tensor& z) const;
  /// Mean over attributes of argmax-bin accuracy against one-hot targets.
  double accuracy(const Tensor& z, const Tensor& targets) const;
  /// One Adam step on the discriminator loss; returns the pre-step loss.
  double train_step(const Tensor& z, const Tensor& targets, const AdamConfig& cfg);

  int n_attributes() const { return n_; }
  int k() const { return k_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

 private:
  int latent_dim_;
  int n_;
  int k_;
  int layers_;
  ParamStore params_;
};

inline constexpr std::string_view kDiscriminatorPrefix = "disc.";

class AdversarialVae final : public Autoencoder {
 public:
  /// `bins` holds one spec per conditioning attribute (all with the same k).
  AdversarialVae(Vocabulary vocab, LatentConfig latent, std::vector<BinSpec> bins,
                 ArchConfig arch = {}, std::uint64_t seed = 0);
  AdversarialVae(Vocabulary vocab, LatentConfig latent, std::vector<BinSpec> bins,
                 ArchConfig arch, ParamStore vae_params, ParamStore disc_params);

  ModelKind kind() const override { return ModelKind::AdversarialVae; }
  const LatentConfig& latent() const override { return latent_; }
  SequenceVae& core() override { return core_; }
  const SequenceVae& core() const override { return core_; }
  bool needs_targets() const override { return true; }
  Tensor targets_for(std::span<const AttributeVector> attrs) const override;
  Decoded decode(const Tensor& z, const Tensor* targets) const override;
  LossBreakdown train_step(const Batch& batch, const Tensor& noise,
                           const TrainSettings& s) override;
  std::unique_ptr<Autoencoder> clone() const override;

  /// Encoder/decoder update on L_R + beta*KLD only; the reference the
  /// alpha = 0 adversarial step must reproduce.
  LossBreakdown train_step_plain(const Batch& batch, const Tensor& noise, const TrainSettings& s);

  const std::vector<BinSpec>& bins() const { return bins_; }
  Discriminator& discriminator() { return disc_; }
  const Discriminator& discriminator() const { return disc_; }

 private:
  LatentConfig latent_;
  std::vector<BinSpec> bins_;
  SequenceVae core_;
  Discriminator disc_;
};

/// L_{r,a}: mean over all m*m pairs of |tanh(delta * (z_i - z_j)) - sgn(a_i - a_j)|.
/// `z_column` is [m, 1]. Throws BatchTooSmall when m < 2.
Var lsr_loss(Var z_column, std::span<const double> values, double delta);

struct LossGraph {
  Var total;
  LossBreakdown breakdown;
};

/// L_R + beta*KLD + gamma*sum_r L_{r,a} with z = mean + exp(logvar/2)*noise.
LossGraph measurevae_loss(Tape& tape, const MeasureVae& model, const Batch& batch,
                          const Tensor& noise, const LossWeights& w);

/// L_R + beta*KLD (+ alpha * encoder adversarial term when `adversarial`).
/// Binds discriminator weights as constants; call on a tape that freezes
/// kDiscriminatorPrefix or only the encoder/decoder gradients are meaningful.
LossGraph adversarial_vae_loss(Tape& tape, const AdversarialVae& model, const Batch& batch,
                               const Tensor& noise, const LossWeights& w, bool adversarial = true);

/// Mean BCE of discriminator outputs against B.
Var discriminator_loss(Tape& tape, const Discriminator& disc, Var z, const Tensor& b);
/// Mean BCE of discriminator outputs against 1 - B.
Var encoder_adversarial_loss(Tape& tape, const Discriminator& disc, Var z, const Tensor& b);

LossBreakdown train_step_measurevae(MeasureVae& model, const Batch& batch, const Tensor& noise,
                                    const TrainSettings& s);
/// Phase 1: discriminator step on detached z. Phase 2: encoder/decoder step
/// with the discriminator frozen. Both phases share `noise`.
LossBreakdown train_step_adversarial(AdversarialVae& model, const Batch& batch,
                                     const Tensor& noise, const TrainSettings& s);

/// Standard normal [m, d] draw determined by (seed, step).
Tensor step_noise(std::uint64_t seed, std::uint64_t step, std::size_t m, std::size_t d);

/// Flattened N*K one-hot rows for each attribute vector.
Tensor flat_targets(std::span<const AttributeVector> attrs, std::span<const BinSpec> bins);

/// Fits K-bin mu-law specs for every attribute over `attrs`.
std::vector<BinSpec> fit_attribute_bins(std::span<const AttributeVector> attrs,
                                        int k = kDefaultBins, double mu = kDefaultMu);

}  // namespace lsrlab
