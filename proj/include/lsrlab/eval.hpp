#pragma once

#include <array>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "lsrlab/attributes.hpp"
#include "lsrlab/models.hpp"

namespace lsrlab {

/// Percentage of equal tokens, averaged per sequence. Throws LengthMismatch.
double reconstruction_accuracy(std::span<const IndexSequence> inputs,
                               std::span<const IndexSequence> reconstructions);
double reconstruction_accuracy(std::span<const Measure> inputs,
                               std::span<const Measure> reconstructions);

/// Fractional ranks (1-based); ties share the mean of their positions.
std::vector<double> average_ranks(std::span<const double> xs);
/// Pearson correlation of average ranks. Throws LengthMismatch (unequal or
/// fewer than two values) or DegenerateInput (a constant side).
double spearman(std::span<const double> xs, std::span<const double> ys);

/// dot(u, v) / (|u| |v|). Throws LengthMismatch or ZeroVector.
double cosine_similarity(std::span<const double> u, std::span<const double> v);
/// 24*V one-hot flattening of an index sequence.
std::vector<double> one_hot_sequence(const IndexSequence& seq, int vocab_size);

struct Independence {
  std::map<AttributeId, double> per_attribute;
  double mean = 0.0;
};

/// Per attribute, max over latent dimensions of |spearman|; degenerate
/// pairs count as 0. `latents` is [m, d] with m >= 3.
Independence attribute_independence(const Tensor& latents, std::span<const AttributeVector> attrs);

/// R^2 of a ~ w*z_r + b per binding, clamped to [0, 1]. Throws DegenerateInput.
std::map<AttributeId, double> interpretability(const Tensor& latents,
                                               std::span<const AttributeVector> attrs,
                                               std::span<const LatentBinding> bindings);

inline constexpr std::array<double, 11> kMuGrid = {-0.5, -0.4, -0.3, -0.2, -0.1, 0.0,
                                                   0.1,  0.2,  0.3,  0.4,  0.5};

/// Mean latent of measures whose centered attribute is >= 0 minus the mean
/// latent of the rest, as a [1, d] row. Throws EmptySubset.
Tensor attribute_direction(const Tensor& latents, std::span<const AttributeVector> attrs,
                           AttributeId attribute);

struct Efficiency {
  double mean = 0.0;
  double sd = 0.0;  // population
};

/// Per measure: sum over mu of cosine(one_hot(input), one_hot(decode(z + mu*dir))).
/// Conditioned decoders receive each input's own targets.
std::vector<double> efficiency_scores(const Autoencoder& model, const Batch& data,
                                      AttributeId attribute,
                                      std::span<const double> mu_grid = kMuGrid);
Efficiency reconstruction_efficiency(const Autoencoder& model, const Batch& data,
                                     AttributeId attribute, std::span<const double> mu_grid = kMuGrid);
/// Scores pooled across the attributes that split `data` (EmptySubset when none does).
Efficiency reconstruction_efficiency_pooled(const Autoencoder& model, const Batch& data,
                                            std::span<const double> mu_grid = kMuGrid);

struct Interpolation {
  std::vector<double> mu;
  std::vector<Measure> measures;
  std::vector<AttributeVector> attributes;
};

/// Decodes z(seed) + mu * direction for each mu, the direction being estimated
/// over `data`. A conditioned decoder receives the seed measure's targets.
Interpolation interpolate(const Autoencoder& model, const Batch& data, const IndexSequence& seed,
                          AttributeId attribute, std::span<const double> mu_grid = kMuGrid);

struct MetricReport {
  double reconstruction_accuracy = 0.0;
  double reconstruction_efficiency_mean = 0.0;
  double reconstruction_efficiency_sd = 0.0;
  std::map<AttributeId, double> independence;
  double independence_mean = 0.0;
  std::map<AttributeId, std::optional<double>> interpretability;
  LossBreakdown loss;

  friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

/// Full metric suite on `data`; unbound or degenerate interpretability entries are empty.
MetricReport evaluate(const Autoencoder& model, const Batch& data, const LossBreakdown& loss = {});

/// Greedy reconstructions of `data` from latent means.
std::vector<IndexSequence> reconstruct(const Autoencoder& model, const Batch& data);

}  // namespace lsrlab
