#include "lsrlab/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lsrlab/error.hpp"

namespace lsrlab {

namespace {

constexpr std::size_t kT = kSlotsPerMeasure;

double pearson(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(ErrorCode::DegenerateInput, "constant sequence");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> column(const Tensor& t, std::size_t j) {
  std::vector<double> out(t.rows());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = t(i, j);
  return out;
}

std::vector<double> attribute_values(std::span<const AttributeVector> attrs, AttributeId a) {
  std::vector<double> out(attrs.size());
  for (std::size_t i = 0; i < attrs.size(); ++i) out[i] = attrs[i].get(a);
  return out;
}

void check_latents(const Tensor& latents, std::size_t m) {
  if (latents.rank() != 2 || latents.rows() != m) {
    throw Error(ErrorCode::LengthMismatch, "latents " + latents.shape_string() + " for " +
                                               std::to_string(m) + " measures");
  }
  if (m < 3) throw Error(ErrorCode::DegenerateInput, "need at least 3 measures");
}

double sequence_cosine(const IndexSequence& a, const IndexSequence& b, int vocab) {
  return cosine_similarity(one_hot_sequence(a, vocab), one_hot_sequence(b, vocab));
}

}  // namespace

double reconstruction_accuracy(std::span<const IndexSequence> inputs,
                               std::span<const IndexSequence> reconstructions) {
  if (inputs.size() != reconstructions.size() || inputs.empty()) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(inputs.size()) + " inputs vs " +
                                               std::to_string(reconstructions.size()) +
                                               " reconstructions");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    std::size_t same = 0;
    for (std::size_t t = 0; t < kT; ++t) same += inputs[i][t] == reconstructions[i][t];
    acc += static_cast<double>(same) / static_cast<double>(kT);
  }
  return 100.0 * acc / static_cast<double>(inputs.size());
}

double reconstruction_accuracy(std::span<const Measure> inputs,
                               std::span<const Measure> reconstructions) {
  if (inputs.size() != reconstructions.size() || inputs.empty()) {
    throw Error(ErrorCode::LengthMismatch, "measure counts differ");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    std::size_t same = 0;
    for (std::size_t t = 0; t < kT; ++t) same += inputs[i][t] == reconstructions[i][t];
    acc += static_cast<double>(same) / static_cast<double>(kT);
  }
  return 100.0 * acc / static_cast<double>(inputs.size());
}

std::vector<double> average_ranks(std::span<const double> xs) {
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(xs.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size() || xs.size() < 2) {
    throw Error(ErrorCode::LengthMismatch, "spearman needs two equal-length sequences of >= 2 values");
  }
  const auto rx = average_ranks(xs);
  const auto ry = average_ranks(ys);
  return pearson(rx, ry);
}

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw Error(ErrorCode::LengthMismatch, "cosine of unequal lengths");
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0.0 || nv == 0.0) throw Error(ErrorCode::ZeroVector, "cosine of a zero vector");
  return std::clamp(dot / std::sqrt(nu * nv), -1.0, 1.0);
}

std::vector<double> one_hot_sequence(const IndexSequence& seq, int vocab_size) {
  const auto v = static_cast<std::size_t>(vocab_size);
  std::vector<double> out(kT * v, 0.0);
  for (std::size_t t = 0; t < kT; ++t) {
    if (seq[t] < 0 || seq[t] >= vocab_size) {
      throw Error(ErrorCode::IndexOutOfVocab, "index " + std::to_string(seq[t]) + " outside vocabulary");
    }
    out[t * v + static_cast<std::size_t>(seq[t])] = 1.0;
  }
  return out;
}

Independence attribute_independence(const Tensor& latents, std::span<const AttributeVector> attrs) {
  check_latents(latents, attrs.size());
  Independence out;
  std::vector<std::vector<double>> dims;
  for (std::size_t j = 0; j < latents.cols(); ++j) dims.push_back(column(latents, j));
  for (AttributeId a : kAllAttributes) {
    const auto values = attribute_values(attrs, a);
    double best = 0.0;
    for (const auto& z : dims) {
      try {
        best = std::max(best, std::abs(spearman(values, z)));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::DegenerateInput) throw;
      }
    }
    out.per_attribute[a] = best;
    out.mean += best;
  }
  out.mean /= static_cast<double>(kAllAttributes.size());
  return out;
}

std::map<AttributeId, double> interpretability(const Tensor& latents,
                                               std::span<const AttributeVector> attrs,
                                               std::span<const LatentBinding> bindings) {
  check_latents(latents, attrs.size());
  std::map<AttributeId, double> out;
  for (const LatentBinding& b : bindings) {
    if (b.dimension < 0 || static_cast<std::size_t>(b.dimension) >= latents.cols()) {
      throw Error(ErrorCode::ConfigInvalid, "binding outside the latent dimensions");
    }
    const auto z = column(latents, static_cast<std::size_t>(b.dimension));
    const auto a = attribute_values(attrs, b.attribute);
    // Single-regressor OLS: R^2 equals the squared Pearson correlation.
    const double r = pearson(z, a);
    out[b.attribute] = std::clamp(r * r, 0.0, 1.0);
  }
  return out;
}

Tensor attribute_direction(const Tensor& latents, std::span<const AttributeVector> attrs,
                           AttributeId attribute) {
  if (latents.rank() != 2 || latents.rows() != attrs.size()) {
    throw Error(ErrorCode::LengthMismatch, "latents and attributes disagree in length");
  }
  const auto values = attribute_values(attrs, attribute);
  const double mean = values.empty() ? 0.0 : std::accumulate(values.begin(), values.end(), 0.0) /
                                                  static_cast<double>(values.size());
  const std::size_t d = latents.cols();
  std::vector<double> hi(d, 0.0), lo(d, 0.0);
  std::size_t n_hi = 0, n_lo = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto& acc = values[i] - mean >= 0.0 ? hi : lo;
    (values[i] - mean >= 0.0 ? n_hi : n_lo) += 1;
    for (std::size_t j = 0; j < d; ++j) acc[j] += latents(i, j);
  }
  if (n_hi == 0 || n_lo == 0) {
    throw Error(ErrorCode::EmptySubset, std::string("attribute ") +
                                            std::string(attribute_name(attribute)) +
                                            " does not split the corpus");
  }
  Tensor dir({1, d});
  for (std::size_t j = 0; j < d; ++j) {
    dir.data[j] = hi[j] / static_cast<double>(n_hi) - lo[j] / static_cast<double>(n_lo);
  }
  return dir;
}

std::vector<double> efficiency_scores(const Autoencoder& model, const Batch& data,
                                      AttributeId attribute, std::span<const double> mu_grid) {
  const Tensor z = model.latent_means(data.tokens);
  const Tensor dir = attribute_direction(z, data.attributes, attribute);
  const Tensor targets = model.targets_for(data.attributes);
  const std::size_t m = data.size(), d = z.cols();
  std::vector<double> scores(m, 0.0);
  for (double mu : mu_grid) {
    Tensor shifted = z;
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < d; ++j) shifted(i, j) += mu * dir.data[j];
    }
    const Decoded out = model.decode(shifted, &targets);
    for (std::size_t i = 0; i < m; ++i) {
      scores[i] += sequence_cosine(data.tokens[i], out.tokens[i], model.vocabulary().size());
    }
  }
  return scores;
}

namespace {

Efficiency moments(const std::vector<double>& xs) {
  Efficiency e;
  if (xs.empty()) return e;
  e.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - e.mean) * (x - e.mean);
  e.sd = std::sqrt(ss / static_cast<double>(xs.size()));
  return e;
}

}  // namespace

Efficiency reconstruction_efficiency(const Autoencoder& model, const Batch& data,
                                     AttributeId attribute, std::span<const double> mu_grid) {
  return moments(efficiency_scores(model, data, attribute, mu_grid));
}

Efficiency reconstruction_efficiency_pooled(const Autoencoder& model, const Batch& data,
                                            std::span<const double> mu_grid) {
  std::vector<double> all;
  for (AttributeId a : kAllAttributes) {
    try {
      const auto s = efficiency_scores(model, data, a, mu_grid);
      all.insert(all.end(), s.begin(), s.end());
    } catch (const Error& e) {
      if (e.code() != ErrorCode::EmptySubset) throw;
    }
  }
  if (all.empty()) throw Error(ErrorCode::EmptySubset, "no attribute splits the corpus");
  return moments(all);
}

Interpolation interpolate(const Autoencoder& model, const Batch& data, const IndexSequence& seed,
                          AttributeId attribute, std::span<const double> mu_grid) {
  const Tensor z_all = model.latent_means(data.tokens);
  const Tensor dir = attribute_direction(z_all, data.attributes, attribute);
  const std::vector<IndexSequence> one = {seed};
  const Tensor z = model.latent_means(one);
  const Measure seed_measure = decode_indices(seed, model.vocabulary());
  const std::vector<AttributeVector> seed_attrs = {compute_attributes(seed_measure)};
  const std::size_t n = mu_grid.size(), d = z.cols();
  Tensor zs({n, d});
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t j = 0; j < d; ++j) zs(k, j) = z.data[j] + mu_grid[k] * dir.data[j];
  }
  const Tensor one_target = model.targets_for(seed_attrs);
  Tensor targets({n, one_target.cols()});
  for (std::size_t k = 0; k < n; ++k) {
    std::copy(one_target.data.begin(), one_target.data.end(),
              targets.data.begin() + static_cast<std::ptrdiff_t>(k * one_target.cols()));
  }
  const Decoded out = model.decode(zs, &targets);
  Interpolation r;
  r.mu.assign(mu_grid.begin(), mu_grid.end());
  for (const auto& seq : out.tokens) {
    r.measures.push_back(decode_indices(seq, model.vocabulary()));
    r.attributes.push_back(compute_attributes(r.measures.back()));
  }
  return r;
}

std::vector<IndexSequence> reconstruct(const Autoencoder& model, const Batch& data) {
  const Tensor z = model.latent_means(data.tokens);
  const Tensor targets = model.targets_for(data.attributes);
  return model.decode(z, &targets).tokens;
}

MetricReport evaluate(const Autoencoder& model, const Batch& data, const LossBreakdown& loss) {
  MetricReport r;
  r.loss = loss;
  r.reconstruction_accuracy = reconstruction_accuracy(data.tokens, reconstruct(model, data));
  const Efficiency e = reconstruction_efficiency_pooled(model, data);
  r.reconstruction_efficiency_mean = e.mean;
  r.reconstruction_efficiency_sd = e.sd;
  const Tensor z = model.latent_means(data.tokens);
  const Independence ind = attribute_independence(z, data.attributes);
  r.independence = ind.per_attribute;
  r.independence_mean = ind.mean;
  for (AttributeId a : kAllAttributes) r.interpretability[a] = std::nullopt;
  for (const LatentBinding& b : model.latent().regularised) {
    const LatentBinding one[] = {b};
    try {
      r.interpretability[b.attribute] = interpretability(z, data.attributes, one).at(b.attribute);
    } catch (const Error& err) {
      if (err.code() != ErrorCode::DegenerateInput) throw;
    }
  }
  return r;
}

}  // namespace lsrlab
