#include "lsrlab/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "lsrlab/error.hpp"
#include "lsrlab/ndgrad/ops.hpp"

namespace lsrlab {

namespace nd = ndgrad;

namespace {

constexpr std::size_t kT = kSlotsPerMeasure;
constexpr std::size_t kLatentChunk = 512;

std::size_t as_size(int v) { return static_cast<std::size_t>(v); }

}  // namespace

void LatentConfig::validate() const {
  if (std::find(kLatentDims.begin(), kLatentDims.end(), d) == kLatentDims.end()) {
    throw Error(ErrorCode::ConfigInvalid, "latent dimension " + std::to_string(d) +
                                              " is not one of 4, 8, 16, 32, 64, 128, 256");
  }
  const std::size_t n = regularised.size();
  if (n != 0 && n != 2 && n != 4) {
    throw Error(ErrorCode::ConfigInvalid,
                "regularised list must hold 0, 2 or 4 bindings, got " + std::to_string(n));
  }
  std::set<int> dims;
  std::set<AttributeId> attrs;
  for (const auto& b : regularised) {
    if (b.dimension < 0 || b.dimension >= d) {
      throw Error(ErrorCode::ConfigInvalid,
                  "regularised dimension " + std::to_string(b.dimension) + " outside [0, d)");
    }
    if (!dims.insert(b.dimension).second) {
      throw Error(ErrorCode::ConfigInvalid,
                  "dimension " + std::to_string(b.dimension) + " bound twice");
    }
    if (!attrs.insert(b.attribute).second) {
      throw Error(ErrorCode::ConfigInvalid,
                  "attribute " + std::string(attribute_name(b.attribute)) + " bound twice");
    }
  }
  if (!(delta > 0.0) || !std::isfinite(delta)) {
    throw Error(ErrorCode::ConfigInvalid, "delta must be positive and finite");
  }
}

int LatentConfig::dimension_of(AttributeId a) const {
  for (const auto& b : regularised) {
    if (b.attribute == a) return b.dimension;
  }
  return -1;
}

void ArchConfig::validate() const {
  if (embedding < 1 || hidden < 1 || disc_hidden < 1 || disc_layers < 1) {
    throw Error(ErrorCode::ConfigInvalid, "architecture sizes must be positive");
  }
}

double LossBreakdown::lsr_sum() const {
  double s = 0.0;
  for (const auto& [a, v] : lsr_per_attribute) s += v;
  return s;
}

double LossBreakdown::weighted_sum(const LossWeights& w) const {
  return reconstruction + w.beta * kld + w.gamma * lsr_sum() + w.alpha * adversarial_enc;
}

std::string_view model_kind_name(ModelKind k) {
  return k == ModelKind::MeasureVae ? "measure_vae" : "adversarial_vae";
}

ModelKind parse_model_kind(std::string_view s) {
  if (s == "measure_vae") return ModelKind::MeasureVae;
  if (s == "adversarial_vae") return ModelKind::AdversarialVae;
  throw Error(ErrorCode::ConfigInvalid, "unknown model kind '" + std::string(s) + "'");
}

Batch make_batch(std::span<const Measure> measures, const Vocabulary& vocab) {
  Batch b;
  b.tokens.reserve(measures.size());
  b.attributes.reserve(measures.size());
  for (const Measure& m : measures) {
    b.tokens.push_back(encode_indices(m, vocab));
    b.attributes.push_back(compute_attributes(m));
  }
  return b;
}

// ---------------------------------------------------------------------------

SequenceVae::SequenceVae(Vocabulary vocab, int latent_dim, int condition_extra, ArchConfig arch,
                         std::uint64_t seed)
    : vocab_(std::move(vocab)),
      latent_dim_(latent_dim),
      condition_extra_(condition_extra),
      arch_(arch) {
  arch_.validate();
  std::mt19937_64 rng(seed);
  const std::size_t v = as_size(vocab_.size());
  const std::size_t e = as_size(arch_.embedding);
  const std::size_t h = as_size(arch_.hidden);
  const std::size_t c = as_size(condition_dim());
  const std::size_t d = as_size(latent_dim_);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto embedding = [&](std::size_t rows) {
    Tensor t({rows, e});
    for (double& x : t.data) x = normal(rng);
    return t;
  };
  params_.add("enc.embed", embedding(v));
  nd::add_gru_params(params_, "enc.fwd", e, h, rng);
  nd::add_gru_params(params_, "enc.bwd", e, h, rng);
  nd::add_linear_params(params_, "enc.mean", 2 * h, d, rng);
  nd::add_linear_params(params_, "enc.logvar", 2 * h, d, rng);
  params_.add("dec.embed", embedding(v + 1));
  nd::add_linear_params(params_, "dec.init", c, 2 * h, rng);
  nd::add_gru_params(params_, "dec.gru0", e + c, h, rng);
  nd::add_gru_params(params_, "dec.gru1", h, h, rng);
  nd::add_linear_params(params_, "dec.out", h, v, rng);
}

SequenceVae::SequenceVae(Vocabulary vocab, int latent_dim, int condition_extra, ArchConfig arch,
                         ParamStore params)
    : vocab_(std::move(vocab)),
      latent_dim_(latent_dim),
      condition_extra_(condition_extra),
      arch_(arch),
      params_(std::move(params)) {
  arch_.validate();
  const auto expect = [&](const std::string& name, std::size_t rows, std::size_t cols) {
    if (!params_.contains(name)) throw Error(ErrorCode::BadCheckpoint, "missing parameter " + name);
    const Tensor& t = params_.get(name);
    if (t.rows() != rows || t.cols() != cols) {
      throw Error(ErrorCode::BadCheckpoint, "parameter " + name + " has shape " + t.shape_string());
    }
  };
  const std::size_t v = as_size(vocab_.size()), e = as_size(arch_.embedding),
                    h = as_size(arch_.hidden), c = as_size(condition_dim());
  expect("enc.embed", v, e);
  expect("dec.embed", v + 1, e);
  expect("dec.init.w", c, 2 * h);
  expect("dec.gru0.w_x", e + c, 3 * h);
  expect("dec.out.w", h, v);
  expect("enc.mean.w", 2 * h, as_size(latent_dim_));
}

void SequenceVae::check_indices(std::span<const IndexSequence> tokens) const {
  if (tokens.empty()) throw Error(ErrorCode::ShapeMismatch, "empty batch");
  for (const auto& seq : tokens) {
    for (std::size_t t = 0; t < kT; ++t) {
      if (seq[t] < 0 || seq[t] >= vocab_.size()) {
        throw Error(ErrorCode::IndexOutOfVocab,
                    "index " + std::to_string(seq[t]) + " outside vocabulary of size " +
                        std::to_string(vocab_.size()),
                    static_cast<long>(t));
      }
    }
  }
}

Posterior SequenceVae::encode(Tape& tape, std::span<const IndexSequence> tokens) const {
  check_indices(tokens);
  const std::size_t m = tokens.size();
  const std::size_t h = as_size(arch_.hidden);
  std::vector<int> flat(kT * m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t t = 0; t < kT; ++t) flat[t * m + i] = tokens[i][t];
  }
  Var emb = nd::gather_rows(params_.var(tape, "enc.embed"), flat);
  const auto fw = nd::GruWeights::bind(tape, params_, "enc.fwd");
  const auto bw = nd::GruWeights::bind(tape, params_, "enc.bwd");
  Var proj_f = nd::add_bias(nd::matmul(emb, fw.w_x), fw.b_x);
  Var proj_b = nd::add_bias(nd::matmul(emb, bw.w_x), bw.b_x);
  Var hf = tape.constant(Tensor({m, h}, 0.0));
  Var hb = hf;
  for (std::size_t t = 0; t < kT; ++t) {
    hf = nd::gru_cell_projected(nd::slice_rows(proj_f, t * m, (t + 1) * m), hf, fw);
    const std::size_t r = kT - 1 - t;
    hb = nd::gru_cell_projected(nd::slice_rows(proj_b, r * m, (r + 1) * m), hb, bw);
  }
  Var both = nd::concat_cols({hf, hb});
  return {nd::linear(tape, params_, "enc.mean", both), nd::linear(tape, params_, "enc.logvar", both)};
}

Var SequenceVae::decode_logits(Tape& tape, Var conditioning,
                               std::span<const IndexSequence> targets) const {
  check_indices(targets);
  const std::size_t m = targets.size();
  const std::size_t h = as_size(arch_.hidden);
  const std::size_t e = as_size(arch_.embedding);
  const std::size_t c = as_size(condition_dim());
  const Tensor& cv = conditioning.value();
  if (cv.rank() != 2 || cv.rows() != m || cv.cols() != c) {
    throw Error(ErrorCode::ShapeMismatch, "conditioning " + cv.shape_string() + " for batch of " +
                                              std::to_string(m) + " with width " +
                                              std::to_string(c));
  }
  std::vector<int> prev(kT * m);
  for (std::size_t i = 0; i < m; ++i) {
    prev[i] = vocab_.size();
    for (std::size_t t = 1; t < kT; ++t) prev[t * m + i] = targets[i][t - 1];
  }
  Var emb = nd::gather_rows(params_.var(tape, "dec.embed"), prev);
  const auto g0 = nd::GruWeights::bind(tape, params_, "dec.gru0");
  const auto g1 = nd::GruWeights::bind(tape, params_, "dec.gru1");
  Var proj_e = nd::matmul(emb, nd::slice_rows(g0.w_x, 0, e));
  Var proj_c = nd::add_bias(nd::matmul(conditioning, nd::slice_rows(g0.w_x, e, e + c)), g0.b_x);
  Var init = nd::tanh(nd::linear(tape, params_, "dec.init", conditioning));
  Var h0 = nd::slice_cols(init, 0, h);
  Var h1 = nd::slice_cols(init, h, 2 * h);
  std::vector<Var> outputs;
  outputs.reserve(kT);
  for (std::size_t t = 0; t < kT; ++t) {
    h0 = nd::gru_cell_projected(nd::add(nd::slice_rows(proj_e, t * m, (t + 1) * m), proj_c), h0, g0);
    h1 = nd::gru_cell(h0, h1, g1);
    outputs.push_back(h1);
  }
  return nd::linear(tape, params_, "dec.out", nd::concat_rows(outputs));
}

std::vector<IndexSequence> SequenceVae::greedy(const Tensor& conditioning, Tensor* logits) const {
  const std::size_t c = as_size(condition_dim());
  if (conditioning.rank() != 2 || conditioning.cols() != c || conditioning.rows() == 0) {
    throw Error(ErrorCode::ShapeMismatch, "conditioning " + conditioning.shape_string() +
                                              " does not have width " + std::to_string(c));
  }
  const std::size_t m = conditioning.rows();
  const std::size_t h = as_size(arch_.hidden);
  const std::size_t e = as_size(arch_.embedding);
  const std::size_t v = as_size(vocab_.size());
  Tape tape;
  tape.freeze_prefix("");
  Var cond = tape.constant(conditioning);
  Var table = params_.var(tape, "dec.embed");
  const auto g0 = nd::GruWeights::bind(tape, params_, "dec.gru0");
  const auto g1 = nd::GruWeights::bind(tape, params_, "dec.gru1");
  Var w_e = nd::slice_rows(g0.w_x, 0, e);
  Var proj_c = nd::add_bias(nd::matmul(cond, nd::slice_rows(g0.w_x, e, e + c)), g0.b_x);
  Var init = nd::tanh(nd::linear(tape, params_, "dec.init", cond));
  Var h0 = nd::slice_cols(init, 0, h);
  Var h1 = nd::slice_cols(init, h, 2 * h);
  Var w_out = params_.var(tape, "dec.out.w");
  Var b_out = params_.var(tape, "dec.out.b");

  if (logits) *logits = Tensor({m, kT, v});
  std::vector<IndexSequence> out(m);
  std::vector<int> prev(m, vocab_.size());
  const int start = vocab_.size();
  for (std::size_t t = 0; t < kT; ++t) {
    Var x = nd::add(nd::matmul(nd::gather_rows(table, prev), w_e), proj_c);
    h0 = nd::gru_cell_projected(x, h0, g0);
    h1 = nd::gru_cell(h0, h1, g1);
    const Tensor& lg = nd::linear(h1, w_out, b_out).value();
    for (std::size_t i = 0; i < m; ++i) {
      const bool may_continue = prev[i] != start && prev[i] != Vocabulary::kRestIndex;
      int best = -1;
      double best_v = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < v; ++j) {
        if (!may_continue && static_cast<int>(j) == Vocabulary::kContinuationIndex) continue;
        const double val = lg(i, j);
        if (best < 0 || val > best_v) {
          best_v = val;
          best = static_cast<int>(j);
        }
      }
      out[i][t] = best;
      prev[i] = best;
      if (logits) {
        std::copy_n(&lg.data[i * v], v, &logits->data[(i * kT + t) * v]);
      }
    }
  }
  return out;
}

Tensor SequenceVae::latent_means(std::span<const IndexSequence> tokens) const {
  check_indices(tokens);
  const std::size_t d = as_size(latent_dim_);
  Tensor out({tokens.size(), d});
  for (std::size_t begin = 0; begin < tokens.size(); begin += kLatentChunk) {
    const std::size_t end = std::min(tokens.size(), begin + kLatentChunk);
    Tape tape;
    tape.freeze_prefix("");
    const Posterior p = encode(tape, tokens.subspan(begin, end - begin));
    const Tensor& mv = p.mean.value();
    std::copy(mv.data.begin(), mv.data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(begin * d));
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

void check_latent(const Tensor& z, int d) {
  if (z.rank() != 2 || z.cols() != as_size(d) || z.rows() == 0) {
    throw Error(ErrorCode::ShapeMismatch,
                "latent batch " + z.shape_string() + " does not have width " + std::to_string(d));
  }
}

Tensor concat_tensors(const Tensor& a, const Tensor& b) {
  const std::size_t m = a.rows(), ca = a.cols(), cb = b.cols();
  Tensor out({m, ca + cb});
  for (std::size_t i = 0; i < m; ++i) {
    std::copy_n(&a.data[i * ca], ca, &out.data[i * (ca + cb)]);
    if (cb) std::copy_n(&b.data[i * cb], cb, &out.data[i * (ca + cb) + ca]);
  }
  return out;
}

std::vector<int> time_major_targets(const Batch& batch) {
  const std::size_t m = batch.size();
  std::vector<int> out(kT * m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t t = 0; t < kT; ++t) out[t * m + i] = batch.tokens[i][t];
  }
  return out;
}

void check_batch(const Batch& batch) {
  if (batch.tokens.size() != batch.attributes.size()) {
    throw Error(ErrorCode::ShapeMismatch, "batch tokens and attributes disagree in length");
  }
}

}  // namespace

MeasureVae::MeasureVae(Vocabulary vocab, LatentConfig latent, ArchConfig arch, std::uint64_t seed)
    : latent_((latent.validate(), std::move(latent))),
      core_(std::move(vocab), latent_.d, 0, arch, seed) {}

MeasureVae::MeasureVae(Vocabulary vocab, LatentConfig latent, ArchConfig arch, ParamStore params)
    : latent_((latent.validate(), std::move(latent))),
      core_(std::move(vocab), latent_.d, 0, arch, std::move(params)) {}

Tensor MeasureVae::targets_for(std::span<const AttributeVector> attrs) const {
  return Tensor({attrs.size(), 0});
}

Decoded MeasureVae::decode(const Tensor& z, const Tensor*) const {
  check_latent(z, latent_.d);
  Decoded d;
  d.tokens = core_.greedy(z, &d.logits);
  return d;
}

LossBreakdown MeasureVae::train_step(const Batch& batch, const Tensor& noise,
                                     const TrainSettings& s) {
  return train_step_measurevae(*this, batch, noise, s);
}

std::unique_ptr<Autoencoder> MeasureVae::clone() const { return std::make_unique<MeasureVae>(*this); }

// ---------------------------------------------------------------------------

Discriminator::Discriminator(int latent_dim, int n_attributes, int k, const ArchConfig& arch,
                             std::uint64_t seed)
    : latent_dim_(latent_dim), n_(n_attributes), k_(k), layers_(arch.disc_layers) {
  arch.validate();
  if (n_ < 1 || k_ < 2) throw Error(ErrorCode::ConfigInvalid, "discriminator needs N >= 1, K >= 2");
  std::mt19937_64 rng(seed);
  std::size_t in = as_size(latent_dim_);
  for (int l = 0; l < layers_; ++l) {
    nd::add_linear_params(params_, "disc.l" + std::to_string(l), in, as_size(arch.disc_hidden), rng);
    in = as_size(arch.disc_hidden);
  }
  nd::add_linear_params(params_, "disc.out", in, as_size(n_ * k_), rng);
}

Discriminator::Discriminator(int latent_dim, int n_attributes, int k, const ArchConfig& arch,
                             ParamStore params)
    : latent_dim_(latent_dim),
      n_(n_attributes),
      k_(k),
      layers_(arch.disc_layers),
      params_(std::move(params)) {
  for (int l = 0; l < layers_; ++l) {
    if (!params_.contains("disc.l" + std::to_string(l) + ".w")) {
      throw Error(ErrorCode::BadCheckpoint, "discriminator layer " + std::to_string(l) + " missing");
    }
  }
  if (!params_.contains("disc.out.w") || params_.get("disc.out.w").cols() != as_size(n_ * k_)) {
    throw Error(ErrorCode::BadCheckpoint, "discriminator head missing or misshapen");
  }
}

Var Discriminator::forward(Tape& tape, Var z) const {
  if (z.value().rank() != 2 || z.value().cols() != as_size(latent_dim_)) {
    throw Error(ErrorCode::ShapeMismatch, "discriminator input " + z.value().shape_string());
  }
  Var h = z;
  for (int l = 0; l < layers_; ++l) h = nd::tanh(nd::linear(tape, params_, "disc.l" + std::to_string(l), h));
  return nd::sigmoid(nd::linear(tape, params_, "disc.out", h));
}

Tensor Discriminator::predict(const Tensor& z) const {
  Tape tape;
  tape.freeze_prefix("");
  return forward(tape, tape.constant(z)).value();
}

double Discriminator::accuracy(const Tensor& z, const Tensor& targets) const {
  const Tensor p = predict(z);
  if (!p.same_shape(targets)) {
    throw Error(ErrorCode::ShapeMismatch, "targets " + targets.shape_string() + " vs outputs " +
                                              p.shape_string());
  }
  const std::size_t m = p.rows(), k = as_size(k_);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t a = 0; a < as_size(n_); ++a) {
      const double* row = &p.data[i * p.cols() + a * k];
      const double* tgt = &targets.data[i * p.cols() + a * k];
      const auto pred = std::max_element(row, row + k) - row;
      const auto truth = std::max_element(tgt, tgt + k) - tgt;
      if (pred == truth) ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(m * as_size(n_));
}

double Discriminator::train_step(const Tensor& z, const Tensor& targets, const AdamConfig& cfg) {
  Tape tape;
  Var loss = discriminator_loss(tape, *this, tape.constant(z), targets);
  const double value = loss.value().item();
  nd::adam_step(params_, tape.backward(loss), cfg);
  return value;
}

// ---------------------------------------------------------------------------

namespace {

int bins_k(const std::vector<BinSpec>& bins) {
  if (bins.empty()) throw Error(ErrorCode::ConfigInvalid, "adversarial model needs attribute bins");
  for (const auto& b : bins) {
    if (b.k != bins.front().k) throw Error(ErrorCode::ConfigInvalid, "bin specs disagree on k");
  }
  return bins.front().k;
}

const LatentConfig& adversarial_latent(const LatentConfig& latent) {
  latent.validate();
  if (!latent.regularised.empty()) {
    throw Error(ErrorCode::ConfigInvalid, "adversarial model does not take regularised dimensions");
  }
  return latent;
}

}  // namespace

AdversarialVae::AdversarialVae(Vocabulary vocab, LatentConfig latent, std::vector<BinSpec> bins,
                               ArchConfig arch, std::uint64_t seed)
    : latent_(adversarial_latent(latent)),
      bins_(std::move(bins)),
      core_(std::move(vocab), latent_.d, static_cast<int>(bins_.size()) * bins_k(bins_), arch, seed),
      disc_(latent_.d, static_cast<int>(bins_.size()), bins_k(bins_), arch, seed ^ 0x9e3779b97f4a7c15ULL) {}

AdversarialVae::AdversarialVae(Vocabulary vocab, LatentConfig latent, std::vector<BinSpec> bins,
                               ArchConfig arch, ParamStore vae_params, ParamStore disc_params)
    : latent_(adversarial_latent(latent)),
      bins_(std::move(bins)),
      core_(std::move(vocab), latent_.d, static_cast<int>(bins_.size()) * bins_k(bins_), arch,
            std::move(vae_params)),
      disc_(latent_.d, static_cast<int>(bins_.size()), bins_k(bins_), arch, std::move(disc_params)) {}

Tensor AdversarialVae::targets_for(std::span<const AttributeVector> attrs) const {
  return flat_targets(attrs, bins_);
}

Decoded AdversarialVae::decode(const Tensor& z, const Tensor* targets) const {
  if (!targets) throw Error(ErrorCode::MissingTargets, "adversarial decoding needs attribute targets");
  check_latent(z, latent_.d);
  const std::size_t width = as_size(core_.condition_extra());
  if (targets->rank() != 2 || targets->rows() != z.rows() || targets->cols() != width) {
    throw Error(ErrorCode::ShapeMismatch, "targets " + targets->shape_string() + " for " +
                                              std::to_string(z.rows()) + " latents");
  }
  Decoded d;
  d.tokens = core_.greedy(concat_tensors(z, *targets), &d.logits);
  return d;
}

LossBreakdown AdversarialVae::train_step(const Batch& batch, const Tensor& noise,
                                         const TrainSettings& s) {
  return train_step_adversarial(*this, batch, noise, s);
}

LossBreakdown AdversarialVae::train_step_plain(const Batch& batch, const Tensor& noise,
                                               const TrainSettings& s) {
  Tape tape;
  tape.freeze_prefix(std::string(kDiscriminatorPrefix));
  LossGraph g = adversarial_vae_loss(tape, *this, batch, noise, s.weights, false);
  nd::adam_step(core_.params(), tape.backward(g.total), s.adam);
  return g.breakdown;
}

std::unique_ptr<Autoencoder> AdversarialVae::clone() const {
  return std::make_unique<AdversarialVae>(*this);
}

// ---------------------------------------------------------------------------

Var lsr_loss(Var z_column, std::span<const double> values, double delta) {
  const Tensor& z = z_column.value();
  if (z.rank() != 2 || z.cols() != 1) {
    throw Error(ErrorCode::ShapeMismatch, "lsr_loss expects an [m, 1] column, got " + z.shape_string());
  }
  const std::size_t m = z.rows();
  if (m < 2) throw Error(ErrorCode::BatchTooSmall, "lsr_loss needs at least two measures");
  if (values.size() != m) {
    throw Error(ErrorCode::ShapeMismatch, std::to_string(values.size()) + " attribute values for " +
                                              std::to_string(m) + " latents");
  }
  Tensor sgn({m, m});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double diff = values[i] - values[j];
      sgn(i, j) = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
    }
  }
  Var spread = nd::tanh(nd::affine(nd::pairwise_diff(z_column), delta));
  return nd::mean(nd::abs(nd::sub(spread, z_column.tape->constant(std::move(sgn)))));
}

LossGraph measurevae_loss(Tape& tape, const MeasureVae& model, const Batch& batch,
                          const Tensor& noise, const LossWeights& w) {
  check_batch(batch);
  const SequenceVae& core = model.core();
  const Posterior p = core.encode(tape, batch.tokens);
  Var z = nd::reparameterize(p.mean, p.logvar, noise);
  Var rec = nd::softmax_cross_entropy(core.decode_logits(tape, z, batch.tokens),
                                      time_major_targets(batch));
  Var kld = nd::kld_standard_normal(p.mean, p.logvar);
  Var total = nd::add(rec, nd::affine(kld, w.beta));
  LossGraph g;
  std::vector<double> values(batch.size());
  for (const LatentBinding& b : model.latent().regularised) {
    for (std::size_t i = 0; i < batch.size(); ++i) values[i] = batch.attributes[i].get(b.attribute);
    const auto r = as_size(b.dimension);
    Var term = lsr_loss(nd::slice_cols(z, r, r + 1), values, model.latent().delta);
    total = nd::add(total, nd::affine(term, w.gamma));
    g.breakdown.lsr_per_attribute[b.attribute] = term.value().item();
  }
  g.breakdown.reconstruction = rec.value().item();
  g.breakdown.kld = kld.value().item();
  g.breakdown.total = total.value().item();
  g.total = total;
  return g;
}

LossGraph adversarial_vae_loss(Tape& tape, const AdversarialVae& model, const Batch& batch,
                               const Tensor& noise, const LossWeights& w, bool adversarial) {
  check_batch(batch);
  const SequenceVae& core = model.core();
  const Tensor targets = model.targets_for(batch.attributes);
  const Posterior p = core.encode(tape, batch.tokens);
  Var z = nd::reparameterize(p.mean, p.logvar, noise);
  Var cond = nd::concat_cols({z, tape.constant(targets)});
  Var rec = nd::softmax_cross_entropy(core.decode_logits(tape, cond, batch.tokens),
                                      time_major_targets(batch));
  Var kld = nd::kld_standard_normal(p.mean, p.logvar);
  Var total = nd::add(rec, nd::affine(kld, w.beta));
  LossGraph g;
  if (adversarial) {
    Var adv = encoder_adversarial_loss(tape, model.discriminator(), z, targets);
    total = nd::add(total, nd::affine(adv, w.alpha));
    g.breakdown.adversarial_enc = adv.value().item();
  }
  g.breakdown.reconstruction = rec.value().item();
  g.breakdown.kld = kld.value().item();
  g.breakdown.total = total.value().item();
  g.total = total;
  return g;
}

Var discriminator_loss(Tape&, const Discriminator& disc, Var z, const Tensor& b) {
  return nd::binary_cross_entropy(disc.forward(*z.tape, z), b, kProbabilityFloor);
}

Var encoder_adversarial_loss(Tape&, const Discriminator& disc, Var z, const Tensor& b) {
  Tensor flipped = b;
  for (double& x : flipped.data) x = 1.0 - x;
  return nd::binary_cross_entropy(disc.forward(*z.tape, z), flipped, kProbabilityFloor);
}

LossBreakdown train_step_measurevae(MeasureVae& model, const Batch& batch, const Tensor& noise,
                                    const TrainSettings& s) {
  Tape tape;
  LossGraph g = measurevae_loss(tape, model, batch, noise, s.weights);
  nd::adam_step(model.core().params(), tape.backward(g.total), s.adam);
  return g.breakdown;
}

LossBreakdown train_step_adversarial(AdversarialVae& model, const Batch& batch,
                                     const Tensor& noise, const TrainSettings& s) {
  check_batch(batch);
  Tensor z;
  {
    Tape tape;
    tape.freeze_prefix("");
    const Posterior p = model.core().encode(tape, batch.tokens);
    z = nd::reparameterize(p.mean, p.logvar, noise).value();
  }
  const double d_loss =
      model.discriminator().train_step(z, model.targets_for(batch.attributes), s.disc_adam);
  Tape tape;
  tape.freeze_prefix(std::string(kDiscriminatorPrefix));
  LossGraph g = adversarial_vae_loss(tape, model, batch, noise, s.weights, true);
  nd::adam_step(model.core().params(), tape.backward(g.total), s.adam);
  g.breakdown.adversarial_d = d_loss;
  return g.breakdown;
}

Tensor step_noise(std::uint64_t seed, std::uint64_t step, std::size_t m, std::size_t d) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(step >> 32),
                    0x6e6f6973u};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor t({m, d});
  for (double& x : t.data) x = normal(rng);
  return t;
}

Tensor flat_targets(std::span<const AttributeVector> attrs, std::span<const BinSpec> bins) {
  const std::size_t n = bins.size();
  const std::size_t k = n ? as_size(bins.front().k) : 0;
  Tensor out({attrs.size(), n * k});
  if (n == 0) return out;
  for (std::size_t i = 0; i < attrs.size(); ++i) {
    const TargetMatrix tm = one_hot_targets(attrs[i], bins);
    std::copy(tm.b.begin(), tm.b.end(), &out.data[i * n * k]);
  }
  return out;
}

std::vector<BinSpec> fit_attribute_bins(std::span<const AttributeVector> attrs, int k, double mu) {
  std::vector<BinSpec> out;
  std::vector<double> values(attrs.size());
  for (AttributeId a : kAllAttributes) {
    for (std::size_t i = 0; i < attrs.size(); ++i) values[i] = attrs[i].get(a);
    out.push_back(fit_mu_law_bins(values, k, mu, a));
  }
  return out;
}

}  // namespace lsrlab
