#include "lsrlab/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "lsrlab/error.hpp"

namespace lsrlab {

using nlohmann::json;

void TrainConfig::validate() const {
  if (epochs < 1) throw Error(ErrorCode::ConfigInvalid, "epochs must be >= 1");
  if (batch_size < 2) throw Error(ErrorCode::ConfigInvalid, "batch_size must be >= 2");
  for (const AdamConfig* a : {&settings.adam, &settings.disc_adam}) {
    if (!(a->lr > 0.0) || !(a->beta1 >= 0.0 && a->beta1 < 1.0) || !(a->beta2 >= 0.0 && a->beta2 < 1.0) ||
        !(a->eps > 0.0)) {
      throw Error(ErrorCode::ConfigInvalid, "invalid optimizer settings");
    }
  }
  const LossWeights& w = settings.weights;
  for (double x : {w.alpha, w.beta, w.gamma}) {
    if (!(x >= 0.0) || !std::isfinite(x)) {
      throw Error(ErrorCode::ConfigInvalid, "loss weights must be finite and non-negative");
    }
  }
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size,
                                                    std::uint64_t seed, std::uint64_t epoch) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(epoch >> 32),
                    0x73687566u};
  std::mt19937_64 rng(seq);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t begin = 0; begin < n; begin += batch_size) {
    const std::size_t end = std::min(n, begin + batch_size);
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(begin),
                     order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  if (out.size() > 1 && out.back().size() == 1) {
    out[out.size() - 2].push_back(out.back().front());
    out.pop_back();
  }
  return out;
}

Trainer::Trainer(Autoencoder& model, TrainConfig cfg, std::span<const Measure> train,
                 TrainPosition start)
    : model_(model), cfg_(std::move(cfg)), data_(make_batch(train, model.vocabulary())), pos_(start) {
  cfg_.validate();
  if (train.size() < 2) throw Error(ErrorCode::TooSmall, "training needs at least two measures");
}

bool Trainer::done() const { return pos_.epoch >= static_cast<std::uint64_t>(cfg_.epochs); }

void Trainer::load_epoch() {
  if (batches_epoch_ == pos_.epoch) return;
  batches_ = epoch_batches(data_.size(), static_cast<std::size_t>(cfg_.batch_size), cfg_.seed, pos_.epoch);
  batches_epoch_ = pos_.epoch;
}

LossBreakdown Trainer::step() {
  if (done()) throw Error(ErrorCode::ConfigInvalid, "training already complete");
  load_epoch();
  const auto& idx = batches_.at(pos_.batch);
  Batch b;
  b.tokens.reserve(idx.size());
  b.attributes.reserve(idx.size());
  for (std::size_t i : idx) {
    b.tokens.push_back(data_.tokens[i]);
    b.attributes.push_back(data_.attributes[i]);
  }
  const Tensor noise = step_noise(cfg_.seed, pos_.step, b.size(), static_cast<std::size_t>(model_.latent_dim()));
  try {
    last_ = model_.train_step(b, noise, cfg_.settings);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NonFinite) throw;
    throw Error(ErrorCode::TrainingDiverged,
                "training diverged at step " + std::to_string(pos_.step) + ": " + e.what(),
                static_cast<long>(pos_.step));
  }
  if (!std::isfinite(last_.total)) {
    throw Error(ErrorCode::TrainingDiverged, "non-finite loss at step " + std::to_string(pos_.step),
                static_cast<long>(pos_.step));
  }
  ++pos_.step;
  if (++pos_.batch >= batches_.size()) {
    pos_.batch = 0;
    ++pos_.epoch;
  }
  return last_;
}

void Trainer::run(std::uint64_t max_steps) {
  for (std::uint64_t k = 0; k < max_steps && !done(); ++k) step();
}

// ---------------------------------------------------------------------------

namespace {

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << v;
  return os.str();
}

json bins_json(const std::vector<BinSpec>& bins) {
  json out = json::array();
  for (const auto& b : bins) {
    out.push_back({{"attribute", attribute_name(b.attribute)},
                   {"k", b.k},
                   {"mu", b.mu},
                   {"lo", b.lo},
                   {"hi", b.hi},
                   {"edges", b.edges}});
  }
  return out;
}

AttributeId attribute_from(const json& j) {
  const auto a = parse_attribute(j.get<std::string>());
  if (!a) throw Error(ErrorCode::BadCheckpoint, "unknown attribute " + j.dump());
  return *a;
}

}  // namespace

std::string manifest_to_json(const ModelManifest& m) {
  json reg = json::array();
  for (const auto& b : m.latent.regularised) {
    reg.push_back({{"attribute", attribute_name(b.attribute)}, {"dimension", b.dimension}});
  }
  const json j = {
      {"format", "lsrlab-model"},
      {"version", kManifestVersion},
      {"kind", model_kind_name(m.kind)},
      {"latent", {{"d", m.latent.d}, {"delta", m.latent.delta}, {"regularised", reg}}},
      {"arch",
       {{"embedding", m.arch.embedding},
        {"hidden", m.arch.hidden},
        {"disc_hidden", m.arch.disc_hidden},
        {"disc_layers", m.arch.disc_layers}}},
      {"vocabulary", {{"pitches", m.vocabulary.pitches()}, {"hash", hex64(m.vocabulary.hash())}}},
      {"bins", bins_json(m.bins)},
      {"position", {{"epoch", m.position.epoch}, {"batch", m.position.batch}, {"step", m.position.step}}},
      {"config_digest", m.config_digest},
  };
  return j.dump(2);
}

ModelManifest manifest_from_json(const std::string& text) {
  ModelManifest m;
  try {
    const json j = json::parse(text);
    if (j.at("format") != "lsrlab-model" || j.at("version") != kManifestVersion) {
      throw Error(ErrorCode::BadCheckpoint, "not a version " + std::to_string(kManifestVersion) + " manifest");
    }
    m.kind = parse_model_kind(j.at("kind").get<std::string>());
    const json& lat = j.at("latent");
    m.latent.d = lat.at("d");
    m.latent.delta = lat.at("delta");
    for (const json& b : lat.at("regularised")) {
      m.latent.regularised.push_back({attribute_from(b.at("attribute")), b.at("dimension").get<int>()});
    }
    const json& arch = j.at("arch");
    m.arch.embedding = arch.at("embedding");
    m.arch.hidden = arch.at("hidden");
    m.arch.disc_hidden = arch.at("disc_hidden");
    m.arch.disc_layers = arch.at("disc_layers");
    const auto pitches = j.at("vocabulary").at("pitches").get<std::vector<int>>();
    m.vocabulary = Vocabulary(pitches);
    if (hex64(m.vocabulary.hash()) != j.at("vocabulary").at("hash").get<std::string>()) {
      throw Error(ErrorCode::BadCheckpoint, "vocabulary hash mismatch");
    }
    for (const json& b : j.at("bins")) {
      BinSpec s;
      s.attribute = attribute_from(b.at("attribute"));
      s.k = b.at("k");
      s.mu = b.at("mu");
      s.lo = b.at("lo");
      s.hi = b.at("hi");
      s.edges = b.at("edges").get<std::vector<double>>();
      m.bins.push_back(std::move(s));
    }
    const json& pos = j.at("position");
    m.position = {pos.at("epoch"), pos.at("batch"), pos.at("step")};
    m.config_digest = j.at("config_digest");
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BadCheckpoint, std::string("malformed manifest: ") + e.what());
  }
  return m;
}

ModelManifest manifest_of(const Autoencoder& model) {
  ModelManifest m;
  m.kind = model.kind();
  m.latent = model.latent();
  m.arch = model.core().arch();
  m.vocabulary = model.vocabulary();
  if (const auto* adv = dynamic_cast<const AdversarialVae*>(&model)) m.bins = adv->bins();
  return m;
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
}

void replace(const std::filesystem::path& tmp, const std::filesystem::path& final_path) {
  std::error_code ec;
  std::filesystem::rename(tmp, final_path, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot move " + tmp.string() + ": " + ec.message());
}

}  // namespace

void save_model(const std::filesystem::path& dir, const Autoencoder& model,
                const TrainPosition& position, const std::string& config_digest) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create " + dir.string() + ": " + ec.message());
  ModelManifest m = manifest_of(model);
  m.position = position;
  m.config_digest = config_digest;

  // Parameters first, manifest last: a readable manifest implies complete files.
  ndgrad::save_checkpoint(dir / "vae.ckpt.tmp", model.core().params());
  replace(dir / "vae.ckpt.tmp", dir / "vae.ckpt");
  if (const auto* adv = dynamic_cast<const AdversarialVae*>(&model)) {
    ndgrad::save_checkpoint(dir / "disc.ckpt.tmp", adv->discriminator().params());
    replace(dir / "disc.ckpt.tmp", dir / "disc.ckpt");
  }
  write_text(dir / "manifest.json.tmp", manifest_to_json(m));
  replace(dir / "manifest.json.tmp", dir / "manifest.json");
}

LoadedModel load_model(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json", std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "no manifest in " + dir.string());
  std::stringstream ss;
  ss << in.rdbuf();
  LoadedModel out;
  out.manifest = manifest_from_json(ss.str());
  const ModelManifest& m = out.manifest;
  ParamStore vae = ndgrad::load_checkpoint(dir / "vae.ckpt");
  if (vae.step_count != m.position.step) {
    throw Error(ErrorCode::BadCheckpoint, "checkpoint step " + std::to_string(vae.step_count) +
                                              " does not match manifest step " +
                                              std::to_string(m.position.step));
  }
  if (m.kind == ModelKind::MeasureVae) {
    out.model = std::make_unique<MeasureVae>(m.vocabulary, m.latent, m.arch, std::move(vae));
  } else {
    ParamStore disc = ndgrad::load_checkpoint(dir / "disc.ckpt");
    out.model = std::make_unique<AdversarialVae>(m.vocabulary, m.latent, m.bins, m.arch,
                                                 std::move(vae), std::move(disc));
  }
  return out;
}

}  // namespace lsrlab
