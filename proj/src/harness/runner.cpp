#include <atomic>
#include <chrono>
#include <fstream>
#include <thread>

#include "lsrlab/error.hpp"
#include "lsrlab/harness.hpp"

namespace lsrlab {

LossBreakdown validation_loss(const Autoencoder& model, const Batch& data, const LossWeights& w) {
  const std::size_t n = data.size();
  if (n < 2) throw Error(ErrorCode::BatchTooSmall, "validation loss needs at least two measures");
  constexpr std::size_t kChunk = 512;
  LossBreakdown sum;
  for (std::size_t begin = 0; begin < n;) {
    std::size_t end = std::min(n, begin + kChunk);
    if (n - end == 1) ++end;  // never leave a single measure for the last chunk
    Batch b;
    b.tokens.assign(data.tokens.begin() + static_cast<std::ptrdiff_t>(begin),
                    data.tokens.begin() + static_cast<std::ptrdiff_t>(end));
    b.attributes.assign(data.attributes.begin() + static_cast<std::ptrdiff_t>(begin),
                        data.attributes.begin() + static_cast<std::ptrdiff_t>(end));
    const Tensor noise({b.size(), static_cast<std::size_t>(model.latent_dim())});
    ndgrad::Tape tape;
    tape.freeze_prefix("");
    LossBreakdown part;
    if (const auto* adv = dynamic_cast<const AdversarialVae*>(&model)) {
      part = adversarial_vae_loss(tape, *adv, b, noise, w).breakdown;
    } else {
      part = measurevae_loss(tape, dynamic_cast<const MeasureVae&>(model), b, noise, w).breakdown;
    }
    const double share = static_cast<double>(b.size()) / static_cast<double>(n);
    sum.reconstruction += share * part.reconstruction;
    sum.kld += share * part.kld;
    for (const auto& [a, v] : part.lsr_per_attribute) sum.lsr_per_attribute[a] += share * v;
    sum.adversarial_d += share * part.adversarial_d;
    sum.adversarial_enc += share * part.adversarial_enc;
    sum.total += share * part.total;
    begin = end;
  }
  return sum;
}

namespace {

RunReport identity_of(const ExperimentConfig& cfg) {
  RunReport r;
  r.label = cfg.label;
  r.kind = cfg.kind;
  r.dataset = cfg.data.name;
  r.latent_dim = cfg.latent.d;
  for (const auto& b : cfg.latent.regularised) r.regularised.push_back(b.attribute);
  r.seed = cfg.train.seed;
  r.epochs = cfg.train.epochs;
  r.version = library_version();
  return r;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void append_report(const std::filesystem::path& path, const RunReport& r) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  write_report_header(out);
  write_report_row(out, r);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
}

}  // namespace

RunReport run_single(const ExperimentConfig& cfg, const RunOptions& opts) {
  const auto t0 = std::chrono::steady_clock::now();
  cfg.validate();
  RunReport r = identity_of(cfg);
  r.config_digest = config_digest(cfg);

  const Corpus corpus = load_source(cfg.data);
  const CorpusSplit split = split_corpus(corpus, cfg.split);
  if (split.validation.measures.size() < 3) {
    throw Error(ErrorCode::TooSmall, "the validation split needs at least three measures");
  }
  // Token inventory only; no statistics leak from the held-out splits.
  const Vocabulary vocab = Vocabulary::from_measures(corpus.measures);
  const std::filesystem::path ckpt = cfg.out / "checkpoint";

  std::unique_ptr<Autoencoder> model;
  TrainPosition start;
  if (opts.resume && std::filesystem::exists(ckpt / "manifest.json")) {
    LoadedModel loaded = load_model(ckpt);
    if (loaded.manifest.config_digest != r.config_digest) {
      throw Error(ErrorCode::ConfigInvalid, "checkpoint in " + ckpt.string() + " belongs to config " +
                                                loaded.manifest.config_digest + ", not " + r.config_digest);
    }
    model = std::move(loaded.model);
    start = loaded.manifest.position;
  } else if (cfg.kind == ModelKind::MeasureVae) {
    model = std::make_unique<MeasureVae>(vocab, cfg.latent, cfg.arch, cfg.train.seed);
  } else {
    const Batch train = make_batch(split.train.measures, vocab);
    model = std::make_unique<AdversarialVae>(vocab, cfg.latent,
                                             fit_attribute_bins(train.attributes, cfg.bins, cfg.bins_mu),
                                             cfg.arch, cfg.train.seed);
  }

  Trainer trainer(*model, cfg.train, split.train.measures, start);
  bool saved = true;
  while (!trainer.done()) {
    if (opts.stop_at_step && trainer.position().step >= *opts.stop_at_step) break;
    r.train_loss = trainer.step().total;
    saved = false;
    const TrainPosition& pos = trainer.position();
    if (pos.batch == 0 || (cfg.checkpoint_steps && pos.step % cfg.checkpoint_steps == 0)) {
      save_model(ckpt, *model, pos, r.config_digest);
      saved = true;
    }
  }
  if (!saved) save_model(ckpt, *model, trainer.position(), r.config_digest);
  r.steps = trainer.position().step;

  if (!trainer.done()) {
    r.status = RunStatus::Incomplete;
  } else {
    const Batch val = make_batch(split.validation.measures, vocab);
    r.metrics = evaluate(*model, val, validation_loss(*model, val, cfg.train.settings.weights));
  }
  r.wall_seconds = seconds_since(t0);
  if (opts.write_report) append_report(cfg.out / "report.csv", r);
  return r;
}

RunReport failure_report(const ExperimentConfig& cfg, const std::exception& e) {
  RunReport r = identity_of(cfg);
  try {
    r.config_digest = config_digest(cfg);
  } catch (const std::exception&) {
  }
  r.status = RunStatus::Failed;
  r.error = e.what();
  if (const auto* le = dynamic_cast<const Error*>(&e); le && le->code() == ErrorCode::TrainingDiverged) {
    r.status = RunStatus::Diverged;
    r.failed_step = le->location();
  }
  return r;
}

ReportSink::ReportSink(const std::filesystem::path& path, bool append) : path_(path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const bool fresh = !append || !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  if (fresh) {
    std::ofstream out(path, std::ios::trunc);
    write_report_header(out);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  }
}

void ReportSink::write(const RunReport& r) {
  std::lock_guard lock(mu_);
  std::ofstream out(path_, std::ios::app);
  write_report_row(out, r);
  out.flush();
  if (!out) throw Error(ErrorCode::Io, "cannot append to " + path_.string());
}

std::vector<RunReport> run_grid(const GridConfig& grid, const GridOptions& opts) {
  const std::vector<ExperimentConfig> cells = grid.cells();
  ReportSink sink(grid.base.out / "grid.csv", opts.resume);
  std::vector<RunReport> rows(cells.size());
  std::atomic<std::size_t> next{0};
  std::mutex callback_mu;

  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      const auto t0 = std::chrono::steady_clock::now();
      RunReport row;
      try {
        RunOptions ro;
        ro.resume = opts.resume;
        row = run_single(cells[i], ro);
      } catch (const std::exception& e) {
        row = failure_report(cells[i], e);
        row.wall_seconds = seconds_since(t0);
      }
      sink.write(row);
      if (opts.on_row) {
        std::lock_guard lock(callback_mu);
        opts.on_row(row);
      }
      rows[i] = std::move(row);
    }
  };
  const int n = std::max(1, std::min<int>(grid.threads, static_cast<int>(cells.size())));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < n; ++t) pool.emplace_back(worker);
  }
  return rows;
}

}  // namespace lsrlab
