// lsrlab command line: train, eval, grid, stats, generate, interpolate, validate-corpus.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 data error,
// 3 training divergence.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "lsrlab/error.hpp"
#include "lsrlab/harness.hpp"

using namespace lsrlab;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitDiverged = 3;

struct ConfigFlags {
  std::string config;
  std::string preset = "desk";
  std::optional<std::uint64_t> seed;
  std::string out;
  bool resume = false;

  void add_to(CLI::App& cmd) {
    cmd.add_option("--config", config, "INI file layered over the preset")->check(CLI::ExistingFile);
    cmd.add_option("--preset", preset, "paper-sec5, paper-sec6 or desk")->capture_default_str();
    cmd.add_option("--seed", seed, "Seed for split, initialisation and batching");
    cmd.add_option("--out", out, "Output directory");
    cmd.add_flag("--resume", resume, "Continue from the checkpoint in the output directory");
  }

  GridConfig resolve(bool grid) const {
    const Preset p = parse_preset(preset);
    GridConfig g;
    if (grid && p == Preset::PaperSec6) {
      g = paper_grid();
    } else {
      g.base = preset_config(p);
    }
    g = config.empty() ? parse_config_text("", g) : load_config(config, g);
    if (seed) g.base.set_seed(*seed);
    if (!out.empty()) g.base.out = out;
    return g;
  }

  static GridConfig parse_config_text(const std::string& text, const GridConfig& base) {
    std::istringstream in(text);
    return parse_config(in, base);
  }
};

std::ostream& output(const std::string& path, std::ofstream& file) {
  if (path.empty() || path == "-") return std::cout;
  file.open(path);
  if (!file) throw Error(ErrorCode::Io, "cannot write " + path);
  return file;
}

void print_summary(const RunReport& r) {
  std::cout << r.label << ": " << run_status_name(r.status) << ", " << r.steps << " steps";
  if (r.metrics) {
    const MetricReport& m = *r.metrics;
    std::cout << ", validation loss " << m.loss.total << ", accuracy " << m.reconstruction_accuracy
              << "%, efficiency " << m.reconstruction_efficiency_mean << ", independence "
              << m.independence_mean;
    for (const auto& [a, v] : m.interpretability) {
      if (v) std::cout << ", " << attribute_name(a) << " interpretability " << *v;
    }
  }
  if (!r.error.empty()) std::cout << " (" << r.error << ")";
  std::cout << "\n";
}

Batch corpus_batch(const std::string& path, const Vocabulary& vocab) {
  const Corpus c = load_corpus(path);
  return make_batch(c.measures, vocab);
}

int cmd_train(const ConfigFlags& flags, std::optional<std::uint64_t> stop_at, bool print_config) {
  const GridConfig g = flags.resolve(false);
  if (print_config) {
    std::cout << config_to_ini(g.base);
    return 0;
  }
  RunOptions opts;
  opts.resume = flags.resume;
  opts.stop_at_step = stop_at;
  try {
    const RunReport r = run_single(g.base, opts);
    print_summary(r);
    std::cout << "report: " << (g.base.out / "report.csv").string() << "\n";
  } catch (const Error& e) {
    if (e.code() != ErrorCode::TrainingDiverged) throw;
    RunReport r = failure_report(g.base, e);
    std::ofstream out(g.base.out / "report.csv");
    write_report_header(out);
    write_report_row(out, r);
    throw;
  }
  return 0;
}

int cmd_grid(const ConfigFlags& flags, std::optional<int> threads, bool dry_run) {
  GridConfig g = flags.resolve(true);
  if (threads) g.threads = *threads;
  if (dry_run) {
    std::cout << g.cell_count() << " cells\n";
    for (const auto& c : g.cells()) std::cout << c.label << "\t" << config_digest(c) << "\n";
    return 0;
  }
  GridOptions opts;
  opts.resume = flags.resume;
  opts.on_row = print_summary;
  const auto rows = run_grid(g, opts);
  std::cout << "report: " << (g.base.out / "grid.csv").string() << "\n";
  int code = 0;
  for (const auto& r : rows) {
    if (r.status == RunStatus::Diverged) code = std::max(code, kExitDiverged);
    if (r.status == RunStatus::Failed) code = std::max(code, kExitData);
  }
  return code;
}

int cmd_eval(const std::string& model_dir, const std::string& corpus, const std::string& preset,
             const std::string& out_path) {
  const LoadedModel lm = load_model(model_dir);
  const Batch data = corpus_batch(corpus, lm.model->vocabulary());
  const LossWeights w = preset_config(parse_preset(preset)).train.settings.weights;
  RunReport r;
  r.label = std::filesystem::path(corpus).stem().string();
  r.config_digest = lm.manifest.config_digest;
  r.kind = lm.model->kind();
  r.dataset = r.label;
  r.latent_dim = lm.model->latent_dim();
  for (const auto& b : lm.model->latent().regularised) r.regularised.push_back(b.attribute);
  r.steps = lm.manifest.position.step;
  r.epochs = static_cast<int>(lm.manifest.position.epoch);
  r.version = library_version();
  r.metrics = evaluate(*lm.model, data, validation_loss(*lm.model, data, w));
  std::ofstream file;
  std::ostream& out = output(out_path, file);
  write_report_header(out);
  write_report_row(out, r);
  return 0;
}

int cmd_stats(const std::vector<std::string>& paths, std::optional<std::size_t> synthetic, std::uint64_t seed,
              const std::string& out_path) {
  std::vector<Corpus> corpora;
  for (const auto& p : paths) corpora.push_back(load_corpus(p));
  if (synthetic) {
    Corpus c = synthetic_corpus(seed, *synthetic);
    c.name = "synthetic";
    corpora.push_back(std::move(c));
  }
  if (corpora.empty()) throw CLI::ValidationError("stats", "give corpus files or --synthetic N");
  std::ofstream file;
  write_stats_csv(output(out_path, file), corpora);
  return 0;
}

std::vector<std::vector<double>> read_latents(const std::string& path, int d) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::vector<double> row;
    double v;
    while (ls >> v) row.push_back(v);
    if (!ls.eof() || static_cast<int>(row.size()) != d) {
      throw Error(ErrorCode::ParseError, "expected " + std::to_string(d) + " numbers", lineno);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(ErrorCode::EmptyCorpus, "no latent vectors in " + path);
  return rows;
}

int cmd_generate(const std::string& model_dir, std::size_t count, std::uint64_t seed, const std::string& latents,
                 const std::string& like, const std::string& out_path) {
  const LoadedModel lm = load_model(model_dir);
  const Autoencoder& model = *lm.model;
  const auto d = static_cast<std::size_t>(model.latent_dim());
  Tensor z;
  if (!latents.empty()) {
    const auto rows = read_latents(latents, model.latent_dim());
    z = Tensor({rows.size(), d});
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (std::size_t j = 0; j < d; ++j) z(i, j) = rows[i][j];
    }
  } else {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    z = Tensor({count, d});
    for (double& v : z.data) v = normal(rng);
  }
  Tensor targets;
  if (model.needs_targets()) {
    if (like.empty()) throw CLI::ValidationError("--like", "an adversarial model needs --like CORPUS for attribute targets");
    const Corpus ref = load_corpus(like);
    std::vector<AttributeVector> attrs;
    for (std::size_t i = 0; i < z.rows(); ++i) attrs.push_back(compute_attributes(ref.measures[i % ref.measures.size()]));
    targets = model.targets_for(attrs);
  }
  const Decoded dec = model.decode(z, model.needs_targets() ? &targets : nullptr);
  std::ofstream file;
  std::ostream& out = output(out_path, file);
  out << "# generated by lsrlab " << library_version() << " from " << model_dir << "\n";
  for (const auto& seq : dec.tokens) out << serialize_measure(decode_indices(seq, model.vocabulary())) << "\n";
  return 0;
}

int cmd_interpolate(const std::string& model_dir, const std::string& corpus, const std::string& attribute,
                    std::size_t index, const std::string& out_path) {
  const auto attr = parse_attribute(attribute);
  if (!attr) throw CLI::ValidationError("--attribute", "expected nd, nr, rc or aij");
  const LoadedModel lm = load_model(model_dir);
  const Batch data = corpus_batch(corpus, lm.model->vocabulary());
  if (index >= data.size()) throw CLI::ValidationError("--index", "beyond the corpus");
  const Interpolation r = interpolate(*lm.model, data, data.tokens[index], *attr);
  std::ofstream file;
  std::ostream& out = output(out_path, file);
  out << "mu,nd,nr,rc,aij,measure\n";
  for (std::size_t k = 0; k < r.mu.size(); ++k) {
    const AttributeVector& a = r.attributes[k];
    out << r.mu[k] << "," << a.nd << "," << a.nr << "," << a.rc << "," << a.aij << ","
        << serialize_measure(r.measures[k]) << "\n";
  }
  return 0;
}

int cmd_validate(const std::string& path) {
  const Corpus c = load_corpus(path);
  const DatasetStats s = dataset_statistics(c);
  const Vocabulary v = Vocabulary::from_measures(c.measures);
  std::cout << path << ": ok, " << s.measure_count << " measures, " << s.note_count << " notes, "
            << v.size() << " tokens";
  if (!v.pitches().empty()) {
    std::cout << ", pitches " << pitch_name(v.pitches().front()) << ".." << pitch_name(v.pitches().back());
  }
  std::cout << "\n";
  return 0;
}

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::ConfigInvalid: return kExitUsage;
    case ErrorCode::TrainingDiverged: return kExitDiverged;
    default: return kExitData;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latent-space-regularised music VAEs: training, evaluation and experiment grids"};
  app.require_subcommand(1);
  app.set_version_flag("--version", library_version());

  ConfigFlags train_flags;
  std::optional<std::uint64_t> stop_at;
  bool print_config = false;
  auto* train = app.add_subcommand("train", "Train one model and evaluate it on the validation split");
  train_flags.add_to(*train);
  train->add_option("--stop-at-step", stop_at, "Checkpoint and stop after this many optimizer steps");
  train->add_flag("--print-config", print_config, "Print the resolved configuration and exit");

  ConfigFlags grid_flags;
  grid_flags.preset = "desk";
  std::optional<int> threads;
  bool dry_run = false;
  auto* grid = app.add_subcommand("grid", "Run every cell of a combinatorial grid");
  grid_flags.add_to(*grid);
  grid->add_option("--threads", threads, "Concurrent cells")->check(CLI::PositiveNumber);
  grid->add_flag("--dry-run", dry_run, "List the cells without training");

  std::string model_dir, corpus, preset = "desk", out_path, attribute = "nd", latents, like;
  auto* eval = app.add_subcommand("eval", "Evaluate a trained model on a corpus");
  eval->add_option("--model", model_dir, "Checkpoint directory")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--corpus", corpus, "Corpus file")->required()->check(CLI::ExistingFile);
  eval->add_option("--preset", preset, "Preset whose loss weights are reported")->capture_default_str();
  eval->add_option("--out", out_path, "Report CSV (default stdout)");

  std::vector<std::string> stat_paths;
  std::optional<std::size_t> synthetic_n;
  std::uint64_t seed = 0;
  auto* stats = app.add_subcommand("stats", "Per-attribute mean and SD, note and measure counts, as CSV");
  stats->add_option("corpora", stat_paths, "Corpus files")->check(CLI::ExistingFile);
  stats->add_option("--synthetic", synthetic_n, "Also report a synthetic corpus of this size");
  stats->add_option("--seed", seed, "Synthetic corpus seed");
  stats->add_option("--out", out_path, "CSV file (default stdout)");

  std::size_t count = 8;
  auto* generate = app.add_subcommand("generate", "Decode sampled or supplied latent vectors to measures");
  generate->add_option("--model", model_dir, "Checkpoint directory")->required()->check(CLI::ExistingDirectory);
  generate->add_option("--count", count, "Number of samples from N(0, I)")->check(CLI::PositiveNumber);
  generate->add_option("--seed", seed, "Sampling seed");
  generate->add_option("--latents", latents, "Whitespace-separated latent vectors, one per line")
      ->check(CLI::ExistingFile);
  generate->add_option("--like", like, "Corpus supplying attribute targets (adversarial models)")
      ->check(CLI::ExistingFile);
  generate->add_option("--out", out_path, "Corpus file (default stdout)");

  std::size_t index = 0;
  auto* interp = app.add_subcommand("interpolate", "Sweep one attribute direction over mu in [-0.5, 0.5]");
  interp->add_option("--model", model_dir, "Checkpoint directory")->required()->check(CLI::ExistingDirectory);
  interp->add_option("--corpus", corpus, "Corpus used to estimate the direction")->required()->check(CLI::ExistingFile);
  interp->add_option("--attribute", attribute, "nd, nr, rc or aij")->capture_default_str();
  interp->add_option("--index", index, "Corpus measure to start from")->capture_default_str();
  interp->add_option("--out", out_path, "CSV file (default stdout)");

  std::string validate_path;
  auto* validate = app.add_subcommand("validate-corpus", "Parse a corpus file and summarise it");
  validate->add_option("path", validate_path, "Corpus file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*train) return cmd_train(train_flags, stop_at, print_config);
    if (*grid) return cmd_grid(grid_flags, threads, dry_run);
    if (*eval) return cmd_eval(model_dir, corpus, preset, out_path);
    if (*stats) return cmd_stats(stat_paths, synthetic_n, seed, out_path);
    if (*generate) return cmd_generate(model_dir, count, seed, latents, like, out_path);
    if (*interp) return cmd_interpolate(model_dir, corpus, attribute, index, out_path);
    if (*validate) return cmd_validate(validate_path);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what();
    if (e.location() >= 0 && e.code() == ErrorCode::ParseError) std::cerr << " (line " << e.location() << ")";
    if (e.code() == ErrorCode::TrainingDiverged) std::cerr << " (step " << e.location() << ")";
    std::cerr << "\n";
    return exit_code_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
