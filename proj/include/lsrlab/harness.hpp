#pragma once

// Experiment configuration, single runs, grids and the versioned report CSV.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "lsrlab/datasets.hpp"
#include "lsrlab/eval.hpp"
#include "lsrlab/training.hpp"

namespace lsrlab {

enum class Preset { PaperSec5, PaperSec6, Desk };
std::string_view preset_name(Preset p);  // "paper-sec5", "paper-sec6", "desk"
Preset parse_preset(std::string_view s);  // throws ConfigInvalid

/// A corpus file, or the synthetic generator when `path` is empty.
struct DataSource {
  std::string name = "synthetic";
  std::filesystem::path path;
  std::size_t synthetic_n = 2000;
  std::uint64_t synthetic_seed = 2024;
  SyntheticProfile profile;

  bool synthetic() const { return path.empty(); }
};

Corpus load_source(const DataSource& source);

struct ExperimentConfig {
  std::string label;
  ModelKind kind = ModelKind::MeasureVae;
  DataSource data;
  SplitSpec split;
  LatentConfig latent;
  ArchConfig arch;
  int bins = kDefaultBins;
  double bins_mu = kDefaultMu;
  TrainConfig train;
  std::uint64_t checkpoint_steps = 0;  // 0: checkpoint at epoch ends only
  std::filesystem::path out = "runs/default";

  /// Also requires latent.d to be one of kLatentDims. Throws ConfigInvalid.
  void validate() const;
  /// The seed drives the split, parameter initialisation and training.
  void set_seed(std::uint64_t seed);
};

/// Axes of a combinatorial experiment over a base config.
struct GridConfig {
  ExperimentConfig base;
  std::vector<DataSource> datasets;
  std::vector<int> latent_dims;
  std::vector<std::vector<AttributeId>> regularised_sets;  // bound to dims 0, 1, ...
  int threads = 1;

  std::size_t cell_count() const;
  /// Cartesian product, datasets outermost. Each cell writes under base.out/cells/<label>.
  std::vector<ExperimentConfig> cells() const;
};

ExperimentConfig preset_config(Preset p);
/// The 4 datasets x 7 latent sizes x 3 regularised sets declaration; corpus
/// files are expected under data/.
GridConfig paper_grid();

/// INI text with [experiment], [data], [latent], [model], [train], [loss]
/// and optionally [grid]. Keys absent from the text keep the values of
/// `base`; unknown sections or keys throw ConfigInvalid.
GridConfig parse_config(std::istream& in, const GridConfig& base);
GridConfig load_config(const std::filesystem::path& path, const GridConfig& base);
std::string config_to_ini(const ExperimentConfig& cfg);
std::string grid_to_ini(const GridConfig& grid);

/// Hex digest of every input that affects results (the output directory and
/// checkpoint cadence excluded).
std::string config_digest(const ExperimentConfig& cfg);

enum class RunStatus { Ok, Incomplete, Diverged, Failed };
std::string_view run_status_name(RunStatus s);  // "ok", "incomplete", "diverged", "failed"

struct RunReport {
  std::string label;
  RunStatus status = RunStatus::Ok;
  std::string config_digest;
  ModelKind kind = ModelKind::MeasureVae;
  std::string dataset;
  int latent_dim = 0;
  std::vector<AttributeId> regularised;
  std::uint64_t seed = 0;
  int epochs = 0;
  std::uint64_t steps = 0;
  std::optional<double> train_loss;    // last optimizer step
  std::optional<MetricReport> metrics;  // validation split
  std::optional<long> failed_step;
  double wall_seconds = 0.0;
  std::string version;
  std::string error;

  friend bool operator==(const RunReport&, const RunReport&) = default;
};

/// Loss components averaged over chunks of at most 512 measures, using the
/// latent means (no sampling noise).
LossBreakdown validation_loss(const Autoencoder& model, const Batch& data, const LossWeights& w);

struct RunOptions {
  bool resume = false;
  /// Stop (after checkpointing) once this many optimizer steps have been taken.
  std::optional<std::uint64_t> stop_at_step;
  bool write_report = true;  // <out>/report.csv
};

/// Train (or resume), checkpoint into <out>/checkpoint, evaluate on the
/// validation split. Throws ConfigInvalid, data errors and TrainingDiverged.
RunReport run_single(const ExperimentConfig& cfg, const RunOptions& opts = {});
/// Row for a run that threw: Diverged (with failed_step) or Failed.
RunReport failure_report(const ExperimentConfig& cfg, const std::exception& e);

/// Serialises rows from concurrent writers into one CSV file.
class ReportSink {
 public:
  /// Writes the header unless appending to a non-empty file.
  ReportSink(const std::filesystem::path& path, bool append);
  void write(const RunReport& r);

 private:
  std::mutex mu_;
  std::filesystem::path path_;
};

struct GridOptions {
  bool resume = false;
  std::function<void(const RunReport&)> on_row;
};

/// One report per cell in cell order; failing cells yield Diverged/Failed rows.
/// Rows go to base.out/grid.csv in completion order.
std::vector<RunReport> run_grid(const GridConfig& grid, const GridOptions& opts = {});

inline constexpr int kReportVersion = 1;
const std::vector<std::string>& report_columns();
void write_report_header(std::ostream& out);
void write_report_row(std::ostream& out, const RunReport& r);
/// Throws ParseError (location = line) on malformed rows or a version mismatch.
std::vector<RunReport> read_reports(std::istream& in);

/// One row per corpus: mean and population SD of each attribute, note and measure counts.
void write_stats_csv(std::ostream& out, const std::vector<Corpus>& corpora);

std::string library_version();

}  // namespace lsrlab
