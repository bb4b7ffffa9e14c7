#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include "lsrlab/attributes.hpp"
#include "lsrlab/score.hpp"

namespace lsrlab {

/// Reads one measure per line; `#` comments and blank lines are skipped.
/// Throws Io, ParseError (location = 1-based line) or EmptyCorpus.
Corpus load_corpus(const std::filesystem::path& path);
Corpus read_corpus(std::istream& in, std::string name = "corpus");
void save_corpus(const std::filesystem::path& path, const Corpus& corpus);
void write_corpus(std::ostream& out, const Corpus& corpus);

struct SplitSpec {
  double train_fraction = 0.70;
  double test_fraction = 0.15;
  double validation_fraction = 0.15;
  std::uint64_t seed = 0;

  void validate() const;  // ConfigInvalid
};

struct CorpusSplit {
  Corpus train;
  Corpus test;
  Corpus validation;
};

/// Seeded shuffle, then test and validation take floor(n*f) measures (at
/// least one each) and train takes the rest. Throws TooSmall when n < 3.
CorpusSplit split_corpus(const Corpus& corpus, const SplitSpec& spec);

struct Moments {
  double mean = 0.0;
  double sd = 0.0;  // population
};

struct DatasetStats {
  std::map<AttributeId, Moments> attributes;
  long note_count = 0;
  long measure_count = 0;
};

/// Per-measure attribute means and population SDs. Throws EmptyCorpus.
DatasetStats dataset_statistics(const Corpus& corpus);

/// Controls for the synthetic generator. Onsets per measure follow a rounded
/// normal(nd_mean, nd_sd) clipped to [1, 24]; pitches walk a major scale
/// within pitch_center +- pitch_spread in steps of at most max_step degrees;
/// syncopation in [0, 1] moves onsets from strong to weak slots; a sounding
/// note is cut short by a rest with probability rest_probability.
struct SyntheticProfile {
  double nd_mean = 8.0;
  double nd_sd = 3.0;
  int pitch_center = 67;
  int pitch_spread = 12;
  int max_step = 3;
  double syncopation = 0.2;
  double rest_probability = 0.15;

  void validate() const;  // InfeasibleProfile
};

Corpus synthetic_corpus(std::uint64_t seed, std::size_t n, const SyntheticProfile& profile = {});

}  // namespace lsrlab
