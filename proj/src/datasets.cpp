#include "lsrlab/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "lsrlab/error.hpp"

namespace lsrlab {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

Corpus read_corpus(std::istream& in, std::string name) {
  Corpus c;
  c.name = std::move(name);
  std::string line;
  long number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string_view body = trim(line);
    if (body.empty()) continue;
    if (body.front() == '#') {
      constexpr std::string_view kProv = "# provenance:";
      if (body.substr(0, kProv.size()) == kProv) c.provenance = std::string(trim(body.substr(kProv.size())));
      continue;
    }
    try {
      c.measures.push_back(parse_measure(body));
    } catch (const Error& e) {
      throw Error(ErrorCode::ParseError,
                  c.name + ":" + std::to_string(number) + ": " + e.what(), number);
    }
  }
  if (c.measures.empty()) throw Error(ErrorCode::EmptyCorpus, c.name + " contains no measures");
  return c;
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return read_corpus(in, path.stem().string());
}

void write_corpus(std::ostream& out, const Corpus& corpus) {
  if (!corpus.name.empty()) out << "# corpus: " << corpus.name << '\n';
  if (!corpus.provenance.empty()) out << "# provenance: " << corpus.provenance << '\n';
  for (const Measure& m : corpus.measures) out << serialize_measure(m) << '\n';
}

void save_corpus(const std::filesystem::path& path, const Corpus& corpus) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  write_corpus(out, corpus);
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string());
}

void SplitSpec::validate() const {
  for (double f : {train_fraction, test_fraction, validation_fraction}) {
    if (!(f > 0.0) || !std::isfinite(f)) {
      throw Error(ErrorCode::ConfigInvalid, "split fractions must be positive");
    }
  }
  if (std::abs(train_fraction + test_fraction + validation_fraction - 1.0) > 1e-9) {
    throw Error(ErrorCode::ConfigInvalid, "split fractions must sum to 1");
  }
}

CorpusSplit split_corpus(const Corpus& corpus, const SplitSpec& spec) {
  spec.validate();
  const std::size_t n = corpus.measures.size();
  if (n < 3) throw Error(ErrorCode::TooSmall, "splitting needs at least 3 measures, got " + std::to_string(n));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(spec.seed);
  std::shuffle(order.begin(), order.end(), rng);

  const auto part = [n](double f) {
    const auto k = static_cast<std::size_t>(std::floor(static_cast<double>(n) * f + 1e-9));
    return std::max<std::size_t>(k, 1);
  };
  const std::size_t n_test = part(spec.test_fraction);
  const std::size_t n_val = part(spec.validation_fraction);
  const std::size_t n_train = n - n_test - n_val;

  CorpusSplit s;
  for (Corpus* c : {&s.train, &s.test, &s.validation}) c->provenance = corpus.provenance;
  s.train.name = corpus.name + ".train";
  s.test.name = corpus.name + ".test";
  s.validation.name = corpus.name + ".validation";
  for (std::size_t i = 0; i < n; ++i) {
    Corpus& dst = i < n_train ? s.train : (i < n_train + n_test ? s.test : s.validation);
    dst.measures.push_back(corpus.measures[order[i]]);
  }
  return s;
}

DatasetStats dataset_statistics(const Corpus& corpus) {
  if (corpus.measures.empty()) throw Error(ErrorCode::EmptyCorpus, "statistics of an empty corpus");
  DatasetStats st;
  st.measure_count = static_cast<long>(corpus.measures.size());
  std::vector<AttributeVector> av;
  av.reserve(corpus.measures.size());
  for (const Measure& m : corpus.measures) av.push_back(compute_attributes(m));
  const double n = static_cast<double>(av.size());
  for (AttributeId a : kAllAttributes) {
    double mean = 0.0;
    for (const auto& v : av) mean += v.get(a);
    mean /= n;
    double ss = 0.0;
    for (const auto& v : av) ss += (v.get(a) - mean) * (v.get(a) - mean);
    st.attributes[a] = {mean, std::sqrt(ss / n)};
  }
  for (const auto& v : av) st.note_count += static_cast<long>(v.nd);
  return st;
}

void SyntheticProfile::validate() const {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::InfeasibleProfile, why); };
  if (!std::isfinite(nd_mean) || nd_mean < 1.0 || nd_mean > 24.0) fail("nd_mean must lie in [1, 24]");
  if (!std::isfinite(nd_sd) || nd_sd < 0.0) fail("nd_sd must be non-negative");
  if (pitch_spread < 1) fail("pitch_spread must be at least 1");
  if (pitch_center - pitch_spread < 0 || pitch_center + pitch_spread > 127) {
    fail("pitch window leaves the MIDI range");
  }
  if (max_step < 0) fail("max_step must be non-negative");
  if (!(syncopation >= 0.0 && syncopation <= 1.0)) fail("syncopation must lie in [0, 1]");
  if (!(rest_probability >= 0.0 && rest_probability <= 1.0)) fail("rest_probability must lie in [0, 1]");
}

namespace {

bool in_major_scale(int pitch) {
  static constexpr std::array<bool, 12> kMajor = {true,  false, true,  false, true,  true,
                                                  false, true,  false, true,  false, true};
  return kMajor[static_cast<std::size_t>(pitch % 12)];
}

}  // namespace

Corpus synthetic_corpus(std::uint64_t seed, std::size_t n, const SyntheticProfile& profile) {
  profile.validate();
  if (n < 1) throw Error(ErrorCode::InfeasibleProfile, "synthetic corpus needs n >= 1");

  std::vector<int> scale;
  for (int p = profile.pitch_center - profile.pitch_spread;
       p <= profile.pitch_center + profile.pitch_spread; ++p) {
    if (in_major_scale(p)) scale.push_back(p);
  }
  const int degrees = static_cast<int>(scale.size());
  const int center_degree = static_cast<int>(
      std::lower_bound(scale.begin(), scale.end(), profile.pitch_center) - scale.begin());

  const auto& w = metrical_weights();
  std::array<double, kSlotsPerMeasure> slot_weight{};
  for (std::size_t s = 0; s < slot_weight.size(); ++s) {
    const double strong = static_cast<double>(w[s]) / kMaxMetricalWeight;
    slot_weight[s] = 1e-3 + (1.0 - profile.syncopation) * strong + profile.syncopation * (1.0 - strong);
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd_dist(profile.nd_mean, profile.nd_sd);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> step(-profile.max_step, profile.max_step);
  std::uniform_int_distribution<int> start_jitter(-2, 2);

  Corpus c;
  c.name = "synthetic";
  c.provenance = "synthetic seed=" + std::to_string(seed) + " n=" + std::to_string(n);
  c.measures.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int nd = std::clamp(static_cast<int>(std::lround(nd_dist(rng))), 1,
                              static_cast<int>(kSlotsPerMeasure));
    // Weighted sampling of onset slots without replacement.
    std::array<double, kSlotsPerMeasure> weights = slot_weight;
    std::vector<int> onsets;
    for (int k = 0; k < nd; ++k) {
      const int pick = std::discrete_distribution<int>(weights.begin(), weights.end())(rng);
      weights[static_cast<std::size_t>(pick)] = 0.0;
      onsets.push_back(pick);
    }
    std::sort(onsets.begin(), onsets.end());

    Measure::Slots slots;
    slots.fill(Token::rest());
    int degree = std::clamp(center_degree + start_jitter(rng), 0, degrees - 1);
    for (std::size_t k = 0; k < onsets.size(); ++k) {
      if (k > 0) {
        degree += step(rng);
        if (degree < 0) degree = -degree;
        if (degree >= degrees) degree = 2 * (degrees - 1) - degree;
        degree = std::clamp(degree, 0, degrees - 1);
      }
      const int start = onsets[k];
      const int end = k + 1 < onsets.size() ? onsets[k + 1] : static_cast<int>(kSlotsPerMeasure);
      slots[static_cast<std::size_t>(start)] = Token::note(scale[static_cast<std::size_t>(degree)]);
      int hold_end = end;
      if (end - start > 1 && unit(rng) < profile.rest_probability) {
        hold_end = start + 1 + static_cast<int>(unit(rng) * (end - start - 1));
      }
      for (int s = start + 1; s < hold_end; ++s) slots[static_cast<std::size_t>(s)] = Token::hold();
    }
    c.measures.emplace_back(slots);
  }
  return c;
}

}  // namespace lsrlab
