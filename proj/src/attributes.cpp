#include "lsrlab/attributes.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

#include "lsrlab/error.hpp"

namespace lsrlab {

std::string_view attribute_name(AttributeId id) {
  switch (id) {
    case AttributeId::ND: return "nd";
    case AttributeId::NR: return "nr";
    case AttributeId::RC: return "rc";
    case AttributeId::AIJ: return "aij";
  }
  return "?";
}

std::optional<AttributeId> parse_attribute(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  for (AttributeId id : kAllAttributes) {
    if (attribute_name(id) == lower) return id;
  }
  return std::nullopt;
}

double AttributeVector::get(AttributeId id) const {
  switch (id) {
    case AttributeId::ND: return nd;
    case AttributeId::NR: return nr;
    case AttributeId::RC: return rc;
    case AttributeId::AIJ: return aij;
  }
  return 0.0;
}

double& AttributeVector::get(AttributeId id) {
  switch (id) {
    case AttributeId::NR: return nr;
    case AttributeId::RC: return rc;
    case AttributeId::AIJ: return aij;
    case AttributeId::ND: break;
  }
  return nd;
}

const std::array<int, kSlotsPerMeasure>& metrical_weights() {
  static const std::array<int, kSlotsPerMeasure> table = [] {
    std::array<int, kSlotsPerMeasure> w{};
    for (std::size_t s = 0; s < w.size(); s += 2) w[s] = 1;
    for (std::size_t s : {3u, 9u, 15u, 21u}) w[s] = 2;
    w[6] = w[18] = 3;
    w[12] = 4;
    w[0] = 5;
    return w;
  }();
  return table;
}

namespace {

std::vector<int> onset_pitches(const Measure& m) {
  std::vector<int> out;
  for (const auto& t : m.slots()) {
    if (t.is_note()) out.push_back(t.pitch);
  }
  return out;
}

}  // namespace

double note_density(const Measure& m) {
  return static_cast<double>(std::count_if(m.slots().begin(), m.slots().end(),
                                           [](const Token& t) { return t.is_note(); }));
}

double note_range(const Measure& m) {
  const auto pitches = onset_pitches(m);
  if (pitches.size() < 2) return 0.0;
  const auto [lo, hi] = std::minmax_element(pitches.begin(), pitches.end());
  return static_cast<double>(*hi - *lo);
}

double rhythmic_complexity(const Measure& m) {
  const auto& w = metrical_weights();
  int score = 0;
  for (std::size_t s = 0; s < m.size(); ++s) {
    if (m[s].is_note()) score += kMaxMetricalWeight - w[s];
  }
  return static_cast<double>(score);
}

double avg_interval_jump(const Measure& m) {
  const auto pitches = onset_pitches(m);
  if (pitches.size() < 2) return 0.0;
  long total = 0;
  for (std::size_t i = 1; i < pitches.size(); ++i) total += std::abs(pitches[i] - pitches[i - 1]);
  return static_cast<double>(total) / static_cast<double>(pitches.size() - 1);
}

AttributeVector compute_attributes(const Measure& m) {
  return {note_density(m), note_range(m), rhythmic_complexity(m), avg_interval_jump(m)};
}

std::vector<double> attribute_distance_matrix(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<double> d(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) d[i * n + j] = values[i] - values[j];
  }
  return d;
}

double BinSpec::compand(double v) const {
  const double range = hi - lo;
  const double x = range > 0.0 ? (v - lo) / range : 0.0;
  const double sign = x < 0.0 ? -1.0 : 1.0;
  return sign * std::log1p(mu * std::abs(x)) / std::log1p(mu);
}

int BinSpec::bin_of(double v) const {
  const double c = compand(v);
  return static_cast<int>(std::upper_bound(edges.begin(), edges.end(), c) - edges.begin());
}

BinSpec fit_mu_law_bins(std::span<const double> values, int k, double mu, AttributeId attribute) {
  if (k < 2) throw Error(ErrorCode::DegenerateValues, "need k >= 2 bins");
  for (double v : values) {
    if (!std::isfinite(v)) throw Error(ErrorCode::DegenerateValues, "non-finite attribute value");
  }
  BinSpec spec;
  spec.attribute = attribute;
  spec.k = k;
  spec.mu = mu;
  if (values.empty()) throw Error(ErrorCode::DegenerateValues, "no values");
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  spec.lo = *lo;
  spec.hi = *hi;

  std::vector<double> c(values.size());
  std::transform(values.begin(), values.end(), c.begin(),
                 [&](double v) { return spec.compand(v); });
  std::sort(c.begin(), c.end());

  // Candidate split positions p: bin boundary between c[p-1] and c[p].
  std::vector<std::size_t> splits;
  for (std::size_t p = 1; p < c.size(); ++p) {
    if (c[p - 1] < c[p]) splits.push_back(p);
  }
  const auto needed = static_cast<std::size_t>(k - 1);
  if (splits.size() < needed) {
    throw Error(ErrorCode::DegenerateValues, "fewer than " + std::to_string(k) +
                                                 " distinct values (" +
                                                 std::to_string(splits.size() + 1) + ")");
  }

  // For each interior edge, take the split nearest the ideal quantile
  // position while leaving room for the edges still to place.
  const double n = static_cast<double>(c.size());
  std::size_t next = 0;
  for (std::size_t j = 1; j <= needed; ++j) {
    const double target = static_cast<double>(j) * n / static_cast<double>(k);
    const std::size_t last_allowed = splits.size() - (needed - j) - 1;
    std::size_t best = next;
    double best_gap = std::numeric_limits<double>::infinity();
    for (std::size_t s = next; s <= last_allowed; ++s) {
      const double gap = std::abs(static_cast<double>(splits[s]) - target);
      if (gap < best_gap) {
        best_gap = gap;
        best = s;
      }
    }
    const std::size_t p = splits[best];
    spec.edges.push_back(0.5 * (c[p - 1] + c[p]));
    next = best + 1;
  }
  return spec;
}

TargetMatrix TargetMatrix::complement() const {
  TargetMatrix out = *this;
  for (double& x : out.b) x = 1.0 - x;
  return out;
}

int TargetMatrix::hot_index(int row) const {
  for (int c = 0; c < k; ++c) {
    if (at(row, c) == 1.0) return c;
  }
  return -1;
}

TargetMatrix one_hot_targets(const AttributeVector& av, std::span<const BinSpec> specs) {
  TargetMatrix t;
  t.n = static_cast<int>(specs.size());
  t.k = specs.empty() ? 0 : specs.front().k;
  t.b.assign(static_cast<std::size_t>(t.n * t.k), 0.0);
  for (int row = 0; row < t.n; ++row) {
    const BinSpec& spec = specs[static_cast<std::size_t>(row)];
    if (spec.k != t.k) throw Error(ErrorCode::ShapeMismatch, "bin specs disagree on k");
    const int bin = spec.bin_of(av.get(spec.attribute));
    t.b[static_cast<std::size_t>(row * t.k + bin)] = 1.0;
  }
  return t;
}

}  // namespace lsrlab
