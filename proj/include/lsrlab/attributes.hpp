#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lsrlab/score.hpp"

namespace lsrlab {

enum class AttributeId { ND = 0, NR = 1, RC = 2, AIJ = 3 };

inline constexpr std::array<AttributeId, 4> kAllAttributes = {AttributeId::ND, AttributeId::NR,
                                                              AttributeId::RC, AttributeId::AIJ};

std::string_view attribute_name(AttributeId id);  // "nd", "nr", "rc", "aij"
std::optional<AttributeId> parse_attribute(std::string_view name);  // case-insensitive

struct AttributeVector {
  double nd = 0.0;
  double nr = 0.0;
  double rc = 0.0;
  double aij = 0.0;

  double get(AttributeId id) const;
  double& get(AttributeId id);

  friend bool operator==(const AttributeVector&, const AttributeVector&) = default;
};

/// Metrical weight of each of the 24 slots: 5 for the downbeat, 4 for the
/// half-measure, 3 for quarters, 2 for eighth-triplet positions, 1 for the
/// remaining even slots, 0 for odd slots.
const std::array<int, kSlotsPerMeasure>& metrical_weights();
inline constexpr int kMaxMetricalWeight = 5;

double note_density(const Measure& m);
double note_range(const Measure& m);
double rhythmic_complexity(const Measure& m);
double avg_interval_jump(const Measure& m);
AttributeVector compute_attributes(const Measure& m);

/// D(i,j) = values[i] - values[j], row-major m*m.
std::vector<double> attribute_distance_matrix(std::span<const double> values);

inline constexpr double kDefaultMu = 255.0;
inline constexpr int kDefaultBins = 8;

/// Quantile bins in mu-law companded space. Values are min-max normalized
/// with the fitted range before companding, so out-of-range values still
/// land in the end bins.
struct BinSpec {
  AttributeId attribute = AttributeId::ND;
  int k = kDefaultBins;
  std::vector<double> edges;  // k-1 strictly ascending interior boundaries (companded)
  double mu = kDefaultMu;
  double lo = 0.0;
  double hi = 1.0;

  double compand(double v) const;
  int bin_of(double v) const;
};

/// Fits k equal-occupancy bins. With distinct values every bin holds
/// floor(n/k) or ceil(n/k) samples; ties are never split across bins.
/// Throws DegenerateValues when fewer than k distinct values are given.
BinSpec fit_mu_law_bins(std::span<const double> values, int k = kDefaultBins,
                        double mu = kDefaultMu, AttributeId attribute = AttributeId::ND);

/// N x K one-hot matrix, row-major, one row per spec in `specs` order.
struct TargetMatrix {
  int n = 0;
  int k = 0;
  std::vector<double> b;

  double at(int row, int col) const { return b[static_cast<std::size_t>(row * k + col)]; }
  /// 1 - B, the targets seen by the encoder's adversarial objective.
  TargetMatrix complement() const;
  int hot_index(int row) const;
};

TargetMatrix one_hot_targets(const AttributeVector& av, std::span<const BinSpec> specs);

}  // namespace lsrlab
