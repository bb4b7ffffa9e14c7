#pragma once

// Test-only generators and oracles. Nothing here calls into the code paths
// it is used to check.

#include <random>
#include <vector>

#include "lsrlab/score.hpp"

namespace lsrlab::testkit {

/// Uniformly random valid measure: each slot is a rest, a continuation
/// (only when allowed) or a note drawn from [lo, hi].
inline Measure random_measure(std::mt19937_64& rng, int lo = 36, int hi = 96) {
  std::uniform_int_distribution<int> kind(0, 2);
  std::uniform_int_distribution<int> pitch(lo, hi);
  Measure::Slots slots;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    int k = kind(rng);
    const bool can_hold = i > 0 && slots[i - 1].kind != TokenKind::Rest;
    if (k == 1 && !can_hold) k = 2;
    if (k == 0) {
      slots[i] = Token::note(pitch(rng));
    } else if (k == 1) {
      slots[i] = Token::hold();
    } else {
      slots[i] = Token::rest();
    }
  }
  return Measure(slots);
}

/// Measure with notes at the given slots (held until the next onset).
inline Measure measure_with_onsets(const std::vector<std::pair<int, int>>& slot_pitch) {
  Measure::Slots slots;
  slots.fill(Token::rest());
  for (std::size_t k = 0; k < slot_pitch.size(); ++k) {
    const auto [slot, pitch] = slot_pitch[k];
    slots[static_cast<std::size_t>(slot)] = Token::note(pitch);
    const int end = k + 1 < slot_pitch.size() ? slot_pitch[k + 1].first : 24;
    for (int s = slot + 1; s < end; ++s) slots[static_cast<std::size_t>(s)] = Token::hold();
  }
  return Measure(slots);
}

}  // namespace lsrlab::testkit
