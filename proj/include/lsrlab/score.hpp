#pragma once

// Monophonic 24-slot measure representation, its text format and the
// token vocabulary used by the models.

#include <array>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lsrlab {

inline constexpr std::size_t kSlotsPerMeasure = 24;

enum class TokenKind : std::uint8_t { NoteOn, Continuation, Rest };

struct Token {
  TokenKind kind = TokenKind::Rest;
  std::uint8_t pitch = 0;  // meaningful only for NoteOn

  static Token note(int midi_pitch);
  static constexpr Token rest() { return {TokenKind::Rest, 0}; }
  static constexpr Token hold() { return {TokenKind::Continuation, 0}; }

  bool is_note() const { return kind == TokenKind::NoteOn; }

  friend bool operator==(const Token& a, const Token& b) {
    return a.kind == b.kind && (a.kind != TokenKind::NoteOn || a.pitch == b.pitch);
  }
  friend bool operator<(const Token& a, const Token& b);
};

/// Exactly 24 tokens. A Continuation may only follow a NoteOn or another
/// Continuation; construction enforces this.
class Measure {
 public:
  using Slots = std::array<Token, kSlotsPerMeasure>;

  Measure();  // all rests
  explicit Measure(const Slots& slots);
  explicit Measure(std::span<const Token> slots);

  const Slots& slots() const { return slots_; }
  const Token& operator[](std::size_t i) const { return slots_[i]; }
  std::size_t size() const { return slots_.size(); }

  friend bool operator==(const Measure& a, const Measure& b) { return a.slots_ == b.slots_; }

 private:
  static void validate(const Slots& slots);
  Slots slots_;
};

struct Corpus {
  std::vector<Measure> measures;
  std::string name;
  std::string provenance;
};

/// Scientific pitch name, C4 = 60, sharps only ("C#4", "A3", "C-1").
std::string pitch_name(int midi_pitch);
/// Accepts sharps and flats ("Bb3" normalizes to A#3). Throws BadSymbol.
int parse_pitch_name(std::string_view name);

/// Whitespace-separated line of 24 symbols: note names, `_` (continuation), `r` (rest).
Measure parse_measure(std::string_view line);
std::string serialize_measure(const Measure& m);

using IndexSequence = std::array<int, kSlotsPerMeasure>;

/// Bijective token <-> index map. Rest is always 0 and Continuation 1;
/// pitches follow in ascending order.
class Vocabulary {
 public:
  static constexpr int kRestIndex = 0;
  static constexpr int kContinuationIndex = 1;

  Vocabulary();  // Rest and Continuation only
  explicit Vocabulary(std::span<const int> pitches);
  Vocabulary(std::initializer_list<int> pitches)
      : Vocabulary(std::span<const int>(pitches.begin(), pitches.size())) {}

  static Vocabulary from_measures(std::span<const Measure> measures);

  int size() const { return static_cast<int>(tokens_.size()); }
  int index_of(const Token& t) const;  // throws UnknownToken
  bool contains(const Token& t) const;
  const Token& token_at(int index) const;  // throws UnknownToken
  const std::vector<Token>& tokens() const { return tokens_; }
  std::vector<int> pitches() const;

  /// FNV-1a digest of the token list; identifies a vocabulary in manifests.
  std::uint64_t hash() const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_;
  }

 private:
  std::vector<Token> tokens_;
  std::map<int, int> pitch_index_;
};

IndexSequence encode_indices(const Measure& m, const Vocabulary& v);
Measure decode_indices(const IndexSequence& indices, const Vocabulary& v);

/// Highest pitch of a chord; throws EmptyChord.
int reduce_chord(std::span<const int> pitches);
int reduce_chord(std::initializer_list<int> pitches);

}  // namespace lsrlab
