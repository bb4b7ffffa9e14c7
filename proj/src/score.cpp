#include "lsrlab/score.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <set>
#include <sstream>

#include "lsrlab/error.hpp"

namespace lsrlab {

namespace {

constexpr std::array<const char*, 12> kSharpNames = {"C",  "C#", "D",  "D#", "E",  "F",
                                                     "F#", "G",  "G#", "A",  "A#", "B"};

int natural_pitch_class(char letter) {
  switch (letter) {
    case 'C': return 0;
    case 'D': return 2;
    case 'E': return 4;
    case 'F': return 5;
    case 'G': return 7;
    case 'A': return 9;
    case 'B': return 11;
    default: return -1;
  }
}

}  // namespace

Token Token::note(int midi_pitch) {
  if (midi_pitch < 0 || midi_pitch > 127) {
    throw Error(ErrorCode::BadSymbol, "pitch out of MIDI range: " + std::to_string(midi_pitch));
  }
  return {TokenKind::NoteOn, static_cast<std::uint8_t>(midi_pitch)};
}

bool operator<(const Token& a, const Token& b) {
  if (a.kind != b.kind) return a.kind < b.kind;
  return a.kind == TokenKind::NoteOn && a.pitch < b.pitch;
}

Measure::Measure() { slots_.fill(Token::rest()); }

Measure::Measure(const Slots& slots) : slots_(slots) { validate(slots_); }

Measure::Measure(std::span<const Token> slots) {
  if (slots.size() != kSlotsPerMeasure) {
    throw Error(ErrorCode::WrongSlotCount,
                "expected 24 slots, got " + std::to_string(slots.size()));
  }
  std::copy(slots.begin(), slots.end(), slots_.begin());
  validate(slots_);
}

void Measure::validate(const Slots& slots) {
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i].kind != TokenKind::Continuation) continue;
    if (i == 0) {
      throw Error(ErrorCode::DanglingContinuation, "continuation at slot 0", 0);
    }
    if (slots[i - 1].kind == TokenKind::Rest) {
      throw Error(ErrorCode::DanglingContinuation,
                  "continuation after rest at slot " + std::to_string(i), static_cast<long>(i));
    }
  }
}

std::string pitch_name(int midi_pitch) {
  if (midi_pitch < 0 || midi_pitch > 127) {
    throw Error(ErrorCode::BadSymbol, "pitch out of MIDI range: " + std::to_string(midi_pitch));
  }
  return std::string(kSharpNames[midi_pitch % 12]) + std::to_string(midi_pitch / 12 - 1);
}

int parse_pitch_name(std::string_view name) {
  auto bad = [&] { return Error(ErrorCode::BadSymbol, "bad note name '" + std::string(name) + "'"); };
  if (name.size() < 2) throw bad();
  int pc = natural_pitch_class(name[0]);
  if (pc < 0) throw bad();
  std::size_t pos = 1;
  if (name[pos] == '#') {
    ++pc;
    ++pos;
  } else if (name[pos] == 'b') {
    --pc;
    ++pos;
  }
  if (pos >= name.size()) throw bad();
  int octave = 0;
  const char* first = name.data() + pos;
  const char* last = name.data() + name.size();
  auto [ptr, ec] = std::from_chars(first, last, octave);
  if (ec != std::errc{} || ptr != last) throw bad();
  const int midi = (octave + 1) * 12 + pc;
  if (midi < 0 || midi > 127) throw bad();
  return midi;
}

Measure parse_measure(std::string_view line) {
  std::vector<std::string> symbols;
  {
    std::istringstream in{std::string(line)};
    std::string s;
    while (in >> s) symbols.push_back(s);
  }
  if (symbols.size() != kSlotsPerMeasure) {
    throw Error(ErrorCode::WrongSlotCount,
                "expected 24 symbols, got " + std::to_string(symbols.size()));
  }
  Measure::Slots slots;
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    const std::string& s = symbols[i];
    const long slot = static_cast<long>(i);
    if (s == "r") {
      slots[i] = Token::rest();
    } else if (s == "_") {
      if (i == 0 || slots[i - 1].kind == TokenKind::Rest) {
        throw Error(ErrorCode::DanglingContinuation,
                    "continuation with nothing to continue at slot " + std::to_string(i), slot);
      }
      slots[i] = Token::hold();
    } else {
      try {
        slots[i] = Token::note(parse_pitch_name(s));
      } catch (const Error& e) {
        throw Error(ErrorCode::BadSymbol, "slot " + std::to_string(i) + ": '" + s + "'", slot);
      }
    }
  }
  return Measure(slots);
}

std::string serialize_measure(const Measure& m) {
  std::string out;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (i) out += ' ';
    switch (m[i].kind) {
      case TokenKind::Rest: out += 'r'; break;
      case TokenKind::Continuation: out += '_'; break;
      case TokenKind::NoteOn: out += pitch_name(m[i].pitch); break;
    }
  }
  return out;
}

Vocabulary::Vocabulary() : tokens_{Token::rest(), Token::hold()} {}

Vocabulary::Vocabulary(std::span<const int> pitches) : Vocabulary() {
  std::set<int> unique(pitches.begin(), pitches.end());
  for (int p : unique) {
    pitch_index_[p] = static_cast<int>(tokens_.size());
    tokens_.push_back(Token::note(p));
  }
}

Vocabulary Vocabulary::from_measures(std::span<const Measure> measures) {
  std::vector<int> pitches;
  for (const auto& m : measures) {
    for (const auto& t : m.slots()) {
      if (t.is_note()) pitches.push_back(t.pitch);
    }
  }
  return Vocabulary(pitches);
}

bool Vocabulary::contains(const Token& t) const {
  return !t.is_note() || pitch_index_.count(t.pitch) > 0;
}

int Vocabulary::index_of(const Token& t) const {
  switch (t.kind) {
    case TokenKind::Rest: return kRestIndex;
    case TokenKind::Continuation: return kContinuationIndex;
    case TokenKind::NoteOn: break;
  }
  auto it = pitch_index_.find(t.pitch);
  if (it == pitch_index_.end()) {
    throw Error(ErrorCode::UnknownToken, "pitch " + pitch_name(t.pitch) + " not in vocabulary");
  }
  return it->second;
}

const Token& Vocabulary::token_at(int index) const {
  if (index < 0 || index >= size()) {
    throw Error(ErrorCode::UnknownToken, "index " + std::to_string(index) + " out of vocabulary");
  }
  return tokens_[static_cast<std::size_t>(index)];
}

std::vector<int> Vocabulary::pitches() const {
  std::vector<int> out;
  for (const auto& [p, _] : pitch_index_) out.push_back(p);
  return out;
}

std::uint64_t Vocabulary::hash() const {
  std::uint64_t h = 14695981039346656037ull;
  auto mix = [&](std::uint8_t byte) {
    h ^= byte;
    h *= 1099511628211ull;
  };
  for (const auto& t : tokens_) {
    mix(static_cast<std::uint8_t>(t.kind));
    mix(t.pitch);
  }
  return h;
}

IndexSequence encode_indices(const Measure& m, const Vocabulary& v) {
  IndexSequence out{};
  for (std::size_t i = 0; i < m.size(); ++i) out[i] = v.index_of(m[i]);
  return out;
}

Measure decode_indices(const IndexSequence& indices, const Vocabulary& v) {
  Measure::Slots slots;
  for (std::size_t i = 0; i < indices.size(); ++i) slots[i] = v.token_at(indices[i]);
  return Measure(slots);
}

int reduce_chord(std::span<const int> pitches) {
  if (pitches.empty()) throw Error(ErrorCode::EmptyChord, "chord has no pitches");
  return *std::max_element(pitches.begin(), pitches.end());
}

int reduce_chord(std::initializer_list<int> pitches) {
  return reduce_chord(std::span<const int>(pitches.begin(), pitches.size()));
}

}  // namespace lsrlab
