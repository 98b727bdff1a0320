#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace racelab {

// The full token alphabet, in the fixed order used by one-hot encoding.
inline constexpr std::array<char, 8> kAlphabet = {'.', ',', '_', 'w',
                                                  'u', 'r', 'c', 'd'};
inline constexpr std::array<char, 3> kNoiseChars = {'.', ',', '_'};

inline constexpr bool is_noise(char c) {
  return c == '.' || c == ',' || c == '_';
}

inline constexpr bool is_meaningful(char c) {
  return c == 'w' || c == 'u' || c == 'r' || c == 'c' || c == 'd';
}

// Index of `c` in kAlphabet, or -1 if it is not a token.
inline constexpr int symbol_index(char c) {
  for (int i = 0; i < static_cast<int>(kAlphabet.size()); ++i) {
    if (kAlphabet[static_cast<std::size_t>(i)] == c) return i;
  }
  return -1;
}

// What Function 2 does to the shared state: nothing, a bare write, a correct
// write-then-up, or the misordered up-then-write.
enum class F2Kind : std::uint8_t { None, W, WU, UW };

// What Function 3 does: nothing, a bare read, a checked read, or a
// down-then-read.
enum class F3Kind : std::uint8_t { None, R, CR, DR };

inline constexpr std::array<F2Kind, 4> kAllF2 = {F2Kind::None, F2Kind::W,
                                                 F2Kind::WU, F2Kind::UW};
inline constexpr std::array<F3Kind, 4> kAllF3 = {F3Kind::None, F3Kind::R,
                                                 F3Kind::CR, F3Kind::DR};

inline constexpr std::string_view tokens_of(F2Kind k) {
  switch (k) {
    case F2Kind::None: return "";
    case F2Kind::W: return "w";
    case F2Kind::WU: return "wu";
    case F2Kind::UW: return "uw";
  }
  return "";
}

inline constexpr std::string_view tokens_of(F3Kind k) {
  switch (k) {
    case F3Kind::None: return "";
    case F3Kind::R: return "r";
    case F3Kind::CR: return "cr";
    case F3Kind::DR: return "dr";
  }
  return "";
}

inline constexpr std::string_view name_of(F2Kind k) {
  switch (k) {
    case F2Kind::None: return "none";
    case F2Kind::W: return "w";
    case F2Kind::WU: return "wu";
    case F2Kind::UW: return "uw";
  }
  return "?";
}

inline constexpr std::string_view name_of(F3Kind k) {
  switch (k) {
    case F3Kind::None: return "none";
    case F3Kind::R: return "r";
    case F3Kind::CR: return "cr";
    case F3Kind::DR: return "dr";
  }
  return "?";
}

inline F2Kind f2_kind_from_name(std::string_view name) {
  for (F2Kind k : kAllF2) {
    if (name_of(k) == name) return k;
  }
  throw std::invalid_argument("unknown f2 kind: " + std::string(name));
}

inline F3Kind f3_kind_from_name(std::string_view name) {
  for (F3Kind k : kAllF3) {
    if (name_of(k) == name) return k;
  }
  throw std::invalid_argument("unknown f3 kind: " + std::string(name));
}

// One of the 16 (Function 2, Function 3) combinations. The case alone fixes a
// sample's ground-truth label.
struct PatternCase {
  F2Kind f2 = F2Kind::None;
  F3Kind f3 = F3Kind::None;

  friend bool operator==(const PatternCase&, const PatternCase&) = default;
};

// All 16 cases in canonical enumeration order (F2 outer, F3 inner).
inline std::array<PatternCase, 16> all_cases() {
  std::array<PatternCase, 16> out{};
  std::size_t i = 0;
  for (F2Kind f2 : kAllF2) {
    for (F3Kind f3 : kAllF3) out[i++] = PatternCase{f2, f3};
  }
  return out;
}

// Stable key like "wu|dr" for report rows.
inline std::string case_key(const PatternCase& c) {
  return std::string(name_of(c.f2)) + "|" + std::string(name_of(c.f3));
}

}  // namespace racelab
