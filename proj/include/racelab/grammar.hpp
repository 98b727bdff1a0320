#pragma once

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "racelab/rng.hpp"
#include "racelab/semantics.hpp"
#include "racelab/token.hpp"

namespace racelab {

struct NoLegalPlacementError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Where a function's meaningful tokens sit: `start` is the 0-based position
// of the first meaningful token, `gap` the count of noise tokens between the
// two meaningful tokens (0 for empty or single-token patterns).
struct Placement {
  int start = 0;
  int gap = 0;

  friend bool operator==(const Placement&, const Placement&) = default;
};

// Token footprint of a pattern: 0 for None, 1 for single-op, 2 + gap for the
// two-op patterns.
template <class Kind>
inline int pattern_width(Kind kind, int gap) {
  switch (tokens_of(kind).size()) {
    case 0: return 0;
    case 1: return 1;
    default: return 2 + gap;
  }
}

// All legal placements for `kind` in a program of `length` tokens, start
// ascending. None-kind patterns get the single sentinel placement {0, 0} so
// cardinality formulas stay uniform.
template <class Kind>
inline std::vector<Placement> enumerate_placements(Kind kind, int length,
                                                   int gap) {
  std::size_t n_tokens = tokens_of(kind).size();
  if (n_tokens == 0) return {Placement{0, 0}};
  int width = pattern_width(kind, gap);
  if (length < width) {
    throw NoLegalPlacementError(
        "no legal placement: pattern '" + std::string(tokens_of(kind)) +
        "' with gap " + std::to_string(gap) + " needs width " +
        std::to_string(width) + " but program length is " +
        std::to_string(length));
  }
  std::vector<Placement> out;
  out.reserve(static_cast<std::size_t>(length - width + 1));
  int stored_gap = n_tokens == 2 ? gap : 0;
  for (int s = 0; s + width <= length; ++s) out.push_back({s, stored_gap});
  return out;
}

// One labeled sample: three parallel function strings plus the generation
// metadata that the split filters key on.
struct SimProgram {
  std::string f1;
  std::string f2;
  std::string f3;
  PatternCase pattern;
  Placement place2;
  Placement place3;
  int gap = 0;        // the generation gap parameter for this sample
  bool label = false; // true = buggy
  int index = 0;      // canonical position within its dataset

  int length() const { return static_cast<int>(f1.size()); }
};

enum class SampleOrder { Canonical, Shuffled };

struct GenConfig {
  int program_length = 10;
  std::vector<int> gaps = {0};
  int noise_variants = 1;
  std::uint64_t seed = 0;
  SampleOrder order = SampleOrder::Canonical;

  // Sorted, deduplicated gap values.
  std::vector<int> sorted_gaps() const {
    std::vector<int> g = gaps;
    std::sort(g.begin(), g.end());
    g.erase(std::unique(g.begin(), g.end()), g.end());
    return g;
  }

  void validate() const {
    if (program_length < 1) {
      throw std::invalid_argument("program_length must be >= 1");
    }
    if (gaps.empty()) throw std::invalid_argument("gaps must be non-empty");
    if (noise_variants < 1) {
      throw std::invalid_argument("noise_variants must be >= 1");
    }
    for (int g : gaps) {
      if (g < 0) throw std::invalid_argument("gap values must be >= 0");
      if (2 + g > program_length) {
        throw NoLegalPlacementError(
            "no legal placement: gap " + std::to_string(g) +
            " leaves no room for two-op patterns in length " +
            std::to_string(program_length));
      }
    }
  }
};

namespace detail {

inline char draw_noise(Rng& rng) {
  return kNoiseChars[static_cast<std::size_t>(rng.below(3))];
}

// Writes the pattern tokens at their placement and fills every other slot
// with noise, left to right.
template <class Kind>
inline std::string render_function(Kind kind, const Placement& place,
                                   int length, Rng& rng) {
  std::string s(static_cast<std::size_t>(length), '\0');
  std::string_view toks = tokens_of(kind);
  std::vector<int> token_pos;
  if (toks.size() == 1) {
    token_pos = {place.start};
  } else if (toks.size() == 2) {
    token_pos = {place.start, place.start + 1 + place.gap};
  }
  for (std::size_t i = 0; i < toks.size(); ++i) {
    s[static_cast<std::size_t>(token_pos[i])] = toks[i];
  }
  for (char& c : s) {
    if (c == '\0') c = draw_noise(rng);
  }
  return s;
}

}  // namespace detail

// Builds one sample with noise drawn from `rng` (f1 first, then f2, then f3,
// each left to right). The label comes from the rule table; the interleaving
// oracle is checked against it by the agreement suite.
inline SimProgram make_program(F2Kind f2, F3Kind f3, const Placement& place2,
                               const Placement& place3, int gap, int length,
                               Rng& rng) {
  SimProgram p;
  p.pattern = PatternCase{f2, f3};
  p.place2 = place2;
  p.place3 = place3;
  p.gap = gap;
  p.f1.reserve(static_cast<std::size_t>(length));
  for (int i = 0; i < length; ++i) p.f1.push_back(detail::draw_noise(rng));
  p.f2 = detail::render_function(f2, place2, length, rng);
  p.f3 = detail::render_function(f3, place3, length, rng);
  p.label = label_by_rules(p.pattern);
  return p;
}

// Exhaustive pattern placement in canonical order: case (F2 outer, F3 inner),
// then gap ascending, then place2, then place3, then noise variant innermost.
// Noise for each sample comes from a generator seeded by (seed, canonical
// index), so edits to the case list never shift unrelated samples' noise.
inline std::vector<SimProgram> generate_dataset(const GenConfig& cfg) {
  cfg.validate();
  const std::vector<int> gaps = cfg.sorted_gaps();
  std::vector<SimProgram> out;
  int index = 0;
  for (F2Kind f2 : kAllF2) {
    for (F3Kind f3 : kAllF3) {
      for (int gap : gaps) {
        const auto places2 = enumerate_placements(f2, cfg.program_length, gap);
        const auto places3 = enumerate_placements(f3, cfg.program_length, gap);
        for (const Placement& p2 : places2) {
          for (const Placement& p3 : places3) {
            for (int v = 0; v < cfg.noise_variants; ++v) {
              Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(index)));
              SimProgram p = make_program(f2, f3, p2, p3, gap,
                                          cfg.program_length, rng);
              p.index = index++;
              out.push_back(std::move(p));
            }
          }
        }
      }
    }
  }
  if (cfg.order == SampleOrder::Shuffled) {
    Rng rng(mix_seed(cfg.seed, 0x5f5f'7368'7566'666cull));  // shuffle stream
    rng.shuffle(out);
  }
  return out;
}

// Extends every function string with `left` and `right` random noise tokens.
// Placements of meaningful patterns shift by `left`; labels are untouched
// (noise is semantically inert).
inline SimProgram pad_program(const SimProgram& p, int left, int right,
                              std::uint64_t seed) {
  if (left < 0 || right < 0) {
    throw std::invalid_argument("pad counts must be >= 0");
  }
  Rng rng(seed);
  SimProgram out = p;
  auto pad = [&](const std::string& s) {
    std::string padded;
    padded.reserve(s.size() + static_cast<std::size_t>(left + right));
    for (int i = 0; i < left; ++i) padded.push_back(detail::draw_noise(rng));
    padded += s;
    for (int i = 0; i < right; ++i) padded.push_back(detail::draw_noise(rng));
    return padded;
  };
  out.f1 = pad(p.f1);
  out.f2 = pad(p.f2);
  out.f3 = pad(p.f3);
  if (!tokens_of(p.pattern.f2).empty()) out.place2.start += left;
  if (!tokens_of(p.pattern.f3).empty()) out.place3.start += left;
  return out;
}

}  // namespace racelab
