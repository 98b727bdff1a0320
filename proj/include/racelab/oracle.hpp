#pragma once

#include <cstdint>
#include <vector>

#include "racelab/grammar.hpp"
#include "racelab/semantics.hpp"

namespace racelab {

// One sample where the rule table and the interleaving simulator (or a stored
// label) differ.
struct Disagreement {
  SimProgram sample;
  bool rules_label = false;
  Verdict interleaving;
};

struct AgreementReport {
  long long checked = 0;
  std::vector<Disagreement> disagreements;

  bool ok() const { return disagreements.empty(); }
};

namespace detail {

inline void check_sample(const SimProgram& p, AgreementReport& report) {
  bool rules = label_by_rules(p.pattern);
  Verdict v = label_by_interleaving(p);
  report.checked += 1;
  if (rules != v.buggy || p.label != rules) {
    report.disagreements.push_back({p, rules, v});
  }
}

}  // namespace detail

// Generates the full dataset for `cfg` and requires the rule table and the
// interleaving oracle to agree on every sample.
inline AgreementReport check_oracle_agreement(const GenConfig& cfg) {
  AgreementReport report;
  for (const SimProgram& p : generate_dataset(cfg)) {
    detail::check_sample(p, report);
  }
  return report;
}

// Same check over an existing dataset (e.g. one loaded from disk); also
// catches stored labels that disagree with both oracles.
inline AgreementReport check_oracle_agreement(
    const std::vector<SimProgram>& dataset) {
  AgreementReport report;
  for (const SimProgram& p : dataset) detail::check_sample(p, report);
  return report;
}

// Every case, every placement, every gap <= max_gap, every length <=
// max_length. Placements that do not fit a given length are vacuous and
// skipped.
inline AgreementReport check_oracle_agreement_exhaustive(
    int max_length, int max_gap, std::uint64_t seed = 0) {
  AgreementReport report;
  for (int length = 1; length <= max_length; ++length) {
    for (const PatternCase& pc : all_cases()) {
      for (int gap = 0; gap <= max_gap; ++gap) {
        if (gap > 0 && pattern_width(pc.f2, gap) <= 1 &&
            pattern_width(pc.f3, gap) <= 1) {
          continue;  // gap only distinguishes two-op patterns
        }
        std::vector<Placement> places2;
        std::vector<Placement> places3;
        try {
          places2 = enumerate_placements(pc.f2, length, gap);
          places3 = enumerate_placements(pc.f3, length, gap);
        } catch (const NoLegalPlacementError&) {
          continue;
        }
        for (const Placement& p2 : places2) {
          for (const Placement& p3 : places3) {
            Rng rng(mix_seed(seed, static_cast<std::uint64_t>(report.checked)));
            SimProgram p = make_program(pc.f2, pc.f3, p2, p3, gap, length, rng);
            detail::check_sample(p, report);
          }
        }
      }
    }
  }
  return report;
}

}  // namespace racelab
