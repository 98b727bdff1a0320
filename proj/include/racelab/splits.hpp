#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "racelab/grammar.hpp"
#include "racelab/rng.hpp"

namespace racelab {

struct InvalidPlanError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Filter 1: seeded random subset at a train-to-test ratio.
struct RandomFilter {
  double train_fraction = 0.25;
  std::uint64_t seed = 0;
};

// Filter 2: meaningful tokens of both functions confined to the leading
// `train_region` fraction for train, to the trailing remainder for test.
struct FirstHalfFilter {
  double train_region = 0.5;
};

// Filter 3: every `skip`-th sample of the canonical order goes to train.
struct SkipNFilter {
  int skip = 4;
};

// Filter 4: assignment by inter-operational distance.
struct GapSplitFilter {
  std::vector<int> train_gaps;
  std::vector<int> test_gaps;
};

using FilterSpec =
    std::variant<RandomFilter, FirstHalfFilter, SkipNFilter, GapSplitFilter>;

inline std::string filter_name(const FilterSpec& f) {
  switch (f.index()) {
    case 0: return "random";
    case 1: return "first_half";
    case 2: return "skip_n";
    default: return "gap_split";
  }
}

struct SplitPlan {
  std::vector<FilterSpec> filters;
  double val_fraction_of_test = 0.25;  // 1:3 validation to test
  std::uint64_t val_seed = 0;
};

// Disjoint index sets into the canonical dataset. Discarded samples are kept
// for auditability.
struct DatasetSplit {
  std::vector<int> train;
  std::vector<int> val;
  std::vector<int> test;
  std::vector<int> discarded;
};

namespace detail {

enum class Side { Train, Test, Discard };

inline void validate_filter(const FilterSpec& f) {
  if (const auto* r = std::get_if<RandomFilter>(&f)) {
    if (!(r->train_fraction > 0.0 && r->train_fraction < 1.0)) {
      throw InvalidPlanError("random filter: train_fraction must be in (0,1)");
    }
  } else if (const auto* h = std::get_if<FirstHalfFilter>(&f)) {
    if (!(h->train_region > 0.0 && h->train_region < 1.0)) {
      throw InvalidPlanError("first_half filter: region must be in (0,1)");
    }
  } else if (const auto* s = std::get_if<SkipNFilter>(&f)) {
    if (s->skip < 2) throw InvalidPlanError("skip_n filter: skip must be >= 2");
  } else if (const auto* g = std::get_if<GapSplitFilter>(&f)) {
    if (g->train_gaps.empty() || g->test_gaps.empty()) {
      throw InvalidPlanError("gap_split filter: gap sets must be non-empty");
    }
    for (int t : g->train_gaps) {
      if (std::find(g->test_gaps.begin(), g->test_gaps.end(), t) !=
          g->test_gaps.end()) {
        throw InvalidPlanError(
            "gap_split filter: train and test gap sets must be disjoint");
      }
    }
  }
}

// First-half boundary position for a program of `length` tokens.
inline int region_boundary(double region, int length) {
  return static_cast<int>(std::floor(region * length + 1e-9));
}

// True when the function's meaningful tokens lie entirely in [lo, hi).
// None-kind functions satisfy every window.
template <class Kind>
inline bool within_window(Kind kind, const Placement& place, int lo, int hi) {
  int width = pattern_width(kind, place.gap);
  if (width == 0) return true;
  return place.start >= lo && place.start + width <= hi;
}

inline Side first_half_side(const SimProgram& p, int boundary) {
  int len = p.length();
  bool in_train = within_window(p.pattern.f2, p.place2, 0, boundary) &&
                  within_window(p.pattern.f3, p.place3, 0, boundary);
  // Degenerate all-None samples satisfy both windows; train wins the tie.
  if (in_train) return Side::Train;
  bool in_test = within_window(p.pattern.f2, p.place2, boundary, len) &&
                 within_window(p.pattern.f3, p.place3, boundary, len);
  return in_test ? Side::Test : Side::Discard;
}

}  // namespace detail

// Filter 1. Seeded shuffle then prefix split; |train| = round(fraction * n).
inline std::pair<std::vector<int>, std::vector<int>> filter_random(
    const std::vector<int>& indices, double train_fraction,
    std::uint64_t seed) {
  detail::validate_filter(RandomFilter{train_fraction, seed});
  std::vector<int> shuffled = indices;
  Rng rng(seed);
  rng.shuffle(shuffled);
  auto n_train = static_cast<std::size_t>(
      std::llround(train_fraction * static_cast<double>(shuffled.size())));
  std::vector<int> train(shuffled.begin(),
                         shuffled.begin() + static_cast<long>(n_train));
  std::vector<int> test(shuffled.begin() + static_cast<long>(n_train),
                        shuffled.end());
  return {std::move(train), std::move(test)};
}

struct FirstHalfResult {
  std::vector<int> train;
  std::vector<int> test;
  std::vector<int> discarded;
};

// Filter 2. Assignment by placement predicate; samples straddling the
// boundary are discarded. Errors if some pattern case present in the dataset
// would lose all of its train placements.
inline FirstHalfResult filter_first_half(const std::vector<SimProgram>& dataset,
                                         double region = 0.5) {
  detail::validate_filter(FirstHalfFilter{region});
  FirstHalfResult out;
  std::set<std::pair<int, int>> cases_seen;
  std::set<std::pair<int, int>> cases_in_train;
  for (const SimProgram& p : dataset) {
    int boundary = detail::region_boundary(region, p.length());
    auto key = std::pair<int, int>(static_cast<int>(p.pattern.f2),
                                   static_cast<int>(p.pattern.f3));
    cases_seen.insert(key);
    switch (detail::first_half_side(p, boundary)) {
      case detail::Side::Train:
        out.train.push_back(p.index);
        cases_in_train.insert(key);
        break;
      case detail::Side::Test: out.test.push_back(p.index); break;
      case detail::Side::Discard: out.discarded.push_back(p.index); break;
    }
  }
  if (cases_in_train != cases_seen) {
    throw InvalidPlanError(
        "first_half filter: region yields no legal train placements for at "
        "least one pattern case");
  }
  return out;
}

// Filter 3. Deterministic: canonical positions 0, skip, 2*skip, ... train.
inline std::pair<std::vector<int>, std::vector<int>> filter_skip_n(
    const std::vector<int>& indices_in_canonical_order, int skip) {
  detail::validate_filter(SkipNFilter{skip});
  std::vector<int> train;
  std::vector<int> test;
  for (std::size_t pos = 0; pos < indices_in_canonical_order.size(); ++pos) {
    if (pos % static_cast<std::size_t>(skip) == 0) {
      train.push_back(indices_in_canonical_order[pos]);
    } else {
      test.push_back(indices_in_canonical_order[pos]);
    }
  }
  return {std::move(train), std::move(test)};
}

// The pattern start positions visible in train under SkipN, for an inner
// enumeration cycle of `cycle_length` placements: {(offset + k*skip) mod
// cycle_length}. Predicts whether a skip size also induces position variance.
inline std::vector<int> reachable_positions(int skip, int cycle_length,
                                            int offset) {
  if (cycle_length < 1) {
    throw std::invalid_argument("cycle_length must be >= 1");
  }
  if (skip < 1) throw std::invalid_argument("skip must be >= 1");
  std::vector<bool> seen(static_cast<std::size_t>(cycle_length), false);
  int pos = ((offset % cycle_length) + cycle_length) % cycle_length;
  while (!seen[static_cast<std::size_t>(pos)]) {
    seen[static_cast<std::size_t>(pos)] = true;
    pos = (pos + skip) % cycle_length;
  }
  std::vector<int> out;
  for (int i = 0; i < cycle_length; ++i) {
    if (seen[static_cast<std::size_t>(i)]) out.push_back(i);
  }
  return out;
}

struct GapSplitResult {
  std::vector<int> train;
  std::vector<int> test;
  std::vector<int> discarded;
};

// Filter 4. Assignment by the sample's gap field; gaps in neither set are
// discarded.
inline GapSplitResult filter_gap_split(const std::vector<SimProgram>& dataset,
                                       const std::vector<int>& train_gaps,
                                       const std::vector<int>& test_gaps) {
  GapSplitFilter spec{train_gaps, test_gaps};
  detail::validate_filter(spec);
  std::set<int> dataset_gaps;
  for (const SimProgram& p : dataset) dataset_gaps.insert(p.gap);
  for (int g : train_gaps) {
    if (!dataset_gaps.count(g)) {
      throw std::invalid_argument("gap_split: train gap " + std::to_string(g) +
                                  " not present in dataset");
    }
  }
  for (int g : test_gaps) {
    if (!dataset_gaps.count(g)) {
      throw std::invalid_argument("gap_split: test gap " + std::to_string(g) +
                                  " not present in dataset");
    }
  }
  GapSplitResult out;
  auto contains = [](const std::vector<int>& v, int g) {
    return std::find(v.begin(), v.end(), g) != v.end();
  };
  for (const SimProgram& p : dataset) {
    if (contains(train_gaps, p.gap)) {
      out.train.push_back(p.index);
    } else if (contains(test_gaps, p.gap)) {
      out.test.push_back(p.index);
    } else {
      out.discarded.push_back(p.index);
    }
  }
  return out;
}

namespace detail {

// Application order: FirstHalf before SkipN before Random; GapSplit and
// Random are interchangeable at the end.
inline int filter_rank(const FilterSpec& f) {
  if (std::holds_alternative<FirstHalfFilter>(f)) return 0;
  if (std::holds_alternative<SkipNFilter>(f)) return 1;
  return 2;  // Random, GapSplit
}

inline void validate_plan_order(const SplitPlan& plan) {
  for (std::size_t i = 1; i < plan.filters.size(); ++i) {
    int prev = filter_rank(plan.filters[i - 1]);
    int cur = filter_rank(plan.filters[i]);
    if (cur < prev) {
      throw InvalidPlanError(
          "invalid plan: '" + filter_name(plan.filters[i]) + "' after '" +
          filter_name(plan.filters[i - 1]) +
          "' violates the ordering rule FirstHalf -> SkipN -> Random/GapSplit");
    }
  }
}

// Per-sample membership for one filter over the whole canonical dataset.
inline std::vector<Side> filter_sides(const FilterSpec& f,
                                      const std::vector<SimProgram>& dataset) {
  std::vector<Side> sides(dataset.size(), Side::Discard);
  auto mark = [&](const std::vector<int>& idx, Side s) {
    for (int i : idx) sides[static_cast<std::size_t>(i)] = s;
  };
  if (const auto* r = std::get_if<RandomFilter>(&f)) {
    std::vector<int> all(dataset.size());
    std::iota(all.begin(), all.end(), 0);
    auto [train, test] = filter_random(all, r->train_fraction, r->seed);
    mark(train, Side::Train);
    mark(test, Side::Test);
  } else if (const auto* h = std::get_if<FirstHalfFilter>(&f)) {
    FirstHalfResult res = filter_first_half(dataset, h->train_region);
    mark(res.train, Side::Train);
    mark(res.test, Side::Test);
  } else if (const auto* s = std::get_if<SkipNFilter>(&f)) {
    std::vector<int> all(dataset.size());
    std::iota(all.begin(), all.end(), 0);
    auto [train, test] = filter_skip_n(all, s->skip);
    mark(train, Side::Train);
    mark(test, Side::Test);
  } else if (const auto* g = std::get_if<GapSplitFilter>(&f)) {
    GapSplitResult res = filter_gap_split(dataset, g->train_gaps, g->test_gaps);
    mark(res.train, Side::Train);
    mark(res.test, Side::Test);
  }
  return sides;
}

}  // namespace detail

// Applies the plan's filters left to right, each narrowing the running
// train/test sets (a sample stays in train only while every filter keeps it
// there, likewise for test; everything else is discarded). Validation is then
// carved from test by seeded random selection.
//
// The dataset must be in canonical order (sample i at position i).
inline DatasetSplit compose(const SplitPlan& plan,
                            const std::vector<SimProgram>& dataset) {
  detail::validate_plan_order(plan);
  for (const FilterSpec& f : plan.filters) detail::validate_filter(f);
  if (!(plan.val_fraction_of_test >= 0.0 && plan.val_fraction_of_test < 1.0)) {
    throw InvalidPlanError("val_fraction_of_test must be in [0,1)");
  }
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (dataset[i].index != static_cast<int>(i)) {
      throw std::invalid_argument("dataset must be in canonical order");
    }
  }

  std::vector<detail::Side> combined(dataset.size(), detail::Side::Train);
  bool first = true;
  for (const FilterSpec& f : plan.filters) {
    std::vector<detail::Side> sides = detail::filter_sides(f, dataset);
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      if (first) {
        combined[i] = sides[i];
      } else if (combined[i] != sides[i]) {
        combined[i] = detail::Side::Discard;
      }
    }
    first = false;
  }
  if (plan.filters.empty()) {
    // No filters: everything is train; nothing to carve validation from.
    combined.assign(dataset.size(), detail::Side::Train);
  }

  DatasetSplit split;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    switch (combined[i]) {
      case detail::Side::Train: split.train.push_back(static_cast<int>(i)); break;
      case detail::Side::Test: split.test.push_back(static_cast<int>(i)); break;
      case detail::Side::Discard:
        split.discarded.push_back(static_cast<int>(i));
        break;
    }
  }

  // Validation carve-out: seeded random subset of test (1:3 by default).
  auto n_val = static_cast<std::size_t>(std::llround(
      plan.val_fraction_of_test * static_cast<double>(split.test.size())));
  if (n_val > 0) {
    std::vector<int> shuffled = split.test;
    Rng rng(plan.val_seed);
    rng.shuffle(shuffled);
    std::set<int> val_set(shuffled.begin(),
                          shuffled.begin() + static_cast<long>(n_val));
    std::vector<int> rest;
    rest.reserve(split.test.size() - n_val);
    for (int i : split.test) {
      if (val_set.count(i)) {
        split.val.push_back(i);
      } else {
        rest.push_back(i);
      }
    }
    split.test = std::move(rest);
  }
  return split;
}

}  // namespace racelab
