#include "racelab/grammar.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <sstream>
#include <string>

#include "racelab/io.hpp"
#include "racelab/semantics.hpp"

namespace racelab {
namespace {

TEST(EnumeratePlacements, TwoOpPatternSlidesAcrossProgram) {
  auto places = enumerate_placements(F3Kind::CR, 10, 0);
  ASSERT_EQ(places.size(), 9u);
  for (int s = 0; s < 9; ++s) {
    EXPECT_EQ(places[static_cast<std::size_t>(s)], (Placement{s, 0}));
  }
}

TEST(EnumeratePlacements, SingleSlot) {
  auto places = enumerate_placements(F2Kind::W, 1, 0);
  ASSERT_EQ(places.size(), 1u);
  EXPECT_EQ(places[0], (Placement{0, 0}));
}

TEST(EnumeratePlacements, GapWidensPattern) {
  auto places = enumerate_placements(F2Kind::WU, 10, 2);
  ASSERT_EQ(places.size(), 7u);
  EXPECT_EQ(places.front().start, 0);
  EXPECT_EQ(places.back().start, 6);
  EXPECT_EQ(places.front().gap, 2);
}

TEST(EnumeratePlacements, NoneKindSentinel) {
  auto places = enumerate_placements(F2Kind::None, 10, 3);
  ASSERT_EQ(places.size(), 1u);
  EXPECT_EQ(places[0], (Placement{0, 0}));
}

TEST(EnumeratePlacements, TooShortErrors) {
  EXPECT_THROW(enumerate_placements(F2Kind::WU, 1, 0), NoLegalPlacementError);
  EXPECT_THROW(enumerate_placements(F3Kind::DR, 3, 2), NoLegalPlacementError);
}

GenConfig small_config() {
  GenConfig cfg;
  cfg.program_length = 10;
  cfg.gaps = {0};
  cfg.noise_variants = 1;
  cfg.seed = 42;
  return cfg;
}

long long expected_cardinality(const GenConfig& cfg) {
  long long total = 0;
  for (F2Kind f2 : kAllF2) {
    for (F3Kind f3 : kAllF3) {
      for (int gap : cfg.sorted_gaps()) {
        auto p2 = enumerate_placements(f2, cfg.program_length, gap);
        auto p3 = enumerate_placements(f3, cfg.program_length, gap);
        total += static_cast<long long>(p2.size()) *
                 static_cast<long long>(p3.size()) * cfg.noise_variants;
      }
    }
  }
  return total;
}

TEST(GenerateDataset, CardinalityMatchesPlacementFormula) {
  GenConfig cfg = small_config();
  cfg.gaps = {0, 1, 2};
  cfg.noise_variants = 2;
  auto ds = generate_dataset(cfg);
  EXPECT_EQ(static_cast<long long>(ds.size()), expected_cardinality(cfg));
  EXPECT_EQ(static_cast<long long>(ds.size()), 2 * (841 + 729 + 625));
}

TEST(GenerateDataset, CanonicalOrderCyclesPlace3Fastest) {
  auto ds = generate_dataset(small_config());
  // Pull out the (W, CR) block: 10 x 9 = 90 consecutive samples.
  std::vector<SimProgram> block;
  for (const SimProgram& p : ds) {
    if (p.pattern.f2 == F2Kind::W && p.pattern.f3 == F3Kind::CR) {
      block.push_back(p);
    }
  }
  ASSERT_EQ(block.size(), 90u);
  for (std::size_t i = 0; i + 1 < block.size(); ++i) {
    EXPECT_EQ(block[i].index + 1, block[i + 1].index);  // contiguous
  }
  for (std::size_t i = 0; i < block.size(); ++i) {
    EXPECT_EQ(block[i].place2.start, static_cast<int>(i / 9));
    EXPECT_EQ(block[i].place3.start, static_cast<int>(i % 9));
  }
}

TEST(GenerateDataset, TokensSitAtTheirPlacements) {
  GenConfig cfg = small_config();
  cfg.gaps = {0, 2};
  for (const SimProgram& p : generate_dataset(cfg)) {
    for (char c : p.f1) EXPECT_TRUE(is_noise(c));
    std::string_view toks2 = tokens_of(p.pattern.f2);
    if (toks2.size() >= 1) EXPECT_EQ(p.f2[p.place2.start], toks2[0]);
    if (toks2.size() == 2) {
      EXPECT_EQ(p.f2[p.place2.start + 1 + p.place2.gap], toks2[1]);
    }
    std::string_view toks3 = tokens_of(p.pattern.f3);
    if (toks3.size() >= 1) EXPECT_EQ(p.f3[p.place3.start], toks3[0]);
    if (toks3.size() == 2) {
      EXPECT_EQ(p.f3[p.place3.start + 1 + p.place3.gap], toks3[1]);
    }
    int meaningful2 = 0;
    for (char c : p.f2) meaningful2 += is_meaningful(c) ? 1 : 0;
    EXPECT_EQ(meaningful2, static_cast<int>(toks2.size()));
  }
}

TEST(GenerateDataset, LabelsFollowTheRuleTable) {
  auto ds = generate_dataset(small_config());
  for (const SimProgram& p : ds) {
    EXPECT_EQ(p.label, label_by_rules(p.pattern));
    if (p.pattern.f2 == F2Kind::None && p.pattern.f3 == F3Kind::None) {
      EXPECT_FALSE(p.label);
    }
    if (p.pattern.f2 == F2Kind::UW && p.pattern.f3 == F3Kind::DR) {
      EXPECT_TRUE(p.label);
    }
  }
}

TEST(GenerateDataset, ByteIdenticalForSameConfig) {
  GenConfig cfg = small_config();
  cfg.gaps = {0, 1};
  std::ostringstream a;
  std::ostringstream b;
  write_dataset_jsonl(a, generate_dataset(cfg));
  write_dataset_jsonl(b, generate_dataset(cfg));
  EXPECT_EQ(a.str(), b.str());
  cfg.seed += 1;
  std::ostringstream c;
  write_dataset_jsonl(c, generate_dataset(cfg));
  EXPECT_NE(a.str(), c.str());
}

TEST(GenerateDataset, ShuffledKeepsCanonicalIndices) {
  GenConfig cfg = small_config();
  cfg.order = SampleOrder::Shuffled;
  auto shuffled = generate_dataset(cfg);
  cfg.order = SampleOrder::Canonical;
  auto canonical = generate_dataset(cfg);
  ASSERT_EQ(shuffled.size(), canonical.size());
  bool any_moved = false;
  for (std::size_t i = 0; i < shuffled.size(); ++i) {
    const SimProgram& p = shuffled[i];
    if (p.index != static_cast<int>(i)) any_moved = true;
    EXPECT_EQ(p.f2, canonical[static_cast<std::size_t>(p.index)].f2);
  }
  EXPECT_TRUE(any_moved);
}

TEST(GenerateDataset, InvalidConfigRejected) {
  GenConfig cfg = small_config();
  cfg.program_length = 1;
  cfg.gaps = {2};
  EXPECT_THROW(generate_dataset(cfg), NoLegalPlacementError);
  cfg = small_config();
  cfg.noise_variants = 0;
  EXPECT_THROW(generate_dataset(cfg), std::invalid_argument);
}

TEST(LabelInvariance, NoiseAndF1NeverChangeTheLabel) {
  GenConfig cfg = small_config();
  cfg.gaps = {0, 1};
  auto ds = generate_dataset(cfg);
  Rng rng(9);
  for (std::size_t step = 0; step < 200; ++step) {
    SimProgram p = ds[static_cast<std::size_t>(rng.below(ds.size()))];
    SimProgram mutated = p;
    for (std::string* f : {&mutated.f1, &mutated.f2, &mutated.f3}) {
      for (char& c : *f) {
        if (is_noise(c)) {
          c = kNoiseChars[static_cast<std::size_t>(rng.below(3))];
        }
      }
    }
    EXPECT_EQ(label_by_interleaving(mutated).buggy, p.label);
  }
}

TEST(LabelInvariance, PlacementNeverChangesTheLabel) {
  GenConfig cfg;
  cfg.program_length = 8;
  cfg.gaps = {0, 1, 2, 3};
  cfg.seed = 5;
  auto ds = generate_dataset(cfg);
  for (const PatternCase& c : all_cases()) {
    std::set<bool> labels;
    for (const SimProgram& p : ds) {
      if (p.pattern == c) labels.insert(p.label);
    }
    EXPECT_EQ(labels.size(), 1u) << case_key(c);
  }
}

TEST(PadProgram, ZeroPadIsIdentity) {
  auto ds = generate_dataset(small_config());
  const SimProgram& p = ds[500];
  SimProgram q = pad_program(p, 0, 0, 11);
  EXPECT_EQ(q.f1, p.f1);
  EXPECT_EQ(q.f2, p.f2);
  EXPECT_EQ(q.f3, p.f3);
  EXPECT_EQ(q.place2, p.place2);
}

TEST(PadProgram, LeftPadShiftsPlacements) {
  auto ds = generate_dataset(small_config());
  // A buggy sample with a real f2 pattern.
  const SimProgram* chosen = nullptr;
  for (const SimProgram& p : ds) {
    if (p.label && p.pattern.f2 == F2Kind::UW && p.pattern.f3 == F3Kind::DR) {
      chosen = &p;
      break;
    }
  }
  ASSERT_NE(chosen, nullptr);
  SimProgram q = pad_program(*chosen, 3, 0, 11);
  EXPECT_TRUE(q.label);
  EXPECT_EQ(q.place2.start, chosen->place2.start + 3);
  EXPECT_EQ(q.place3.start, chosen->place3.start + 3);
  EXPECT_EQ(q.length(), chosen->length() + 3);
  EXPECT_EQ(label_by_interleaving(q).buggy, q.label);
  EXPECT_EQ(q.f2[q.place2.start], 'u');
}

TEST(PadProgram, BothSidesKeepOracleLabel) {
  auto ds = generate_dataset(small_config());
  Rng rng(13);
  for (int i = 0; i < 50; ++i) {
    const SimProgram& p = ds[static_cast<std::size_t>(rng.below(ds.size()))];
    SimProgram q = pad_program(p, 2, 2, rng.next_u64());
    EXPECT_EQ(q.length(), p.length() + 4);
    EXPECT_EQ(label_by_interleaving(q).buggy, p.label);
  }
}

TEST(DatasetJsonl, RoundTripsAndKeepsKeyOrder) {
  GenConfig cfg = small_config();
  cfg.gaps = {0, 1};
  auto ds = generate_dataset(cfg);
  std::ostringstream os;
  write_dataset_jsonl(os, ds);
  std::istringstream is(os.str());
  auto back = read_dataset_jsonl(is);
  ASSERT_EQ(back.size(), ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    EXPECT_EQ(back[i].f1, ds[i].f1);
    EXPECT_EQ(back[i].f2, ds[i].f2);
    EXPECT_EQ(back[i].f3, ds[i].f3);
    EXPECT_EQ(back[i].label, ds[i].label);
    EXPECT_EQ(back[i].pattern, ds[i].pattern);
    EXPECT_EQ(back[i].place2, ds[i].place2);
    EXPECT_EQ(back[i].place3, ds[i].place3);
    EXPECT_EQ(back[i].gap, ds[i].gap);
    EXPECT_EQ(back[i].index, ds[i].index);
  }
  std::string first_line = os.str().substr(0, os.str().find('\n'));
  EXPECT_EQ(first_line.rfind("{\"f1\":", 0), 0u);
  EXPECT_NE(first_line.find("\"index\":0}"), std::string::npos);
}

}  // namespace
}  // namespace racelab
