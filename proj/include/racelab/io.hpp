#pragma once

#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "racelab/grammar.hpp"
#include "racelab/semantics.hpp"
#include "racelab/splits.hpp"

namespace racelab {

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Dataset records: one JSON object per line, canonical index included.
// ---------------------------------------------------------------------------

inline Json sample_to_json(const SimProgram& p) {
  Json j;
  j["f1"] = p.f1;
  j["f2"] = p.f2;
  j["f3"] = p.f3;
  j["label"] = p.label;
  j["f2_kind"] = std::string(name_of(p.pattern.f2));
  j["f3_kind"] = std::string(name_of(p.pattern.f3));
  j["f2_start"] = p.place2.start;
  j["f3_start"] = p.place3.start;
  j["gap"] = p.gap;
  j["index"] = p.index;
  return j;
}

inline SimProgram sample_from_json(const Json& j) {
  SimProgram p;
  p.f1 = j.at("f1").get<std::string>();
  p.f2 = j.at("f2").get<std::string>();
  p.f3 = j.at("f3").get<std::string>();
  p.label = j.at("label").get<bool>();
  p.pattern.f2 = f2_kind_from_name(j.at("f2_kind").get<std::string>());
  p.pattern.f3 = f3_kind_from_name(j.at("f3_kind").get<std::string>());
  p.gap = j.at("gap").get<int>();
  p.place2 = Placement{j.at("f2_start").get<int>(),
                       tokens_of(p.pattern.f2).size() == 2 ? p.gap : 0};
  p.place3 = Placement{j.at("f3_start").get<int>(),
                       tokens_of(p.pattern.f3).size() == 2 ? p.gap : 0};
  p.index = j.at("index").get<int>();
  return p;
}

inline void write_dataset_jsonl(std::ostream& os,
                                const std::vector<SimProgram>& dataset) {
  for (const SimProgram& p : dataset) os << sample_to_json(p).dump() << '\n';
}

inline void write_dataset_jsonl(const std::string& path,
                                const std::vector<SimProgram>& dataset) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  write_dataset_jsonl(os, dataset);
  if (!os) throw std::runtime_error("write failed: " + path);
}

inline std::vector<SimProgram> read_dataset_jsonl(std::istream& is) {
  std::vector<SimProgram> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    out.push_back(sample_from_json(Json::parse(line)));
  }
  return out;
}

inline std::vector<SimProgram> read_dataset_jsonl(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open dataset: " + path);
  return read_dataset_jsonl(is);
}

// ---------------------------------------------------------------------------
// Verdicts.
// ---------------------------------------------------------------------------

inline Json verdict_to_json(const Verdict& v) {
  Json j;
  j["buggy"] = v.buggy;
  Json w = Json::array();
  for (const auto& [thread, tok] : v.witness) {
    w.push_back(Json::array(
        {"t" + std::to_string(thread), std::string(1, tok)}));
  }
  j["witness"] = w;
  return j;
}

// ---------------------------------------------------------------------------
// Split plans and manifests.
// ---------------------------------------------------------------------------

inline Json filter_to_json(const FilterSpec& f) {
  Json j;
  j["type"] = filter_name(f);
  if (const auto* r = std::get_if<RandomFilter>(&f)) {
    j["train_fraction"] = r->train_fraction;
    j["seed"] = r->seed;
  } else if (const auto* h = std::get_if<FirstHalfFilter>(&f)) {
    j["train_region"] = h->train_region;
  } else if (const auto* s = std::get_if<SkipNFilter>(&f)) {
    j["skip"] = s->skip;
  } else if (const auto* g = std::get_if<GapSplitFilter>(&f)) {
    j["train_gaps"] = g->train_gaps;
    j["test_gaps"] = g->test_gaps;
  }
  return j;
}

inline FilterSpec filter_from_json(const Json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "random") {
    return RandomFilter{j.at("train_fraction").get<double>(),
                        j.at("seed").get<std::uint64_t>()};
  }
  if (type == "first_half") {
    return FirstHalfFilter{j.at("train_region").get<double>()};
  }
  if (type == "skip_n") return SkipNFilter{j.at("skip").get<int>()};
  if (type == "gap_split") {
    return GapSplitFilter{j.at("train_gaps").get<std::vector<int>>(),
                          j.at("test_gaps").get<std::vector<int>>()};
  }
  throw InvalidPlanError("unknown filter type: " + type);
}

inline Json plan_to_json(const SplitPlan& plan) {
  Json j;
  Json filters = Json::array();
  for (const FilterSpec& f : plan.filters) filters.push_back(filter_to_json(f));
  j["filters"] = filters;
  j["val_fraction_of_test"] = plan.val_fraction_of_test;
  j["val_seed"] = plan.val_seed;
  return j;
}

inline SplitPlan plan_from_json(const Json& j) {
  SplitPlan plan;
  for (const Json& f : j.at("filters")) {
    plan.filters.push_back(filter_from_json(f));
  }
  if (j.contains("val_fraction_of_test")) {
    plan.val_fraction_of_test = j.at("val_fraction_of_test").get<double>();
  }
  if (j.contains("val_seed")) {
    plan.val_seed = j.at("val_seed").get<std::uint64_t>();
  }
  return plan;
}

inline Json split_manifest_to_json(const SplitPlan& plan,
                                   const DatasetSplit& split) {
  Json j;
  j["plan"] = plan_to_json(plan)["filters"];
  j["train"] = split.train;
  j["val"] = split.val;
  j["test"] = split.test;
  j["discarded"] = split.discarded;
  Json seeds;
  seeds["val_seed"] = plan.val_seed;
  for (const FilterSpec& f : plan.filters) {
    if (const auto* r = std::get_if<RandomFilter>(&f)) {
      seeds["random_filter_seed"] = r->seed;
    }
  }
  j["seeds"] = seeds;
  j["val_fraction_of_test"] = plan.val_fraction_of_test;
  return j;
}

inline void write_split_manifest(const std::string& path,
                                 const SplitPlan& plan,
                                 const DatasetSplit& split) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os << split_manifest_to_json(plan, split).dump(2) << '\n';
}

inline DatasetSplit split_from_manifest_json(const Json& j) {
  DatasetSplit s;
  s.train = j.at("train").get<std::vector<int>>();
  s.val = j.at("val").get<std::vector<int>>();
  s.test = j.at("test").get<std::vector<int>>();
  s.discarded = j.at("discarded").get<std::vector<int>>();
  return s;
}

inline DatasetSplit read_split_manifest(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open split manifest: " + path);
  Json j = Json::parse(is);
  return split_from_manifest_json(j);
}

}  // namespace racelab
