#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "racelab/grammar.hpp"
#include "racelab/io.hpp"
#include "racelab/models.hpp"
#include "racelab/nn/adam.hpp"
#include "racelab/nn/loss.hpp"
#include "racelab/oracle.hpp"
#include "racelab/splits.hpp"

namespace racelab {

struct MissingPresetError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// ---------------------------------------------------------------------------
// Training.
// ---------------------------------------------------------------------------

struct TrainConfig {
  int max_epochs = 150;
  int patience = 40;  // epochs without val-accuracy improvement before stop
  int batch_size = 32;
  double learning_rate = 1e-3;
  double l2_lambda = 0.0;
  nn::LossConfig loss;
  int instances_per_family = 8;
  bool lstm_noise_padding = true;  // remedy for FirstHalf presets, LSTM only

  void validate() const {
    if (max_epochs < 1) throw std::invalid_argument("max_epochs must be >= 1");
    if (patience < 1 || patience >= max_epochs) {
      throw std::invalid_argument("patience must be in [1, max_epochs)");
    }
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (learning_rate <= 0.0) throw std::invalid_argument("learning_rate must be > 0");
    if (instances_per_family < 2) {
      throw std::invalid_argument("instances_per_family must be >= 2");
    }
    loss.validate();
  }
};

struct EpochStats {
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
};

struct TrainOutcome {
  std::vector<EpochStats> history;
  int best_epoch = -1;  // 0-based index into history
  double best_val_acc = 0.0;
  bool failed = false;  // divergence (NaN loss)
  std::string failure_reason;
};

namespace detail {

struct EvalResult {
  double loss = 0.0;
  double acc = 0.0;
};

inline EvalResult evaluate(Model& model,
                           const std::vector<nn::EncodedSample>& samples,
                           const nn::LossConfig& loss_cfg) {
  EvalResult r;
  if (samples.empty()) return r;
  double total = 0.0;
  int correct = 0;
  nn::LossDiagnostics diag;
  for (const nn::EncodedSample& s : samples) {
    double p = model.forward(s);
    double pc = nn::clamp_prob(p, &diag);
    total += -loss_cfg.weight_for(s.label) *
             (s.label ? std::log(pc) : std::log(1.0 - pc));
    correct += ((p > 0.5) == s.label) ? 1 : 0;
  }
  r.loss = total / static_cast<double>(samples.size());
  r.acc = static_cast<double>(correct) / static_cast<double>(samples.size());
  return r;
}

inline std::vector<nn::Vec> snapshot_params(const std::vector<nn::Param*>& ps) {
  std::vector<nn::Vec> out;
  out.reserve(ps.size());
  for (const nn::Param* p : ps) out.push_back(p->w);
  return out;
}

inline void restore_snapshot(const std::vector<nn::Param*>& ps,
                             const std::vector<nn::Vec>& snap) {
  for (std::size_t i = 0; i < ps.size(); ++i) ps[i]->w = snap[i];
}

}  // namespace detail

// Mini-batch Adam training with two checkpoints: the weights of the best
// validation-accuracy epoch (restored into the model on return) and early
// stopping once `patience` epochs pass without improvement. A NaN loss aborts
// the instance and flags it failed.
inline TrainOutcome train_model(Model& model,
                                const std::vector<nn::EncodedSample>& train,
                                const std::vector<nn::EncodedSample>& val,
                                const TrainConfig& cfg,
                                std::uint64_t shuffle_seed) {
  cfg.validate();
  if (train.empty() || val.empty()) {
    throw std::invalid_argument("train_model: degenerate split (empty train or val)");
  }
  TrainOutcome out;
  const std::vector<nn::Param*>& params = model.params();
  nn::AdamState adam;
  adam.init(params);
  nn::AdamConfig adam_cfg;
  adam_cfg.lr = cfg.learning_rate;
  Rng shuffle_rng(shuffle_seed);

  std::vector<int> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  std::vector<nn::Vec> best_snapshot = detail::snapshot_params(params);
  int epochs_since_best = 0;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    int batches = 0;
    int correct = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      std::size_t end = std::min(order.size(),
                                 start + static_cast<std::size_t>(cfg.batch_size));
      int batch_n = static_cast<int>(end - start);
      for (nn::Param* p : params) p->zero_grad();
      double batch_loss = 0.0;
      for (std::size_t k = start; k < end; ++k) {
        const nn::EncodedSample& s = train[static_cast<std::size_t>(order[k])];
        double p = model.forward(s);
        double pc = nn::clamp_prob(p);
        batch_loss += -cfg.loss.weight_for(s.label) *
                      (s.label ? std::log(pc) : std::log(1.0 - pc));
        correct += ((p > 0.5) == s.label) ? 1 : 0;
        model.backward(nn::weighted_bce_dp(p, s.label, cfg.loss, batch_n));
      }
      batch_loss /= batch_n;
      if (cfg.l2_lambda > 0.0) {
        batch_loss += nn::l2_penalty(params, cfg.l2_lambda);
        nn::add_l2_gradient(params, cfg.l2_lambda);
      }
      nn::adam_step(params, adam, adam_cfg);
      loss_sum += batch_loss;
      batches += 1;
    }

    EpochStats stats;
    stats.train_loss = loss_sum / std::max(1, batches);
    stats.train_acc = static_cast<double>(correct) /
                      static_cast<double>(train.size());
    detail::EvalResult v = detail::evaluate(model, val, cfg.loss);
    stats.val_loss = v.loss;
    stats.val_acc = v.acc;
    out.history.push_back(stats);

    if (!std::isfinite(stats.train_loss) || !std::isfinite(stats.val_loss)) {
      out.failed = true;
      out.failure_reason = "non-finite loss at epoch " + std::to_string(epoch);
      break;
    }
    if (stats.val_acc > out.best_val_acc || out.best_epoch < 0) {
      out.best_val_acc = stats.val_acc;
      out.best_epoch = epoch;
      best_snapshot = detail::snapshot_params(params);
      epochs_since_best = 0;
    } else {
      epochs_since_best += 1;
      if (epochs_since_best >= cfg.patience) break;
    }
  }
  detail::restore_snapshot(params, best_snapshot);
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation breakdowns.
// ---------------------------------------------------------------------------

inline double accuracy(Model& model,
                       const std::vector<nn::EncodedSample>& samples) {
  if (samples.empty()) return 0.0;
  int correct = 0;
  for (const nn::EncodedSample& s : samples) {
    correct += ((model.forward(s) > 0.5) == s.label) ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(samples.size());
}

// Per-case accuracy of an arbitrary predictor; cases absent from the set are
// omitted. Keys are "f2|f3" names in canonical case order (std::map sorts,
// reports re-order).
template <class Predict>
inline std::map<std::string, double> accuracy_by_pattern(
    const std::vector<SimProgram>& dataset, const std::vector<int>& indices,
    Predict&& predict_buggy) {
  std::map<std::string, int> correct;
  std::map<std::string, int> total;
  for (int idx : indices) {
    const SimProgram& p = dataset[static_cast<std::size_t>(idx)];
    std::string key = case_key(p.pattern);
    bool predicted = predict_buggy(p);
    total[key] += 1;
    correct[key] += (predicted == p.label) ? 1 : 0;
  }
  std::map<std::string, double> acc;
  for (const auto& [key, n] : total) {
    acc[key] = static_cast<double>(correct[key]) / static_cast<double>(n);
  }
  return acc;
}

inline std::map<std::string, double> accuracy_by_pattern(
    Model& model, const std::vector<SimProgram>& dataset,
    const std::vector<int>& indices,
    const std::vector<nn::EncodedSample>& encoded) {
  std::map<std::string, int> correct;
  std::map<std::string, int> total;
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const SimProgram& p = dataset[static_cast<std::size_t>(indices[k])];
    std::string key = case_key(p.pattern);
    bool predicted = model.forward(encoded[k]) > 0.5;
    total[key] += 1;
    correct[key] += (predicted == p.label) ? 1 : 0;
  }
  std::map<std::string, double> acc;
  for (const auto& [key, n] : total) {
    acc[key] = static_cast<double>(correct[key]) / static_cast<double>(n);
  }
  return acc;
}

// ---------------------------------------------------------------------------
// Presets: the experiment matrix.
// ---------------------------------------------------------------------------

struct Preset {
  std::string name;
  GenConfig gen;
  SplitPlan plan;
  bool cnn_l2 = false;        // 0.01 L2 on the CNN family
  bool lstm_padding = false;  // left-pad train / right-pad eval for LSTM
  int pad_amount = 0;
};

inline std::vector<std::string> preset_names() {
  return {"filter1_easy",    "filter1_hard",    "filter2_easy",
          "filter2_hard",    "filter3_easy",    "filter3_hard",
          "filter3var_easy", "filter3var_hard", "filter4_easy",
          "filter4_hard",    "filter24_easy",   "filter24_hard"};
}

// Builds the named preset with all seeds derived from the master seed.
// noise_variants per preset keep desk-scale train sets at or above ~500
// samples wherever the filter allows it.
inline Preset make_preset(const std::string& name, std::uint64_t master_seed) {
  Preset p;
  p.name = name;
  p.gen.program_length = 10;
  p.gen.gaps = {0, 1, 2, 3};
  p.gen.noise_variants = 1;
  p.gen.seed = mix_seed(master_seed, fnv1a(name + "/gen"));
  p.plan.val_fraction_of_test = 0.25;
  p.plan.val_seed = mix_seed(master_seed, fnv1a(name + "/val"));
  std::uint64_t filter_seed = mix_seed(master_seed, fnv1a(name + "/filter"));

  auto first_half = [&](double region) {
    p.plan.filters.push_back(FirstHalfFilter{region});
    p.lstm_padding = true;
    int boundary = static_cast<int>(region * p.gen.program_length + 1e-9);
    p.pad_amount = p.gen.program_length - boundary;
  };
  auto gap_split = [&](std::vector<int> train, std::vector<int> test) {
    p.plan.filters.push_back(GapSplitFilter{std::move(train), std::move(test)});
    p.cnn_l2 = true;
  };

  if (name == "filter1_easy") {
    p.plan.filters.push_back(RandomFilter{0.25, filter_seed});
  } else if (name == "filter1_hard") {
    p.gen.noise_variants = 4;
    p.plan.filters.push_back(RandomFilter{0.05, filter_seed});
  } else if (name == "filter2_easy") {
    first_half(0.5);
  } else if (name == "filter2_hard") {
    p.gen.noise_variants = 4;
    first_half(1.0 / 3.0);
  } else if (name == "filter3_easy") {
    p.plan.filters.push_back(SkipNFilter{4});
  } else if (name == "filter3_hard") {
    p.gen.noise_variants = 4;
    p.plan.filters.push_back(SkipNFilter{19});
  } else if (name == "filter3var_easy") {
    p.plan.filters.push_back(SkipNFilter{5});
  } else if (name == "filter3var_hard") {
    p.gen.noise_variants = 4;
    p.plan.filters.push_back(SkipNFilter{20});
  } else if (name == "filter4_easy") {
    gap_split({0, 2}, {1});
  } else if (name == "filter4_hard") {
    gap_split({1}, {0, 2});
  } else if (name == "filter24_easy") {
    p.gen.noise_variants = 2;
    first_half(0.5);
    gap_split({0, 2}, {1});
  } else if (name == "filter24_hard") {
    p.gen.noise_variants = 4;
    first_half(0.5);
    gap_split({1}, {0, 2});
  } else {
    std::string known;
    for (const std::string& n : preset_names()) known += " " + n;
    throw MissingPresetError("unknown preset '" + name + "'; valid presets:" +
                             known);
  }
  return p;
}

// ---------------------------------------------------------------------------
// Experiment runner.
// ---------------------------------------------------------------------------

struct ExperimentConfig {
  std::uint64_t master_seed = 1;
  int workers = 1;
  TrainConfig train;
  std::vector<Family> families{kHeadlineFamilies.begin(),
                               kHeadlineFamilies.end()};
};

struct InstanceResult {
  Family family = Family::Feedforward;
  int instance = 0;
  std::uint64_t model_seed = 0;
  TrainOutcome outcome;
  double test_accuracy = 0.0;
  std::map<std::string, double> case_accuracy;
  long long wall_ms = 0;
};

struct FamilySummary {
  double test_acc_mean_all = 0.0;
  double test_acc_mean_top50 = 0.0;
  double val_acc_mean_top50 = 0.0;
  std::map<std::string, double> case_acc_all;
  std::map<std::string, double> case_acc_top50;
  std::vector<int> top_instances;  // instance ids, best first
  int n_instances = 0;
  int n_failed = 0;
};

struct PresetReport {
  std::string preset;
  std::uint64_t master_seed = 0;
  int train_size = 0;
  int val_size = 0;
  int test_size = 0;
  int discarded_size = 0;
  std::map<std::string, int> case_counts;  // test set, by case key
  std::vector<InstanceResult> instances;
  std::map<Family, FamilySummary> families;
};

namespace detail {

inline void run_jobs(int workers, int n_jobs,
                     const std::function<void(int)>& job) {
  if (workers <= 1 || n_jobs <= 1) {
    for (int i = 0; i < n_jobs; ++i) job(i);
    return;
  }
  std::atomic<int> next{0};
  auto worker = [&]() {
    while (true) {
      int i = next.fetch_add(1);
      if (i >= n_jobs) return;
      job(i);
    }
  };
  std::vector<std::thread> pool;
  int n_threads = std::min(workers, n_jobs);
  pool.reserve(static_cast<std::size_t>(n_threads));
  for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();
}

// Top 50% = better half (ceil), ranked by test accuracy, then validation
// accuracy, then lower instance id.
inline std::vector<int> rank_top50(const std::vector<const InstanceResult*>& ok) {
  std::vector<int> order(ok.size());
  for (std::size_t i = 0; i < ok.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    const InstanceResult* ra = ok[static_cast<std::size_t>(a)];
    const InstanceResult* rb = ok[static_cast<std::size_t>(b)];
    if (ra->test_accuracy != rb->test_accuracy) {
      return ra->test_accuracy > rb->test_accuracy;
    }
    if (ra->outcome.best_val_acc != rb->outcome.best_val_acc) {
      return ra->outcome.best_val_acc > rb->outcome.best_val_acc;
    }
    return ra->instance < rb->instance;
  });
  std::size_t keep = (ok.size() + 1) / 2;
  order.resize(keep);
  return order;
}

inline FamilySummary summarize_family(
    const std::vector<const InstanceResult*>& all) {
  FamilySummary s;
  std::vector<const InstanceResult*> ok;
  for (const InstanceResult* r : all) {
    s.n_instances += 1;
    if (r->outcome.failed) {
      s.n_failed += 1;
    } else {
      ok.push_back(r);
    }
  }
  if (ok.empty()) return s;
  auto mean_over = [&](const std::vector<const InstanceResult*>& rs) {
    double sum = 0.0;
    for (const InstanceResult* r : rs) sum += r->test_accuracy;
    return sum / static_cast<double>(rs.size());
  };
  s.test_acc_mean_all = mean_over(ok);
  std::vector<int> top = rank_top50(ok);
  std::vector<const InstanceResult*> top_rs;
  for (int i : top) {
    top_rs.push_back(ok[static_cast<std::size_t>(i)]);
    s.top_instances.push_back(ok[static_cast<std::size_t>(i)]->instance);
  }
  s.test_acc_mean_top50 = mean_over(top_rs);
  double val_sum = 0.0;
  for (const InstanceResult* r : top_rs) val_sum += r->outcome.best_val_acc;
  s.val_acc_mean_top50 = val_sum / static_cast<double>(top_rs.size());

  auto case_mean = [](const std::vector<const InstanceResult*>& rs) {
    std::map<std::string, double> sums;
    std::map<std::string, int> counts;
    for (const InstanceResult* r : rs) {
      for (const auto& [key, acc] : r->case_accuracy) {
        sums[key] += acc;
        counts[key] += 1;
      }
    }
    std::map<std::string, double> means;
    for (const auto& [key, sum] : sums) means[key] = sum / counts[key];
    return means;
  };
  s.case_acc_all = case_mean(ok);
  s.case_acc_top50 = case_mean(top_rs);
  return s;
}

}  // namespace detail

// Trains every configured family for `instances_per_family` seeds under the
// named preset. Deterministic given the master seed, regardless of worker
// count: every job's seeds are derived from (master seed, preset, family,
// instance) alone and results are reduced in job order.
inline PresetReport run_experiment(const std::string& preset_name,
                                   const ExperimentConfig& cfg) {
  cfg.train.validate();
  Preset preset = make_preset(preset_name, cfg.master_seed);
  std::vector<SimProgram> dataset = generate_dataset(preset.gen);
  DatasetSplit split = compose(preset.plan, dataset);
  if (split.train.empty() || split.val.empty() || split.test.empty()) {
    throw std::invalid_argument("preset " + preset_name +
                                " produced a degenerate split");
  }

  PresetReport report;
  report.preset = preset_name;
  report.master_seed = cfg.master_seed;
  report.train_size = static_cast<int>(split.train.size());
  report.val_size = static_cast<int>(split.val.size());
  report.test_size = static_cast<int>(split.test.size());
  report.discarded_size = static_cast<int>(split.discarded.size());
  for (int idx : split.test) {
    report.case_counts[case_key(dataset[static_cast<std::size_t>(idx)].pattern)] += 1;
  }

  auto encode_set = [&](const std::vector<int>& idx, int left, int right,
                        std::uint64_t pad_stream) {
    std::vector<nn::EncodedSample> out;
    out.reserve(idx.size());
    for (int i : idx) {
      const SimProgram& p = dataset[static_cast<std::size_t>(i)];
      if (left == 0 && right == 0) {
        out.push_back(nn::encode(p));
      } else {
        out.push_back(nn::encode(pad_program(
            p, left, right,
            mix_seed(cfg.master_seed,
                     pad_stream ^ static_cast<std::uint64_t>(i)))));
      }
    }
    return out;
  };

  const auto enc_train = encode_set(split.train, 0, 0, 0);
  const auto enc_val = encode_set(split.val, 0, 0, 0);
  const auto enc_test = encode_set(split.test, 0, 0, 0);

  // The LSTM noise-padding remedy: pad train on the left and val/test on the
  // right so meaningful tokens sit mid-program on both sides of the split.
  std::vector<nn::EncodedSample> enc_train_pad, enc_val_pad, enc_test_pad;
  bool wants_padding = preset.lstm_padding && cfg.train.lstm_noise_padding &&
                       std::find(cfg.families.begin(), cfg.families.end(),
                                 Family::LSTM) != cfg.families.end();
  if (wants_padding) {
    std::uint64_t pad_stream = fnv1a(preset_name + "/pad");
    enc_train_pad = encode_set(split.train, preset.pad_amount, 0, pad_stream);
    enc_val_pad = encode_set(split.val, 0, preset.pad_amount, pad_stream);
    enc_test_pad = encode_set(split.test, 0, preset.pad_amount, pad_stream);
  }

  int n_fam = static_cast<int>(cfg.families.size());
  int n_inst = cfg.train.instances_per_family;
  report.instances.resize(static_cast<std::size_t>(n_fam * n_inst));

  detail::run_jobs(cfg.workers, n_fam * n_inst, [&](int job) {
    Family family = cfg.families[static_cast<std::size_t>(job / n_inst)];
    int instance = job % n_inst;
    bool padded = wants_padding && family == Family::LSTM;

    ModelSpec spec;
    spec.family = family;
    spec.input_length = preset.gen.program_length + (padded ? preset.pad_amount : 0);
    spec.seed = mix_seed(cfg.master_seed,
                         fnv1a(preset_name + "/" + std::string(name_of(family))) +
                             static_cast<std::uint64_t>(instance));
    TrainConfig train_cfg = cfg.train;
    if (family == Family::CNN && preset.cnn_l2 && train_cfg.l2_lambda == 0.0) {
      train_cfg.l2_lambda = 0.01;
    }

    InstanceResult res;
    res.family = family;
    res.instance = instance;
    res.model_seed = spec.seed;
    auto t0 = std::chrono::steady_clock::now();
    auto model = build_model(spec);
    std::uint64_t shuffle_seed = mix_seed(
        cfg.master_seed, fnv1a(preset_name + "/" + std::string(name_of(family)) +
                               "/shuffle") +
                             static_cast<std::uint64_t>(instance));
    res.outcome = train_model(*model, padded ? enc_train_pad : enc_train,
                              padded ? enc_val_pad : enc_val, train_cfg,
                              shuffle_seed);
    if (!res.outcome.failed) {
      const auto& test_set = padded ? enc_test_pad : enc_test;
      res.test_accuracy = accuracy(*model, test_set);
      res.case_accuracy = accuracy_by_pattern(*model, dataset, split.test,
                                              test_set);
    }
    res.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    report.instances[static_cast<std::size_t>(job)] = std::move(res);
  });

  for (int f = 0; f < n_fam; ++f) {
    std::vector<const InstanceResult*> rs;
    for (int i = 0; i < n_inst; ++i) {
      rs.push_back(&report.instances[static_cast<std::size_t>(f * n_inst + i)]);
    }
    report.families[cfg.families[static_cast<std::size_t>(f)]] =
        detail::summarize_family(rs);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Property scores.
// ---------------------------------------------------------------------------

struct PropertyScores {
  double p1 = 0.0;  // position variance: overall accuracy under Filter 2
  double p2 = 0.0;  // distance variance: (WU,DR) accuracy under Filter 4
  double p3 = 0.0;  // relative ordering: min(1-r, r) / 0.5 over Filters 1+3
  bool p3_defined = false;
};

// Scores per family from the preset reports of one difficulty variant.
// Requires filter2 (P1), filter4 (P2) and both filter1 and filter3 (P3).
inline std::map<Family, PropertyScores> property_scores(
    const std::map<std::string, PresetReport>& reports,
    const std::string& variant = "easy") {
  auto get = [&](const std::string& base) -> const PresetReport& {
    auto it = reports.find(base + "_" + variant);
    if (it == reports.end()) {
      throw MissingPresetError("property_scores: missing preset " + base +
                               "_" + variant);
    }
    return it->second;
  };
  const PresetReport& f1 = get("filter1");
  const PresetReport& f2 = get("filter2");
  const PresetReport& f3 = get("filter3");
  const PresetReport& f4 = get("filter4");

  std::map<Family, PropertyScores> out;
  for (const auto& [family, summary2] : f2.families) {
    PropertyScores s;
    s.p1 = summary2.test_acc_mean_top50;
    auto it4 = f4.families.find(family);
    if (it4 != f4.families.end()) {
      auto c = it4->second.case_acc_top50.find("wu|dr");
      s.p2 = c != it4->second.case_acc_top50.end() ? c->second : 0.0;
    }
    auto case_acc = [&](const PresetReport& r, const char* key) {
      auto fit = r.families.find(family);
      if (fit == r.families.end()) return 0.0;
      auto cit = fit->second.case_acc_top50.find(key);
      return cit != fit->second.case_acc_top50.end() ? cit->second : 0.0;
    };
    // Macro-average the two presets, then the ordering ratio.
    double dr_wu = 0.5 * (case_acc(f1, "wu|dr") + case_acc(f3, "wu|dr"));
    double dr_uw = 0.5 * (case_acc(f1, "uw|dr") + case_acc(f3, "uw|dr"));
    if (dr_wu + dr_uw > 0.0) {
      double r = dr_wu / (dr_wu + dr_uw);
      s.p3 = std::min(1.0 - r, r) / 0.5;
      s.p3_defined = true;
    }
    out[family] = s;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Report files. report.csv and per_pattern.csv are deterministic (no wall
// clock); timings go to histories.jsonl only.
// ---------------------------------------------------------------------------

namespace detail {

inline std::string fmt6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace detail

inline std::string report_csv(const PresetReport& report) {
  std::string csv = "family,preset,metric,value\n";
  for (const auto& [family, s] : report.families) {
    std::string fam(name_of(family));
    auto row = [&](const std::string& metric, const std::string& value) {
      csv += fam + "," + report.preset + "," + metric + "," + value + "\n";
    };
    row("test_acc_mean_all", detail::fmt6(s.test_acc_mean_all));
    row("test_acc_mean_top50", detail::fmt6(s.test_acc_mean_top50));
    row("val_acc_mean_top50", detail::fmt6(s.val_acc_mean_top50));
    row("n_instances", std::to_string(s.n_instances));
    row("n_failed", std::to_string(s.n_failed));
    row("train_size", std::to_string(report.train_size));
    row("val_size", std::to_string(report.val_size));
    row("test_size", std::to_string(report.test_size));
  }
  return csv;
}

inline std::string per_pattern_csv(const PresetReport& report) {
  std::string csv = "family,preset,f2_kind,f3_kind,n_test,acc_mean_all,acc_mean_top50\n";
  for (const auto& [family, s] : report.families) {
    for (const PatternCase& c : all_cases()) {
      std::string key = case_key(c);
      auto cnt = report.case_counts.find(key);
      if (cnt == report.case_counts.end()) continue;
      auto a = s.case_acc_all.find(key);
      auto t = s.case_acc_top50.find(key);
      csv += std::string(name_of(family)) + "," + report.preset + "," +
             std::string(name_of(c.f2)) + "," + std::string(name_of(c.f3)) +
             "," + std::to_string(cnt->second) + "," +
             detail::fmt6(a == s.case_acc_all.end() ? 0.0 : a->second) + "," +
             detail::fmt6(t == s.case_acc_top50.end() ? 0.0 : t->second) + "\n";
    }
  }
  return csv;
}

inline Json instance_to_json(const PresetReport& report,
                             const InstanceResult& r) {
  Json j;
  j["preset"] = report.preset;
  j["family"] = std::string(name_of(r.family));
  j["instance"] = r.instance;
  j["model_seed"] = r.model_seed;
  j["failed"] = r.outcome.failed;
  if (r.outcome.failed) j["failure_reason"] = r.outcome.failure_reason;
  j["best_epoch"] = r.outcome.best_epoch;
  j["best_val_acc"] = r.outcome.best_val_acc;
  j["test_accuracy"] = r.test_accuracy;
  j["wall_ms"] = r.wall_ms;
  Json cases;
  for (const auto& [key, acc] : r.case_accuracy) cases[key] = acc;
  j["case_accuracy"] = cases;
  Json epochs = Json::array();
  for (const EpochStats& e : r.outcome.history) {
    Json ej;
    ej["train_loss"] = e.train_loss;
    ej["train_acc"] = e.train_acc;
    ej["val_loss"] = e.val_loss;
    ej["val_acc"] = e.val_acc;
    epochs.push_back(ej);
  }
  j["epochs"] = epochs;
  return j;
}

inline void write_preset_report(const std::string& dir,
                                const PresetReport& report) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  {
    std::ofstream os(dir + "/report.csv", std::ios::binary);
    os << report_csv(report);
  }
  {
    std::ofstream os(dir + "/per_pattern.csv", std::ios::binary);
    os << per_pattern_csv(report);
  }
  {
    std::ofstream os(dir + "/histories.jsonl", std::ios::binary);
    Json header;
    header["preset"] = report.preset;
    header["master_seed"] = report.master_seed;
    header["train_size"] = report.train_size;
    header["val_size"] = report.val_size;
    header["test_size"] = report.test_size;
    header["discarded_size"] = report.discarded_size;
    Json counts;
    for (const auto& [key, n] : report.case_counts) counts[key] = n;
    header["case_counts"] = counts;
    os << header.dump() << '\n';
    for (const InstanceResult& r : report.instances) {
      os << instance_to_json(report, r).dump() << '\n';
    }
  }
}

inline Json scores_to_json(const std::map<Family, PropertyScores>& scores,
                           const std::string& variant) {
  Json j;
  j["variant"] = variant;
  Json fams;
  for (const auto& [family, s] : scores) {
    Json f;
    f["p1"] = s.p1;
    f["p2"] = s.p2;
    if (s.p3_defined) {
      f["p3"] = s.p3;
    } else {
      f["p3"] = nullptr;
    }
    fams[std::string(name_of(family))] = f;
  }
  j["families"] = fams;
  return j;
}

// Rebuilds a PresetReport from a histories.jsonl file (the `report` command's
// input path).
inline PresetReport read_histories(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open histories: " + path);
  PresetReport report;
  std::string line;
  std::vector<InstanceResult> instances;
  bool have_header = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    Json j = Json::parse(line);
    if (!j.contains("instance")) {
      report.preset = j.at("preset").get<std::string>();
      report.master_seed = j.at("master_seed").get<std::uint64_t>();
      report.train_size = j.at("train_size").get<int>();
      report.val_size = j.at("val_size").get<int>();
      report.test_size = j.at("test_size").get<int>();
      report.discarded_size = j.value("discarded_size", 0);
      for (const auto& [key, n] : j.at("case_counts").items()) {
        report.case_counts[key] = n.get<int>();
      }
      have_header = true;
      continue;
    }
    InstanceResult r;
    r.family = family_from_name(j.at("family").get<std::string>());
    r.instance = j.at("instance").get<int>();
    r.model_seed = j.at("model_seed").get<std::uint64_t>();
    r.outcome.failed = j.at("failed").get<bool>();
    r.outcome.best_epoch = j.at("best_epoch").get<int>();
    r.outcome.best_val_acc = j.at("best_val_acc").get<double>();
    r.test_accuracy = j.at("test_accuracy").get<double>();
    r.wall_ms = j.at("wall_ms").get<long long>();
    for (const auto& [key, acc] : j.at("case_accuracy").items()) {
      r.case_accuracy[key] = acc.get<double>();
    }
    for (const Json& ej : j.at("epochs")) {
      EpochStats e;
      e.train_loss = ej.at("train_loss").get<double>();
      e.train_acc = ej.at("train_acc").get<double>();
      e.val_loss = ej.at("val_loss").get<double>();
      e.val_acc = ej.at("val_acc").get<double>();
      r.outcome.history.push_back(e);
    }
    instances.push_back(std::move(r));
  }
  if (!have_header) throw std::runtime_error("histories without header: " + path);
  report.instances = std::move(instances);

  std::map<Family, std::vector<const InstanceResult*>> by_family;
  for (const InstanceResult& r : report.instances) {
    by_family[r.family].push_back(&r);
  }
  for (const auto& [family, rs] : by_family) {
    report.families[family] = detail::summarize_family(rs);
  }
  return report;
}

}  // namespace racelab
