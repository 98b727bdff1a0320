#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "racelab/grammar.hpp"
#include "racelab/nn/encoding.hpp"
#include "racelab/nn/layers.hpp"
#include "racelab/rng.hpp"

namespace racelab {

enum class Family { Feedforward, DeepSetsV1, DeepSetsV2, CNN, LSTM };

// The four headline families; DeepSets v2 is trainable but kept out of the
// standard comparison.
inline constexpr std::array<Family, 4> kHeadlineFamilies = {
    Family::Feedforward, Family::DeepSetsV1, Family::CNN, Family::LSTM};

inline std::string_view name_of(Family f) {
  switch (f) {
    case Family::Feedforward: return "feedforward";
    case Family::DeepSetsV1: return "deepsets_v1";
    case Family::DeepSetsV2: return "deepsets_v2";
    case Family::CNN: return "cnn";
    case Family::LSTM: return "lstm";
  }
  return "?";
}

inline Family family_from_name(std::string_view name) {
  for (Family f : {Family::Feedforward, Family::DeepSetsV1, Family::DeepSetsV2,
                   Family::CNN, Family::LSTM}) {
    if (name_of(f) == name) return f;
  }
  throw std::invalid_argument("unknown model family: " + std::string(name));
}

struct ModelSpec {
  Family family = Family::Feedforward;
  int input_length = 10;
  std::vector<int> branch_sizes = {64, 32};   // feedforward branch stack
  std::vector<int> head_sizes = {64, 32};     // hidden head sizes before the
                                              // single sigmoid unit
  std::vector<int> cnn_channels = {16, 32, 64};
  int conv_kernel = 3;
  int pool_width = 2;
  int lstm_hidden = 32;
  std::vector<int> ds_branch_sizes = {64, 30};  // DeepSets v1 branch stack
  int ds_parallel_size = 30;                    // parallel dense on the concat
  std::uint64_t seed = 0;

  void validate() const {
    if (input_length < 1) throw std::invalid_argument("input_length must be >= 1");
    auto positive = [](const std::vector<int>& v, const char* what) {
      if (v.empty()) throw std::invalid_argument(std::string(what) + " empty");
      for (int s : v) {
        if (s < 1) throw std::invalid_argument(std::string(what) + " must be positive");
      }
    };
    positive(head_sizes, "head_sizes");
    switch (family) {
      case Family::Feedforward: positive(branch_sizes, "branch_sizes"); break;
      case Family::DeepSetsV1:
        positive(ds_branch_sizes, "ds_branch_sizes");
        if (ds_parallel_size < 1) {
          throw std::invalid_argument("ds_parallel_size must be positive");
        }
        break;
      case Family::DeepSetsV2: break;
      case Family::CNN: {
        positive(cnn_channels, "cnn_channels");
        if (cnn_channels.size() != 3) {
          throw std::invalid_argument("cnn_channels must list 3 stages");
        }
        if (conv_kernel < 1 || conv_kernel % 2 == 0) {
          throw std::invalid_argument("conv_kernel must be odd and >= 1");
        }
        if (pool_width < 1) throw std::invalid_argument("pool_width must be >= 1");
        int len = input_length;
        for (int stage = 0; stage < 2; ++stage) {
          len = len / pool_width;
          if (len < 1) {
            throw std::invalid_argument(
                "input_length too short for the CNN pooling stack");
          }
        }
        break;
      }
      case Family::LSTM:
        if (lstm_hidden < 1) throw std::invalid_argument("lstm_hidden must be >= 1");
        break;
    }
  }
};

inline nlohmann::ordered_json model_spec_to_json(const ModelSpec& s) {
  nlohmann::ordered_json j;
  j["family"] = std::string(name_of(s.family));
  j["input_length"] = s.input_length;
  j["branch_sizes"] = s.branch_sizes;
  j["head_sizes"] = s.head_sizes;
  j["cnn_channels"] = s.cnn_channels;
  j["conv_kernel"] = s.conv_kernel;
  j["pool_width"] = s.pool_width;
  j["lstm_hidden"] = s.lstm_hidden;
  j["ds_branch_sizes"] = s.ds_branch_sizes;
  j["ds_parallel_size"] = s.ds_parallel_size;
  j["seed"] = s.seed;
  return j;
}

inline ModelSpec model_spec_from_json(const nlohmann::ordered_json& j) {
  ModelSpec s;
  s.family = family_from_name(j.at("family").get<std::string>());
  s.input_length = j.at("input_length").get<int>();
  s.branch_sizes = j.at("branch_sizes").get<std::vector<int>>();
  s.head_sizes = j.at("head_sizes").get<std::vector<int>>();
  s.cnn_channels = j.at("cnn_channels").get<std::vector<int>>();
  s.conv_kernel = j.at("conv_kernel").get<int>();
  s.pool_width = j.at("pool_width").get<int>();
  s.lstm_hidden = j.at("lstm_hidden").get<int>();
  s.ds_branch_sizes = j.at("ds_branch_sizes").get<std::vector<int>>();
  s.ds_parallel_size = j.at("ds_parallel_size").get<int>();
  s.seed = j.at("seed").get<std::uint64_t>();
  return s;
}

namespace detail {

// dense -> relu, repeated.
class DenseStack {
 public:
  DenseStack(const std::string& prefix, int in, const std::vector<int>& sizes) {
    dense_.reserve(sizes.size());
    relu_.resize(sizes.size());
    int cur = in;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      dense_.emplace_back(prefix + "/dense" + std::to_string(i + 1), cur,
                          sizes[i]);
      cur = sizes[i];
    }
    out_ = cur;
  }

  void init(Rng& rng) {
    for (auto& d : dense_) d.init(rng);
  }

  const nn::Vec& forward(const nn::Vec& x) {
    const nn::Vec* cur = &x;
    for (std::size_t i = 0; i < dense_.size(); ++i) {
      cur = &relu_[i].forward(dense_[i].forward(*cur));
    }
    y_ = *cur;
    return y_;
  }

  nn::Vec backward(const nn::Vec& gy) {
    nn::Vec g = gy;
    for (std::size_t i = dense_.size(); i > 0; --i) {
      g = dense_[i - 1].backward(relu_[i - 1].backward(g));
    }
    return g;
  }

  void collect(std::vector<nn::Param*>& out) {
    for (auto& d : dense_) {
      out.push_back(&d.W);
      out.push_back(&d.b);
    }
  }

  int out_size() const { return out_; }

 private:
  std::vector<nn::Dense> dense_;
  std::vector<nn::ReLU> relu_;
  nn::Vec y_;
  int out_ = 0;
};

// Hidden dense stack, then a single sigmoid unit.
class Head {
 public:
  Head(const std::string& prefix, int in, const std::vector<int>& sizes)
      : stack_(prefix, in, sizes),
        out_(prefix + "/out", sizes.back(), 1) {}

  void init(Rng& rng) {
    stack_.init(rng);
    out_.init(rng);
  }

  double forward(const nn::Vec& x) {
    const nn::Vec& h = stack_.forward(x);
    double z = out_.forward(h)[0];
    p_ = nn::sigmoid(z);
    return p_;
  }

  nn::Vec backward(double dldp) {
    double dz = dldp * p_ * (1.0 - p_);
    return stack_.backward(out_.backward({dz}));
  }

  void collect(std::vector<nn::Param*>& out) {
    stack_.collect(out);
    out.push_back(&out_.W);
    out.push_back(&out_.b);
  }

 private:
  DenseStack stack_;
  nn::Dense out_;
  double p_ = 0.5;
};

inline nn::Vec concat(const std::vector<const nn::Vec*>& parts) {
  nn::Vec out;
  std::size_t total = 0;
  for (const nn::Vec* p : parts) total += p->size();
  out.reserve(total);
  for (const nn::Vec* p : parts) out.insert(out.end(), p->begin(), p->end());
  return out;
}

}  // namespace detail

// A built network: three per-function branches merged into a shared sigmoid
// head. forward() must precede backward() for the same sample; a model
// instance is single-writer during training.
class Model {
 public:
  virtual ~Model() = default;

  // Probability that the sample is buggy.
  virtual double forward(const nn::EncodedSample& sample) = 0;
  // Accumulates parameter gradients for dLoss/dprobability.
  virtual void backward(double dldp) = 0;

  const std::vector<nn::Param*>& params() { return params_; }
  const ModelSpec& spec() const { return spec_; }

  long long parameter_count() const {
    long long n = 0;
    for (const nn::Param* p : params_) n += static_cast<long long>(p->size());
    return n;
  }

 protected:
  explicit Model(const ModelSpec& spec) : spec_(spec) {}

  void check_input(const nn::EncodedSample& s) const {
    if (s.length() != spec_.input_length || s.f2.rows != spec_.input_length ||
        s.f3.rows != spec_.input_length) {
      throw nn::ShapeError("sample length " + std::to_string(s.length()) +
                           " does not match model input length " +
                           std::to_string(spec_.input_length));
    }
  }

  ModelSpec spec_;
  std::vector<nn::Param*> params_;
};

namespace detail {

class FeedforwardModel final : public Model {
 public:
  explicit FeedforwardModel(const ModelSpec& spec)
      : Model(spec),
        b1_("branch1", spec.input_length * 8, spec.branch_sizes),
        b2_("branch2", spec.input_length * 8, spec.branch_sizes),
        b3_("branch3", spec.input_length * 8, spec.branch_sizes),
        head_("head", 3 * b1_.out_size(), spec.head_sizes) {
    b1_.collect(params_);
    b2_.collect(params_);
    b3_.collect(params_);
    head_.collect(params_);
    Rng rng(spec.seed);
    b1_.init(rng);
    b2_.init(rng);
    b3_.init(rng);
    head_.init(rng);
  }

  double forward(const nn::EncodedSample& s) override {
    check_input(s);
    const nn::Vec& h1 = b1_.forward(s.f1.a);
    const nn::Vec& h2 = b2_.forward(s.f2.a);
    const nn::Vec& h3 = b3_.forward(s.f3.a);
    return head_.forward(concat({&h1, &h2, &h3}));
  }

  void backward(double dldp) override {
    nn::Vec g = head_.backward(dldp);
    std::size_t w = g.size() / 3;
    b1_.backward(nn::Vec(g.begin(), g.begin() + static_cast<long>(w)));
    b2_.backward(nn::Vec(g.begin() + static_cast<long>(w),
                         g.begin() + static_cast<long>(2 * w)));
    b3_.backward(nn::Vec(g.begin() + static_cast<long>(2 * w), g.end()));
  }

 private:
  DenseStack b1_, b2_, b3_;
  Head head_;
};

class DeepSetsV1Model final : public Model {
 public:
  explicit DeepSetsV1Model(const ModelSpec& spec)
      : Model(spec),
        b1_("branch1", spec.input_length * 8, spec.ds_branch_sizes),
        b2_("branch2", spec.input_length * 8, spec.ds_branch_sizes),
        b3_("branch3", spec.input_length * 8, spec.ds_branch_sizes),
        parallel_("parallel", 3 * b1_.out_size(), spec.ds_parallel_size),
        head_("head", b1_.out_size() + spec.ds_parallel_size, spec.head_sizes) {
    b1_.collect(params_);
    b2_.collect(params_);
    b3_.collect(params_);
    params_.push_back(&parallel_.W);
    params_.push_back(&parallel_.b);
    head_.collect(params_);
    Rng rng(spec.seed);
    b1_.init(rng);
    b2_.init(rng);
    b3_.init(rng);
    parallel_.init(rng);
    head_.init(rng);
  }

  double forward(const nn::EncodedSample& s) override {
    check_input(s);
    const nn::Vec& h1 = b1_.forward(s.f1.a);
    const nn::Vec& h2 = b2_.forward(s.f2.a);
    const nn::Vec& h3 = b3_.forward(s.f3.a);
    const nn::Vec& summed = sum_.forward({&h1, &h2, &h3});
    const nn::Vec& par =
        par_relu_.forward(parallel_.forward(concat({&h1, &h2, &h3})));
    return head_.forward(concat({&summed, &par}));
  }

  void backward(double dldp) override {
    nn::Vec g = head_.backward(dldp);
    std::size_t w = g.size() - static_cast<std::size_t>(spec_.ds_parallel_size);
    nn::Vec gsum(g.begin(), g.begin() + static_cast<long>(w));
    nn::Vec gpar(g.begin() + static_cast<long>(w), g.end());
    nn::Vec gcat = parallel_.backward(par_relu_.backward(gpar));
    std::vector<nn::Vec> gsums = sum_.backward(gsum);
    std::size_t bw = gcat.size() / 3;
    auto merge = [&](std::size_t k) {
      nn::Vec gb(gcat.begin() + static_cast<long>(k * bw),
                 gcat.begin() + static_cast<long>((k + 1) * bw));
      for (std::size_t i = 0; i < bw; ++i) gb[i] += gsums[k][i];
      return gb;
    };
    b1_.backward(merge(0));
    b2_.backward(merge(1));
    b3_.backward(merge(2));
  }

 private:
  DenseStack b1_, b2_, b3_;
  nn::SumMerge sum_;
  nn::Dense parallel_;
  nn::ReLU par_relu_;
  Head head_;
};

class DeepSetsV2Model final : public Model {
 public:
  explicit DeepSetsV2Model(const ModelSpec& spec)
      : Model(spec),
        b1_("branch1/possum", spec.input_length, 8),
        b2_("branch2/possum", spec.input_length, 8),
        b3_("branch3/possum", spec.input_length, 8),
        head_("head", 24, spec.head_sizes) {
    for (auto* b : {&b1_, &b2_, &b3_}) params_.push_back(&b->a);
    head_.collect(params_);
    Rng rng(spec.seed);
    b1_.init(rng);
    b2_.init(rng);
    b3_.init(rng);
    head_.init(rng);
  }

  double forward(const nn::EncodedSample& s) override {
    check_input(s);
    const nn::Vec& h1 = b1_.forward(s.f1);
    const nn::Vec& h2 = b2_.forward(s.f2);
    const nn::Vec& h3 = b3_.forward(s.f3);
    return head_.forward(concat({&h1, &h2, &h3}));
  }

  void backward(double dldp) override {
    nn::Vec g = head_.backward(dldp);
    std::size_t w = g.size() / 3;
    b1_.backward(nn::Vec(g.begin(), g.begin() + static_cast<long>(w)));
    b2_.backward(nn::Vec(g.begin() + static_cast<long>(w),
                         g.begin() + static_cast<long>(2 * w)));
    b3_.backward(nn::Vec(g.begin() + static_cast<long>(2 * w), g.end()));
  }

 private:
  nn::PositionWeightedSum b1_, b2_, b3_;
  Head head_;
};

// One CNN branch: (conv -> relu -> pool) x 2, conv -> relu, global max.
class CnnBranch {
 public:
  CnnBranch(const std::string& prefix, const ModelSpec& spec)
      : conv1_(prefix + "/conv1", spec.conv_kernel, 8, spec.cnn_channels[0]),
        conv2_(prefix + "/conv2", spec.conv_kernel, spec.cnn_channels[0],
               spec.cnn_channels[1]),
        conv3_(prefix + "/conv3", spec.conv_kernel, spec.cnn_channels[1],
               spec.cnn_channels[2]),
        pool1_(spec.pool_width), pool2_(spec.pool_width) {}

  void init(Rng& rng) {
    conv1_.init(rng);
    conv2_.init(rng);
    conv3_.init(rng);
  }

  const nn::Vec& forward(const nn::Mat& x) {
    const nn::Mat& c1 = relu1_.forward(conv1_.forward(x));
    const nn::Mat& p1 = pool1_.forward(c1);
    const nn::Mat& c2 = relu2_.forward(conv2_.forward(p1));
    const nn::Mat& p2 = pool2_.forward(c2);
    const nn::Mat& c3 = relu3_.forward(conv3_.forward(p2));
    return gmax_.forward(c3);
  }

  void backward(const nn::Vec& gy) {
    nn::Mat g = gmax_.backward(gy);
    g = conv3_.backward(relu3_.backward(g));
    g = pool2_.backward(g);
    g = conv2_.backward(relu2_.backward(g));
    g = pool1_.backward(g);
    conv1_.backward(relu1_.backward(g));
  }

  void collect(std::vector<nn::Param*>& out) {
    for (auto* c : {&conv1_, &conv2_, &conv3_}) {
      out.push_back(&c->K);
      out.push_back(&c->b);
    }
  }

 private:
  nn::Conv1D conv1_, conv2_, conv3_;
  nn::MaxPool1D pool1_, pool2_;
  nn::ReLUMat relu1_, relu2_, relu3_;
  nn::GlobalMaxPool gmax_;
};

class CnnModel final : public Model {
 public:
  explicit CnnModel(const ModelSpec& spec)
      : Model(spec), b1_("branch1", spec), b2_("branch2", spec),
        b3_("branch3", spec), head_("head", 3 * spec.cnn_channels[2],
                                    spec.head_sizes) {
    b1_.collect(params_);
    b2_.collect(params_);
    b3_.collect(params_);
    head_.collect(params_);
    Rng rng(spec.seed);
    b1_.init(rng);
    b2_.init(rng);
    b3_.init(rng);
    head_.init(rng);
  }

  double forward(const nn::EncodedSample& s) override {
    check_input(s);
    const nn::Vec& h1 = b1_.forward(s.f1);
    const nn::Vec& h2 = b2_.forward(s.f2);
    const nn::Vec& h3 = b3_.forward(s.f3);
    return head_.forward(concat({&h1, &h2, &h3}));
  }

  void backward(double dldp) override {
    nn::Vec g = head_.backward(dldp);
    std::size_t w = g.size() / 3;
    b1_.backward(nn::Vec(g.begin(), g.begin() + static_cast<long>(w)));
    b2_.backward(nn::Vec(g.begin() + static_cast<long>(w),
                         g.begin() + static_cast<long>(2 * w)));
    b3_.backward(nn::Vec(g.begin() + static_cast<long>(2 * w), g.end()));
  }

 private:
  CnnBranch b1_, b2_, b3_;
  Head head_;
};

class LstmModel final : public Model {
 public:
  explicit LstmModel(const ModelSpec& spec)
      : Model(spec), b1_("branch1/lstm", 8, spec.lstm_hidden),
        b2_("branch2/lstm", 8, spec.lstm_hidden),
        b3_("branch3/lstm", 8, spec.lstm_hidden),
        head_("head", 3 * spec.lstm_hidden, spec.head_sizes) {
    for (auto* b : {&b1_, &b2_, &b3_}) {
      params_.push_back(&b->Wx);
      params_.push_back(&b->Wh);
      params_.push_back(&b->b);
    }
    head_.collect(params_);
    Rng rng(spec.seed);
    b1_.init(rng);
    b2_.init(rng);
    b3_.init(rng);
    head_.init(rng);
  }

  double forward(const nn::EncodedSample& s) override {
    check_input(s);
    const nn::Vec& h1 = b1_.forward(s.f1);
    const nn::Vec& h2 = b2_.forward(s.f2);
    const nn::Vec& h3 = b3_.forward(s.f3);
    return head_.forward(concat({&h1, &h2, &h3}));
  }

  void backward(double dldp) override {
    nn::Vec g = head_.backward(dldp);
    std::size_t w = g.size() / 3;
    b1_.backward(nn::Vec(g.begin(), g.begin() + static_cast<long>(w)));
    b2_.backward(nn::Vec(g.begin() + static_cast<long>(w),
                         g.begin() + static_cast<long>(2 * w)));
    b3_.backward(nn::Vec(g.begin() + static_cast<long>(2 * w), g.end()));
  }

 private:
  nn::LSTMLayer b1_, b2_, b3_;
  Head head_;
};

}  // namespace detail

inline std::unique_ptr<Model> build_model(const ModelSpec& spec) {
  spec.validate();
  switch (spec.family) {
    case Family::Feedforward:
      return std::make_unique<detail::FeedforwardModel>(spec);
    case Family::DeepSetsV1:
      return std::make_unique<detail::DeepSetsV1Model>(spec);
    case Family::DeepSetsV2:
      return std::make_unique<detail::DeepSetsV2Model>(spec);
    case Family::CNN: return std::make_unique<detail::CnnModel>(spec);
    case Family::LSTM: return std::make_unique<detail::LstmModel>(spec);
  }
  throw std::invalid_argument("unknown model family");
}

// Probability that `p` is buggy under the model. The sample length must match
// the model's input length (pad first if needed).
inline double predict(Model& model, const SimProgram& p) {
  return model.forward(nn::encode(p));
}

inline bool classify(Model& model, const SimProgram& p) {
  return predict(model, p) > 0.5;
}

}  // namespace racelab
