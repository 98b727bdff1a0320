#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <numeric>

#include "racelab/nn/adam.hpp"
#include "racelab/nn/checkpoint.hpp"
#include "racelab/nn/encoding.hpp"
#include "racelab/nn/init.hpp"
#include "racelab/nn/layers.hpp"
#include "racelab/nn/loss.hpp"
#include "racelab/rng.hpp"

namespace racelab::nn {
namespace {

constexpr double kFdStep = 1e-3;
constexpr double kFdTol = 1e-4;

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-3});
}

// Central finite difference of a scalar objective with respect to one slot.
double central_diff(double* slot, const std::function<double()>& eval) {
  double saved = *slot;
  *slot = saved + kFdStep;
  double up = eval();
  *slot = saved - kFdStep;
  double down = eval();
  *slot = saved;
  return (up - down) / (2.0 * kFdStep);
}

// Values bounded away from zero so ReLU kinks cannot sit within the FD step.
Vec random_signal(Rng& rng, std::size_t n) {
  Vec v(n);
  for (double& x : v) {
    double mag = 0.1 + 0.9 * rng.unit();
    x = rng.below(2) == 0 ? mag : -mag;
  }
  return v;
}

Mat random_mat(Rng& rng, int rows, int cols) {
  Mat m(rows, cols);
  m.a = random_signal(rng, m.a.size());
  return m;
}

// Ensures pool windows and channel columns have no near-ties, so argmax
// choices are stable under the FD step.
void separate_column_values(Mat& m, Rng& rng) {
  for (int c = 0; c < m.cols; ++c) {
    std::vector<int> order(static_cast<std::size_t>(m.rows));
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    for (int r = 0; r < m.rows; ++r) {
      double base = -1.0 + 2.0 * (order[static_cast<std::size_t>(r)] + 1.0) /
                               (m.rows + 1.0);
      m(r, c) = base + (rng.unit() - 0.5) * 0.02;
      if (std::abs(m(r, c)) < 0.05) m(r, c) += m(r, c) >= 0 ? 0.1 : -0.1;
    }
  }
}

TEST(OneHot, MatchesAlphabetColumns) {
  Mat m = one_hot(".wu");
  ASSERT_EQ(m.rows, 3);
  ASSERT_EQ(m.cols, 8);
  EXPECT_EQ(m(0, 0), 1.0);  // '.'
  EXPECT_EQ(m(1, 3), 1.0);  // 'w'
  EXPECT_EQ(m(2, 4), 1.0);  // 'u'
  for (int t = 0; t < 3; ++t) {
    double row_sum = 0.0;
    for (int c = 0; c < 8; ++c) row_sum += m(t, c);
    EXPECT_EQ(row_sum, 1.0);
  }
}

TEST(OneHot, EmptyAndRoundTrip) {
  EXPECT_EQ(one_hot("").rows, 0);
  std::string s = ".,_wurcd,w";
  EXPECT_EQ(decode(one_hot(s)), s);
  EXPECT_THROW(one_hot("wxu"), EncodingError);
}

TEST(GradientCheck, Dense) {
  for (int cfg = 0; cfg < 20; ++cfg) {
    Rng rng(100 + static_cast<std::uint64_t>(cfg));
    int in = 1 + static_cast<int>(rng.below(7));
    int out = 1 + static_cast<int>(rng.below(7));
    Dense layer("d", in, out);
    layer.init(rng);
    Vec x = random_signal(rng, static_cast<std::size_t>(in));
    Vec coeff = random_signal(rng, static_cast<std::size_t>(out));
    auto eval = [&]() {
      Vec y = layer.forward(x);
      double s = 0.0;
      for (int o = 0; o < out; ++o) s += coeff[static_cast<std::size_t>(o)] * y[static_cast<std::size_t>(o)];
      return s;
    };
    eval();
    layer.W.zero_grad();
    layer.b.zero_grad();
    Vec gx = layer.backward(coeff);
    for (std::size_t i = 0; i < layer.W.size(); ++i) {
      EXPECT_LT(rel_err(layer.W.g[i], central_diff(&layer.W.w[i], eval)), kFdTol);
    }
    for (std::size_t i = 0; i < layer.b.size(); ++i) {
      EXPECT_LT(rel_err(layer.b.g[i], central_diff(&layer.b.w[i], eval)), kFdTol);
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
      EXPECT_LT(rel_err(gx[i], central_diff(&x[i], eval)), kFdTol);
    }
  }
}

TEST(GradientCheck, Conv1DSameAndValid) {
  for (int cfg = 0; cfg < 20; ++cfg) {
    Rng rng(200 + static_cast<std::uint64_t>(cfg));
    int cin = 1 + static_cast<int>(rng.below(4));
    int cout = 1 + static_cast<int>(rng.below(4));
    int len = 3 + static_cast<int>(rng.below(6));
    ConvPadding pad = cfg % 2 == 0 ? ConvPadding::Same : ConvPadding::Valid;
    Conv1D layer("c", 3, cin, cout, pad);
    layer.init(rng);
    Mat x = random_mat(rng, len, cin);
    int lout = pad == ConvPadding::Same ? len : len - 2;
    Mat coeff = random_mat(rng, lout, cout);
    auto eval = [&]() {
      const Mat& y = layer.forward(x);
      double s = 0.0;
      for (std::size_t i = 0; i < y.a.size(); ++i) s += coeff.a[i] * y.a[i];
      return s;
    };
    eval();
    layer.K.zero_grad();
    layer.b.zero_grad();
    Mat gx = layer.backward(coeff);
    for (std::size_t i = 0; i < layer.K.size(); ++i) {
      EXPECT_LT(rel_err(layer.K.g[i], central_diff(&layer.K.w[i], eval)), kFdTol);
    }
    for (std::size_t i = 0; i < layer.b.size(); ++i) {
      EXPECT_LT(rel_err(layer.b.g[i], central_diff(&layer.b.w[i], eval)), kFdTol);
    }
    for (std::size_t i = 0; i < x.a.size(); ++i) {
      EXPECT_LT(rel_err(gx.a[i], central_diff(&x.a[i], eval)), kFdTol);
    }
  }
}

TEST(GradientCheck, PoolsAndActivations) {
  for (int cfg = 0; cfg < 20; ++cfg) {
    Rng rng(300 + static_cast<std::uint64_t>(cfg));
    int len = 4 + static_cast<int>(rng.below(6));
    int ch = 1 + static_cast<int>(rng.below(4));
    Mat x = random_mat(rng, len, ch);
    separate_column_values(x, rng);

    MaxPool1D pool(2);
    Mat coeff_p = random_mat(rng, len / 2, ch);
    auto eval_pool = [&]() {
      const Mat& y = pool.forward(x);
      double s = 0.0;
      for (std::size_t i = 0; i < y.a.size(); ++i) s += coeff_p.a[i] * y.a[i];
      return s;
    };
    eval_pool();
    Mat gx = pool.backward(coeff_p);
    for (std::size_t i = 0; i < x.a.size(); ++i) {
      EXPECT_LT(rel_err(gx.a[i], central_diff(&x.a[i], eval_pool)), kFdTol);
    }

    GlobalMaxPool gmax;
    Vec coeff_g = random_signal(rng, static_cast<std::size_t>(ch));
    auto eval_gmax = [&]() {
      const Vec& y = gmax.forward(x);
      double s = 0.0;
      for (int c = 0; c < ch; ++c) s += coeff_g[static_cast<std::size_t>(c)] * y[static_cast<std::size_t>(c)];
      return s;
    };
    eval_gmax();
    Mat ggx = gmax.backward(coeff_g);
    for (std::size_t i = 0; i < x.a.size(); ++i) {
      EXPECT_LT(rel_err(ggx.a[i], central_diff(&x.a[i], eval_gmax)), kFdTol);
    }

    ReLU relu;
    Vec xv = random_signal(rng, 9);
    Vec coeff_r = random_signal(rng, 9);
    auto eval_relu = [&]() {
      const Vec& y = relu.forward(xv);
      double s = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) s += coeff_r[i] * y[i];
      return s;
    };
    eval_relu();
    Vec grx = relu.backward(coeff_r);
    for (std::size_t i = 0; i < xv.size(); ++i) {
      EXPECT_LT(rel_err(grx[i], central_diff(&xv[i], eval_relu)), kFdTol);
    }

    Sigmoid sig;
    Vec zv = random_signal(rng, 7);
    Vec coeff_s = random_signal(rng, 7);
    auto eval_sig = [&]() {
      const Vec& y = sig.forward(zv);
      double s = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) s += coeff_s[i] * y[i];
      return s;
    };
    eval_sig();
    Vec gsx = sig.backward(coeff_s);
    for (std::size_t i = 0; i < zv.size(); ++i) {
      EXPECT_LT(rel_err(gsx[i], central_diff(&zv[i], eval_sig)), kFdTol);
    }
  }
}

TEST(GradientCheck, LstmLayer) {
  for (int cfg = 0; cfg < 20; ++cfg) {
    Rng rng(400 + static_cast<std::uint64_t>(cfg));
    int in = 2 + static_cast<int>(rng.below(4));
    int hidden = 2 + static_cast<int>(rng.below(4));
    int steps = 2 + static_cast<int>(rng.below(4));
    LSTMLayer layer("l", in, hidden);
    layer.init(rng);
    Mat x = random_mat(rng, steps, in);
    Vec coeff = random_signal(rng, static_cast<std::size_t>(hidden));
    auto eval = [&]() {
      const Vec& h = layer.forward(x);
      double s = 0.0;
      for (std::size_t i = 0; i < h.size(); ++i) s += coeff[i] * h[i];
      return s;
    };
    eval();
    for (Param* p : {&layer.Wx, &layer.Wh, &layer.b}) p->zero_grad();
    Mat gx = layer.backward(coeff);
    // Sample parameters; the tensors are bigger here.
    for (Param* p : {&layer.Wx, &layer.Wh, &layer.b}) {
      for (int probe = 0; probe < 12; ++probe) {
        std::size_t i = static_cast<std::size_t>(rng.below(p->size()));
        EXPECT_LT(rel_err(p->g[i], central_diff(&p->w[i], eval)), kFdTol)
            << p->name;
      }
    }
    for (std::size_t i = 0; i < x.a.size(); ++i) {
      EXPECT_LT(rel_err(gx.a[i], central_diff(&x.a[i], eval)), kFdTol);
    }
  }
}

TEST(GradientCheck, PositionWeightedSum) {
  for (int cfg = 0; cfg < 20; ++cfg) {
    Rng rng(500 + static_cast<std::uint64_t>(cfg));
    int len = 2 + static_cast<int>(rng.below(6));
    int ch = 1 + static_cast<int>(rng.below(6));
    PositionWeightedSum layer("p", len, ch);
    layer.init(rng);
    Mat x = random_mat(rng, len, ch);
    Vec coeff = random_signal(rng, static_cast<std::size_t>(ch));
    auto eval = [&]() {
      const Vec& y = layer.forward(x);
      double s = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) s += coeff[i] * y[i];
      return s;
    };
    eval();
    layer.a.zero_grad();
    Mat gx = layer.backward(coeff);
    for (std::size_t i = 0; i < layer.a.size(); ++i) {
      EXPECT_LT(rel_err(layer.a.g[i], central_diff(&layer.a.w[i], eval)), kFdTol);
    }
    for (std::size_t i = 0; i < x.a.size(); ++i) {
      EXPECT_LT(rel_err(gx.a[i], central_diff(&x.a[i], eval)), kFdTol);
    }
  }
}

TEST(SumMerge, PermutationInvariantAndGradientFansOut) {
  Rng rng(77);
  Vec a = random_signal(rng, 6);
  Vec b = random_signal(rng, 6);
  Vec c = random_signal(rng, 6);
  SumMerge merge;
  Vec y1 = merge.forward({&a, &b, &c});
  Vec y2 = merge.forward({&c, &a, &b});
  ASSERT_EQ(y1.size(), y2.size());
  for (std::size_t i = 0; i < y1.size(); ++i) {
    EXPECT_NEAR(y1[i], y2[i], 1e-12);  // up to summation order
  }
  Vec gy = random_signal(rng, 6);
  auto grads = merge.backward(gy);
  ASSERT_EQ(grads.size(), 3u);
  for (const Vec& g : grads) EXPECT_EQ(g, gy);
  Vec shorter(3, 0.0);
  EXPECT_THROW(merge.forward({&a, &shorter}), ShapeError);
}

TEST(Loss, UnitWeightsReduceToPlainBce) {
  LossConfig cfg;
  cfg.class_weight_buggy = 1.0;
  cfg.class_weight_valid = 1.0;
  std::vector<double> p = {0.9, 0.2, 0.7};
  std::vector<bool> y = {true, false, true};
  double manual = 0.0;
  manual += -std::log(0.9);
  manual += -std::log(0.8);
  manual += -std::log(0.7);
  manual /= 3.0;
  EXPECT_NEAR(weighted_bce(p, y, cfg), manual, 1e-15);
}

TEST(Loss, PerfectPredictionsGiveNearZero) {
  LossConfig cfg;
  std::vector<double> p = {1.0, 0.0, 1.0};
  std::vector<bool> y = {true, false, true};
  LossDiagnostics diag;
  EXPECT_LT(weighted_bce(p, y, cfg, {}, &diag), 1e-9);
  EXPECT_EQ(diag.clamped, 3);
}

TEST(Loss, ClassWeightsScalePerSampleTerms) {
  LossConfig cfg;  // 16/14 buggy, 16/18 valid
  std::vector<double> p = {0.5};
  double buggy_loss = weighted_bce(p, {true}, cfg);
  double valid_loss = weighted_bce(p, {false}, cfg);
  EXPECT_NEAR(buggy_loss, (16.0 / 14.0) * -std::log(0.5), 1e-15);
  EXPECT_NEAR(valid_loss, (16.0 / 18.0) * -std::log(0.5), 1e-15);
}

TEST(Loss, L2AddsPenaltyOnRegularizableOnly) {
  Param w("w", {2}, true);
  w.w = {2.0, -1.0};
  Param b("b", {1}, false);
  b.w = {5.0};
  LossConfig cfg;
  cfg.class_weight_buggy = 1.0;
  cfg.class_weight_valid = 1.0;
  cfg.l2_lambda = 0.01;
  std::vector<Param*> params = {&w, &b};
  double loss = weighted_bce({0.5}, {true}, cfg, params);
  EXPECT_NEAR(loss, -std::log(0.5) + 0.01 * 5.0, 1e-15);
  w.zero_grad();
  b.zero_grad();
  add_l2_gradient(params, cfg.l2_lambda);
  EXPECT_NEAR(w.g[0], 2.0 * 0.01 * 2.0, 1e-15);
  EXPECT_EQ(b.g[0], 0.0);
}

TEST(Loss, GradientMatchesFiniteDifference) {
  LossConfig cfg;
  for (int i = 0; i < 50; ++i) {
    Rng rng(600 + static_cast<std::uint64_t>(i));
    double p = 0.05 + 0.9 * rng.unit();
    bool y = rng.below(2) == 0;
    double analytic = weighted_bce_dp(p, y, cfg, 1);
    double slot = p;
    auto eval = [&]() { return weighted_bce({slot}, {y}, cfg); };
    EXPECT_LT(rel_err(analytic, central_diff(&slot, eval)), kFdTol);
  }
}

TEST(Adam, ZeroGradientsLeaveParamsUnchanged) {
  Param w("w", {3});
  w.w = {1.0, -2.0, 3.0};
  std::vector<Param*> params = {&w};
  AdamState state;
  state.init(params);
  adam_step(params, state, AdamConfig{});
  EXPECT_EQ(w.w, (Vec{1.0, -2.0, 3.0}));
}

TEST(Adam, DescendsAndConvergesOnQuadratic) {
  Param w("w", {1});
  w.w = {1.0};
  std::vector<Param*> params = {&w};
  AdamState state;
  state.init(params);
  AdamConfig cfg;
  cfg.lr = 0.1;
  w.g = {2.0 * w.w[0]};
  adam_step(params, state, cfg);
  EXPECT_LT(w.w[0], 1.0);

  int steps_needed = -1;
  for (int t = 1; t <= 500; ++t) {
    w.g = {2.0 * w.w[0]};
    adam_step(params, state, cfg);
    if (std::abs(w.w[0]) < 1e-3) {
      steps_needed = t;
      break;
    }
  }
  EXPECT_GT(steps_needed, 0) << "no convergence within 500 steps";
}

TEST(Checkpoint, BitExactRoundTrip) {
  Rng rng(88);
  Param w("layer/W", {3, 4});
  Param b("layer/b", {3}, false);
  for (double& v : w.w) v = rng.uniform(-2.0, 2.0);
  for (double& v : b.w) v = rng.uniform(-2.0, 2.0);
  std::vector<Param*> params = {&w, &b};
  std::string path = ::testing::TempDir() + "/racelab_ck_test.bin";
  save_checkpoint(path, "{\"k\":1}", params);
  Checkpoint ck = load_checkpoint(path);
  EXPECT_EQ(ck.meta, "{\"k\":1}");
  ASSERT_EQ(ck.tensors.size(), 2u);
  Vec w_orig = w.w;
  for (double& v : w.w) v = 0.0;
  restore_params(ck, params);
  EXPECT_EQ(w.w, w_orig);  // bitwise: doubles written and read raw

  Param wrong("layer/W", {4, 3});
  std::vector<Param*> bad = {&wrong};
  EXPECT_THROW(restore_params(ck, bad), std::runtime_error);
}

TEST(Init, GlorotBoundsRespectFans) {
  Rng rng(5);
  Param w("w", {40, 60});
  glorot_uniform(w, 60, 40, rng);
  double limit = std::sqrt(6.0 / (60 + 40));
  double max_abs = 0.0;
  for (double v : w.w) max_abs = std::max(max_abs, std::abs(v));
  EXPECT_LE(max_abs, limit);
  EXPECT_GT(max_abs, limit * 0.5);  // actually spread out
}

}  // namespace
}  // namespace racelab::nn
