#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "racelab/nn/init.hpp"
#include "racelab/nn/mat.hpp"
#include "racelab/rng.hpp"

namespace racelab::nn {

// Every layer caches what its backward pass needs, so forward must precede
// backward for the same input. Backward accumulates into Param::g and returns
// the gradient with respect to the layer input.

class Dense {
 public:
  Dense(const std::string& name, int in, int out)
      : in_(in), out_(out), W(name + "/W", {out, in}),
        b(name + "/b", {out}, false) {}

  void init(Rng& rng) { glorot_uniform(W, in_, out_, rng); }

  const Vec& forward(const Vec& x) {
    require(static_cast<int>(x.size()) == in_,
            W.name + ": input size " + std::to_string(x.size()) +
                " != " + std::to_string(in_));
    x_ = x;
    y_.assign(static_cast<std::size_t>(out_), 0.0);
    for (int o = 0; o < out_; ++o) {
      const double* wrow = W.w.data() + static_cast<std::size_t>(o) * in_;
      double acc = b.w[static_cast<std::size_t>(o)];
      for (int i = 0; i < in_; ++i) acc += wrow[i] * x[static_cast<std::size_t>(i)];
      y_[static_cast<std::size_t>(o)] = acc;
    }
    return y_;
  }

  Vec backward(const Vec& gy) {
    require(static_cast<int>(gy.size()) == out_, W.name + ": bad grad size");
    Vec gx(static_cast<std::size_t>(in_), 0.0);
    for (int o = 0; o < out_; ++o) {
      double go = gy[static_cast<std::size_t>(o)];
      double* grow = W.g.data() + static_cast<std::size_t>(o) * in_;
      const double* wrow = W.w.data() + static_cast<std::size_t>(o) * in_;
      for (int i = 0; i < in_; ++i) {
        grow[i] += go * x_[static_cast<std::size_t>(i)];
        gx[static_cast<std::size_t>(i)] += go * wrow[i];
      }
      b.g[static_cast<std::size_t>(o)] += go;
    }
    return gx;
  }

  int in_ = 0;
  int out_ = 0;
  Param W;
  Param b;

 private:
  Vec x_;
  Vec y_;
};

class ReLU {
 public:
  const Vec& forward(const Vec& x) {
    x_ = x;
    y_.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y_[i] = x[i] > 0.0 ? x[i] : 0.0;
    return y_;
  }

  Vec backward(const Vec& gy) {
    Vec gx(gy.size());
    for (std::size_t i = 0; i < gy.size(); ++i) {
      gx[i] = x_[i] > 0.0 ? gy[i] : 0.0;
    }
    return gx;
  }

 private:
  Vec x_;
  Vec y_;
};

class ReLUMat {
 public:
  const Mat& forward(const Mat& x) {
    x_ = x;
    y_ = x;
    for (double& v : y_.a) v = v > 0.0 ? v : 0.0;
    return y_;
  }

  Mat backward(const Mat& gy) {
    Mat gx = gy;
    for (std::size_t i = 0; i < gx.a.size(); ++i) {
      if (x_.a[i] <= 0.0) gx.a[i] = 0.0;
    }
    return gx;
  }

 private:
  Mat x_;
  Mat y_;
};

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

class Sigmoid {
 public:
  const Vec& forward(const Vec& z) {
    y_.resize(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) y_[i] = sigmoid(z[i]);
    return y_;
  }

  Vec backward(const Vec& gy) {
    Vec gz(gy.size());
    for (std::size_t i = 0; i < gy.size(); ++i) {
      gz[i] = gy[i] * y_[i] * (1.0 - y_[i]);
    }
    return gz;
  }

 private:
  Vec y_;
};

enum class ConvPadding { Same, Valid };

// 1-D convolution over positions, stride 1. Kernel layout is
// [offset][in-channel][out-channel].
class Conv1D {
 public:
  Conv1D(const std::string& name, int kernel, int cin, int cout,
         ConvPadding padding = ConvPadding::Same)
      : k_(kernel), cin_(cin), cout_(cout), padding_(padding),
        K(name + "/K", {kernel, cin, cout}), b(name + "/b", {cout}, false) {}

  void init(Rng& rng) { glorot_uniform(K, k_ * cin_, k_ * cout_, rng); }

  const Mat& forward(const Mat& x) {
    require(x.cols == cin_,
            K.name + ": input channels " + std::to_string(x.cols) +
                " != " + std::to_string(cin_));
    int pad = padding_ == ConvPadding::Same ? (k_ - 1) / 2 : 0;
    int lout = padding_ == ConvPadding::Same ? x.rows : x.rows - k_ + 1;
    require(lout >= 1, K.name + ": input length " + std::to_string(x.rows) +
                           " too short for kernel " + std::to_string(k_));
    x_ = x;
    pad_ = pad;
    y_ = Mat(lout, cout_);
    for (int t = 0; t < lout; ++t) {
      double* yrow = y_.row(t);
      for (int co = 0; co < cout_; ++co) yrow[co] = b.w[static_cast<std::size_t>(co)];
      for (int dt = 0; dt < k_; ++dt) {
        int s = t + dt - pad;
        if (s < 0 || s >= x.rows) continue;
        const double* xrow = x.row(s);
        const double* kslab =
            K.w.data() + static_cast<std::size_t>(dt) * cin_ * cout_;
        for (int ci = 0; ci < cin_; ++ci) {
          double xv = xrow[ci];
          if (xv == 0.0) continue;  // one-hot inputs are mostly zero
          const double* krow = kslab + static_cast<std::size_t>(ci) * cout_;
          for (int co = 0; co < cout_; ++co) yrow[co] += xv * krow[co];
        }
      }
    }
    return y_;
  }

  Mat backward(const Mat& gy) {
    require(gy.rows == y_.rows && gy.cols == cout_, K.name + ": bad grad shape");
    Mat gx(x_.rows, cin_);
    for (int t = 0; t < gy.rows; ++t) {
      const double* grow = gy.row(t);
      for (int co = 0; co < cout_; ++co) {
        b.g[static_cast<std::size_t>(co)] += grow[co];
      }
      for (int dt = 0; dt < k_; ++dt) {
        int s = t + dt - pad_;
        if (s < 0 || s >= x_.rows) continue;
        const double* xrow = x_.row(s);
        double* gxrow = gx.row(s);
        double* kgslab = K.g.data() + static_cast<std::size_t>(dt) * cin_ * cout_;
        const double* kslab = K.w.data() + static_cast<std::size_t>(dt) * cin_ * cout_;
        for (int ci = 0; ci < cin_; ++ci) {
          double xv = xrow[ci];
          double* kgrow = kgslab + static_cast<std::size_t>(ci) * cout_;
          const double* krow = kslab + static_cast<std::size_t>(ci) * cout_;
          double acc = 0.0;
          for (int co = 0; co < cout_; ++co) {
            kgrow[co] += grow[co] * xv;
            acc += grow[co] * krow[co];
          }
          gxrow[ci] += acc;
        }
      }
    }
    return gx;
  }

  int k_ = 0;
  int cin_ = 0;
  int cout_ = 0;
  ConvPadding padding_ = ConvPadding::Same;
  Param K;
  Param b;

 private:
  Mat x_;
  Mat y_;
  int pad_ = 0;
};

// Non-overlapping max pool of width m over positions; trailing remainder
// positions are dropped.
class MaxPool1D {
 public:
  explicit MaxPool1D(int width) : m_(width) {}

  const Mat& forward(const Mat& x) {
    int lout = x.rows / m_;
    require(lout >= 1, "maxpool: input length " + std::to_string(x.rows) +
                           " shorter than pool width " + std::to_string(m_));
    in_rows_ = x.rows;
    y_ = Mat(lout, x.cols);
    argmax_.assign(static_cast<std::size_t>(lout) * x.cols, 0);
    for (int t = 0; t < lout; ++t) {
      for (int c = 0; c < x.cols; ++c) {
        int best = t * m_;
        double bv = x(best, c);
        for (int r = t * m_ + 1; r < (t + 1) * m_; ++r) {
          if (x(r, c) > bv) {
            bv = x(r, c);
            best = r;
          }
        }
        y_(t, c) = bv;
        argmax_[static_cast<std::size_t>(t) * x.cols + c] = best;
      }
    }
    return y_;
  }

  Mat backward(const Mat& gy) {
    require(gy.rows == y_.rows && gy.cols == y_.cols, "maxpool: bad grad shape");
    Mat gx(in_rows_, gy.cols);
    for (int t = 0; t < gy.rows; ++t) {
      for (int c = 0; c < gy.cols; ++c) {
        gx(argmax_[static_cast<std::size_t>(t) * gy.cols + c], c) += gy(t, c);
      }
    }
    return gx;
  }

 private:
  int m_ = 2;
  int in_rows_ = 0;
  Mat y_;
  std::vector<int> argmax_;
};

// Max over the entire position dimension, per channel. This is what buys the
// CNN its position invariance.
class GlobalMaxPool {
 public:
  const Vec& forward(const Mat& x) {
    require(x.rows >= 1, "global_max: empty input");
    in_rows_ = x.rows;
    cols_ = x.cols;
    y_.assign(static_cast<std::size_t>(x.cols), 0.0);
    argmax_.assign(static_cast<std::size_t>(x.cols), 0);
    for (int c = 0; c < x.cols; ++c) {
      int best = 0;
      double bv = x(0, c);
      for (int r = 1; r < x.rows; ++r) {
        if (x(r, c) > bv) {
          bv = x(r, c);
          best = r;
        }
      }
      y_[static_cast<std::size_t>(c)] = bv;
      argmax_[static_cast<std::size_t>(c)] = best;
    }
    return y_;
  }

  Mat backward(const Vec& gy) {
    require(static_cast<int>(gy.size()) == cols_, "global_max: bad grad size");
    Mat gx(in_rows_, cols_);
    for (int c = 0; c < cols_; ++c) {
      gx(argmax_[static_cast<std::size_t>(c)], c) += gy[static_cast<std::size_t>(c)];
    }
    return gx;
  }

 private:
  int in_rows_ = 0;
  int cols_ = 0;
  Vec y_;
  std::vector<int> argmax_;
};

// Element-wise sum of equally sized vectors: the only exactly
// permutation-invariant merge.
class SumMerge {
 public:
  const Vec& forward(const std::vector<const Vec*>& xs) {
    require(!xs.empty(), "sum_merge: no inputs");
    n_inputs_ = xs.size();
    y_ = *xs[0];
    for (std::size_t k = 1; k < xs.size(); ++k) {
      require(xs[k]->size() == y_.size(), "sum_merge: size mismatch");
      for (std::size_t i = 0; i < y_.size(); ++i) y_[i] += (*xs[k])[i];
    }
    return y_;
  }

  // The same gradient flows to every merged input.
  std::vector<Vec> backward(const Vec& gy) const {
    return std::vector<Vec>(n_inputs_, gy);
  }

 private:
  std::size_t n_inputs_ = 0;
  Vec y_;
};

// Per-branch learned scalar weight per position; output is the weighted sum
// of input rows. With all weights equal this is exactly permutation
// invariant.
class PositionWeightedSum {
 public:
  PositionWeightedSum(const std::string& name, int length, int channels)
      : length_(length), channels_(channels), a(name + "/a", {length}) {}

  void init(Rng& rng) { glorot_uniform(a, length_, channels_, rng); }

  const Vec& forward(const Mat& x) {
    require(x.rows == length_ && x.cols == channels_,
            a.name + ": expected " + std::to_string(length_) + "x" +
                std::to_string(channels_) + " input, got " +
                std::to_string(x.rows) + "x" + std::to_string(x.cols));
    x_ = x;
    y_.assign(static_cast<std::size_t>(channels_), 0.0);
    for (int t = 0; t < length_; ++t) {
      double at = a.w[static_cast<std::size_t>(t)];
      const double* xrow = x.row(t);
      for (int c = 0; c < channels_; ++c) y_[static_cast<std::size_t>(c)] += at * xrow[c];
    }
    return y_;
  }

  Mat backward(const Vec& gy) {
    require(static_cast<int>(gy.size()) == channels_, a.name + ": bad grad");
    Mat gx(length_, channels_);
    for (int t = 0; t < length_; ++t) {
      const double* xrow = x_.row(t);
      double* gxrow = gx.row(t);
      double at = a.w[static_cast<std::size_t>(t)];
      double acc = 0.0;
      for (int c = 0; c < channels_; ++c) {
        acc += gy[static_cast<std::size_t>(c)] * xrow[c];
        gxrow[c] = at * gy[static_cast<std::size_t>(c)];
      }
      a.g[static_cast<std::size_t>(t)] += acc;
    }
    return gx;
  }

  int length_ = 0;
  int channels_ = 0;
  Param a;

 private:
  Mat x_;
  Vec y_;
};

// Single-layer LSTM over the input rows; exposes the final hidden state.
// Gate rows are ordered [input; forget; cell; output].
class LSTMLayer {
 public:
  LSTMLayer(const std::string& name, int in, int hidden)
      : in_(in), h_(hidden), Wx(name + "/Wx", {4 * hidden, in}),
        Wh(name + "/Wh", {4 * hidden, hidden}),
        b(name + "/b", {4 * hidden}, false) {}

  void init(Rng& rng) {
    glorot_uniform(Wx, in_, h_, rng);
    glorot_uniform(Wh, h_, h_, rng);
  }

  const Vec& forward(const Mat& x) {
    require(x.cols == in_, Wx.name + ": input channels " +
                               std::to_string(x.cols) + " != " +
                               std::to_string(in_));
    T_ = x.rows;
    x_ = x;
    i_.assign(static_cast<std::size_t>(T_), Vec(static_cast<std::size_t>(h_)));
    f_ = i_;
    g_ = i_;
    o_ = i_;
    c_ = i_;
    tanhc_ = i_;
    h_seq_.assign(static_cast<std::size_t>(T_) + 1,
                  Vec(static_cast<std::size_t>(h_), 0.0));
    Vec c_prev(static_cast<std::size_t>(h_), 0.0);
    Vec pre(static_cast<std::size_t>(4 * h_));
    for (int t = 0; t < T_; ++t) {
      const double* xrow = x.row(t);
      const Vec& h_prev = h_seq_[static_cast<std::size_t>(t)];
      for (int j = 0; j < 4 * h_; ++j) {
        const double* wx = Wx.w.data() + static_cast<std::size_t>(j) * in_;
        const double* wh = Wh.w.data() + static_cast<std::size_t>(j) * h_;
        double acc = b.w[static_cast<std::size_t>(j)];
        for (int i = 0; i < in_; ++i) acc += wx[i] * xrow[i];
        for (int i = 0; i < h_; ++i) acc += wh[i] * h_prev[static_cast<std::size_t>(i)];
        pre[static_cast<std::size_t>(j)] = acc;
      }
      auto& it = i_[static_cast<std::size_t>(t)];
      auto& ft = f_[static_cast<std::size_t>(t)];
      auto& gt = g_[static_cast<std::size_t>(t)];
      auto& ot = o_[static_cast<std::size_t>(t)];
      auto& ct = c_[static_cast<std::size_t>(t)];
      auto& tct = tanhc_[static_cast<std::size_t>(t)];
      Vec& h_t = h_seq_[static_cast<std::size_t>(t) + 1];
      for (int j = 0; j < h_; ++j) {
        it[static_cast<std::size_t>(j)] = sigmoid(pre[static_cast<std::size_t>(j)]);
        ft[static_cast<std::size_t>(j)] = sigmoid(pre[static_cast<std::size_t>(h_ + j)]);
        gt[static_cast<std::size_t>(j)] = std::tanh(pre[static_cast<std::size_t>(2 * h_ + j)]);
        ot[static_cast<std::size_t>(j)] = sigmoid(pre[static_cast<std::size_t>(3 * h_ + j)]);
        ct[static_cast<std::size_t>(j)] =
            ft[static_cast<std::size_t>(j)] * c_prev[static_cast<std::size_t>(j)] +
            it[static_cast<std::size_t>(j)] * gt[static_cast<std::size_t>(j)];
        tct[static_cast<std::size_t>(j)] = std::tanh(ct[static_cast<std::size_t>(j)]);
        h_t[static_cast<std::size_t>(j)] =
            ot[static_cast<std::size_t>(j)] * tct[static_cast<std::size_t>(j)];
      }
      c_prev = ct;
    }
    return h_seq_.back();
  }

  Mat backward(const Vec& gh_final) {
    require(static_cast<int>(gh_final.size()) == h_, Wx.name + ": bad grad");
    Mat gx(T_, in_);
    Vec dh = gh_final;
    Vec dc(static_cast<std::size_t>(h_), 0.0);
    Vec dpre(static_cast<std::size_t>(4 * h_));
    for (int t = T_ - 1; t >= 0; --t) {
      const auto& it = i_[static_cast<std::size_t>(t)];
      const auto& ft = f_[static_cast<std::size_t>(t)];
      const auto& gt = g_[static_cast<std::size_t>(t)];
      const auto& ot = o_[static_cast<std::size_t>(t)];
      const auto& tct = tanhc_[static_cast<std::size_t>(t)];
      const Vec& h_prev = h_seq_[static_cast<std::size_t>(t)];
      const Vec c_prev = t > 0 ? c_[static_cast<std::size_t>(t) - 1]
                               : Vec(static_cast<std::size_t>(h_), 0.0);
      for (int j = 0; j < h_; ++j) {
        auto ju = static_cast<std::size_t>(j);
        double do_ = dh[ju] * tct[ju];
        double dct = dc[ju] + dh[ju] * ot[ju] * (1.0 - tct[ju] * tct[ju]);
        double di = dct * gt[ju];
        double df = dct * c_prev[ju];
        double dg = dct * it[ju];
        dpre[ju] = di * it[ju] * (1.0 - it[ju]);
        dpre[static_cast<std::size_t>(h_) + ju] = df * ft[ju] * (1.0 - ft[ju]);
        dpre[static_cast<std::size_t>(2 * h_) + ju] = dg * (1.0 - gt[ju] * gt[ju]);
        dpre[static_cast<std::size_t>(3 * h_) + ju] = do_ * ot[ju] * (1.0 - ot[ju]);
        dc[ju] = dct * ft[ju];
      }
      const double* xrow = x_.row(t);
      double* gxrow = gx.row(t);
      Vec dh_prev(static_cast<std::size_t>(h_), 0.0);
      for (int j = 0; j < 4 * h_; ++j) {
        auto ju = static_cast<std::size_t>(j);
        double dj = dpre[ju];
        if (dj == 0.0) continue;
        double* wxg = Wx.g.data() + ju * static_cast<std::size_t>(in_);
        const double* wx = Wx.w.data() + ju * static_cast<std::size_t>(in_);
        for (int i = 0; i < in_; ++i) {
          wxg[i] += dj * xrow[i];
          gxrow[i] += dj * wx[i];
        }
        double* whg = Wh.g.data() + ju * static_cast<std::size_t>(h_);
        const double* wh = Wh.w.data() + ju * static_cast<std::size_t>(h_);
        for (int i = 0; i < h_; ++i) {
          whg[i] += dj * h_prev[static_cast<std::size_t>(i)];
          dh_prev[static_cast<std::size_t>(i)] += dj * wh[i];
        }
        b.g[ju] += dj;
      }
      dh = std::move(dh_prev);
    }
    return gx;
  }

  int in_ = 0;
  int h_ = 0;
  Param Wx;
  Param Wh;
  Param b;

 private:
  int T_ = 0;
  Mat x_;
  std::vector<Vec> i_, f_, g_, o_, c_, tanhc_;
  std::vector<Vec> h_seq_;  // h_seq_[t] is the state entering step t
};

}  // namespace racelab::nn
