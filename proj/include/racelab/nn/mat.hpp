#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace racelab::nn {

using Vec = std::vector<double>;

struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Row-major matrix of doubles. Feature maps are positions x channels.
struct Mat {
  int rows = 0;
  int cols = 0;
  Vec a;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c) {}

  double& operator()(int r, int c) {
    return a[static_cast<std::size_t>(r) * cols + c];
  }
  double operator()(int r, int c) const {
    return a[static_cast<std::size_t>(r) * cols + c];
  }
  double* row(int r) { return a.data() + static_cast<std::size_t>(r) * cols; }
  const double* row(int r) const {
    return a.data() + static_cast<std::size_t>(r) * cols;
  }
};

// A named, trainable tensor with its gradient accumulator. `regularizable`
// marks weight matrices (L2 applies to those, never to biases).
struct Param {
  std::string name;
  std::vector<int> shape;
  Vec w;
  Vec g;
  bool regularizable = true;

  Param() = default;
  Param(std::string n, std::vector<int> s, bool reg = true)
      : name(std::move(n)), shape(std::move(s)), regularizable(reg) {
    std::size_t total = 1;
    for (int d : shape) total *= static_cast<std::size_t>(d);
    w.assign(total, 0.0);
    g.assign(total, 0.0);
  }

  std::size_t size() const { return w.size(); }
  void zero_grad() { std::fill(g.begin(), g.end(), 0.0); }
};

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

}  // namespace racelab::nn
