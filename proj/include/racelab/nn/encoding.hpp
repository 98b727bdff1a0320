#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include "racelab/grammar.hpp"
#include "racelab/nn/mat.hpp"
#include "racelab/token.hpp"

namespace racelab::nn {

struct EncodingError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// L x 8 binary matrix, one row per token, columns in kAlphabet order.
// Flattening is row-major (position-major), matching Mat storage.
inline Mat one_hot(std::string_view s) {
  Mat m(static_cast<int>(s.size()), 8);
  for (int t = 0; t < m.rows; ++t) {
    int col = symbol_index(s[static_cast<std::size_t>(t)]);
    if (col < 0) {
      throw EncodingError("one_hot: unknown character '" +
                          std::string(1, s[static_cast<std::size_t>(t)]) +
                          "'");
    }
    m(t, col) = 1.0;
  }
  return m;
}

inline std::string decode(const Mat& m) {
  require(m.cols == 8, "decode: expected 8 columns");
  std::string s;
  s.reserve(static_cast<std::size_t>(m.rows));
  for (int t = 0; t < m.rows; ++t) {
    int hot = -1;
    for (int c = 0; c < 8; ++c) {
      if (m(t, c) == 1.0) {
        require(hot == -1, "decode: row with multiple ones");
        hot = c;
      } else {
        require(m(t, c) == 0.0, "decode: non-binary entry");
      }
    }
    require(hot >= 0, "decode: empty row");
    s.push_back(kAlphabet[static_cast<std::size_t>(hot)]);
  }
  return s;
}

// The three per-function one-hot matrices of one sample.
struct EncodedSample {
  Mat f1;
  Mat f2;
  Mat f3;
  bool label = false;

  int length() const { return f1.rows; }
};

inline EncodedSample encode(const SimProgram& p) {
  return EncodedSample{one_hot(p.f1), one_hot(p.f2), one_hot(p.f3), p.label};
}

}  // namespace racelab::nn
