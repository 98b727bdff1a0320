#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "racelab/nn/mat.hpp"

namespace racelab::nn {

// Binary checkpoint: magic, format version, a caller-supplied JSON metadata
// string, then each tensor with name, shape and raw little-endian doubles.
// Round-trips bit-exactly.

inline constexpr char kCheckpointMagic[8] = {'R', 'L', 'C', 'K',
                                             'P', 'T', '0', '1'};

struct CheckpointTensor {
  std::string name;
  std::vector<int> shape;
  Vec values;
};

struct Checkpoint {
  std::string meta;  // JSON text; the model spec lives here
  std::vector<CheckpointTensor> tensors;
};

namespace detail {

template <class T>
inline void write_pod(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
inline T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const std::string& meta,
                            const std::vector<Param*>& params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  detail::write_pod<std::uint64_t>(os, meta.size());
  os.write(meta.data(), static_cast<std::streamsize>(meta.size()));
  detail::write_pod<std::uint64_t>(os, params.size());
  for (const Param* p : params) {
    detail::write_pod<std::uint64_t>(os, p->name.size());
    os.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(p->shape.size()));
    for (int d : p->shape) detail::write_pod<std::int32_t>(os, d);
    detail::write_pod<std::uint64_t>(os, p->w.size());
    os.write(reinterpret_cast<const char*>(p->w.data()),
             static_cast<std::streamsize>(p->w.size() * sizeof(double)));
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[sizeof(kCheckpointMagic)];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw std::runtime_error("not a racelab checkpoint: " + path);
  }
  Checkpoint ck;
  auto meta_len = detail::read_pod<std::uint64_t>(is);
  ck.meta.resize(meta_len);
  is.read(ck.meta.data(), static_cast<std::streamsize>(meta_len));
  auto n = detail::read_pod<std::uint64_t>(is);
  ck.tensors.resize(n);
  for (auto& t : ck.tensors) {
    auto name_len = detail::read_pod<std::uint64_t>(is);
    t.name.resize(name_len);
    is.read(t.name.data(), static_cast<std::streamsize>(name_len));
    auto ndim = detail::read_pod<std::uint32_t>(is);
    t.shape.resize(ndim);
    for (auto& d : t.shape) d = detail::read_pod<std::int32_t>(is);
    auto count = detail::read_pod<std::uint64_t>(is);
    t.values.resize(count);
    is.read(reinterpret_cast<char*>(t.values.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (!is) throw std::runtime_error("checkpoint: truncated tensor " + t.name);
  }
  return ck;
}

// Copies tensor values into the matching params; every param must be present
// with the exact shape.
inline void restore_params(const Checkpoint& ck,
                           const std::vector<Param*>& params) {
  for (Param* p : params) {
    const CheckpointTensor* found = nullptr;
    for (const CheckpointTensor& t : ck.tensors) {
      if (t.name == p->name) {
        found = &t;
        break;
      }
    }
    if (!found) throw std::runtime_error("checkpoint missing tensor " + p->name);
    if (found->shape != p->shape || found->values.size() != p->w.size()) {
      throw std::runtime_error("checkpoint shape mismatch for " + p->name);
    }
    p->w = found->values;
  }
}

}  // namespace racelab::nn
