#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "haarlab/linalg.hpp"

namespace haarlab {

using json = nlohmann::json;

inline std::string to_hex(const std::vector<uint8_t>& bytes) {
  static const char* digits = "0123456789abcdef";
  std::string s;
  s.reserve(bytes.size() * 2);
  for (uint8_t b : bytes) {
    s.push_back(digits[b >> 4]);
    s.push_back(digits[b & 15]);
  }
  return s;
}

inline std::vector<uint8_t> from_hex(const std::string& s) {
  if (s.size() % 2) throw std::invalid_argument("from_hex: odd length");
  auto nib = [](char c) -> uint8_t {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw std::invalid_argument("from_hex: bad digit");
  };
  std::vector<uint8_t> out(s.size() / 2);
  for (size_t i = 0; i < out.size(); ++i) out[i] = (nib(s[2 * i]) << 4) | nib(s[2 * i + 1]);
  return out;
}

inline uint64_t fnv1a64(const uint8_t* data, size_t len) {
  uint64_t h = 0xCBF29CE484222325ULL;
  for (size_t i = 0; i < len; ++i) {
    h ^= data[i];
    h *= 0x100000001B3ULL;
  }
  return h;
}

inline std::string hash_hex(const std::vector<uint8_t>& bytes) {
  uint64_t h = fnv1a64(bytes.data(), bytes.size());
  char buf[17];
  snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

inline std::string hash_hex(const std::string& s) {
  uint64_t h = fnv1a64(reinterpret_cast<const uint8_t*>(s.data()), s.size());
  char buf[17];
  snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

// Dense complex payloads as interleaved re/im little-endian doubles.
inline std::vector<uint8_t> matrix_to_blob(const Mat& m) {
  std::vector<uint8_t> out;
  out.reserve(16 + m.size() * 16);
  auto push_u64 = [&](uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(uint8_t(v >> (8 * i)));
  };
  auto push_f64 = [&](double d) {
    uint64_t v;
    static_assert(sizeof(v) == sizeof(d));
    std::memcpy(&v, &d, 8);
    push_u64(v);
  };
  push_u64(uint64_t(m.rows()));
  push_u64(uint64_t(m.cols()));
  for (int64_t r = 0; r < m.rows(); ++r)
    for (int64_t c = 0; c < m.cols(); ++c) {
      push_f64(m(r, c).real());
      push_f64(m(r, c).imag());
    }
  return out;
}

inline Mat matrix_from_blob(const std::vector<uint8_t>& blob) {
  auto read_u64 = [&](size_t off) {
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(blob.at(off + i)) << (8 * i);
    return v;
  };
  auto read_f64 = [&](size_t off) {
    uint64_t v = read_u64(off);
    double d;
    std::memcpy(&d, &v, 8);
    return d;
  };
  int64_t rows = int64_t(read_u64(0)), cols = int64_t(read_u64(8));
  if (blob.size() != size_t(16 + rows * cols * 16))
    throw std::invalid_argument("matrix_from_blob: size mismatch");
  Mat m(rows, cols);
  size_t off = 16;
  for (int64_t r = 0; r < rows; ++r)
    for (int64_t c = 0; c < cols; ++c) {
      m(r, c) = cplx(read_f64(off), read_f64(off + 8));
      off += 16;
    }
  return m;
}

// Content-addressed store for matrix payloads referenced from JSON.
struct BlobStore {
  std::map<std::string, std::vector<uint8_t>> blobs;

  std::string put(const Mat& m) {
    auto blob = matrix_to_blob(m);
    std::string key = hash_hex(blob);
    blobs[key] = std::move(blob);
    return key;
  }

  Mat get(const std::string& key) const {
    auto it = blobs.find(key);
    if (it == blobs.end()) throw std::invalid_argument("BlobStore: missing payload " + key);
    return matrix_from_blob(it->second);
  }
};

// nlohmann::json objects keep keys sorted, so dump() is canonical.
inline std::string canonical_dump(const json& j) { return j.dump(); }

}  // namespace haarlab
