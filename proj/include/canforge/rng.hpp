#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "canforge/tensor.hpp"

namespace canforge::rng {

// splitmix64 finalizer; good avalanche for deriving stream seeds.
inline uint64_t mix(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t fnv1a(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Derive an independent stream seed from a master seed, a stream tag and an
/// index (e.g. the epoch). Changing any component decorrelates the stream.
inline uint64_t derive(uint64_t master, std::string_view stream, uint64_t index = 0) {
  return mix(mix(master ^ fnv1a(stream)) + index);
}

inline std::mt19937_64 engine(uint64_t master, std::string_view stream, uint64_t index = 0) {
  return std::mt19937_64(derive(master, stream, index));
}

template <typename T>
void fill_normal(Tensor<T>& t, std::mt19937_64& eng, double mean, double stddev) {
  std::normal_distribution<double> dist(mean, stddev);
  for (int64_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(dist(eng));
}

template <typename T>
void fill_uniform(Tensor<T>& t, std::mt19937_64& eng, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  for (int64_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(dist(eng));
}

}  // namespace canforge::rng
