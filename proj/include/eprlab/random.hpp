#pragma once

#include <algorithm>
#include <cstdint>
#include <exception>
#include <random>
#include <thread>
#include <vector>

namespace eprlab {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Independent generator for item `index` of a run seeded with `seed`.
/// Streams depend only on (seed, index), never on scheduling.
inline Rng stream(std::uint64_t seed, std::uint64_t index) {
  const std::uint64_t s = mix64(mix64(seed) ^ mix64(index + 0x632be59bd9b4e019ULL));
  std::seed_seq seq{std::uint32_t(s), std::uint32_t(s >> 32), std::uint32_t(index),
                    std::uint32_t(index >> 32)};
  return Rng(seq);
}

/// Derives a child seed, e.g. one per grid point of a pipeline.
inline std::uint64_t child_seed(std::uint64_t seed, std::uint64_t index) {
  return mix64(seed * 0x9e3779b97f4a7c15ULL + mix64(index));
}

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Each index must write
/// only its own output slot; results are then independent of the worker count.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
  const std::size_t w = std::min<std::size_t>(std::max(1, workers), n);
  if (w <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(w);
  pool.reserve(w);
  for (std::size_t k = 0; k < w; ++k) {
    pool.emplace_back([&, k] {
      try {
        for (std::size_t i = k; i < n; i += w) fn(i);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// Pairwise summation in a fixed tree over the index order.
template <typename T, typename Get>
T pairwise_sum(std::size_t begin, std::size_t end, Get&& get) {
  if (end - begin == 1) return get(begin);
  const std::size_t mid = begin + (end - begin) / 2;
  T left = pairwise_sum<T>(begin, mid, get);
  left += pairwise_sum<T>(mid, end, get);
  return left;
}

inline double pairwise_sum(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return pairwise_sum<double>(0, v.size(), [&](std::size_t i) { return v[i]; });
}

}  // namespace eprlab
