#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace efl {

using Rng = std::mt19937_64;

// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives an independent stream seed from a base seed and a path of
// coordinates, e.g. derive_seed(seed, {kClientStream, round, client}).
// The result depends only on its arguments, never on call order.
inline std::uint64_t derive_seed(std::uint64_t base,
                                 std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = mix64(base);
  for (std::uint64_t p : path) h = mix64(h ^ mix64(p + 0x632be59bd9b4e019ULL));
  return h;
}

inline Rng make_rng(std::uint64_t base, std::initializer_list<std::uint64_t> path) {
  return Rng(derive_seed(base, path));
}

// Stream tags used by the experiment runner.
namespace stream {
inline constexpr std::uint64_t kTrainData = 1;
inline constexpr std::uint64_t kTestData = 2;
inline constexpr std::uint64_t kTrainPartition = 3;
inline constexpr std::uint64_t kTestPartition = 4;
inline constexpr std::uint64_t kInit = 5;
inline constexpr std::uint64_t kSampling = 6;
inline constexpr std::uint64_t kClient = 7;
inline constexpr std::uint64_t kClustering = 8;
}  // namespace stream

}  // namespace efl
