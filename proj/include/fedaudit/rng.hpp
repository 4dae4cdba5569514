#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace fedaudit {

using Rng = std::mt19937_64;

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent child seed from a parent seed and a path of keys,
/// e.g. derive_seed(experiment, {kRoundStream, round, client_id}). Each key is
/// folded in through SplitMix64, so the result only depends on the values and
/// their order, never on call order or thread scheduling.
constexpr std::uint64_t derive_seed(std::uint64_t parent,
                                    std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = mix64(parent);
  for (std::uint64_t key : path) s = mix64(s ^ mix64(key + 0x632be59bd9b4e019ULL));
  return s;
}

// Stream tags used with derive_seed.
namespace stream {
inline constexpr std::uint64_t kInit = 1;
inline constexpr std::uint64_t kPublicData = 2;
inline constexpr std::uint64_t kClientData = 3;
inline constexpr std::uint64_t kTestData = 4;
inline constexpr std::uint64_t kSplit = 5;
inline constexpr std::uint64_t kPartition = 6;
inline constexpr std::uint64_t kReference = 7;
inline constexpr std::uint64_t kRound = 8;
inline constexpr std::uint64_t kAttack = 9;
inline constexpr std::uint64_t kNoise = 10;
}  // namespace stream

}  // namespace fedaudit
