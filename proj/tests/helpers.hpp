#pragma once

#include <cmath>
#include <cstring>
#include <cstdint>
#include <random>
#include <vector>

#include "fedaudit/dataset.hpp"
#include "fedaudit/nn.hpp"

namespace fedaudit::testing {

// 96 parameters: small enough for exhaustive finite differences.
inline ArchSpec tiny_arch() { return ArchSpec{12, 3, {{2, 3, 1}, {3, 3, 2}}, {4}}; }

inline Dataset random_dataset(std::size_t n, std::size_t length, std::size_t classes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Dataset ds;
  ds.num_classes = classes;
  for (std::size_t i = 0; i < n; ++i) {
    Sample s;
    for (std::size_t t = 0; t < length; ++t) s.features.push_back(normal(rng));
    s.label = i % classes;
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

inline bool bit_equal(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

}  // namespace fedaudit::testing
