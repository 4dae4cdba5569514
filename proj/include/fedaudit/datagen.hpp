#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "fedaudit/dataset.hpp"

namespace fedaudit {

/// Class c is a unit sinusoid with c + 1 cycles over the window and a
/// class-specific phase; every sample adds i.i.d. N(0, noise_std^2) noise.
/// Classes are balanced and the sample order is shuffled by the seed.
Dataset synth_dataset(std::size_t num_classes, std::size_t samples_per_class, std::size_t length,
                      double noise_std, std::uint64_t seed);

struct SplitResult {
  Dataset train;
  Dataset test;
};

/// Stratified split. Each class contributes round(test_fraction * n_c) test
/// samples, clamped to [1, n_c - 1]. Both outputs keep the input order.
SplitResult split(const Dataset& ds, double test_fraction, std::uint64_t seed);

struct PartitionSpec {
  std::size_t num_clients = 1;
  /// (client, class) -> fraction of that client's per-class share withheld.
  std::map<std::pair<std::size_t, std::size_t>, double> deficits;

  double deficit(std::size_t client, std::size_t cls) const;
};

/// Each class is shuffled and cut into num_clients equal blocks
/// (share = n_c / K); client k keeps round((1 - deficit(k, c)) * share)
/// samples of its block. Leftovers are discarded.
std::vector<Dataset> partition_non_iid(const Dataset& ds, const PartitionSpec& spec, std::uint64_t seed);

/// Reads "f0,...,f{l-1},label". Errors name the offending line.
Dataset load_csv(const std::filesystem::path& path);
Dataset parse_csv(const std::string& text);
/// Shortest round-trip decimal formatting, so load_csv(save_csv(ds)) == ds.
void save_csv(const Dataset& ds, const std::filesystem::path& path);
std::string to_csv(const Dataset& ds);

}  // namespace fedaudit
