#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedaudit/attacks.hpp"
#include "fedaudit/auditor.hpp"
#include "fedaudit/federation.hpp"
#include "fedaudit/nn.hpp"
#include "fedaudit/ocsvm.hpp"

namespace fedaudit {

/// Invalid configuration. The message starts with the offending key path,
/// e.g. "detector.nu: must lie in (0, 1)".
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(const std::string& path, const std::string& what)
      : std::invalid_argument(path + ": " + what), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

struct Deficit {
  std::size_t client = 0;
  std::size_t cls = 0;
  double fraction = 0.0;
};

struct SyntheticSource {
  double noise_std = 0.5;
  std::size_t public_per_class = 200;
  std::size_t client_pool_per_class = 300;
  std::size_t test_per_class = 200;
  /// Default: client 0 lacks 40% of class 0, client 1 lacks 50% of class 1.
  std::vector<Deficit> deficits = {{0, 0, 0.4}, {1, 1, 0.5}};
};

struct CsvSource {
  std::filesystem::path public_path;
  std::vector<std::filesystem::path> client_paths;  // one per client
  std::optional<std::filesystem::path> test_path;   // evaluation set; defaults to DP_test
};

struct DetectorSettings {
  bool enabled = true;
  double alpha = 1.0;
  double nu = 0.1;
  GammaMode gamma = GammaMode::median();
  AuditScaling scaling = AuditScaling::kBlock;
  double tolerance = 1e-6;

  DetectorOptions options() const;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  ArchSpec arch{32, 5, {{8, 5, 1}, {8, 5, 2}}, {16}};
  std::optional<SyntheticSource> synthetic;
  std::optional<CsvSource> csv;
  double test_fraction = 0.5;
  std::size_t num_clients = 3;
  std::vector<AttackSpec> attacks;  // one per client, NONE for benign
  TrainConfig training{10, 0.05, 16};
  DetectorSettings detector;
  Aggregator aggregator;
  std::size_t rounds = 1;
  std::string output_prefix = "fedaudit";
  bool write_artifacts = true;  // detector JSON, final global FLPD, DP_test CSV

  std::size_t attacker_count() const;
};

/// Strict parse: unknown keys, missing required keys (seed, data), wrong types
/// and out-of-range values all throw ConfigError naming the key path. Relative
/// CSV paths resolve against base_dir.
ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical JSON of a config, accepted by parse_config.
std::string config_to_json(const ExperimentConfig& cfg);

}  // namespace fedaudit
