#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fedaudit/attacks.hpp"
#include "fedaudit/auditor.hpp"
#include "fedaudit/dataset.hpp"
#include "fedaudit/nn.hpp"

namespace fedaudit {

/// Seed of client k's local training in a round.
std::uint64_t client_round_seed(std::uint64_t seed, std::size_t round, std::size_t client);
/// Stream used by the client's attack, derived from its training seed.
std::uint64_t attack_stream_seed(std::uint64_t client_seed, const AttackSpec& attack);

/// Trains one client from the global parameters. Data attacks transform the
/// local set before training, SF/SV/AGA transform the trained parameters and
/// GA trains by gradient ascent. Attack randomness uses a stream derived from
/// seed, so NONE reproduces train(arch, global, ds, cfg, seed) exactly.
Update local_train(std::size_t client_id, const ArchSpec& arch, const Dataset& client_ds,
                   const ModelParams& global, const TrainConfig& cfg, std::uint64_t seed,
                   const AttackSpec& attack);

// Aggregators. Inputs are processed in client_id order, which makes every
// result independent of the order updates are passed in.

/// Sample-weighted mean: sum_k (n_k / n) W_k.
ModelParams fedavg(std::vector<Update> updates);
/// Update with the smallest sum of squared distances to its K - f - 2 nearest
/// neighbours; ties go to the lowest client_id. Requires K >= f + 3.
ModelParams krum(std::vector<Update> updates, std::size_t f);
ModelParams coordinate_median(std::vector<Update> updates);
/// Per coordinate, drops the `trim` largest and smallest values and averages
/// the rest. Requires K > 2 * trim.
ModelParams trimmed_mean(std::vector<Update> updates, std::size_t trim);

struct Aggregator {
  enum class Kind { kFedAvg, kKrum, kCoordinateMedian, kTrimmedMean };
  Kind kind = Kind::kFedAvg;
  std::size_t f = 0;     // krum
  std::size_t trim = 0;  // trimmed mean

  std::string name() const;
  ModelParams apply(std::vector<Update> updates) const;
};

struct ClientSetup {
  Dataset data;
  AttackSpec attack;
};

struct RoundReport {
  std::size_t round = 0;
  std::vector<Verdict> verdicts;
  std::vector<std::string> attacks;  // per client, short attack name
  std::string aggregator;
  std::vector<std::size_t> accepted_ids;
  bool all_rejected = false;
  double acc_before = 0.0;
  double acc_after = 0.0;
};

/// Trains every client; update k uses seed derive_seed(seed, {kRound, round, k}).
std::vector<Update> train_clients(const ArchSpec& arch, const ModelParams& global,
                                  const std::vector<ClientSetup>& clients, const TrainConfig& cfg,
                                  std::uint64_t seed, std::size_t round);

/// Audits every update against the detector; without one every update is
/// accepted unaudited.
std::vector<Verdict> audit_updates(const std::vector<Update>& updates, const Dataset& dp_test,
                                   const Detector* detector);

/// Aggregates the accepted updates (renormalized over that subset). Returns
/// nullopt when nothing was accepted.
std::optional<ModelParams> aggregate_accepted(const std::vector<Update>& updates,
                                              const std::vector<Verdict>& verdicts,
                                              const Aggregator& aggregator);

struct RoundResult {
  ModelParams global;
  RoundReport report;
};

/// One global round: train, audit, aggregate. If every update is rejected the
/// global parameters are kept and report.all_rejected is set.
RoundResult run_round(const ArchSpec& arch, const ModelParams& global, const std::vector<ClientSetup>& clients,
                      const TrainConfig& cfg, const Dataset& dp_test, const Detector* detector,
                      const Aggregator& aggregator, const Dataset& eval_set, std::uint64_t seed,
                      std::size_t round);

struct DetectorOptions {
  OcsvmOptions ocsvm;
  AuditScaling scaling = AuditScaling::kBlock;
  double alpha = 1.0;
};

/// Trains the reference model from `initial` on dp_train, fits the auditor on
/// its audit set over dp_train and calibrates h_train / h_test.
Detector setup_detector(const ArchSpec& arch, const ModelParams& initial, const Dataset& dp_train,
                        const Dataset& dp_test, const TrainConfig& cfg, const DetectorOptions& options,
                        std::uint64_t seed);

}  // namespace fedaudit
