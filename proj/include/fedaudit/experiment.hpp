#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fedaudit/config.hpp"
#include "fedaudit/dataset.hpp"
#include "fedaudit/federation.hpp"
#include "fedaudit/nn.hpp"

namespace fedaudit {

/// Everything an experiment needs before its first round.
struct PreparedData {
  ModelParams initial;  // shared by the global model and the reference model
  Dataset dp_train;
  Dataset dp_test;
  Dataset eval;  // held-out global test set
  std::vector<Dataset> clients;
};

/// Builds or loads the data for cfg. Synthetic streams are derived from
/// cfg.seed, so the result is a pure function of the config.
PreparedData prepare_data(const ExperimentConfig& cfg);

/// Trains the reference model, fits the auditor and calibrates P.
Detector make_detector(const ExperimentConfig& cfg, const PreparedData& data);

struct ExperimentResult {
  std::vector<RoundReport> reports;
  ModelParams final_global;
};

/// Runs cfg.rounds rounds. `detector` is ignored when the config disables
/// auditing; pass the one from make_detector to share it between runs.
ExperimentResult execute(const ExperimentConfig& cfg, const PreparedData& data, const Detector* detector);

/// prepare_data, make_detector (if enabled), execute, then emit_report to
/// cfg.output_prefix plus artifacts when cfg.write_artifacts is set.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// Writes <prefix>_rounds.json and <prefix>_summary.csv. Unaudited h and P
/// are null in JSON and empty in CSV.
void emit_report(const std::vector<RoundReport>& reports, const std::string& prefix);
std::string summary_csv(const std::vector<RoundReport>& reports);
std::string rounds_json(const std::vector<RoundReport>& reports);
std::vector<RoundReport> parse_rounds_json(const std::string& text);

/// Detector calibration file: arch, reference-free auditor and threshold.
std::string detector_to_json(const Detector& detector);
/// The reference parameters are not stored; the result has none.
Detector detector_from_json(const std::string& text);
void save_detector(const Detector& detector, const std::filesystem::path& path);
Detector load_detector(const std::filesystem::path& path);

struct ScalingRow {
  std::size_t clients = 0;
  double audit_seconds = 0.0;
};

/// Audit-phase wall time for each K (ascending), everything else fixed: one
/// detector and one trained update audited K times. Each time is the minimum
/// over `repeats` runs.
std::vector<ScalingRow> bench_scaling(const ExperimentConfig& base, const std::vector<std::size_t>& k_values,
                                      std::size_t repeats = 5);
std::string scaling_csv(const std::vector<ScalingRow>& rows);

}  // namespace fedaudit
