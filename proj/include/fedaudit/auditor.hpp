#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "fedaudit/dataset.hpp"
#include "fedaudit/nn.hpp"
#include "fedaudit/ocsvm.hpp"

namespace fedaudit {

/// s = [features (l) | last-conv activations (j) | probability of own label (1)].
/// A degenerate sample came from non-finite activations; its s is all zeros.
struct AuditSample {
  std::vector<double> s;
  bool degenerate = false;
};

struct AuditSource {
  enum class Kind { kTrain, kTest, kClient };
  Kind kind = Kind::kTest;
  std::size_t client_id = 0;

  std::string label() const;
};

struct AuditDataset {
  std::vector<AuditSample> rows;
  AuditSource source;
  std::size_t input_length = 0;
  std::size_t tap_width = 0;

  std::size_t row_length() const { return input_length + tap_width + 1; }
  std::size_t degenerate_count() const;
};

AuditDataset build_audit_dataset(const ArchSpec& arch, const ModelParams& params, const Dataset& ds,
                                 AuditSource source = {});

/// Writes columns s0..s{l+j}, one row per sample.
void export_audit_csv(const AuditDataset& da, const std::filesystem::path& path);

enum class AuditScaling {
  kPerFeature,  // z-score every column on its own
  kBlock,       // one pooled scale per block: features, activations, own-class probability
};

std::string scaling_name(AuditScaling s);
AuditScaling parse_scaling(const std::string& name);

/// Fits the auditor on a clean audit dataset (no degenerate rows). kBlock
/// overrides options.scale_blocks with the [l, j, 1] layout.
OcsvmModel ocsvm_fit(const AuditDataset& da_train, const OcsvmOptions& options,
                     AuditScaling scaling = AuditScaling::kBlock);

/// Degenerate samples score -infinity.
double ocsvm_decision(const OcsvmModel& model, const AuditSample& sample);

/// Percentage of rows with decision < 0.
double poisoned_rate(const OcsvmModel& model, const AuditDataset& da);

/// Acceptance threshold P = h_test + alpha * |h_test - h_train|, in percent.
struct DetectorConfig {
  double alpha = 1.0;
  double h_train = 0.0;
  double h_test = 0.0;

  double sigma() const;
  double threshold() const;
};

DetectorConfig calibrate(double h_train, double h_test, double alpha);

struct Verdict {
  std::size_t client_id = 0;
  double h = 0.0;
  double threshold = 0.0;
  bool accepted = true;
  std::size_t degenerate_count = 0;
  bool audited = true;  // false when the detector is disabled; h and threshold are NaN then
};

struct Update {
  std::size_t client_id = 0;
  ModelParams params;
  std::size_t n_samples = 0;
};

/// Reference parameters, fitted auditor and calibrated threshold.
struct Detector {
  ArchSpec arch;
  ModelParams reference;
  OcsvmModel auditor;
  DetectorConfig config;
};

/// Loads the update into the reference architecture, builds its audit set over
/// dp_test and accepts iff h <= P.
Verdict audit_update(const Update& update, const ArchSpec& arch, const Dataset& dp_test, const OcsvmModel& am,
                     const DetectorConfig& cfg);

}  // namespace fedaudit
