#include "fedaudit/auditor.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace fedaudit {

std::string AuditSource::label() const {
  switch (kind) {
    case Kind::kTrain:
      return "train";
    case Kind::kTest:
      return "test";
    case Kind::kClient:
      return "client(" + std::to_string(client_id) + ")";
  }
  return "?";
}

std::size_t AuditDataset::degenerate_count() const {
  return static_cast<std::size_t>(std::count_if(rows.begin(), rows.end(), [](const auto& r) { return r.degenerate; }));
}

AuditDataset build_audit_dataset(const ArchSpec& arch, const ModelParams& params, const Dataset& ds,
                                 AuditSource source) {
  check_params(arch, params);
  if (ds.empty()) throw std::invalid_argument("build_audit_dataset: empty dataset");
  AuditDataset da;
  da.source = source;
  da.input_length = arch.input_length;
  da.tap_width = arch.tap_width();
  da.rows.reserve(ds.size());
  for (const auto& sample : ds.samples) {
    auto tap = forward(arch, params, sample.features, sample.label);
    AuditSample row;
    row.s.reserve(da.row_length());
    row.s.insert(row.s.end(), sample.features.begin(), sample.features.end());
    row.s.insert(row.s.end(), tap.activations.begin(), tap.activations.end());
    row.s.push_back(tap.class_prob);
    if (!std::all_of(row.s.begin(), row.s.end(), [](double v) { return std::isfinite(v); })) {
      row.s.assign(da.row_length(), 0.0);
      row.degenerate = true;
    }
    da.rows.push_back(std::move(row));
  }
  return da;
}

void export_audit_csv(const AuditDataset& da, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const std::size_t width = da.row_length();
  for (std::size_t i = 0; i < width; ++i) out << (i ? "," : "") << 's' << i;
  out << '\n';
  char buf[64];
  for (const auto& row : da.rows) {
    for (std::size_t i = 0; i < row.s.size(); ++i) {
      auto res = std::to_chars(buf, buf + sizeof buf, row.s[i]);
      if (i) out << ',';
      out.write(buf, res.ptr - buf);
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string scaling_name(AuditScaling s) { return s == AuditScaling::kBlock ? "block" : "feature"; }

AuditScaling parse_scaling(const std::string& name) {
  if (name == "block") return AuditScaling::kBlock;
  if (name == "feature") return AuditScaling::kPerFeature;
  throw std::invalid_argument("unknown scaling '" + name + "' (expected block or feature)");
}

OcsvmModel ocsvm_fit(const AuditDataset& da_train, const OcsvmOptions& options, AuditScaling scaling) {
  if (da_train.degenerate_count() > 0) throw std::invalid_argument("ocsvm_fit: training audit set has degenerate rows");
  std::vector<std::vector<double>> rows;
  rows.reserve(da_train.rows.size());
  for (const auto& r : da_train.rows) rows.push_back(r.s);
  OcsvmOptions opt = options;
  if (scaling == AuditScaling::kBlock) opt.scale_blocks = {da_train.input_length, da_train.tap_width, 1};
  return ocsvm_fit(rows, opt);
}

double ocsvm_decision(const OcsvmModel& model, const AuditSample& sample) {
  if (sample.degenerate) return -std::numeric_limits<double>::infinity();
  return model.decision(sample.s);
}

double poisoned_rate(const OcsvmModel& model, const AuditDataset& da) {
  if (da.rows.empty()) throw std::invalid_argument("poisoned_rate: empty audit dataset");
  std::size_t outliers = 0;
  for (const auto& row : da.rows)
    if (ocsvm_decision(model, row) < 0.0) ++outliers;
  return static_cast<double>(outliers) * 100.0 / static_cast<double>(da.rows.size());
}

double DetectorConfig::sigma() const { return std::abs(h_test - h_train); }

double DetectorConfig::threshold() const { return h_test + alpha * sigma(); }

DetectorConfig calibrate(double h_train, double h_test, double alpha) {
  auto in_range = [](double h) { return h >= 0.0 && h <= 100.0; };
  if (!in_range(h_train) || !in_range(h_test)) throw std::invalid_argument("calibrate: rates must lie in [0, 100]");
  if (!(alpha >= 0.0)) throw std::invalid_argument("calibrate: alpha must be non-negative");
  return DetectorConfig{alpha, h_train, h_test};
}

Verdict audit_update(const Update& update, const ArchSpec& arch, const Dataset& dp_test, const OcsvmModel& am,
                     const DetectorConfig& cfg) {
  const auto da = build_audit_dataset(arch, update.params, dp_test, {AuditSource::Kind::kClient, update.client_id});
  Verdict v;
  v.client_id = update.client_id;
  v.h = poisoned_rate(am, da);
  v.threshold = cfg.threshold();
  v.accepted = v.h <= v.threshold;
  v.degenerate_count = da.degenerate_count();
  return v;
}

}  // namespace fedaudit
