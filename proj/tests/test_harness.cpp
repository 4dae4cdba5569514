#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "fedaudit/attacks.hpp"
#include "fedaudit/config.hpp"
#include "fedaudit/datagen.hpp"
#include "fedaudit/experiment.hpp"
#include "fedaudit/serialize.hpp"
#include "helpers.hpp"

using namespace fedaudit;
using fedaudit::testing::bit_equal;
using fedaudit::testing::tiny_arch;

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string config_error_path(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.path();
  }
  return "<none>";
}

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("fedaudit_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Small enough that a full experiment takes well under a second.
ExperimentConfig small_config(const fs::path& dir) {
  auto cfg = parse_config(R"({
    "seed": 5,
    "data": {"synthetic": {"public_per_class": 30, "client_pool_per_class": 45, "test_per_class": 20}},
    "attacks": [{"client": 2, "kind": "SV"}],
    "training": {"epochs": 2},
    "rounds": 2
  })");
  cfg.output_prefix = (dir / "run").string();
  return cfg;
}

}  // namespace

TEST(Flpd, RoundTripBitExactIncludingExtremes) {
  auto p = init_params(tiny_arch(), 1);
  p.tensors[0].values[0] = std::numeric_limits<double>::max();
  p.tensors[0].values[1] = -std::numeric_limits<double>::denorm_min();
  p.tensors[0].values[2] = -0.0;
  p.tensors[1].values[0] = 1e300;
  const auto q = deserialize_params(serialize_params(p));
  ASSERT_TRUE(q.same_shape(p));
  const auto a = p.flatten(), b = q.flatten();
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_TRUE(bit_equal(a[i], b[i])) << i;

  const auto sv = attack_same_value(p, 300.0);
  EXPECT_EQ(deserialize_params(serialize_params(sv)), sv);
  const auto path = fs::temp_directory_path() / "fedaudit_roundtrip.flpd";
  save_params(p, path);
  EXPECT_EQ(serialize_params(load_params(path)), serialize_params(p));
  fs::remove(path);
}

TEST(Flpd, ScalarLayout) {
  const ModelParams scalar{{Tensor{{}, {1.5}}}};
  const auto bytes = serialize_params(scalar);
  ASSERT_EQ(bytes.size(), 4u + 4 + 4 + 4 + 8);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "FLPD");
  EXPECT_EQ(bytes[4], 1);  // version, little-endian
  EXPECT_EQ(bytes[8], 1);  // tensor count
  EXPECT_EQ(bytes[12], 0);  // rank
  EXPECT_EQ(bytes[23], 0x3F);  // 1.5 = 0x3FF8000000000000
  EXPECT_EQ(bytes[22], 0xF8);
  EXPECT_EQ(deserialize_params(bytes), scalar);
}

TEST(Flpd, RejectsCorruptInput) {
  const auto bytes = serialize_params(init_params(tiny_arch(), 2));
  for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{11}, bytes.size() / 2, bytes.size() - 1})
    EXPECT_THROW(deserialize_params(std::vector<std::uint8_t>(bytes.begin(), bytes.begin() + cut)),
                 std::runtime_error)
        << cut;
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(deserialize_params(bad), std::runtime_error);
  bad = bytes;
  bad[4] = 2;
  EXPECT_THROW(deserialize_params(bad), std::runtime_error);
  bad = bytes;
  bad.push_back(0);
  EXPECT_THROW(deserialize_params(bad), std::runtime_error);
  EXPECT_THROW(load_params("/nonexistent/x.flpd"), std::runtime_error);
}

TEST(Config, MinimalUsesDefaults) {
  const auto cfg = parse_config(R"({"seed": 3, "data": {"synthetic": {}}})");
  const ExperimentConfig defaults;
  EXPECT_EQ(cfg.seed, 3u);
  EXPECT_EQ(cfg.arch, defaults.arch);
  EXPECT_EQ(cfg.num_clients, 3u);
  ASSERT_EQ(cfg.attacks.size(), 3u);
  EXPECT_EQ(cfg.attacker_count(), 0u);
  EXPECT_EQ(cfg.training.epochs, 10u);
  EXPECT_EQ(cfg.detector.nu, 0.1);
  EXPECT_EQ(cfg.detector.alpha, 1.0);
  EXPECT_TRUE(cfg.detector.enabled);
  EXPECT_EQ(cfg.aggregator.kind, Aggregator::Kind::kFedAvg);
  EXPECT_EQ(cfg.rounds, 1u);
  ASSERT_TRUE(cfg.synthetic.has_value());
  EXPECT_EQ(cfg.synthetic->public_per_class, 200u);
  EXPECT_FALSE(cfg.csv.has_value());
}

TEST(Config, StrictErrorsNameTheKey) {
  EXPECT_EQ(config_error_path(R"({"seed": 1, "data": {"synthetic": {}}, "aggregatr": "krum"})"), "aggregatr");
  EXPECT_EQ(config_error_path(R"({"seed": 1, "data": {"synthetic": {}}, "detector": {"nu": 1.5}})"), "detector.nu");
  EXPECT_EQ(config_error_path(R"({"data": {"synthetic": {}}})"), "seed");
  EXPECT_EQ(config_error_path(R"({"seed": 1})"), "data");
  EXPECT_EQ(config_error_path(R"({"seed": 1, "data": {"synthetic": {"noize": 1}}})"), "data.synthetic.noize");
  EXPECT_EQ(config_error_path(R"({"seed": 1, "data": {"synthetic": {}}, "attacks": [{"client": 0, "kind": "XX"}]})"),
            "attacks[0].kind");
  EXPECT_EQ(config_error_path(R"({"seed": 1, "data": {"synthetic": {}}, "training": {"epochs": 0}})"),
            "training.epochs");
  EXPECT_EQ(config_error_path(R"({"seed": 1, "data": {"synthetic": {}, "csv": {"public": "a", "clients": ["b"]}}})"),
            "data");
  EXPECT_EQ(config_error_path("{not json"), "<root>");
  try {
    parse_config(R"({"seed": 1, "data": {"synthetic": {}}, "aggregatr": 1})");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("aggregatr"), std::string::npos);
  }
}

TEST(Config, AggregatorForms) {
  auto cfg = parse_config(R"({"seed": 1, "data": {"synthetic": {}}, "aggregator": "coordinate_median"})");
  EXPECT_EQ(cfg.aggregator.kind, Aggregator::Kind::kCoordinateMedian);
  cfg = parse_config(R"({"seed": 1, "data": {"synthetic": {}}, "aggregator": {"kind": "krum", "f": 0}})");
  EXPECT_EQ(cfg.aggregator.kind, Aggregator::Kind::kKrum);
  EXPECT_EQ(cfg.aggregator.f, 0u);
  EXPECT_EQ(config_error_path(R"({"seed": 1, "data": {"synthetic": {}}, "aggregator": {"kind": "krum", "f": 1}})"),
            "aggregator.f");
  EXPECT_EQ(config_error_path(R"({"seed": 1, "data": {"synthetic": {}}, "aggregator": "mean"})"), "aggregator");
}

TEST(Config, CsvPathsResolveAgainstConfigDir) {
  const auto dir = scratch_dir("csvcfg");
  save_csv(synth_dataset(5, 4, 32, 0.5, 1), dir / "public.csv");
  for (int k = 0; k < 2; ++k) save_csv(synth_dataset(5, 4, 32, 0.5, 2 + k), dir / ("c" + std::to_string(k) + ".csv"));
  {
    std::ofstream out(dir / "cfg.json");
    out << R"({"seed": 1, "data": {"csv": {"public": "public.csv", "clients": ["c0.csv", "c1.csv"]}}})";
  }
  const auto cfg = load_config(dir / "cfg.json");
  ASSERT_TRUE(cfg.csv.has_value());
  EXPECT_EQ(cfg.num_clients, 2u);
  EXPECT_EQ(cfg.csv->public_path, dir / "public.csv");
  const auto data = prepare_data(cfg);
  EXPECT_EQ(data.clients.size(), 2u);
  EXPECT_EQ(data.dp_train.size() + data.dp_test.size(), 20u);
  fs::remove_all(dir);
}

TEST(Config, CanonicalJsonRoundTrip) {
  const auto cfg = parse_config(R"({
    "seed": 9, "clients": 4,
    "data": {"test_fraction": 0.4, "synthetic": {"noise_std": 0.7, "deficits": [{"client": 3, "class": 2, "fraction": 0.3}]}},
    "attacks": [{"client": 1, "kind": "LS", "class_a": 2, "class_b": 4}, {"client": 3, "kind": "AGA", "noise_std": 0.2}],
    "detector": {"alpha": 2, "nu": 0.2, "gamma": 0.01, "scaling": "feature"},
    "aggregator": {"kind": "trimmed_mean", "trim": 1},
    "rounds": 3, "output": {"prefix": "out/x", "artifacts": false}
  })");
  const auto again = parse_config(config_to_json(cfg));
  EXPECT_EQ(config_to_json(again), config_to_json(cfg));
  EXPECT_EQ(again.attacks[1].kind, AttackKind::kLabelSwap);
  EXPECT_EQ(again.attacks[1].class_b, 4u);
  EXPECT_EQ(again.attacks[3].noise_std, 0.2);
  EXPECT_EQ(again.detector.gamma.kind, GammaMode::Kind::kFixed);
  EXPECT_EQ(again.detector.scaling, AuditScaling::kPerFeature);
  EXPECT_EQ(again.aggregator.trim, 1u);
  EXPECT_FALSE(again.write_artifacts);
  EXPECT_EQ(again.attacker_count(), 2u);
}

TEST(Experiment, ReportsAndArtifacts) {
  const auto dir = scratch_dir("reports");
  const auto cfg = small_config(dir);
  const auto result = run_experiment(cfg);
  ASSERT_EQ(result.reports.size(), 2u);

  const auto csv = read_file(dir / "run_summary.csv");
  std::istringstream lines(csv);
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, "round,client_id,attack,h,P,accepted,acc_before,acc_after");
  std::size_t rows = 0;
  while (std::getline(lines, line)) {
    ++rows;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cols.push_back(c);
    ASSERT_EQ(cols.size(), 8u) << line;
    EXPECT_TRUE(cols[5] == "true" || cols[5] == "false") << cols[5];
  }
  EXPECT_EQ(rows, cfg.rounds * cfg.num_clients);

  const auto parsed = parse_rounds_json(read_file(dir / "run_rounds.json"));
  ASSERT_EQ(parsed.size(), result.reports.size());
  for (std::size_t r = 0; r < parsed.size(); ++r) {
    const auto &a = parsed[r], &b = result.reports[r];
    EXPECT_EQ(a.round, b.round);
    EXPECT_EQ(a.accepted_ids, b.accepted_ids);
    EXPECT_EQ(a.attacks, b.attacks);
    EXPECT_EQ(a.aggregator, b.aggregator);
    EXPECT_EQ(a.all_rejected, b.all_rejected);
    EXPECT_TRUE(bit_equal(a.acc_before, b.acc_before));
    EXPECT_TRUE(bit_equal(a.acc_after, b.acc_after));
    ASSERT_EQ(a.verdicts.size(), b.verdicts.size());
    for (std::size_t k = 0; k < a.verdicts.size(); ++k) {
      EXPECT_TRUE(bit_equal(a.verdicts[k].h, b.verdicts[k].h));
      EXPECT_TRUE(bit_equal(a.verdicts[k].threshold, b.verdicts[k].threshold));
      EXPECT_EQ(a.verdicts[k].accepted, b.verdicts[k].accepted);
      EXPECT_EQ(a.verdicts[k].degenerate_count, b.verdicts[k].degenerate_count);
    }
  }

  EXPECT_EQ(load_params(dir / "run_global.flpd"), result.final_global);
  const auto detector = load_detector(dir / "run_detector.json");
  EXPECT_EQ(detector.arch, cfg.arch);
  EXPECT_TRUE(detector.reference.tensors.empty());
  const auto data = prepare_data(cfg);
  EXPECT_EQ(load_csv(dir / "run_dp_test.csv"), data.dp_test);
  fs::remove_all(dir);
}

TEST(Experiment, RerunIsByteIdentical) {
  const auto dir = scratch_dir("determinism");
  auto cfg = small_config(dir);
  run_experiment(cfg);
  const auto csv = read_file(dir / "run_summary.csv"), json = read_file(dir / "run_rounds.json");
  const auto flpd = read_file(dir / "run_global.flpd");
  run_experiment(cfg);
  EXPECT_EQ(read_file(dir / "run_summary.csv"), csv);
  EXPECT_EQ(read_file(dir / "run_rounds.json"), json);
  EXPECT_EQ(read_file(dir / "run_global.flpd"), flpd);
  fs::remove_all(dir);
}

TEST(Experiment, DisabledDetectorWritesEmptyVerdictFields) {
  const auto dir = scratch_dir("disabled");
  auto cfg = small_config(dir);
  cfg.detector.enabled = false;
  cfg.rounds = 1;
  const auto result = run_experiment(cfg);
  for (const auto& v : result.reports[0].verdicts) {
    EXPECT_FALSE(v.audited);
    EXPECT_TRUE(v.accepted);
  }
  const auto csv = read_file(dir / "run_summary.csv");
  EXPECT_NE(csv.find(",SV,,,true,"), std::string::npos);
  const auto parsed = parse_rounds_json(read_file(dir / "run_rounds.json"));
  EXPECT_TRUE(std::isnan(parsed[0].verdicts[0].h));
  EXPECT_FALSE(fs::exists(dir / "run_detector.json"));
  fs::remove_all(dir);
}

TEST(Experiment, DetectorJsonRoundTrip) {
  const auto dir = scratch_dir("detector");
  const auto cfg = small_config(dir);
  const auto data = prepare_data(cfg);
  const auto d = make_detector(cfg, data);
  const auto back = detector_from_json(detector_to_json(d));
  EXPECT_EQ(back.arch, d.arch);
  EXPECT_EQ(back.auditor.alphas, d.auditor.alphas);
  EXPECT_EQ(back.auditor.support_vectors, d.auditor.support_vectors);
  EXPECT_EQ(back.auditor.standardizer.scale, d.auditor.standardizer.scale);
  EXPECT_TRUE(bit_equal(back.auditor.rho, d.auditor.rho));
  EXPECT_TRUE(bit_equal(back.auditor.gamma, d.auditor.gamma));
  EXPECT_TRUE(bit_equal(back.config.threshold(), d.config.threshold()));
  const auto v1 = audit_update({0, d.reference, 1}, d.arch, data.dp_test, d.auditor, d.config);
  const auto v2 = audit_update({0, d.reference, 1}, back.arch, data.dp_test, back.auditor, back.config);
  EXPECT_TRUE(bit_equal(v1.h, v2.h));
  EXPECT_THROW(detector_from_json("{}"), std::exception);
  fs::remove_all(dir);
}

TEST(Bench, OneRowPerKPositiveTimes) {
  const auto dir = scratch_dir("bench");
  const auto rows = bench_scaling(small_config(dir), {2, 4, 8}, 1);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0].clients, 2u);
  EXPECT_EQ(rows[2].clients, 8u);
  for (const auto& r : rows) EXPECT_GT(r.audit_seconds, 0.0);
  const auto csv = scaling_csv(rows);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
  EXPECT_THROW(bench_scaling(small_config(dir), {4, 2}, 1), std::invalid_argument);
  fs::remove_all(dir);
}
