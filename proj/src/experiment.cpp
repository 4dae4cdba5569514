#include "fedaudit/experiment.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "fedaudit/datagen.hpp"
#include "fedaudit/rng.hpp"
#include "fedaudit/serialize.hpp"
#include "json.hpp"

namespace fedaudit {

using nlohmann::json;

namespace {

std::string fmt_double(double v) {
  if (std::isnan(v)) return "";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

json nullable(double v) { return std::isnan(v) ? json(nullptr) : json(v); }

double from_nullable(const json& v) {
  return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Dataset load_for(const ArchSpec& arch, const std::filesystem::path& path) {
  auto ds = load_csv(path);
  if (ds.length() != arch.input_length)
    throw std::runtime_error(path.string() + ": feature length " + std::to_string(ds.length()) +
                             " does not match arch.input_length " + std::to_string(arch.input_length));
  if (ds.num_classes > arch.num_classes)
    throw std::runtime_error(path.string() + ": label " + std::to_string(ds.num_classes - 1) +
                             " exceeds arch.num_classes");
  ds.num_classes = arch.num_classes;
  return ds;
}

json arch_json(const ArchSpec& arch) {
  json conv = json::array();
  for (const auto& c : arch.conv_layers)
    conv.push_back({{"filters", c.filters}, {"kernel_size", c.kernel_size}, {"stride", c.stride}});
  return {{"input_length", arch.input_length},
          {"num_classes", arch.num_classes},
          {"conv", conv},
          {"dense", arch.dense_layers}};
}

ArchSpec arch_from(const json& j) {
  ArchSpec arch;
  arch.input_length = j.at("input_length").get<std::size_t>();
  arch.num_classes = j.at("num_classes").get<std::size_t>();
  for (const auto& c : j.at("conv"))
    arch.conv_layers.push_back(
        {c.at("filters").get<std::size_t>(), c.at("kernel_size").get<std::size_t>(), c.at("stride").get<std::size_t>()});
  arch.dense_layers = j.at("dense").get<std::vector<std::size_t>>();
  arch.validate();
  return arch;
}

}  // namespace

PreparedData prepare_data(const ExperimentConfig& cfg) {
  PreparedData data;
  const auto& arch = cfg.arch;
  data.initial = init_params(arch, derive_seed(cfg.seed, {stream::kInit}));
  Dataset pub;
  if (cfg.synthetic) {
    const auto& s = *cfg.synthetic;
    const std::size_t c = arch.num_classes, l = arch.input_length;
    pub = synth_dataset(c, s.public_per_class, l, s.noise_std, derive_seed(cfg.seed, {stream::kPublicData}));
    const auto pool =
        synth_dataset(c, s.client_pool_per_class, l, s.noise_std, derive_seed(cfg.seed, {stream::kClientData}));
    data.eval = synth_dataset(c, s.test_per_class, l, s.noise_std, derive_seed(cfg.seed, {stream::kTestData}));
    PartitionSpec spec;
    spec.num_clients = cfg.num_clients;
    for (const auto& d : s.deficits) spec.deficits[{d.client, d.cls}] = d.fraction;
    data.clients = partition_non_iid(pool, spec, derive_seed(cfg.seed, {stream::kPartition}));
  } else if (cfg.csv) {
    pub = load_for(arch, cfg.csv->public_path);
    for (const auto& p : cfg.csv->client_paths) data.clients.push_back(load_for(arch, p));
  } else {
    throw std::invalid_argument("config has no data source");
  }
  auto parts = split(pub, cfg.test_fraction, derive_seed(cfg.seed, {stream::kSplit}));
  data.dp_train = std::move(parts.train);
  data.dp_test = std::move(parts.test);
  if (cfg.csv) data.eval = cfg.csv->test_path ? load_for(arch, *cfg.csv->test_path) : data.dp_test;
  return data;
}

Detector make_detector(const ExperimentConfig& cfg, const PreparedData& data) {
  return setup_detector(cfg.arch, data.initial, data.dp_train, data.dp_test, cfg.training, cfg.detector.options(),
                        derive_seed(cfg.seed, {stream::kReference}));
}

ExperimentResult execute(const ExperimentConfig& cfg, const PreparedData& data, const Detector* detector) {
  if (data.clients.size() != cfg.num_clients) throw std::invalid_argument("execute: client data count mismatch");
  if (cfg.detector.enabled && detector == nullptr) throw std::invalid_argument("execute: detector required");
  std::vector<ClientSetup> clients;
  for (std::size_t k = 0; k < cfg.num_clients; ++k) clients.push_back({data.clients[k], cfg.attacks[k]});
  const Detector* active = cfg.detector.enabled ? detector : nullptr;

  ExperimentResult result;
  result.final_global = data.initial;
  for (std::size_t r = 0; r < cfg.rounds; ++r) {
    auto round = run_round(cfg.arch, result.final_global, clients, cfg.training, data.dp_test, active, cfg.aggregator,
                           data.eval, cfg.seed, r);
    result.final_global = std::move(round.global);
    result.reports.push_back(std::move(round.report));
  }
  return result;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  const auto data = prepare_data(cfg);
  std::optional<Detector> detector;
  if (cfg.detector.enabled) detector = make_detector(cfg, data);
  auto result = execute(cfg, data, detector ? &*detector : nullptr);
  emit_report(result.reports, cfg.output_prefix);
  if (cfg.write_artifacts) {
    save_params(result.final_global, cfg.output_prefix + "_global.flpd");
    save_csv(data.dp_test, cfg.output_prefix + "_dp_test.csv");
    if (detector) save_detector(*detector, cfg.output_prefix + "_detector.json");
  }
  return result;
}

std::string summary_csv(const std::vector<RoundReport>& reports) {
  std::string out = "round,client_id,attack,h,P,accepted,acc_before,acc_after\n";
  for (const auto& r : reports)
    for (std::size_t i = 0; i < r.verdicts.size(); ++i) {
      const auto& v = r.verdicts[i];
      out += std::to_string(r.round) + ',' + std::to_string(v.client_id) + ',' + r.attacks.at(v.client_id) + ',' +
             fmt_double(v.h) + ',' + fmt_double(v.threshold) + ',' + (v.accepted ? "true" : "false") + ',' +
             fmt_double(r.acc_before) + ',' + fmt_double(r.acc_after) + '\n';
    }
  return out;
}

std::string rounds_json(const std::vector<RoundReport>& reports) {
  json rounds = json::array();
  for (const auto& r : reports) {
    json clients = json::array();
    for (const auto& v : r.verdicts)
      clients.push_back({{"client_id", v.client_id},
                         {"attack", r.attacks.at(v.client_id)},
                         {"h", nullable(v.h)},
                         {"P", nullable(v.threshold)},
                         {"accepted", v.accepted},
                         {"audited", v.audited},
                         {"degenerate_count", v.degenerate_count}});
    rounds.push_back({{"round", r.round},
                      {"aggregator", r.aggregator},
                      {"acc_before", r.acc_before},
                      {"acc_after", r.acc_after},
                      {"accepted_ids", r.accepted_ids},
                      {"all_rejected", r.all_rejected},
                      {"clients", clients}});
  }
  return json{{"rounds", rounds}}.dump(2) + "\n";
}

std::vector<RoundReport> parse_rounds_json(const std::string& text) {
  const auto j = json::parse(text);
  std::vector<RoundReport> reports;
  for (const auto& jr : j.at("rounds")) {
    RoundReport r;
    r.round = jr.at("round").get<std::size_t>();
    r.aggregator = jr.at("aggregator").get<std::string>();
    r.acc_before = jr.at("acc_before").get<double>();
    r.acc_after = jr.at("acc_after").get<double>();
    r.accepted_ids = jr.at("accepted_ids").get<std::vector<std::size_t>>();
    r.all_rejected = jr.at("all_rejected").get<bool>();
    for (const auto& jc : jr.at("clients")) {
      Verdict v;
      v.client_id = jc.at("client_id").get<std::size_t>();
      v.h = from_nullable(jc.at("h"));
      v.threshold = from_nullable(jc.at("P"));
      v.accepted = jc.at("accepted").get<bool>();
      v.audited = jc.at("audited").get<bool>();
      v.degenerate_count = jc.at("degenerate_count").get<std::size_t>();
      r.verdicts.push_back(v);
      r.attacks.push_back(jc.at("attack").get<std::string>());
    }
    reports.push_back(std::move(r));
  }
  return reports;
}

void emit_report(const std::vector<RoundReport>& reports, const std::string& prefix) {
  if (reports.empty()) throw std::invalid_argument("emit_report: no rounds");
  write_text(prefix + "_rounds.json", rounds_json(reports));
  write_text(prefix + "_summary.csv", summary_csv(reports));
}

std::string detector_to_json(const Detector& d) {
  const auto& am = d.auditor;
  json j;
  j["arch"] = arch_json(d.arch);
  j["threshold"] = {{"alpha", d.config.alpha},
                    {"h_train", d.config.h_train},
                    {"h_test", d.config.h_test},
                    {"P", d.config.threshold()}};
  j["auditor"] = {{"nu", am.nu},
                  {"gamma", am.gamma},
                  {"rho", am.rho},
                  {"train_size", am.train_size},
                  {"mean", am.standardizer.mean},
                  {"scale", am.standardizer.scale},
                  {"alphas", am.alphas},
                  {"support_vectors", am.support_vectors}};
  return j.dump() + "\n";
}

Detector detector_from_json(const std::string& text) {
  Detector d;
  try {
    const auto j = json::parse(text);
    d.arch = arch_from(j.at("arch"));
    const auto& t = j.at("threshold");
    d.config = calibrate(t.at("h_train").get<double>(), t.at("h_test").get<double>(), t.at("alpha").get<double>());
    const auto& a = j.at("auditor");
    auto& am = d.auditor;
    am.nu = a.at("nu").get<double>();
    am.gamma = a.at("gamma").get<double>();
    am.rho = a.at("rho").get<double>();
    am.train_size = a.at("train_size").get<std::size_t>();
    am.standardizer.mean = a.at("mean").get<std::vector<double>>();
    am.standardizer.scale = a.at("scale").get<std::vector<double>>();
    am.alphas = a.at("alphas").get<std::vector<double>>();
    am.support_vectors = a.at("support_vectors").get<std::vector<std::vector<double>>>();
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("detector file: ") + e.what());
  }
  const std::size_t width = d.arch.input_length + d.arch.tap_width() + 1;
  const auto& am = d.auditor;
  bool ok = am.standardizer.mean.size() == width && am.standardizer.scale.size() == width &&
            am.alphas.size() == am.support_vectors.size() && !am.alphas.empty();
  for (const auto& sv : am.support_vectors) ok = ok && sv.size() == width;
  if (!ok) throw std::runtime_error("detector file: auditor shapes do not match the architecture");
  return d;
}

void save_detector(const Detector& detector, const std::filesystem::path& path) {
  write_text(path, detector_to_json(detector));
}

Detector load_detector(const std::filesystem::path& path) { return detector_from_json(read_text(path)); }

std::vector<ScalingRow> bench_scaling(const ExperimentConfig& base, const std::vector<std::size_t>& k_values,
                                      std::size_t repeats) {
  for (std::size_t i = 1; i < k_values.size(); ++i)
    if (k_values[i] <= k_values[i - 1]) throw std::invalid_argument("bench: client counts must be ascending");
  if (repeats == 0) throw std::invalid_argument("bench: repeats must be positive");
  const auto data = prepare_data(base);
  const auto detector = make_detector(base, data);
  const auto update =
      local_train(0, base.arch, data.clients.front(), data.initial, base.training,
                  client_round_seed(base.seed, 0, 0), AttackSpec{});

  std::vector<std::vector<Update>> batches;
  for (std::size_t k : k_values) {
    if (k == 0) throw std::invalid_argument("bench: client counts must be positive");
    std::vector<Update> updates(k, update);
    for (std::size_t i = 0; i < k; ++i) updates[i].client_id = i;
    batches.push_back(std::move(updates));
  }
  auto time_audit = [&](const std::vector<Update>& updates) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto verdicts = audit_updates(updates, data.dp_test, &detector);
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
    if (verdicts.size() != updates.size()) throw std::logic_error("bench: verdict count mismatch");
    return dt.count();
  };

  // Repeats are interleaved across K so a slow stretch does not bias one row.
  if (!batches.empty()) time_audit(batches.front());  // warm-up
  std::vector<ScalingRow> rows;
  for (std::size_t k : k_values) rows.push_back({k, std::numeric_limits<double>::infinity()});
  for (std::size_t rep = 0; rep < repeats; ++rep)
    for (std::size_t i = 0; i < batches.size(); ++i)
      rows[i].audit_seconds = std::min(rows[i].audit_seconds, time_audit(batches[i]));
  return rows;
}

std::string scaling_csv(const std::vector<ScalingRow>& rows) {
  std::string out = "clients,audit_seconds\n";
  for (const auto& r : rows) out += std::to_string(r.clients) + ',' + fmt_double(r.audit_seconds) + '\n';
  return out;
}

}  // namespace fedaudit
