// fedaudit: run, benchmark and inspect audited federated-learning experiments.
//
// Exit codes: 0 success, 1 invalid configuration or arguments, 2 runtime error.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fedaudit/attacks.hpp"
#include "fedaudit/auditor.hpp"
#include "fedaudit/config.hpp"
#include "fedaudit/datagen.hpp"
#include "fedaudit/experiment.hpp"
#include "fedaudit/federation.hpp"
#include "fedaudit/serialize.hpp"

namespace {

using namespace fedaudit;

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kRuntime = 2;

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

std::vector<std::size_t> parse_counts(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t pos = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(item, &pos);
    } catch (const std::exception&) {
      throw UsageError("--clients: '" + item + "' is not a count");
    }
    if (pos != item.size() || v == 0) throw UsageError("--clients: '" + item + "' is not a positive count");
    out.push_back(v);
  }
  if (out.empty()) throw UsageError("--clients: empty list");
  return out;
}

std::string show(double v) {
  if (std::isnan(v)) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

int cmd_run(const std::string& config_path, const std::string& out_prefix) {
  auto cfg = load_config(config_path);
  if (!out_prefix.empty()) cfg.output_prefix = out_prefix;
  const auto result = run_experiment(cfg);
  for (const auto& r : result.reports) {
    std::printf("round %zu  %s  acc %.4f -> %.4f%s\n", r.round, r.aggregator.c_str(), r.acc_before, r.acc_after,
                r.all_rejected ? "  (all updates rejected, global kept)" : "");
    for (const auto& v : r.verdicts)
      std::printf("  client %zu  %-4s h %6s  P %6s  %s\n", v.client_id, r.attacks[v.client_id].c_str(),
                  show(v.h).c_str(), show(v.threshold).c_str(),
                  !v.audited ? "unaudited" : (v.accepted ? "accepted" : "rejected"));
  }
  const char* prefix = cfg.output_prefix.c_str();
  std::printf("wrote %s_rounds.json, %s_summary.csv\n", prefix, prefix);
  if (cfg.write_artifacts) {
    std::printf("wrote %s_global.flpd, %s_dp_test.csv", prefix, prefix);
    std::printf(cfg.detector.enabled ? ", %s_detector.json\n" : "\n", prefix);
  }
  return kOk;
}

int cmd_bench(const std::string& config_path, const std::string& clients, std::size_t repeats,
              const std::string& out_path) {
  const auto ks = parse_counts(clients);
  for (std::size_t i = 1; i < ks.size(); ++i)
    if (ks[i] <= ks[i - 1]) throw UsageError("--clients: counts must be ascending");
  const auto cfg = load_config(config_path);
  const auto rows = bench_scaling(cfg, ks, repeats);
  const auto csv = scaling_csv(rows);
  if (out_path.empty()) {
    std::cout << csv;
  } else {
    std::ofstream out(out_path);
    if (!(out << csv)) throw std::runtime_error("cannot write " + out_path);
    std::printf("wrote %s\n", out_path.c_str());
  }
  return kOk;
}

int cmd_audit(const std::string& model_path, const std::string& public_path, const std::string& detector_path,
              std::size_t client_id, const std::string& export_path) {
  const auto det = load_detector(detector_path);
  Update u;
  u.client_id = client_id;
  u.params = load_params(model_path);
  check_params(det.arch, u.params);
  auto dp_test = load_csv(public_path);
  if (dp_test.length() != det.arch.input_length)
    throw std::runtime_error(public_path + ": feature length does not match the detector architecture");
  u.n_samples = dp_test.size();
  const auto v = audit_update(u, det.arch, dp_test, det.auditor, det.config);
  if (!export_path.empty())
    export_audit_csv(build_audit_dataset(det.arch, u.params, dp_test, {AuditSource::Kind::kClient, client_id}),
                     export_path);
  std::printf("h %.4f  P %.4f  degenerate %zu  %s\n", v.h, v.threshold, v.degenerate_count,
              v.accepted ? "accepted" : "rejected");
  return kOk;
}

int cmd_attack_preview(const std::string& config_path, std::size_t client, const std::string& out_path) {
  const auto cfg = load_config(config_path);
  if (client >= cfg.num_clients)
    throw ConfigError("--client", "no client " + std::to_string(client) + " (clients = " +
                                      std::to_string(cfg.num_clients) + ")");
  const auto data = prepare_data(cfg);
  const auto& spec = cfg.attacks[client];
  const auto& clean = data.clients[client];
  const auto seed = client_round_seed(cfg.seed, 0, client);
  const std::string name(attack_name(spec.kind));

  if (spec.kind == AttackKind::kNone || is_data_attack(spec.kind)) {
    const auto attacked = apply_data_attack(spec, clean, attack_stream_seed(seed, spec));
    std::size_t relabeled = 0, perturbed = 0;
    for (std::size_t i = 0; i < clean.size(); ++i) {
      relabeled += attacked.samples[i].label != clean.samples[i].label;
      perturbed += attacked.samples[i].features != clean.samples[i].features;
    }
    const auto path = out_path.empty() ? cfg.output_prefix + "_client" + std::to_string(client) + "_attacked.csv"
                                       : out_path;
    save_csv(attacked, path);
    std::printf("client %zu  %s  samples %zu  relabeled %zu  perturbed %zu\nwrote %s\n", client, name.c_str(),
                clean.size(), relabeled, perturbed, path.c_str());
  } else {
    const auto update = local_train(client, cfg.arch, clean, data.initial, cfg.training, seed, spec);
    const auto path = out_path.empty() ? cfg.output_prefix + "_client" + std::to_string(client) + "_attacked.flpd"
                                       : out_path;
    save_params(update.params, path);
    std::printf("client %zu  %s  params %zu  rms %.6g\nwrote %s\n", client, name.c_str(), update.params.size(),
                params_rms(update.params), path.c_str());
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Audited federated learning: desk-scale experiments"};
  app.require_subcommand(1);

  std::string config, out, clients = "2,4,8,16", model, public_csv, detector, export_csv;
  std::size_t repeats = 5, client = 0;

  auto* run = app.add_subcommand("run", "Run an experiment and write its reports");
  run->add_option("--config", config, "Experiment config (JSON)")->required();
  run->add_option("--out", out, "Output prefix (overrides output.prefix)");

  auto* bench = app.add_subcommand("bench", "Audit wall time against the number of clients");
  bench->add_option("--config", config, "Experiment config (JSON)")->required();
  bench->add_option("--clients", clients, "Ascending client counts, comma separated");
  bench->add_option("--repeats", repeats, "Timed repetitions per count (minimum is reported)")
      ->check(CLI::PositiveNumber);
  bench->add_option("--out", out, "CSV path (default: stdout)");

  auto* audit = app.add_subcommand("audit", "Audit one model file against a saved detector");
  audit->add_option("--model", model, "Parameters (FLPD)")->required();
  audit->add_option("--public", public_csv, "Public test data (CSV, label last)")->required();
  audit->add_option("--detector", detector, "Detector calibration (JSON)")->required();
  audit->add_option("--client-id", client, "Client id recorded in the verdict");
  audit->add_option("--export-audit", export_csv, "Also write the audit samples to this CSV");

  auto* preview = app.add_subcommand("attack-preview", "Write a client's attacked data or parameters");
  preview->add_option("--config", config, "Experiment config (JSON)")->required();
  preview->add_option("--client", client, "Client id")->required();
  preview->add_option("--out", out, "Output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInvalid;
  }

  try {
    if (*run) return cmd_run(config, out);
    if (*bench) return cmd_bench(config, clients, repeats, out);
    if (*audit) return cmd_audit(model, public_csv, detector, client, export_csv);
    if (*preview) return cmd_attack_preview(config, client, out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kInvalid;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kInvalid;
}
