#include "fedaudit/federation.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <stdexcept>

#include "fedaudit/rng.hpp"

namespace fedaudit {

namespace {

void sort_and_check(std::vector<Update>& updates, const char* who) {
  if (updates.empty()) throw std::invalid_argument(std::string(who) + ": no updates");
  std::stable_sort(updates.begin(), updates.end(),
                   [](const Update& a, const Update& b) { return a.client_id < b.client_id; });
  for (const auto& u : updates)
    if (!u.params.same_shape(updates.front().params))
      throw std::invalid_argument(std::string(who) + ": parameter shape mismatch");
}

// Calls fn(column, out) for every coordinate, with column holding that
// coordinate across updates.
template <typename Fn>
ModelParams per_coordinate(const std::vector<Update>& updates, Fn&& fn) {
  ModelParams out = updates.front().params;
  std::vector<double> column(updates.size());
  for (std::size_t t = 0; t < out.tensors.size(); ++t) {
    auto& values = out.tensors[t].values;
    for (std::size_t i = 0; i < values.size(); ++i) {
      for (std::size_t k = 0; k < updates.size(); ++k) column[k] = updates[k].params.tensors[t].values[i];
      values[i] = fn(column);
    }
  }
  return out;
}

double squared_distance(const ModelParams& a, const ModelParams& b) {
  double d = 0.0;
  for (std::size_t t = 0; t < a.tensors.size(); ++t) {
    const auto& x = a.tensors[t].values;
    const auto& y = b.tensors[t].values;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double e = x[i] - y[i];
      d += e * e;
    }
  }
  return d;
}

}  // namespace

std::uint64_t client_round_seed(std::uint64_t seed, std::size_t round, std::size_t client) {
  return derive_seed(seed, {stream::kRound, round, client});
}

std::uint64_t attack_stream_seed(std::uint64_t client_seed, const AttackSpec& attack) {
  return derive_seed(client_seed, {stream::kAttack, attack.seed});
}

Update local_train(std::size_t client_id, const ArchSpec& arch, const Dataset& client_ds, const ModelParams& global,
                   const TrainConfig& cfg, std::uint64_t seed, const AttackSpec& attack) {
  if (client_ds.empty()) throw std::invalid_argument("local_train: client " + std::to_string(client_id) + " has no data");
  const std::uint64_t attack_seed = attack_stream_seed(seed, attack);
  Update u;
  u.client_id = client_id;
  u.n_samples = client_ds.size();
  if (attack.kind == AttackKind::kGradientAscent) {
    u.params = attack_gradient_ascent(arch, client_ds, global, cfg, seed);
  } else if (is_data_attack(attack.kind)) {
    u.params = train(arch, global, apply_data_attack(attack, client_ds, attack_seed), cfg, seed);
  } else {
    u.params = apply_model_attack(attack, train(arch, global, client_ds, cfg, seed), attack_seed);
  }
  return u;
}

ModelParams fedavg(std::vector<Update> updates) {
  sort_and_check(updates, "fedavg");
  double total = 0.0;
  for (const auto& u : updates) total += static_cast<double>(u.n_samples);
  if (!(total > 0.0)) throw std::invalid_argument("fedavg: total sample count is zero");
  ModelParams out = updates.front().params;
  out.for_each([](double& v) { v = 0.0; });
  for (const auto& u : updates) {
    const double w = static_cast<double>(u.n_samples) / total;
    for (std::size_t t = 0; t < out.tensors.size(); ++t) {
      auto& o = out.tensors[t].values;
      const auto& p = u.params.tensors[t].values;
      for (std::size_t i = 0; i < o.size(); ++i) o[i] += w * p[i];
    }
  }
  return out;
}

ModelParams krum(std::vector<Update> updates, std::size_t f) {
  sort_and_check(updates, "krum");
  const std::size_t k = updates.size();
  if (k < f + 3)
    throw std::invalid_argument("krum: needs at least f + 3 = " + std::to_string(f + 3) + " updates, got " +
                                std::to_string(k));
  std::vector<std::vector<double>> dist(k, std::vector<double>(k, 0.0));
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = i + 1; j < k; ++j) dist[i][j] = dist[j][i] = squared_distance(updates[i].params, updates[j].params);

  const std::size_t neighbours = k - f - 2;
  std::size_t best = 0;
  double best_score = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < k; ++i) {
    std::vector<double> others;
    for (std::size_t j = 0; j < k; ++j)
      if (j != i) others.push_back(dist[i][j]);
    std::sort(others.begin(), others.end());
    double score = 0.0;
    for (std::size_t n = 0; n < neighbours; ++n) score += others[n];
    if (score < best_score) {  // strict: ties keep the lower client_id
      best_score = score;
      best = i;
    }
  }
  return updates[best].params;
}

ModelParams coordinate_median(std::vector<Update> updates) {
  sort_and_check(updates, "coordinate_median");
  return per_coordinate(updates, [](std::vector<double>& col) {
    std::sort(col.begin(), col.end());
    const std::size_t n = col.size();
    return n % 2 == 1 ? col[n / 2] : (col[n / 2 - 1] + col[n / 2]) / 2.0;
  });
}

ModelParams trimmed_mean(std::vector<Update> updates, std::size_t trim) {
  sort_and_check(updates, "trimmed_mean");
  if (updates.size() <= 2 * trim)
    throw std::invalid_argument("trimmed_mean: needs more than 2 * trim = " + std::to_string(2 * trim) + " updates");
  return per_coordinate(updates, [trim](std::vector<double>& col) {
    std::sort(col.begin(), col.end());
    double sum = 0.0;
    for (std::size_t i = trim; i < col.size() - trim; ++i) sum += col[i];
    return sum / static_cast<double>(col.size() - 2 * trim);
  });
}

std::string Aggregator::name() const {
  switch (kind) {
    case Kind::kFedAvg:
      return "fedavg";
    case Kind::kKrum:
      return "krum";
    case Kind::kCoordinateMedian:
      return "coordinate_median";
    case Kind::kTrimmedMean:
      return "trimmed_mean";
  }
  return "?";
}

ModelParams Aggregator::apply(std::vector<Update> updates) const {
  switch (kind) {
    case Kind::kFedAvg:
      return fedavg(std::move(updates));
    case Kind::kKrum:
      return krum(std::move(updates), f);
    case Kind::kCoordinateMedian:
      return coordinate_median(std::move(updates));
    case Kind::kTrimmedMean:
      return trimmed_mean(std::move(updates), trim);
  }
  throw std::logic_error("unknown aggregator");
}

std::vector<Update> train_clients(const ArchSpec& arch, const ModelParams& global,
                                  const std::vector<ClientSetup>& clients, const TrainConfig& cfg,
                                  std::uint64_t seed, std::size_t round) {
  std::vector<std::future<Update>> pending;
  pending.reserve(clients.size());
  for (std::size_t k = 0; k < clients.size(); ++k) {
    const std::uint64_t client_seed = client_round_seed(seed, round, k);
    pending.push_back(std::async(std::launch::async, [&, k, client_seed] {
      return local_train(k, arch, clients[k].data, global, cfg, client_seed, clients[k].attack);
    }));
  }
  std::vector<Update> updates;
  updates.reserve(clients.size());
  for (std::size_t k = 0; k < pending.size(); ++k) {
    try {
      updates.push_back(pending[k].get());
    } catch (const std::exception& e) {
      throw std::runtime_error("round " + std::to_string(round) + ", client " + std::to_string(k) + ": " + e.what());
    }
  }
  return updates;
}

std::vector<Verdict> audit_updates(const std::vector<Update>& updates, const Dataset& dp_test,
                                   const Detector* detector) {
  std::vector<Verdict> verdicts;
  verdicts.reserve(updates.size());
  if (detector == nullptr) {
    for (const auto& u : updates) {
      Verdict v;
      v.client_id = u.client_id;
      v.h = v.threshold = std::numeric_limits<double>::quiet_NaN();
      v.audited = false;
      verdicts.push_back(v);
    }
    return verdicts;
  }
  std::vector<std::future<Verdict>> pending;
  for (const auto& u : updates)
    pending.push_back(std::async(std::launch::async, [&] {
      return audit_update(u, detector->arch, dp_test, detector->auditor, detector->config);
    }));
  for (auto& p : pending) verdicts.push_back(p.get());
  return verdicts;
}

std::optional<ModelParams> aggregate_accepted(const std::vector<Update>& updates, const std::vector<Verdict>& verdicts,
                                              const Aggregator& aggregator) {
  if (updates.size() != verdicts.size()) throw std::invalid_argument("aggregate: one verdict per update required");
  std::vector<Update> accepted;
  for (std::size_t i = 0; i < updates.size(); ++i) {
    if (verdicts[i].client_id != updates[i].client_id)
      throw std::invalid_argument("aggregate: verdict order does not match updates");
    if (verdicts[i].accepted) accepted.push_back(updates[i]);
  }
  if (accepted.empty()) return std::nullopt;
  return aggregator.apply(std::move(accepted));
}

RoundResult run_round(const ArchSpec& arch, const ModelParams& global, const std::vector<ClientSetup>& clients,
                      const TrainConfig& cfg, const Dataset& dp_test, const Detector* detector,
                      const Aggregator& aggregator, const Dataset& eval_set, std::uint64_t seed, std::size_t round) {
  RoundResult result;
  auto& report = result.report;
  report.round = round;
  report.aggregator = aggregator.name();
  report.acc_before = evaluate(arch, global, eval_set);
  for (const auto& c : clients) report.attacks.emplace_back(attack_name(c.attack.kind));

  const auto updates = train_clients(arch, global, clients, cfg, seed, round);
  report.verdicts = audit_updates(updates, dp_test, detector);
  for (const auto& v : report.verdicts)
    if (v.accepted) report.accepted_ids.push_back(v.client_id);

  std::optional<ModelParams> aggregated;
  try {
    aggregated = aggregate_accepted(updates, report.verdicts, aggregator);
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error("round " + std::to_string(round) + ", " + std::to_string(report.accepted_ids.size()) +
                             " accepted updates: " + e.what());
  }
  report.all_rejected = !aggregated.has_value();
  result.global = aggregated ? std::move(*aggregated) : global;
  report.acc_after = evaluate(arch, result.global, eval_set);
  return result;
}

Detector setup_detector(const ArchSpec& arch, const ModelParams& initial, const Dataset& dp_train,
                        const Dataset& dp_test, const TrainConfig& cfg, const DetectorOptions& options,
                        std::uint64_t seed) {
  Detector d;
  d.arch = arch;
  d.reference = train(arch, initial, dp_train, cfg, seed);
  const auto da_train = build_audit_dataset(arch, d.reference, dp_train, {AuditSource::Kind::kTrain, 0});
  const auto da_test = build_audit_dataset(arch, d.reference, dp_test, {AuditSource::Kind::kTest, 0});
  d.auditor = ocsvm_fit(da_train, options.ocsvm, options.scaling);
  d.config = calibrate(poisoned_rate(d.auditor, da_train), poisoned_rate(d.auditor, da_test), options.alpha);
  return d;
}

}  // namespace fedaudit
