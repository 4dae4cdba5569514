#include "fedaudit/attacks.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "fedaudit/rng.hpp"

namespace fedaudit {

namespace {

constexpr std::array<std::pair<AttackKind, std::string_view>, 9> kNames{{
    {AttackKind::kNone, "NONE"},
    {AttackKind::kRandomLabel, "RL"},
    {AttackKind::kRandomLabelFeature, "RLF"},
    {AttackKind::kLabelSwap, "LS"},
    {AttackKind::kFeaturePoison, "FP"},
    {AttackKind::kSignFlip, "SF"},
    {AttackKind::kSameValue, "SV"},
    {AttackKind::kAdditiveGaussian, "AGA"},
    {AttackKind::kGradientAscent, "GA"},
}};

void check_fraction(double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw std::invalid_argument("attack: fraction must lie in (0, 1]");
}

// First ceil(fraction * |pool|) entries of a seeded shuffle of pool.
std::vector<std::size_t> select(std::vector<std::size_t> pool, double fraction, Rng& rng) {
  std::shuffle(pool.begin(), pool.end(), rng);
  const auto n = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(pool.size())));
  pool.resize(std::min(n, pool.size()));
  return pool;
}

std::vector<std::size_t> all_indices(const Dataset& ds) {
  std::vector<std::size_t> idx(ds.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

void add_noise(Dataset& ds, const std::vector<std::size_t>& chosen, double noise_std, std::uint64_t seed) {
  if (noise_std == 0.0) return;
  Rng rng(derive_seed(seed, {stream::kNoise}));
  std::normal_distribution<double> noise(0.0, noise_std);
  for (std::size_t i : chosen)
    for (auto& v : ds.samples[i].features) v += noise(rng);
}

std::vector<std::size_t> flip_labels(Dataset& ds, double fraction, std::uint64_t seed) {
  check_fraction(fraction);
  if (ds.num_classes < 2) throw std::invalid_argument("attack: label flipping needs at least 2 classes");
  Rng rng(seed);
  auto chosen = select(all_indices(ds), fraction, rng);
  std::uniform_int_distribution<std::size_t> other(0, ds.num_classes - 2);
  for (std::size_t i : chosen) {
    auto& label = ds.samples[i].label;
    const std::size_t draw = other(rng);
    label = draw >= label ? draw + 1 : draw;
  }
  return chosen;
}

}  // namespace

std::string_view attack_name(AttackKind kind) {
  for (const auto& [k, name] : kNames)
    if (k == kind) return name;
  return "?";
}

AttackKind parse_attack_kind(std::string_view name) {
  for (const auto& [k, n] : kNames)
    if (n == name) return k;
  throw std::invalid_argument("unknown attack kind '" + std::string(name) + "'");
}

bool is_data_attack(AttackKind kind) {
  return kind == AttackKind::kRandomLabel || kind == AttackKind::kRandomLabelFeature ||
         kind == AttackKind::kLabelSwap || kind == AttackKind::kFeaturePoison;
}

bool is_model_attack(AttackKind kind) {
  return kind == AttackKind::kSignFlip || kind == AttackKind::kSameValue || kind == AttackKind::kAdditiveGaussian ||
         kind == AttackKind::kGradientAscent;
}

Dataset attack_random_label_flip(const Dataset& ds, double fraction, std::uint64_t seed) {
  Dataset out = ds;
  flip_labels(out, fraction, seed);
  return out;
}

Dataset attack_random_label_and_feature(const Dataset& ds, double fraction, double noise_std, std::uint64_t seed) {
  if (!(noise_std >= 0.0)) throw std::invalid_argument("attack: noise_std must be non-negative");
  Dataset out = ds;
  const auto chosen = flip_labels(out, fraction, seed);
  add_noise(out, chosen, noise_std, seed);
  return out;
}

Dataset attack_label_swap(const Dataset& ds, std::size_t class_a, std::size_t class_b, double fraction,
                          std::uint64_t seed) {
  check_fraction(fraction);
  if (class_a == class_b) throw std::invalid_argument("attack: label swap needs two distinct classes");
  std::vector<std::size_t> pool;
  bool has_a = false, has_b = false;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto label = ds.samples[i].label;
    has_a = has_a || label == class_a;
    has_b = has_b || label == class_b;
    if (label == class_a || label == class_b) pool.push_back(i);
  }
  if (!has_a || !has_b) throw std::invalid_argument("attack: label swap class missing from dataset");
  Rng rng(seed);
  Dataset out = ds;
  for (std::size_t i : select(std::move(pool), fraction, rng)) {
    auto& label = out.samples[i].label;
    label = label == class_a ? class_b : class_a;
  }
  return out;
}

Dataset attack_feature_poison(const Dataset& ds, double fraction, double noise_std, std::uint64_t seed) {
  check_fraction(fraction);
  if (!(noise_std > 0.0)) throw std::invalid_argument("attack: feature poisoning needs noise_std > 0");
  Rng rng(seed);
  Dataset out = ds;
  add_noise(out, select(all_indices(ds), fraction, rng), noise_std, seed);
  return out;
}

ModelParams attack_sign_flip(ModelParams params, double scale) {
  if (!(scale >= 1.0)) throw std::invalid_argument("attack: sign flip scale must be >= 1");
  params.for_each([&](double& v) { v = -scale * v; });
  return params;
}

ModelParams attack_same_value(ModelParams params, double constant) {
  if (!std::isfinite(constant)) throw std::invalid_argument("attack: same-value constant must be finite");
  params.for_each([&](double& v) { v = constant; });
  return params;
}

ModelParams attack_additive_gaussian(ModelParams params, double noise_std, std::uint64_t seed) {
  if (!(noise_std > 0.0)) throw std::invalid_argument("attack: additive Gaussian needs noise_std > 0");
  Rng rng(seed);
  std::normal_distribution<double> noise(0.0, noise_std);
  params.for_each([&](double& v) { v += noise(rng); });
  return params;
}

ModelParams attack_gradient_ascent(const ArchSpec& arch, const Dataset& ds, const ModelParams& global,
                                   const TrainConfig& cfg, std::uint64_t seed) {
  return train(arch, global, ds, cfg, seed, Direction::kAscent);
}

double params_rms(const ModelParams& params) {
  double sq = 0.0;
  params.for_each([&](double v) { sq += v * v; });
  const auto n = params.size();
  return n == 0 ? 0.0 : std::sqrt(sq / static_cast<double>(n));
}

Dataset apply_data_attack(const AttackSpec& spec, const Dataset& ds, std::uint64_t seed) {
  switch (spec.kind) {
    case AttackKind::kRandomLabel:
      return attack_random_label_flip(ds, spec.fraction, seed);
    case AttackKind::kRandomLabelFeature:
      return attack_random_label_and_feature(ds, spec.fraction, spec.noise_std.value_or(3.0 * feature_stddev(ds)),
                                             seed);
    case AttackKind::kLabelSwap:
      return attack_label_swap(ds, spec.class_a, spec.class_b, spec.fraction, seed);
    case AttackKind::kFeaturePoison:
      return attack_feature_poison(ds, spec.fraction, spec.noise_std.value_or(3.0 * feature_stddev(ds)), seed);
    default:
      return ds;
  }
}

ModelParams apply_model_attack(const AttackSpec& spec, ModelParams trained, std::uint64_t seed) {
  switch (spec.kind) {
    case AttackKind::kSignFlip:
      return attack_sign_flip(std::move(trained), spec.sign_scale);
    case AttackKind::kSameValue:
      return attack_same_value(std::move(trained), spec.constant);
    case AttackKind::kAdditiveGaussian: {
      const double sigma = spec.noise_std.value_or(params_rms(trained));
      return attack_additive_gaussian(std::move(trained), sigma, seed);
    }
    default:
      return trained;
  }
}

}  // namespace fedaudit
