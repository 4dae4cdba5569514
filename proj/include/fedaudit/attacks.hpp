#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "fedaudit/dataset.hpp"
#include "fedaudit/nn.hpp"

namespace fedaudit {

enum class AttackKind {
  kNone,
  kRandomLabel,          // RL
  kRandomLabelFeature,   // RLF
  kLabelSwap,            // LS
  kFeaturePoison,        // FP
  kSignFlip,             // SF
  kSameValue,            // SV
  kAdditiveGaussian,     // AGA
  kGradientAscent,       // GA
};

std::string_view attack_name(AttackKind kind);
/// Accepts the short names "NONE", "RL", "RLF", "LS", "FP", "SF", "SV", "AGA", "GA".
AttackKind parse_attack_kind(std::string_view name);
bool is_data_attack(AttackKind kind);
bool is_model_attack(AttackKind kind);

struct AttackSpec {
  AttackKind kind = AttackKind::kNone;
  double fraction = 1.0;
  /// RLF and FP: unset means 3x the client's feature standard deviation.
  /// AGA: unset means the RMS of the clean trained parameters.
  std::optional<double> noise_std;
  std::size_t class_a = 0;
  std::size_t class_b = 1;
  double constant = 100.0;
  double sign_scale = 3.0;
  std::uint64_t seed = 0;
};

// Data poisoning. All preserve cardinality and feature length, and select
// ceil(fraction * n) samples with a seeded shuffle.
Dataset attack_random_label_flip(const Dataset& ds, double fraction, std::uint64_t seed);
Dataset attack_random_label_and_feature(const Dataset& ds, double fraction, double noise_std, std::uint64_t seed);
/// Selection is drawn from the samples of class_a and class_b only.
Dataset attack_label_swap(const Dataset& ds, std::size_t class_a, std::size_t class_b, double fraction,
                          std::uint64_t seed);
Dataset attack_feature_poison(const Dataset& ds, double fraction, double noise_std, std::uint64_t seed);

// Model poisoning.
ModelParams attack_sign_flip(ModelParams params, double scale);
ModelParams attack_same_value(ModelParams params, double constant);
ModelParams attack_additive_gaussian(ModelParams params, double noise_std, std::uint64_t seed);
ModelParams attack_gradient_ascent(const ArchSpec& arch, const Dataset& ds, const ModelParams& global,
                                   const TrainConfig& cfg, std::uint64_t seed);

/// Applies a data attack (identity for model attacks and NONE).
Dataset apply_data_attack(const AttackSpec& spec, const Dataset& ds, std::uint64_t seed);
/// Applies SF, SV or AGA to trained parameters (identity otherwise).
ModelParams apply_model_attack(const AttackSpec& spec, ModelParams trained, std::uint64_t seed);

/// Root mean square of all parameters.
double params_rms(const ModelParams& params);

}  // namespace fedaudit
