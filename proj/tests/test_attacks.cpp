#include <gtest/gtest.h>

#include <cmath>

#include "fedaudit/attacks.hpp"
#include "fedaudit/datagen.hpp"
#include "helpers.hpp"

using namespace fedaudit;
using fedaudit::testing::tiny_arch;

namespace {

std::size_t labels_changed(const Dataset& a, const Dataset& b) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) n += a.samples[i].label != b.samples[i].label;
  return n;
}

bool same_features(const Dataset& a, const Dataset& b) {
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a.samples[i].features != b.samples[i].features) return false;
  return true;
}

}  // namespace

TEST(Names, RoundTrip) {
  for (auto k : {AttackKind::kNone, AttackKind::kRandomLabel, AttackKind::kRandomLabelFeature, AttackKind::kLabelSwap,
                 AttackKind::kFeaturePoison, AttackKind::kSignFlip, AttackKind::kSameValue,
                 AttackKind::kAdditiveGaussian, AttackKind::kGradientAscent})
    EXPECT_EQ(parse_attack_kind(attack_name(k)), k);
  EXPECT_THROW(parse_attack_kind("XX"), std::invalid_argument);
  EXPECT_TRUE(is_data_attack(AttackKind::kLabelSwap));
  EXPECT_TRUE(is_model_attack(AttackKind::kGradientAscent));
  EXPECT_FALSE(is_data_attack(AttackKind::kNone));
  EXPECT_FALSE(is_model_attack(AttackKind::kNone));
}

TEST(RandomLabel, TwoClassesFlipAll) {
  const auto ds = synth_dataset(2, 20, 8, 0.5, 1);
  const auto out = attack_random_label_flip(ds, 1.0, 3);
  EXPECT_EQ(labels_changed(ds, out), ds.size());
  EXPECT_TRUE(same_features(ds, out));
}

TEST(RandomLabel, ExactFractionAndValidLabels) {
  const auto ds = synth_dataset(5, 20, 8, 0.5, 2);
  const auto out = attack_random_label_flip(ds, 0.5, 4);
  EXPECT_EQ(labels_changed(ds, out), 50u);
  for (const auto& s : out.samples) EXPECT_LT(s.label, 5u);
  EXPECT_EQ(out, attack_random_label_flip(ds, 0.5, 4));
  EXPECT_EQ(labels_changed(ds, attack_random_label_flip(ds, 0.33, 4)), 33u);  // ceil(0.33 * 100)
  EXPECT_THROW(attack_random_label_flip(ds, 0.0, 1), std::invalid_argument);
  EXPECT_THROW(attack_random_label_flip(synth_dataset(1, 4, 8, 0.5, 1), 1.0, 1), std::invalid_argument);
}

TEST(RandomLabelFeature, ZeroNoiseEqualsRandomLabel) {
  const auto ds = synth_dataset(5, 20, 8, 0.5, 3);
  EXPECT_EQ(attack_random_label_and_feature(ds, 0.6, 0.0, 9), attack_random_label_flip(ds, 0.6, 9));
}

TEST(RandomLabelFeature, NoiseStatisticsOnSelectedOnly) {
  const auto ds = synth_dataset(5, 100, 40, 0.5, 4);  // 500 * 40 = 2e4 values
  const double sigma = 1.5;
  const auto out = attack_random_label_and_feature(ds, 0.5, sigma, 5);
  double sq = 0.0;
  std::size_t n = 0, changed = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const bool selected = out.samples[i].label != ds.samples[i].label;
    changed += selected;
    if (!selected) {
      EXPECT_EQ(out.samples[i].features, ds.samples[i].features);
      continue;
    }
    for (std::size_t t = 0; t < 40; ++t) {
      const double d = out.samples[i].features[t] - ds.samples[i].features[t];
      sq += d * d;
      ++n;
    }
  }
  EXPECT_EQ(changed, 250u);
  EXPECT_NEAR(sq / static_cast<double>(n), sigma * sigma, 0.2 * sigma * sigma);
}

TEST(LabelSwap, InvolutionAndConservation) {
  const auto ds = synth_dataset(4, 15, 8, 0.5, 5);
  const auto once = attack_label_swap(ds, 0, 2, 1.0, 6);
  const auto counts = ds.class_counts(), after = once.class_counts();
  EXPECT_EQ(counts[0] + counts[2], after[0] + after[2]);
  EXPECT_EQ(counts[1], after[1]);
  EXPECT_EQ(counts[3], after[3]);
  EXPECT_TRUE(same_features(ds, once));
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto l = ds.samples[i].label;
    const std::size_t expected = l == 0 ? 2 : (l == 2 ? 0 : l);
    EXPECT_EQ(once.samples[i].label, expected);
  }
  EXPECT_EQ(attack_label_swap(once, 0, 2, 1.0, 6), ds);
}

TEST(LabelSwap, PartialFractionAndErrors) {
  const auto ds = synth_dataset(3, 20, 8, 0.5, 6);
  const auto out = attack_label_swap(ds, 0, 1, 0.5, 7);
  EXPECT_EQ(labels_changed(ds, out), 20u);  // ceil(0.5 * 40 samples of classes 0 and 1)
  EXPECT_THROW(attack_label_swap(ds, 1, 1, 1.0, 1), std::invalid_argument);
  EXPECT_THROW(attack_label_swap(ds, 0, 7, 1.0, 1), std::invalid_argument);
}

TEST(FeaturePoison, LabelsKeptVarianceMatches) {
  const auto ds = synth_dataset(5, 100, 40, 0.5, 7);
  const double sigma = 2.0;
  const auto out = attack_feature_poison(ds, 1.0, sigma, 8);
  double sq = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    EXPECT_EQ(out.samples[i].label, ds.samples[i].label);
    for (std::size_t t = 0; t < 40; ++t) {
      const double d = out.samples[i].features[t] - ds.samples[i].features[t];
      sq += d * d;
      ++n;
    }
  }
  EXPECT_NEAR(sq / static_cast<double>(n), sigma * sigma, 0.2 * sigma * sigma);
  EXPECT_THROW(attack_feature_poison(ds, 1.0, 0.0, 1), std::invalid_argument);
  EXPECT_THROW(attack_feature_poison(ds, 0.0, 1.0, 1), std::invalid_argument);
}

TEST(DataAttacks, PreserveCardinalityAndLength) {
  const auto ds = synth_dataset(3, 10, 8, 0.5, 8);
  for (auto kind : {AttackKind::kRandomLabel, AttackKind::kRandomLabelFeature, AttackKind::kLabelSwap,
                    AttackKind::kFeaturePoison}) {
    AttackSpec spec;
    spec.kind = kind;
    const auto out = apply_data_attack(spec, ds, 3);
    EXPECT_EQ(out.size(), ds.size());
    EXPECT_EQ(out.length(), ds.length());
    EXPECT_EQ(out, apply_data_attack(spec, ds, 3));
  }
}

TEST(DataAttacks, DefaultNoiseIsThreeFeatureStd) {
  const auto ds = synth_dataset(5, 100, 40, 0.5, 9);
  AttackSpec spec;
  spec.kind = AttackKind::kFeaturePoison;
  const auto out = apply_data_attack(spec, ds, 4);
  const double sigma = 3.0 * feature_stddev(ds);
  double sq = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i)
    for (std::size_t t = 0; t < 40; ++t) {
      const double d = out.samples[i].features[t] - ds.samples[i].features[t];
      sq += d * d;
    }
  EXPECT_NEAR(std::sqrt(sq / 20000.0), sigma, 0.1 * sigma);
}

TEST(SignFlip, FormulaInvolutionNorm) {
  ModelParams p{{Tensor{{2}, {1.0, -2.0}}}};
  EXPECT_EQ(attack_sign_flip(p, 3.0).tensors[0].values, (std::vector<double>{-3.0, 6.0}));
  EXPECT_EQ(attack_sign_flip(attack_sign_flip(p, 1.0), 1.0), p);
  const auto q = init_params(tiny_arch(), 1);
  EXPECT_NEAR(params_rms(attack_sign_flip(q, 3.0)), 3.0 * params_rms(q), 1e-12);
  EXPECT_THROW(attack_sign_flip(q, 0.5), std::invalid_argument);
}

TEST(SameValue, AllEntriesIdempotent) {
  const auto p = init_params(tiny_arch(), 2);
  const auto out = attack_same_value(p, 100.0);
  EXPECT_TRUE(out.same_shape(p));
  out.for_each([](double v) { EXPECT_EQ(v, 100.0); });
  EXPECT_EQ(attack_same_value(out, 100.0), out);
  EXPECT_THROW(attack_same_value(p, INFINITY), std::invalid_argument);
}

TEST(AdditiveGaussian, LimitDeterminismStatistics) {
  const ArchSpec arch{32, 5, {{8, 5, 1}, {8, 5, 2}}, {128}};  // > 1e4 parameters
  const auto p = init_params(arch, 3);
  ASSERT_GE(p.size(), 10000u);
  const auto tiny = attack_additive_gaussian(p, 1e-12, 4);
  const auto fp = p.flatten(), ft = tiny.flatten();
  for (std::size_t i = 0; i < fp.size(); ++i) EXPECT_LE(std::abs(fp[i] - ft[i]), 1e-10);
  EXPECT_EQ(attack_additive_gaussian(p, 0.5, 4), attack_additive_gaussian(p, 0.5, 4));
  const auto fn = attack_additive_gaussian(p, 0.5, 4).flatten();
  double mean = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < fp.size(); ++i) mean += fn[i] - fp[i];
  mean /= static_cast<double>(fp.size());
  for (std::size_t i = 0; i < fp.size(); ++i) sq += (fn[i] - fp[i] - mean) * (fn[i] - fp[i] - mean);
  EXPECT_NEAR(std::sqrt(sq / static_cast<double>(fp.size() - 1)), 0.5, 0.05);
  EXPECT_THROW(attack_additive_gaussian(p, 0.0, 1), std::invalid_argument);
}

TEST(GradientAscent, EqualsAscentTrainingAndRaisesLoss) {
  const ArchSpec arch{32, 5, {{8, 5, 1}, {8, 5, 2}}, {16}};
  const auto ds = synth_dataset(5, 20, 32, 0.5, 5);
  const auto g = train(arch, init_params(arch, 5), ds, {5, 0.05, 16}, 1);
  const TrainConfig cfg{1, 0.01, 16};
  const auto up = attack_gradient_ascent(arch, ds, g, cfg, 2);
  EXPECT_EQ(up, train(arch, g, ds, cfg, 2, Direction::kAscent));
  EXPECT_GE(mean_loss(arch, up, ds.samples), mean_loss(arch, g, ds.samples));
  EXPECT_EQ(attack_gradient_ascent(arch, ds, g, {0, 0.01, 16}, 2), g);
}

TEST(ModelAttacks, PreserveShapeAndFiniteness) {
  const auto p = init_params(tiny_arch(), 6);
  for (auto kind : {AttackKind::kSignFlip, AttackKind::kSameValue, AttackKind::kAdditiveGaussian}) {
    AttackSpec spec;
    spec.kind = kind;
    const auto out = apply_model_attack(spec, p, 7);
    EXPECT_TRUE(out.same_shape(p));
    EXPECT_TRUE(out.all_finite());
    EXPECT_NE(out, p);
  }
  AttackSpec none;
  EXPECT_EQ(apply_model_attack(none, p, 7), p);
}
