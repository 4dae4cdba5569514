#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>

#include "fedaudit/datagen.hpp"
#include "fedaudit/nn.hpp"

using namespace fedaudit;

namespace {

std::multiset<std::vector<double>> feature_set(const Dataset& ds) {
  std::multiset<std::vector<double>> out;
  for (const auto& s : ds.samples) out.insert(s.features);
  return out;
}

// Leave-one-out free 1-NN: classify each test sample by its nearest train sample.
double one_nn_accuracy(const Dataset& train, const Dataset& test) {
  std::size_t correct = 0;
  for (const auto& q : test.samples) {
    double best = 1e300;
    std::size_t label = 0;
    for (const auto& r : train.samples) {
      double d = 0.0;
      for (std::size_t i = 0; i < q.features.size(); ++i) d += (q.features[i] - r.features[i]) * (q.features[i] - r.features[i]);
      if (d < best) {
        best = d;
        label = r.label;
      }
    }
    correct += label == q.label;
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

}  // namespace

TEST(Synth, BalancedAndDeterministic) {
  const auto ds = synth_dataset(5, 100, 32, 0.5, 1);
  EXPECT_EQ(ds.size(), 500u);
  EXPECT_EQ(ds.class_counts(), (std::vector<std::size_t>(5, 100)));
  EXPECT_EQ(ds, synth_dataset(5, 100, 32, 0.5, 1));
  EXPECT_NE(ds, synth_dataset(5, 100, 32, 0.5, 2));
  EXPECT_NO_THROW(ds.validate());
}

TEST(Synth, NoiselessSameClassIdentical) {
  const auto ds = synth_dataset(3, 4, 16, 0.0, 9);
  std::map<std::size_t, std::vector<double>> first;
  for (const auto& s : ds.samples) {
    auto [it, fresh] = first.emplace(s.label, s.features);
    if (!fresh) {
      EXPECT_EQ(it->second, s.features);
    }
  }
  EXPECT_NE(first[0], first[1]);
}

TEST(Synth, ClassesSeparableByNearestNeighbour) {
  const auto train = synth_dataset(5, 100, 32, 0.5, 3);
  const auto test = synth_dataset(5, 50, 32, 0.5, 4);
  EXPECT_GE(one_nn_accuracy(train, test), 0.9);
}

TEST(Synth, SmallCnnLearnsDefaultGenerator) {
  const ArchSpec arch{32, 5, {{8, 5, 1}, {8, 5, 2}}, {16}};
  const auto train_ds = synth_dataset(5, 100, 32, 0.5, 5);
  const auto test_ds = synth_dataset(5, 100, 32, 0.5, 6);
  const auto p = train(arch, init_params(arch, 5), train_ds, {10, 0.05, 16}, 5);
  EXPECT_GE(evaluate(arch, p, test_ds), 0.9);
}

TEST(Split, StratifiedDisjointUnion) {
  const auto ds = synth_dataset(5, 20, 8, 0.5, 1);
  const auto sp = split(ds, 0.5, 7);
  EXPECT_EQ(sp.train.size(), 50u);
  EXPECT_EQ(sp.test.size(), 50u);
  EXPECT_EQ(sp.test.class_counts(), (std::vector<std::size_t>(5, 10)));
  auto all = feature_set(sp.train);
  for (const auto& f : feature_set(sp.test)) all.insert(f);
  EXPECT_EQ(all, feature_set(ds));
  for (const auto& s : sp.test.samples)
    EXPECT_EQ(std::count_if(sp.train.samples.begin(), sp.train.samples.end(),
                            [&](const Sample& t) { return t.features == s.features; }),
              0);
  const auto again = split(ds, 0.5, 7);
  EXPECT_EQ(again.train, sp.train);
  EXPECT_EQ(again.test, sp.test);
}

TEST(Split, ClampsAndRejects) {
  const auto ds = synth_dataset(2, 3, 4, 0.5, 1);
  const auto sp = split(ds, 0.01, 1);
  EXPECT_EQ(sp.test.class_counts(), (std::vector<std::size_t>{1, 1}));
  const auto hi = split(ds, 0.99, 1);
  EXPECT_EQ(hi.train.class_counts(), (std::vector<std::size_t>{1, 1}));
  EXPECT_THROW(split(synth_dataset(2, 1, 4, 0.5, 1), 0.5, 1), std::invalid_argument);
  EXPECT_THROW(split(ds, 0.0, 1), std::invalid_argument);
  EXPECT_THROW(split(ds, 1.0, 1), std::invalid_argument);
}

TEST(Partition, EvenSplitAndDeficit) {
  const auto ds = synth_dataset(2, 100, 4, 0.5, 1);
  const auto even = partition_non_iid(ds, {2, {}}, 3);
  ASSERT_EQ(even.size(), 2u);
  for (const auto& c : even) EXPECT_EQ(c.class_counts(), (std::vector<std::size_t>{50, 50}));

  const auto skewed = partition_non_iid(ds, {2, {{{1, 0}, 0.4}}}, 3);
  EXPECT_EQ(skewed[1].class_counts(), (std::vector<std::size_t>{30, 50}));
  EXPECT_EQ(skewed[0].class_counts(), (std::vector<std::size_t>{50, 50}));
}

TEST(Partition, DisjointSubsetOfInput) {
  const auto ds = synth_dataset(3, 30, 4, 0.5, 2);
  const auto parts = partition_non_iid(ds, {3, {{{0, 0}, 0.4}, {{1, 1}, 0.5}}}, 4);
  std::multiset<std::vector<double>> seen;
  for (const auto& p : parts)
    for (const auto& s : p.samples) {
      EXPECT_EQ(seen.count(s.features), 0u);
      seen.insert(s.features);
    }
  const auto input = feature_set(ds);
  for (const auto& f : seen) EXPECT_EQ(input.count(f), 1u);
  EXPECT_EQ(parts, partition_non_iid(ds, {3, {{{0, 0}, 0.4}, {{1, 1}, 0.5}}}, 4));
}

TEST(Partition, InfeasibleDeficitsRejected) {
  const auto ds = synth_dataset(2, 10, 4, 0.5, 1);
  EXPECT_THROW(partition_non_iid(ds, {2, {{{0, 0}, 0.95}}}, 1), std::invalid_argument);
  EXPECT_THROW(partition_non_iid(ds, {20, {}}, 1), std::invalid_argument);
  EXPECT_THROW(partition_non_iid(ds, {0, {}}, 1), std::invalid_argument);
}

TEST(Csv, RoundTripAndParse) {
  const auto ds = synth_dataset(3, 5, 6, 0.7, 1);
  EXPECT_EQ(parse_csv(to_csv(ds)), ds);
  const auto path = std::filesystem::temp_directory_path() / "fedaudit_csv_roundtrip.csv";
  save_csv(ds, path);
  EXPECT_EQ(load_csv(path), ds);
  std::filesystem::remove(path);

  const auto two = parse_csv("f0,f1,label\n0.5,1,0\n-2,3e-3,1\n");
  EXPECT_EQ(two.size(), 2u);
  EXPECT_EQ(two.num_classes, 2u);
  EXPECT_EQ(two.samples[1].features, (std::vector<double>{-2.0, 3e-3}));
}

TEST(Csv, ErrorsNameTheLine) {
  auto message = [](const std::string& text) {
    try {
      parse_csv(text);
    } catch (const std::exception& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  EXPECT_NE(message("f0,f1,label\n1,2,0\nNaN,2,1\n").find("line 3"), std::string::npos);
  EXPECT_NE(message("f0,f1,label\n1,2,0\n1,2\n").find("line 3"), std::string::npos);
  EXPECT_NE(message("f0,f1,label\n1,inf,0\n").find("line 2"), std::string::npos);
  EXPECT_NE(message("f0,f1,label\n1,2,-1\n").find("line 2"), std::string::npos);
  EXPECT_NE(message("x,y,label\n1,2,0\n").find("line 1"), std::string::npos);
  EXPECT_THROW(load_csv("/nonexistent/fedaudit.csv"), std::runtime_error);
}
