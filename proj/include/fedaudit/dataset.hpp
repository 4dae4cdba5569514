#pragma once

#include <cstddef>
#include <vector>

namespace fedaudit {

struct Sample {
  std::vector<double> features;
  std::size_t label = 0;

  friend bool operator==(const Sample&, const Sample&) = default;
};

/// Labeled fixed-length time series. Every feature vector has the same length
/// and every label is below num_classes.
struct Dataset {
  std::vector<Sample> samples;
  std::size_t num_classes = 0;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  /// Feature length l; 0 for an empty dataset.
  std::size_t length() const { return samples.empty() ? 0 : samples.front().features.size(); }
  std::vector<std::size_t> class_counts() const;
  /// Throws std::invalid_argument on ragged rows, bad labels or non-finite features.
  void validate() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Standard deviation over every feature value of every sample.
double feature_stddev(const Dataset& ds);

}  // namespace fedaudit
