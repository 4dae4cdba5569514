#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fedaudit/dataset.hpp"

namespace fedaudit {

struct ConvSpec {
  std::size_t filters = 1;
  std::size_t kernel_size = 1;
  std::size_t stride = 1;

  friend bool operator==(const ConvSpec&, const ConvSpec&) = default;
};

/// One network of the supported family: single-channel 1-D input, a stack of
/// valid (unpadded) ReLU convolutions, ReLU dense layers and a softmax output
/// of num_classes units. The last convolution is the tap point for auditing.
struct ArchSpec {
  std::size_t input_length = 0;
  std::size_t num_classes = 0;
  std::vector<ConvSpec> conv_layers;
  std::vector<std::size_t> dense_layers;

  /// Throws std::invalid_argument if any size is zero, a kernel does not fit
  /// its input, or there is no convolution to tap.
  void validate() const;

  /// Output length of every convolution, in order.
  std::vector<std::size_t> conv_output_lengths() const;
  std::size_t tap_layer_index() const { return conv_layers.size() - 1; }
  /// Flattened size of the last convolution output: length * filters.
  std::size_t tap_width() const;
  std::size_t parameter_count() const;

  friend bool operator==(const ArchSpec&, const ArchSpec&) = default;
};

/// Dense row-major tensor. A rank-0 tensor holds a single value.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> values;

  static std::size_t element_count(std::span<const std::size_t> shape);
  friend bool operator==(const Tensor&, const Tensor&) = default;
};

/// Ordered parameter tensors: for each layer its weights then its biases.
/// Convolution weights are [filters, in_channels, kernel]; dense weights are
/// [out, in].
struct ModelParams {
  std::vector<Tensor> tensors;

  std::size_t size() const;
  bool same_shape(const ModelParams& other) const;
  bool all_finite() const;
  /// Applies fn to every scalar in tensor order.
  template <typename Fn>
  void for_each(Fn&& fn) {
    for (auto& t : tensors)
      for (auto& v : t.values) fn(v);
  }
  template <typename Fn>
  void for_each(Fn&& fn) const {
    for (const auto& t : tensors)
      for (const auto& v : t.values) fn(v);
  }
  std::vector<double> flatten() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Throws std::invalid_argument unless params has exactly the tensor shapes of arch.
void check_params(const ArchSpec& arch, const ModelParams& params);
/// All-zero parameters shaped for arch.
ModelParams zero_params(const ArchSpec& arch);

struct TapRecord {
  std::vector<double> activations;  // post-ReLU output of the last conv, [filter][position]
  double class_prob = 0.0;          // probs[label]
  std::vector<double> probs;
};

enum class Direction { kDescent, kAscent };

struct TrainConfig {
  std::size_t epochs = 1;
  double lr = 0.05;
  std::size_t batch_size = 16;
};

/// Fan-in scaled uniform weights U(-1/sqrt(fan_in), 1/sqrt(fan_in)), zero biases.
ModelParams init_params(const ArchSpec& arch, std::uint64_t seed);

TapRecord forward(const ArchSpec& arch, const ModelParams& params,
                  std::span<const double> x, std::size_t label);

/// Class probabilities only.
std::vector<double> predict_proba(const ArchSpec& arch, const ModelParams& params,
                                  std::span<const double> x);

struct LossAndGrad {
  double loss = 0.0;
  ModelParams grads;
};

/// Mean cross-entropy over the batch and its gradient.
LossAndGrad loss_and_grad(const ArchSpec& arch, const ModelParams& params,
                          std::span<const Sample> batch);

/// Mean cross-entropy only.
double mean_loss(const ArchSpec& arch, const ModelParams& params, std::span<const Sample> batch);

/// One update: params -= step * grads for descent, params += step * grads for
/// ascent. The step is not sign-restricted here.
void sgd_step(ModelParams& params, const ModelParams& grads, double step, Direction direction);

/// Mini-batch SGD with a seeded shuffle per epoch. The last batch of an epoch
/// may be short.
ModelParams train(const ArchSpec& arch, ModelParams params, const Dataset& ds,
                  const TrainConfig& cfg, std::uint64_t seed,
                  Direction direction = Direction::kDescent);

/// Index of the largest probability; ties go to the lowest class index.
std::size_t argmax(std::span<const double> probs);

double evaluate(const ArchSpec& arch, const ModelParams& params, const Dataset& ds);

}  // namespace fedaudit
