#include "fedaudit/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "fedaudit/rng.hpp"

namespace fedaudit {

void ArchSpec::validate() const {
  if (input_length == 0) throw std::invalid_argument("arch: input_length must be positive");
  if (num_classes == 0) throw std::invalid_argument("arch: num_classes must be positive");
  if (conv_layers.empty()) throw std::invalid_argument("arch: at least one convolution is required");
  std::size_t len = input_length;
  for (std::size_t i = 0; i < conv_layers.size(); ++i) {
    const auto& c = conv_layers[i];
    if (c.filters == 0 || c.kernel_size == 0 || c.stride == 0)
      throw std::invalid_argument("arch: conv layer " + std::to_string(i) + " has a zero size");
    if (c.kernel_size > len)
      throw std::invalid_argument("arch: conv layer " + std::to_string(i) + " kernel exceeds input length " +
                                  std::to_string(len));
    len = (len - c.kernel_size) / c.stride + 1;
  }
  for (std::size_t i = 0; i < dense_layers.size(); ++i)
    if (dense_layers[i] == 0)
      throw std::invalid_argument("arch: dense layer " + std::to_string(i) + " has zero units");
}

std::vector<std::size_t> ArchSpec::conv_output_lengths() const {
  std::vector<std::size_t> out;
  std::size_t len = input_length;
  for (const auto& c : conv_layers) {
    len = (len - c.kernel_size) / c.stride + 1;
    out.push_back(len);
  }
  return out;
}

std::size_t ArchSpec::tap_width() const {
  return conv_output_lengths().back() * conv_layers.back().filters;
}

std::size_t ArchSpec::parameter_count() const {
  return zero_params(*this).size();
}

std::size_t Tensor::element_count(std::span<const std::size_t> shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::size_t ModelParams::size() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += t.values.size();
  return n;
}

bool ModelParams::same_shape(const ModelParams& other) const {
  if (tensors.size() != other.tensors.size()) return false;
  for (std::size_t i = 0; i < tensors.size(); ++i)
    if (tensors[i].shape != other.tensors[i].shape) return false;
  return true;
}

bool ModelParams::all_finite() const {
  bool ok = true;
  for_each([&](double v) { ok = ok && std::isfinite(v); });
  return ok;
}

std::vector<double> ModelParams::flatten() const {
  std::vector<double> out;
  out.reserve(size());
  for_each([&](double v) { out.push_back(v); });
  return out;
}

ModelParams zero_params(const ArchSpec& arch) {
  arch.validate();
  ModelParams p;
  auto add = [&](std::vector<std::size_t> shape) {
    Tensor t;
    t.values.assign(Tensor::element_count(shape), 0.0);
    t.shape = std::move(shape);
    p.tensors.push_back(std::move(t));
  };
  std::size_t channels = 1;
  for (const auto& c : arch.conv_layers) {
    add({c.filters, channels, c.kernel_size});
    add({c.filters});
    channels = c.filters;
  }
  std::size_t in = arch.tap_width();
  for (std::size_t units : arch.dense_layers) {
    add({units, in});
    add({units});
    in = units;
  }
  add({arch.num_classes, in});
  add({arch.num_classes});
  return p;
}

void check_params(const ArchSpec& arch, const ModelParams& params) {
  if (!zero_params(arch).same_shape(params))
    throw std::invalid_argument("parameter shapes do not match the architecture");
}

ModelParams init_params(const ArchSpec& arch, std::uint64_t seed) {
  ModelParams p = zero_params(arch);
  Rng rng(seed);
  for (std::size_t i = 0; i < p.tensors.size(); i += 2) {
    auto& w = p.tensors[i];
    const std::size_t fan_in = w.values.size() / w.shape[0];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& v : w.values) v = dist(rng);
  }
  return p;
}

namespace {

struct Activations {
  std::vector<std::vector<double>> conv;   // post-ReLU, [filter][position]
  std::vector<std::vector<double>> dense;  // post-ReLU hidden layers
  std::vector<double> logits;
  std::vector<double> probs;
};

// Flattened view of the layer geometry, computed once per call.
struct Geometry {
  struct Conv {
    std::size_t in_channels, in_len, filters, kernel, stride, out_len;
  };
  std::vector<Conv> conv;
  std::vector<std::size_t> dense_in, dense_out;  // includes the output layer

  explicit Geometry(const ArchSpec& arch) {
    std::size_t channels = 1, len = arch.input_length;
    for (const auto& c : arch.conv_layers) {
      const std::size_t out_len = (len - c.kernel_size) / c.stride + 1;
      conv.push_back({channels, len, c.filters, c.kernel_size, c.stride, out_len});
      channels = c.filters;
      len = out_len;
    }
    std::size_t in = channels * len;
    for (std::size_t units : arch.dense_layers) {
      dense_in.push_back(in);
      dense_out.push_back(units);
      in = units;
    }
    dense_in.push_back(in);
    dense_out.push_back(arch.num_classes);
  }
};

void softmax(std::span<const double> logits, std::vector<double>& probs) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  probs.resize(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    probs[i] = std::exp(logits[i] - mx);
    sum += probs[i];
  }
  for (auto& p : probs) p /= sum;
}

double cross_entropy(std::span<const double> logits, std::size_t label) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - mx);
  return std::log(sum) + mx - logits[label];
}

void run_forward(const Geometry& g, const ModelParams& p, std::span<const double> x, Activations& a) {
  a.conv.resize(g.conv.size());
  std::span<const double> in = x;
  std::size_t ti = 0;
  for (std::size_t li = 0; li < g.conv.size(); ++li, ti += 2) {
    const auto& c = g.conv[li];
    const auto& w = p.tensors[ti].values;
    const auto& b = p.tensors[ti + 1].values;
    auto& out = a.conv[li];
    out.assign(c.filters * c.out_len, 0.0);
    for (std::size_t f = 0; f < c.filters; ++f) {
      for (std::size_t pos = 0; pos < c.out_len; ++pos) {
        double acc = b[f];
        const std::size_t start = pos * c.stride;
        for (std::size_t ch = 0; ch < c.in_channels; ++ch) {
          const double* wr = &w[(f * c.in_channels + ch) * c.kernel];
          const double* xr = &in[ch * c.in_len + start];
          for (std::size_t t = 0; t < c.kernel; ++t) acc += wr[t] * xr[t];
        }
        out[f * c.out_len + pos] = acc < 0.0 ? 0.0 : acc;  // NaN propagates
      }
    }
    in = out;
  }
  const std::size_t hidden = g.dense_out.size() - 1;
  a.dense.resize(hidden);
  for (std::size_t li = 0; li <= hidden; ++li, ti += 2) {
    const auto& w = p.tensors[ti].values;
    const auto& b = p.tensors[ti + 1].values;
    const std::size_t n_in = g.dense_in[li], n_out = g.dense_out[li];
    auto& out = li < hidden ? a.dense[li] : a.logits;
    out.assign(n_out, 0.0);
    for (std::size_t o = 0; o < n_out; ++o) {
      double acc = b[o];
      const double* wr = &w[o * n_in];
      for (std::size_t i = 0; i < n_in; ++i) acc += wr[i] * in[i];
      out[o] = (li < hidden && acc <= 0.0) ? 0.0 : acc;
    }
    in = out;
  }
  softmax(a.logits, a.probs);
}

// Accumulates the gradient of cross_entropy(label) for one sample into grads.
void run_backward(const Geometry& g, const ModelParams& p, std::span<const double> x, std::size_t label,
                  const Activations& a, ModelParams& grads) {
  std::vector<double> delta(a.probs);
  delta[label] -= 1.0;
  std::vector<double> next;

  const std::size_t n_conv = g.conv.size();
  const std::size_t hidden = g.dense_out.size() - 1;
  for (std::size_t li = hidden + 1; li-- > 0;) {
    const std::size_t ti = 2 * (n_conv + li);
    const auto& w = p.tensors[ti].values;
    auto& gw = grads.tensors[ti].values;
    auto& gb = grads.tensors[ti + 1].values;
    const std::size_t n_in = g.dense_in[li], n_out = g.dense_out[li];
    std::span<const double> in = li > 0 ? std::span<const double>(a.dense[li - 1])
                                        : std::span<const double>(a.conv.back());
    next.assign(n_in, 0.0);
    for (std::size_t o = 0; o < n_out; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      gb[o] += d;
      double* gwr = &gw[o * n_in];
      const double* wr = &w[o * n_in];
      for (std::size_t i = 0; i < n_in; ++i) {
        gwr[i] += d * in[i];
        next[i] += wr[i] * d;
      }
    }
    for (std::size_t i = 0; i < n_in; ++i)
      if (in[i] <= 0.0) next[i] = 0.0;
    delta.swap(next);
  }

  for (std::size_t li = n_conv; li-- > 0;) {
    const auto& c = g.conv[li];
    const std::size_t ti = 2 * li;
    const auto& w = p.tensors[ti].values;
    auto& gw = grads.tensors[ti].values;
    auto& gb = grads.tensors[ti + 1].values;
    std::span<const double> in = li > 0 ? std::span<const double>(a.conv[li - 1]) : x;
    const bool need_input_grad = li > 0;
    if (need_input_grad) next.assign(c.in_channels * c.in_len, 0.0);
    for (std::size_t f = 0; f < c.filters; ++f) {
      for (std::size_t pos = 0; pos < c.out_len; ++pos) {
        const double d = delta[f * c.out_len + pos];
        if (d == 0.0) continue;
        gb[f] += d;
        const std::size_t start = pos * c.stride;
        for (std::size_t ch = 0; ch < c.in_channels; ++ch) {
          double* gwr = &gw[(f * c.in_channels + ch) * c.kernel];
          const double* wr = &w[(f * c.in_channels + ch) * c.kernel];
          const double* xr = &in[ch * c.in_len + start];
          for (std::size_t t = 0; t < c.kernel; ++t) gwr[t] += d * xr[t];
          if (need_input_grad) {
            double* nr = &next[ch * c.in_len + start];
            for (std::size_t t = 0; t < c.kernel; ++t) nr[t] += wr[t] * d;
          }
        }
      }
    }
    if (need_input_grad) {
      for (std::size_t i = 0; i < next.size(); ++i)
        if (in[i] <= 0.0) next[i] = 0.0;
      delta.swap(next);
    }
  }
}

void check_input(const ArchSpec& arch, std::span<const double> x, std::size_t label) {
  if (x.size() != arch.input_length)
    throw std::invalid_argument("input length " + std::to_string(x.size()) + " does not match arch input_length " +
                                std::to_string(arch.input_length));
  if (label >= arch.num_classes)
    throw std::invalid_argument("label " + std::to_string(label) + " out of range");
}

}  // namespace

TapRecord forward(const ArchSpec& arch, const ModelParams& params, std::span<const double> x, std::size_t label) {
  check_params(arch, params);
  check_input(arch, x, label);
  Geometry g(arch);
  Activations a;
  run_forward(g, params, x, a);
  TapRecord rec;
  rec.activations = std::move(a.conv.back());
  rec.class_prob = a.probs[label];
  rec.probs = std::move(a.probs);
  return rec;
}

std::vector<double> predict_proba(const ArchSpec& arch, const ModelParams& params, std::span<const double> x) {
  check_params(arch, params);
  check_input(arch, x, 0);
  Geometry g(arch);
  Activations a;
  run_forward(g, params, x, a);
  return std::move(a.probs);
}

LossAndGrad loss_and_grad(const ArchSpec& arch, const ModelParams& params, std::span<const Sample> batch) {
  if (batch.empty()) throw std::invalid_argument("loss_and_grad: empty batch");
  check_params(arch, params);
  Geometry g(arch);
  LossAndGrad out;
  out.grads = zero_params(arch);
  Activations a;
  for (const auto& s : batch) {
    check_input(arch, s.features, s.label);
    run_forward(g, params, s.features, a);
    out.loss += cross_entropy(a.logits, s.label);
    run_backward(g, params, s.features, s.label, a, out.grads);
  }
  const double scale = 1.0 / static_cast<double>(batch.size());
  out.loss *= scale;
  out.grads.for_each([&](double& v) { v *= scale; });
  return out;
}

double mean_loss(const ArchSpec& arch, const ModelParams& params, std::span<const Sample> batch) {
  if (batch.empty()) throw std::invalid_argument("mean_loss: empty batch");
  check_params(arch, params);
  Geometry g(arch);
  Activations a;
  double loss = 0.0;
  for (const auto& s : batch) {
    check_input(arch, s.features, s.label);
    run_forward(g, params, s.features, a);
    loss += cross_entropy(a.logits, s.label);
  }
  return loss / static_cast<double>(batch.size());
}

void sgd_step(ModelParams& params, const ModelParams& grads, double step, Direction direction) {
  if (!params.same_shape(grads)) throw std::invalid_argument("sgd_step: gradient shape mismatch");
  const double signed_step = direction == Direction::kAscent ? step : -step;
  for (std::size_t t = 0; t < params.tensors.size(); ++t) {
    auto& pv = params.tensors[t].values;
    const auto& gv = grads.tensors[t].values;
    for (std::size_t i = 0; i < pv.size(); ++i) pv[i] += signed_step * gv[i];
  }
}

ModelParams train(const ArchSpec& arch, ModelParams params, const Dataset& ds, const TrainConfig& cfg,
                  std::uint64_t seed, Direction direction) {
  if (!(cfg.lr > 0.0)) throw std::invalid_argument("train: lr must be positive");
  if (cfg.batch_size == 0) throw std::invalid_argument("train: batch_size must be positive");
  if (ds.empty()) throw std::invalid_argument("train: empty dataset");
  check_params(arch, params);

  Geometry g(arch);
  Activations a;
  ModelParams grads = zero_params(arch);
  Rng rng(seed);
  std::vector<std::size_t> order(ds.size());
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      grads.for_each([](double& v) { v = 0.0; });
      for (std::size_t i = start; i < end; ++i) {
        const auto& s = ds.samples[order[i]];
        check_input(arch, s.features, s.label);
        run_forward(g, params, s.features, a);
        run_backward(g, params, s.features, s.label, a, grads);
      }
      const double scale = 1.0 / static_cast<double>(end - start);
      grads.for_each([&](double& v) { v *= scale; });
      sgd_step(params, grads, cfg.lr, direction);
    }
  }
  return params;
}

std::size_t argmax(std::span<const double> probs) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < probs.size(); ++i)
    if (probs[i] > probs[best]) best = i;
  return best;
}

double evaluate(const ArchSpec& arch, const ModelParams& params, const Dataset& ds) {
  if (ds.empty()) throw std::invalid_argument("evaluate: empty dataset");
  check_params(arch, params);
  Geometry g(arch);
  Activations a;
  std::size_t correct = 0;
  for (const auto& s : ds.samples) {
    check_input(arch, s.features, s.label);
    run_forward(g, params, s.features, a);
    if (argmax(a.probs) == s.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(ds.size());
}

}  // namespace fedaudit
