#include "fedaudit/ocsvm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace fedaudit {

namespace {

constexpr double kTau = 1e-12;

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double t = a[i] - b[i];
    d += t * t;
  }
  return d;
}

}  // namespace

Standardizer Standardizer::fit(std::span<const std::vector<double>> rows, std::span<const std::size_t> blocks) {
  if (rows.empty()) throw std::invalid_argument("standardizer: no rows");
  const std::size_t d = rows.front().size();
  Standardizer s;
  s.mean.assign(d, 0.0);
  s.scale.assign(d, 0.0);
  for (const auto& r : rows) {
    if (r.size() != d) throw std::invalid_argument("standardizer: ragged rows");
    for (std::size_t i = 0; i < d; ++i) s.mean[i] += r[i];
  }
  const auto n = static_cast<double>(rows.size());
  for (auto& m : s.mean) m /= n;
  for (const auto& r : rows)
    for (std::size_t i = 0; i < d; ++i) {
      const double t = r[i] - s.mean[i];
      s.scale[i] += t * t;
    }
  if (!blocks.empty()) {
    std::size_t start = 0;
    for (std::size_t b : blocks) {
      if (start + b > d) throw std::invalid_argument("standardizer: blocks exceed row length");
      double pooled = 0.0;
      for (std::size_t i = start; i < start + b; ++i) pooled += s.scale[i];
      for (std::size_t i = start; i < start + b; ++i) s.scale[i] = pooled / static_cast<double>(b);
      start += b;
    }
    if (start != d) throw std::invalid_argument("standardizer: blocks do not cover the row");
  }
  for (auto& v : s.scale) v = std::max(std::sqrt(v / n), kStdFloor);
  return s;
}

std::vector<double> Standardizer::apply(std::span<const double> x) const {
  if (x.size() != mean.size())
    throw std::invalid_argument("standardizer: expected length " + std::to_string(mean.size()) + ", got " +
                                std::to_string(x.size()));
  std::vector<double> z(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) z[i] = (x[i] - mean[i]) / scale[i];
  return z;
}

DualSolution solve_one_class_dual(std::span<const double> kernel, std::size_t m, double nu, double tolerance) {
  if (kernel.size() != m * m) throw std::invalid_argument("ocsvm: kernel matrix size mismatch");
  if (!(nu > 0.0 && nu < 1.0)) throw std::invalid_argument("ocsvm: nu must lie in (0, 1)");
  if (m < 2) throw std::invalid_argument("ocsvm: need at least two training rows");

  const double upper = 1.0 / (nu * static_cast<double>(m));
  auto q = [&](std::size_t i, std::size_t j) { return kernel[i * m + j]; };

  DualSolution sol;
  auto& alpha = sol.alpha;
  alpha.assign(m, 0.0);
  double remaining = 1.0;
  for (std::size_t i = 0; i < m && remaining > 0.0; ++i) {
    alpha[i] = std::min(upper, remaining);
    remaining -= alpha[i];
  }

  std::vector<double> grad(m, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    if (alpha[i] != 0.0)
      for (std::size_t t = 0; t < m; ++t) grad[t] += alpha[i] * q(i, t);

  const std::size_t max_iter = std::max<std::size_t>(10'000'000, 100 * m);
  for (; sol.iterations < max_iter; ++sol.iterations) {
    // i: maximal -G over indices that may grow.
    std::size_t i = m;
    double gmax = -std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < m; ++t)
      if (alpha[t] < upper && -grad[t] > gmax) {
        gmax = -grad[t];
        i = t;
      }
    // j: second-order choice among indices that may shrink.
    std::size_t j = m;
    double gmax2 = -std::numeric_limits<double>::infinity();
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < m; ++t) {
      if (!(alpha[t] > 0.0)) continue;
      gmax2 = std::max(gmax2, grad[t]);
      if (i == m) continue;
      const double b = gmax + grad[t];
      if (b > 0.0) {
        double a = q(i, i) + q(t, t) - 2.0 * q(i, t);
        if (a <= 0.0) a = kTau;
        const double obj = -(b * b) / a;
        if (obj < best) {
          best = obj;
          j = t;
        }
      }
    }
    if (gmax + gmax2 < tolerance || i == m || j == m) {
      sol.converged = true;
      break;
    }

    const double old_i = alpha[i], old_j = alpha[j];
    double a = q(i, i) + q(j, j) - 2.0 * q(i, j);
    if (a <= 0.0) a = kTau;
    const double delta = (grad[i] - grad[j]) / a;
    const double sum = alpha[i] + alpha[j];
    alpha[i] -= delta;
    alpha[j] += delta;
    if (sum > upper) {
      if (alpha[i] > upper) {
        alpha[i] = upper;
        alpha[j] = sum - upper;
      }
    } else if (alpha[j] < 0.0) {
      alpha[j] = 0.0;
      alpha[i] = sum;
    }
    if (sum > upper) {
      if (alpha[j] > upper) {
        alpha[j] = upper;
        alpha[i] = sum - upper;
      }
    } else if (alpha[i] < 0.0) {
      alpha[i] = 0.0;
      alpha[j] = sum;
    }

    const double di = alpha[i] - old_i, dj = alpha[j] - old_j;
    for (std::size_t t = 0; t < m; ++t) grad[t] += q(i, t) * di + q(j, t) * dj;
  }

  // rho: smallest gradient over free variables, so every margin support vector
  // scores >= 0; without free variables, the midpoint of the bounds.
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double free_min = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < m; ++t) {
    if (alpha[t] >= upper) {
      lb = std::max(lb, grad[t]);
    } else if (alpha[t] <= 0.0) {
      ub = std::min(ub, grad[t]);
    } else {
      free_min = std::min(free_min, grad[t]);
    }
  }
  sol.rho = std::isfinite(free_min) ? free_min : (ub + lb) / 2.0;
  return sol;
}

double median_heuristic_gamma(std::span<const std::vector<double>> rows) {
  std::vector<double> d;
  d.reserve(rows.size() * (rows.size() - 1) / 2);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = i + 1; j < rows.size(); ++j) d.push_back(squared_distance(rows[i], rows[j]));
  if (d.empty()) throw std::invalid_argument("ocsvm: need at least two rows for the median heuristic");
  auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  double median = *mid;
  if (d.size() % 2 == 0) median = (median + *std::max_element(d.begin(), mid)) / 2.0;
  if (!(median > 0.0)) throw std::invalid_argument("ocsvm: zero kernel spread (median pairwise distance is 0)");
  return 1.0 / (2.0 * median);
}

double OcsvmModel::decision_standardized(std::span<const double> z) const {
  double f = 0.0;
  for (std::size_t s = 0; s < support_vectors.size(); ++s)
    f += alphas[s] * std::exp(-gamma * squared_distance(support_vectors[s], z));
  return f - rho;
}

double OcsvmModel::decision(std::span<const double> raw) const {
  return decision_standardized(standardizer.apply(raw));
}

OcsvmModel ocsvm_fit(std::span<const std::vector<double>> rows, const OcsvmOptions& options) {
  const std::size_t m = rows.size();
  if (!(options.nu > 0.0 && options.nu < 1.0)) throw std::invalid_argument("ocsvm: nu must lie in (0, 1)");
  if (m < 2) throw std::invalid_argument("ocsvm: need at least two training rows");
  if (std::all_of(rows.begin(), rows.end(), [&](const auto& r) { return r == rows.front(); }))
    throw std::invalid_argument("ocsvm: all training rows are identical (zero kernel spread)");

  OcsvmModel model;
  model.nu = options.nu;
  model.train_size = m;
  model.standardizer = Standardizer::fit(rows, options.scale_blocks);
  std::vector<std::vector<double>> z;
  z.reserve(m);
  for (const auto& r : rows) z.push_back(model.standardizer.apply(r));

  if (options.gamma.kind == GammaMode::Kind::kFixed) {
    if (!(options.gamma.value > 0.0)) throw std::invalid_argument("ocsvm: fixed gamma must be positive");
    model.gamma = options.gamma.value;
  } else {
    model.gamma = median_heuristic_gamma(z);
  }

  std::vector<double> kernel(m * m);
  for (std::size_t i = 0; i < m; ++i) {
    kernel[i * m + i] = 1.0;
    for (std::size_t j = i + 1; j < m; ++j)
      kernel[i * m + j] = kernel[j * m + i] = std::exp(-model.gamma * squared_distance(z[i], z[j]));
  }

  auto sol = solve_one_class_dual(kernel, m, options.nu, options.tolerance);
  const double upper = model.upper_bound();
  std::vector<std::size_t> free;
  for (std::size_t i = 0; i < m; ++i)
    if (sol.alpha[i] > 0.0) {
      if (sol.alpha[i] < upper) free.push_back(model.support_vectors.size());
      model.support_vectors.push_back(std::move(z[i]));
      model.alphas.push_back(sol.alpha[i]);
    }
  // Re-derive rho through the scoring path so margin vectors score exactly >= 0.
  model.rho = 0.0;
  double rho = std::numeric_limits<double>::infinity();
  for (std::size_t s : free) rho = std::min(rho, model.decision_standardized(model.support_vectors[s]));
  model.rho = free.empty() ? sol.rho : rho;
  return model;
}

}  // namespace fedaudit
