#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace fedaudit {

/// Per-feature z-scoring fitted on a training matrix.
struct Standardizer {
  static constexpr double kStdFloor = 1e-12;

  std::vector<double> mean;
  std::vector<double> scale;  // std, floored at kStdFloor

  /// Per-feature statistics. With `blocks` (consecutive feature counts that
  /// sum to the row length) each block shares one pooled mean-free scale.
  static Standardizer fit(std::span<const std::vector<double>> rows,
                          std::span<const std::size_t> blocks = {});
  std::vector<double> apply(std::span<const double> x) const;
};

struct GammaMode {
  enum class Kind { kMedianHeuristic, kFixed };
  Kind kind = Kind::kMedianHeuristic;
  double value = 0.0;  // used when kind == kFixed

  static GammaMode median() { return {}; }
  static GammaMode fixed(double gamma) { return {Kind::kFixed, gamma}; }
};

/// Solution of the nu-one-class dual
///   min 1/2 a^T Q a   s.t.  0 <= a_i <= 1/(nu m),  sum a_i = 1.
struct DualSolution {
  std::vector<double> alpha;
  double rho = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

/// SMO with second-order working-set selection. `kernel` is the dense m x m
/// row-major Gram matrix. Stops when the maximal KKT violation drops below
/// tolerance.
DualSolution solve_one_class_dual(std::span<const double> kernel, std::size_t m, double nu,
                                  double tolerance = 1e-6);

/// 1 / (2 * median pairwise squared distance). Throws std::invalid_argument if
/// that median is zero.
double median_heuristic_gamma(std::span<const std::vector<double>> rows);

struct OcsvmModel {
  std::vector<std::vector<double>> support_vectors;  // standardized
  std::vector<double> alphas;                        // matching support_vectors
  double rho = 0.0;
  double nu = 0.1;
  double gamma = 1.0;
  std::size_t train_size = 0;
  Standardizer standardizer;

  double upper_bound() const { return 1.0 / (nu * static_cast<double>(train_size)); }
  /// sum_i alpha_i exp(-gamma |sv_i - z|^2) - rho, z the standardized input.
  double decision(std::span<const double> raw) const;
  double decision_standardized(std::span<const double> z) const;
};

struct OcsvmOptions {
  double nu = 0.1;
  GammaMode gamma = GammaMode::median();
  double tolerance = 1e-6;
  std::vector<std::size_t> scale_blocks;  // empty: per-feature scaling
};

/// Fits on raw rows: standardize, pick gamma, build the RBF Gram matrix, solve
/// the dual. Requires 0 < nu < 1, at least two rows, and rows that are not all
/// identical.
OcsvmModel ocsvm_fit(std::span<const std::vector<double>> rows, const OcsvmOptions& options);

}  // namespace fedaudit
