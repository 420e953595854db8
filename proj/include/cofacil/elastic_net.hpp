#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cofacil/concept_schema.hpp"

namespace cofacil {

struct LinearParams {
  std::vector<double> w;
  double b = 0.0;
};

/// sign(z) * max(|z| - lambda, 0)
double soft_threshold(double z, double lambda) noexcept;

double sigmoid(double z) noexcept;

/// Weighted logistic loss with an elastic-net penalty on w (b unpenalized):
///
///   J(w, b) = sum_i s_i * BCE(y_i, sigmoid(w.x_i + b))
///           + (1/C) * (alpha * |w|_1 + (1 - alpha)/2 * |w|_2^2)
///
/// The "smooth" part is everything except the L1 term.
class ElasticNetProblem {
 public:
  ElasticNetProblem(std::span<const FeatureRow> rows, std::span<const int> labels, std::vector<double> sample_weights,
                    double inverse_reg_strength, double l1_ratio);

  std::size_t dimension() const noexcept { return dim_; }
  std::size_t size() const noexcept { return rows_.size(); }

  double smooth(const LinearParams& p) const;
  LinearParams smooth_gradient(const LinearParams& p) const;
  double l1_penalty(const LinearParams& p) const;
  double objective(const LinearParams& p) const { return smooth(p) + l1_penalty(p); }

  /// Step size times this is the soft-threshold level for w.
  double l1_strength() const noexcept { return l1_ratio_ / c_; }

 private:
  std::span<const FeatureRow> rows_;
  std::span<const int> labels_;
  std::vector<double> weights_;
  double c_;
  double l1_ratio_;
  std::size_t dim_;
};

struct SolverOptions {
  int max_iters = 10000;
  double tol = 1e-6;  // on the largest parameter change of one iteration
  bool record_history = false;
};

struct SolverResult {
  LinearParams params;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> history;  // objective after each accepted step, if requested
};

/// Proximal gradient (ISTA) with backtracking line search, starting from
/// w = 0, b = 0. Every accepted step satisfies the sufficient-decrease test,
/// so the objective never increases.
SolverResult solve_proximal_gradient(const ElasticNetProblem& problem, const SolverOptions& options);

}  // namespace cofacil
