#include "cofacil/elastic_net.hpp"

#include <algorithm>
#include <cmath>

#include "cofacil/error.hpp"

namespace cofacil {
namespace {

// log(1 + exp(z)) without overflow.
double softplus(double z) noexcept { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double dot(const std::vector<double>& w, const FeatureRow& x) noexcept {
  double s = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) s += w[j] * x[j];
  return s;
}

}  // namespace

double soft_threshold(double z, double lambda) noexcept {
  const double shrunk = std::abs(z) - lambda;
  if (shrunk <= 0.0) return 0.0;
  return z > 0.0 ? shrunk : -shrunk;
}

double sigmoid(double z) noexcept {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

ElasticNetProblem::ElasticNetProblem(std::span<const FeatureRow> rows, std::span<const int> labels,
                                     std::vector<double> sample_weights, double inverse_reg_strength,
                                     double l1_ratio)
    : rows_(rows),
      labels_(labels),
      weights_(std::move(sample_weights)),
      c_(inverse_reg_strength),
      l1_ratio_(l1_ratio),
      dim_(rows.empty() ? 0 : rows.front().size()) {
  if (rows_.empty()) throw Error(ErrorCode::EmptyDataset, "no training rows");
  if (labels_.size() != rows_.size() || weights_.size() != rows_.size()) {
    throw Error(ErrorCode::DimensionMismatch, "rows, labels and weights differ in length");
  }
  for (const auto& row : rows_) {
    if (row.size() != dim_) throw Error(ErrorCode::DimensionMismatch, "ragged feature rows");
  }
  if (!(c_ > 0.0)) throw Error(ErrorCode::InvalidArgument, "C must be positive");
  if (!(l1_ratio_ >= 0.0 && l1_ratio_ <= 1.0)) throw Error(ErrorCode::InvalidArgument, "l1_ratio must be in [0,1]");
}

double ElasticNetProblem::smooth(const LinearParams& p) const {
  double loss = 0.0;
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    const double z = dot(p.w, rows_[i]) + p.b;
    loss += weights_[i] * (softplus(z) - labels_[i] * z);
  }
  double sq = 0.0;
  for (double wj : p.w) sq += wj * wj;
  return loss + (1.0 - l1_ratio_) / (2.0 * c_) * sq;
}

LinearParams ElasticNetProblem::smooth_gradient(const LinearParams& p) const {
  LinearParams g{std::vector<double>(dim_, 0.0), 0.0};
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    const double z = dot(p.w, rows_[i]) + p.b;
    const double r = weights_[i] * (sigmoid(z) - labels_[i]);
    for (std::size_t j = 0; j < dim_; ++j) g.w[j] += r * rows_[i][j];
    g.b += r;
  }
  const double ridge = (1.0 - l1_ratio_) / c_;
  for (std::size_t j = 0; j < dim_; ++j) g.w[j] += ridge * p.w[j];
  return g;
}

double ElasticNetProblem::l1_penalty(const LinearParams& p) const {
  double s = 0.0;
  for (double wj : p.w) s += std::abs(wj);
  return l1_strength() * s;
}

SolverResult solve_proximal_gradient(const ElasticNetProblem& problem, const SolverOptions& options) {
  const std::size_t dim = problem.dimension();
  LinearParams x{std::vector<double>(dim, 0.0), 0.0};
  double fx = problem.smooth(x);
  LinearParams g = problem.smooth_gradient(x);
  double step = 1.0;

  SolverResult result;
  for (int iter = 0; iter < options.max_iters; ++iter) {
    LinearParams candidate{std::vector<double>(dim), 0.0};
    LinearParams g_candidate;
    double change = 0.0;

    // Backtrack until <grad(z) - grad(x), z - x> <= |z - x|^2 / (2 step).
    // For a convex smooth part this implies the quadratic upper bound
    // f(z) <= f(x) + <grad(x), z - x> + |z - x|^2 / (2 step), and unlike
    // comparing f values directly it does not lose precision near the
    // optimum, where f(z) - f(x) is below rounding noise.
    for (;;) {
      double curvature = 0.0;
      double sq = 0.0;
      change = 0.0;
      for (std::size_t j = 0; j < dim; ++j) {
        candidate.w[j] = soft_threshold(x.w[j] - step * g.w[j], step * problem.l1_strength());
      }
      candidate.b = x.b - step * g.b;
      g_candidate = problem.smooth_gradient(candidate);
      for (std::size_t j = 0; j < dim; ++j) {
        const double d = candidate.w[j] - x.w[j];
        curvature += (g_candidate.w[j] - g.w[j]) * d;
        sq += d * d;
        change = std::max(change, std::abs(d));
      }
      const double db = candidate.b - x.b;
      curvature += (g_candidate.b - g.b) * db;
      sq += db * db;
      change = std::max(change, std::abs(db));

      if (curvature <= sq / (2.0 * step) || step < 1e-18) break;
      step *= 0.5;
    }

    x = std::move(candidate);
    g = std::move(g_candidate);
    fx = problem.smooth(x);
    result.iterations = iter + 1;
    if (options.record_history) result.history.push_back(fx + problem.l1_penalty(x));
    if (change < options.tol) {
      result.converged = true;
      break;
    }
    step *= 2.0;  // let the step grow back after conservative iterations
  }

  result.objective = fx + problem.l1_penalty(x);
  result.params = std::move(x);
  return result;
}

}  // namespace cofacil
