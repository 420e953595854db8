#include <doctest.h>

#include <random>

#include "cofacil/cbm_classifier.hpp"
#include "cofacil/elastic_net.hpp"
#include "support/check.hpp"
#include "support/oracles.hpp"

using namespace cofacil;

namespace {

struct Data {
  std::vector<FeatureRow> rows;
  std::vector<int> labels;
};

// Two noisy, overlapping Gaussian classes; not separable.
Data two_feature_set(std::size_t n, std::uint64_t seed, double pos_fraction = 0.4) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  Data d;
  for (std::size_t i = 0; i < n; ++i) {
    const int y = i < static_cast<std::size_t>(pos_fraction * n) ? 1 : 0;
    d.rows.push_back({0.8 * y + noise(rng), -0.5 * y + noise(rng)});
    d.labels.push_back(y);
  }
  return d;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("soft threshold") {
  const double lam = 0.7;
  CHECK(soft_threshold(-lam, lam) == 0.0);
  CHECK(soft_threshold(0.0, lam) == 0.0);
  CHECK(soft_threshold(lam, lam) == 0.0);
  CHECK(soft_threshold(2 * lam, lam) == doctest::Approx(lam).epsilon(1e-15));
  CHECK(soft_threshold(-2 * lam, lam) == doctest::Approx(-lam).epsilon(1e-15));
}

TEST_CASE("sigmoid is stable in the tails") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(std::log(3.0)) == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(sigmoid(-800.0) >= 0.0);
  CHECK(sigmoid(800.0) == 1.0);
  CHECK(std::isfinite(sigmoid(-800.0)));
}

TEST_CASE("solver objective matches a brute-force grid search (n=40, two features)") {
  const Data d = two_feature_set(40, 5);
  const auto weights = oracle::balanced_weights(d.labels);
  const double C = 1.0, alpha = 0.5;
  ElasticNetProblem problem(d.rows, d.labels, sample_weights(d.labels, ClassWeighting::Balanced), C, alpha);
  const auto solved = solve_proximal_gradient(problem, {});
  REQUIRE(solved.converged);

  const oracle::ObjectiveSpec spec{&d.rows, &d.labels, weights, C, alpha};
  const auto grid = oracle::grid_minimize(spec, 4.0, 0.1, 4);
  CHECK(std::abs(solved.objective - grid.value) < 1e-3);
  CHECK(std::abs(oracle::objective(spec, solved.params.w, solved.params.b) - solved.objective) < 1e-9);
  CHECK(std::abs(solved.params.w[0] - grid.w0) < 1e-2);
  CHECK(std::abs(solved.params.w[1] - grid.w1) < 1e-2);
  CHECK(std::abs(solved.params.b - grid.b) < 1e-2);
}

TEST_CASE("analytic gradient of the smooth part matches central differences at 100 points") {
  const Data d = two_feature_set(40, 9);
  ElasticNetProblem problem(d.rows, d.labels, sample_weights(d.labels, ClassWeighting::Balanced), 0.7, 0.3);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  const double h = 1e-5;
  double worst = 0.0;
  for (int k = 0; k < 100; ++k) {
    LinearParams p{{u(rng), u(rng)}, u(rng)};
    const auto g = problem.smooth_gradient(p);
    std::vector<double> analytic{g.w[0], g.w[1], g.b};
    std::vector<double> numeric(3);
    for (int j = 0; j < 3; ++j) {
      LinearParams plus = p, minus = p;
      (j < 2 ? plus.w[j] : plus.b) += h;
      (j < 2 ? minus.w[j] : minus.b) -= h;
      numeric[j] = (problem.smooth(plus) - problem.smooth(minus)) / (2 * h);
    }
    double diff = 0, norm = 0;
    for (int j = 0; j < 3; ++j) {
      diff += (analytic[j] - numeric[j]) * (analytic[j] - numeric[j]);
      norm += numeric[j] * numeric[j];
    }
    worst = std::max(worst, std::sqrt(diff) / std::max(std::sqrt(norm), 1e-12));
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("objective never increases across iterations") {
  for (double alpha : {0.0, 0.5, 1.0}) {
    const Data d = two_feature_set(60, 21);
    ElasticNetProblem problem(d.rows, d.labels, sample_weights(d.labels, ClassWeighting::Balanced), 0.5, alpha);
    SolverOptions opts;
    opts.record_history = true;
    const auto r = solve_proximal_gradient(problem, opts);
    REQUIRE(r.history.size() >= 2);
    for (std::size_t i = 1; i < r.history.size(); ++i) {
      CHECK(r.history[i] <= r.history[i - 1] + 1e-12 * std::abs(r.history[i - 1]));
    }
  }
}

TEST_CASE("ridge gives identical columns equal coefficients") {
  Data d = two_feature_set(50, 4);
  for (auto& row : d.rows) row = {row[0], row[0], row[1]};
  ElasticNetProblem problem(d.rows, d.labels, std::vector<double>(d.rows.size(), 1.0), 1.0, 0.0);
  SolverOptions opts;
  opts.tol = 1e-10;
  opts.max_iters = 200000;
  const auto r = solve_proximal_gradient(problem, opts);
  CHECK(std::abs(r.params.w[0] - r.params.w[1]) < 1e-6);
  CHECK(r.params.w[0] != 0.0);
}

TEST_CASE("balanced weighting equals duplicating the minority (1:2) once") {
  // 10 positives, 20 negatives. Balanced weights are 1.5 and 0.75; after
  // duplicating positives the unit-weight loss is 4/3 of the balanced one,
  // so the penalties agree once C shrinks by 3/4.
  Data d = two_feature_set(30, 17, 1.0 / 3.0);
  REQUIRE(std::count(d.labels.begin(), d.labels.end(), 1) == 10);
  Data dup = d;
  for (std::size_t i = 0; i < d.rows.size(); ++i) {
    if (d.labels[i] == 1) {
      dup.rows.push_back(d.rows[i]);
      dup.labels.push_back(1);
    }
  }
  SolverOptions opts;
  opts.tol = 1e-11;
  opts.max_iters = 500000;
  auto probs = [&](const LinearParams& p) {
    std::vector<double> out;
    for (const auto& row : d.rows) out.push_back(sigmoid(p.w[0] * row[0] + p.w[1] * row[1] + p.b));
    return out;
  };

  const double C = 1.0;
  ElasticNetProblem balanced(d.rows, d.labels, sample_weights(d.labels, ClassWeighting::Balanced), C, 0.5);
  ElasticNetProblem duplicated(dup.rows, dup.labels, sample_weights(dup.labels, ClassWeighting::None), C * 0.75, 0.5);
  const auto a = solve_proximal_gradient(balanced, opts);
  const auto b = solve_proximal_gradient(duplicated, opts);
  CHECK(max_abs_diff(probs(a.params), probs(b.params)) < 1e-6);

  // With the penalty negligible the factor no longer matters.
  ElasticNetProblem balanced_free(d.rows, d.labels, sample_weights(d.labels, ClassWeighting::Balanced), 1e9, 0.5);
  ElasticNetProblem duplicated_free(dup.rows, dup.labels, sample_weights(dup.labels, ClassWeighting::None), 1e9, 0.5);
  const auto c = solve_proximal_gradient(balanced_free, opts);
  const auto e = solve_proximal_gradient(duplicated_free, opts);
  CHECK(max_abs_diff(probs(c.params), probs(e.params)) < 1e-6);
}

TEST_CASE("problem construction guards") {
  std::vector<FeatureRow> rows{{1.0}, {2.0, 3.0}};
  std::vector<int> labels{0, 1};
  CHECK_ERROR_CODE(ElasticNetProblem(rows, labels, {1, 1}, 1, 0.5), ErrorCode::DimensionMismatch);
  std::vector<FeatureRow> ok{{1.0}, {2.0}};
  CHECK_ERROR_CODE(ElasticNetProblem(ok, labels, {1}, 1, 0.5), ErrorCode::DimensionMismatch);
  CHECK_ERROR_CODE(ElasticNetProblem(ok, labels, {1, 1}, 0, 0.5), ErrorCode::InvalidArgument);
  CHECK_ERROR_CODE(ElasticNetProblem(ok, labels, {1, 1}, 1, 1.5), ErrorCode::InvalidArgument);
  CHECK_ERROR_CODE(ElasticNetProblem({}, {}, {}, 1, 0.5), ErrorCode::EmptyDataset);
}

TEST_CASE("a strong L1 penalty zeroes w and leaves the intercept at the base rate") {
  const Data d = two_feature_set(50, 8, 0.3);
  ElasticNetProblem problem(d.rows, d.labels, std::vector<double>(d.rows.size(), 1.0), 1e-4, 1.0);
  SolverOptions opts;
  opts.tol = 1e-12;
  opts.max_iters = 100000;
  const auto r = solve_proximal_gradient(problem, opts);
  CHECK(r.converged);
  CHECK(r.params.w[0] == 0.0);
  CHECK(r.params.w[1] == 0.0);
  CHECK(sigmoid(r.params.b) == doctest::Approx(0.3).epsilon(1e-8));
}

TEST_CASE("one informative feature gets the right sign") {
  std::vector<FeatureRow> rows;
  std::vector<int> labels;
  std::mt19937_64 rng(1);
  std::normal_distribution<double> noise(0.0, 0.7);
  for (int i = 0; i < 80; ++i) {
    const int y = i % 2;
    rows.push_back({(y ? 1.0 : -1.0) + noise(rng)});
    labels.push_back(y);
  }
  ElasticNetProblem up(rows, labels, sample_weights(labels, ClassWeighting::Balanced), 1.0, 0.5);
  CHECK(solve_proximal_gradient(up, {}).params.w[0] > 0.0);
  for (auto& row : rows) row[0] = -row[0];
  ElasticNetProblem down(rows, labels, sample_weights(labels, ClassWeighting::Balanced), 1.0, 0.5);
  CHECK(solve_proximal_gradient(down, {}).params.w[0] < 0.0);
}

TEST_CASE("sample weights") {
  const std::vector<int> labels{1, 0, 0, 0};
  const auto w = sample_weights(labels, ClassWeighting::Balanced);
  CHECK(w == std::vector<double>{2.0, 2.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0});
  CHECK(sample_weights(labels, ClassWeighting::None) == std::vector<double>(4, 1.0));
}
