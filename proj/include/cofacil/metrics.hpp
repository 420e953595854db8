#pragma once

#include <cstddef>
#include <optional>
#include <span>

#include <json.hpp>

namespace cofacil {

struct Confusion {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const noexcept { return tp + fp + tn + fn; }
  friend bool operator==(const Confusion&, const Confusion&) = default;
};

struct Metrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::optional<double> roc_auc;  // absent when only one class is present
  Confusion confusion;

  nlohmann::json to_json() const;
};

/// Fraction of (positive, negative) pairs ranked correctly, ties count 1/2.
std::optional<double> roc_auc_pairwise(std::span<const int> labels, std::span<const double> scores);

/// Area under the empirical ROC curve by the trapezoidal rule, tied scores
/// forming a single diagonal step.
std::optional<double> roc_auc_trapezoid(std::span<const int> labels, std::span<const double> scores);

/// probabilities may be empty, in which case roc_auc is absent.
Metrics compute_metrics(std::span<const int> labels, std::span<const int> decisions,
                        std::span<const double> probabilities);

}  // namespace cofacil
