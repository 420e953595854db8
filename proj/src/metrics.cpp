#include "cofacil/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

#include "cofacil/error.hpp"

namespace cofacil {

nlohmann::json Metrics::to_json() const {
  return {{"accuracy", accuracy},
          {"precision", precision},
          {"recall", recall},
          {"f1", f1},
          {"roc_auc", roc_auc ? nlohmann::json(*roc_auc) : nlohmann::json(nullptr)},
          {"confusion", {{"tp", confusion.tp}, {"fp", confusion.fp}, {"tn", confusion.tn}, {"fn", confusion.fn}}}};
}

std::optional<double> roc_auc_pairwise(std::span<const int> labels, std::span<const double> scores) {
  if (labels.size() != scores.size()) throw Error(ErrorCode::InvalidArgument, "labels and scores differ in length");
  double wins = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < labels.size(); ++j) {
      if (labels[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j]) {
        wins += 1.0;
      } else if (scores[i] == scores[j]) {
        wins += 0.5;
      }
    }
  }
  if (pairs == 0) return std::nullopt;
  return wins / static_cast<double>(pairs);
}

std::optional<double> roc_auc_trapezoid(std::span<const int> labels, std::span<const double> scores) {
  if (labels.size() != scores.size()) throw Error(ErrorCode::InvalidArgument, "labels and scores differ in length");
  const auto n_pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  const std::size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::nullopt;

  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  double area = 0.0;
  double tpr_prev = 0.0;
  double fpr_prev = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (std::size_t k = 0; k < order.size();) {
    const double threshold = scores[order[k]];
    while (k < order.size() && scores[order[k]] == threshold) {
      if (labels[order[k]] == 1) {
        ++tp;
      } else {
        ++fp;
      }
      ++k;
    }
    const double tpr = static_cast<double>(tp) / static_cast<double>(n_pos);
    const double fpr = static_cast<double>(fp) / static_cast<double>(n_neg);
    area += (fpr - fpr_prev) * (tpr + tpr_prev) / 2.0;
    tpr_prev = tpr;
    fpr_prev = fpr;
  }
  return area;
}

Metrics compute_metrics(std::span<const int> labels, std::span<const int> decisions,
                        std::span<const double> probabilities) {
  if (labels.size() != decisions.size() || (!probabilities.empty() && probabilities.size() != labels.size())) {
    throw Error(ErrorCode::InvalidArgument, "labels, decisions and probabilities differ in length");
  }
  if (labels.empty()) throw Error(ErrorCode::EmptyDataset, "no predictions to score");

  Metrics m;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool actual = labels[i] == 1;
    const bool predicted = decisions[i] == 1;
    if (actual && predicted) ++m.confusion.tp;
    if (!actual && predicted) ++m.confusion.fp;
    if (!actual && !predicted) ++m.confusion.tn;
    if (actual && !predicted) ++m.confusion.fn;
  }
  const auto& c = m.confusion;
  auto ratio = [](std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
  };
  m.accuracy = ratio(c.tp + c.tn, c.total());
  m.precision = ratio(c.tp, c.tp + c.fp);
  m.recall = ratio(c.tp, c.tp + c.fn);
  m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  if (!probabilities.empty()) m.roc_auc = roc_auc_pairwise(labels, probabilities);
  return m;
}

}  // namespace cofacil
