#pragma once

// Independent reference computations. Nothing here calls into the library's
// solver or metric code.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

namespace oracle {

// Elastic-net logistic objective written out term by term.
struct ObjectiveSpec {
  const std::vector<std::vector<double>>* rows;
  const std::vector<int>* labels;
  std::vector<double> weights;
  double C;
  double alpha;
};

inline double bce(int y, double z) {
  // -[y log s(z) + (1-y) log(1-s(z))], evaluated stably
  const double log1pexp = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
  return log1pexp - y * z;
}

inline double objective(const ObjectiveSpec& s, const std::vector<double>& w, double b) {
  double loss = 0.0;
  for (std::size_t i = 0; i < s.rows->size(); ++i) {
    double z = b;
    for (std::size_t j = 0; j < w.size(); ++j) z += w[j] * (*s.rows)[i][j];
    loss += s.weights[i] * bce((*s.labels)[i], z);
  }
  double l1 = 0.0, l2 = 0.0;
  for (double v : w) {
    l1 += std::abs(v);
    l2 += v * v;
  }
  return loss + (s.alpha * l1 + (1.0 - s.alpha) / 2.0 * l2) / s.C;
}

inline std::vector<double> balanced_weights(const std::vector<int>& labels) {
  const double n = static_cast<double>(labels.size());
  const double pos = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
  const double neg = n - pos;
  std::vector<double> out;
  for (int y : labels) out.push_back(y ? n / (2.0 * pos) : n / (2.0 * neg));
  return out;
}

struct GridResult {
  double w0, w1, b, value;
};

// Exhaustive search over a 3-D box, refined around the incumbent: every
// level scans the full (2m+1)^3 lattice.
inline GridResult grid_minimize(const ObjectiveSpec& s, double half_width, double step, int levels) {
  GridResult best{0, 0, 0, std::numeric_limits<double>::infinity()};
  double cw0 = 0, cw1 = 0, cb = 0;
  for (int level = 0; level < levels; ++level) {
    const int m = static_cast<int>(std::round(half_width / step));
    for (int i = -m; i <= m; ++i) {
      for (int j = -m; j <= m; ++j) {
        for (int k = -m; k <= m; ++k) {
          const double w0 = cw0 + i * step, w1 = cw1 + j * step, b = cb + k * step;
          const double v = objective(s, {w0, w1}, b);
          if (v < best.value) best = {w0, w1, b, v};
        }
      }
    }
    cw0 = best.w0;
    cw1 = best.w1;
    cb = best.b;
    half_width = 2 * step;
    step /= 10.0;
  }
  return best;
}

// AUC by sweeping every threshold and integrating the ROC polyline.
inline double roc_sweep_auc(const std::vector<int>& labels, const std::vector<double>& scores) {
  std::vector<double> thresholds(scores);
  thresholds.push_back(std::numeric_limits<double>::infinity());
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  const double P = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
  const double N = static_cast<double>(labels.size()) - P;
  double prev_fpr = 0, prev_tpr = 0, area = 0;
  for (double t : thresholds) {
    double tp = 0, fp = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (scores[i] >= t) (labels[i] ? tp : fp) += 1;
    }
    const double tpr = tp / P, fpr = fp / N;
    area += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
    prev_fpr = fpr;
    prev_tpr = tpr;
  }
  return area;
}

}  // namespace oracle
