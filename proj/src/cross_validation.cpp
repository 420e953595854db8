#include "cofacil/cross_validation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <sstream>

#include "cofacil/error.hpp"

namespace cofacil {

std::vector<std::size_t> stratified_folds(const std::vector<int>& labels, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw Error(ErrorCode::InvalidArgument, "need at least 2 folds");
  if (labels.size() < k) {
    throw Error(ErrorCode::InsufficientData,
                std::to_string(labels.size()) + " samples cannot fill " + std::to_string(k) + " folds");
  }
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order;
  order.reserve(labels.size());
  for (int cls : {0, 1}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == cls) members.push_back(i);
    }
    std::shuffle(members.begin(), members.end(), rng);
    order.insert(order.end(), members.begin(), members.end());
  }
  std::vector<std::size_t> fold_of(labels.size(), 0);
  for (std::size_t pos = 0; pos < order.size(); ++pos) fold_of[order[pos]] = pos % k;
  return fold_of;
}

CvReport cross_validate(const TrainingSet& data, const Hyperparams& hp, std::size_t k) {
  hp.validate();
  const auto n_pos = static_cast<std::size_t>(std::count(data.labels.begin(), data.labels.end(), 1));
  const std::size_t n_neg = data.labels.size() - n_pos;
  if (n_pos < 2 || n_neg < 2) {
    throw Error(ErrorCode::InsufficientData, "each class needs at least two samples for cross-validation");
  }
  const auto fold_of = stratified_folds(data.labels, k, hp.seed);

  CvReport report;
  report.k = k;
  report.seed = hp.seed;
  for (std::size_t f = 0; f < k; ++f) {
    std::vector<std::size_t> train_idx;
    std::vector<std::size_t> test_idx;
    for (std::size_t i = 0; i < fold_of.size(); ++i) (fold_of[i] == f ? test_idx : train_idx).push_back(i);

    const TrainingSet train_set = data.subset(train_idx);
    const auto train_pos = std::count(train_set.labels.begin(), train_set.labels.end(), 1);
    if (train_pos == 0 || static_cast<std::size_t>(train_pos) == train_set.size()) {
      throw Error(ErrorCode::InsufficientData, "fold " + std::to_string(f) + " training split has one class");
    }
    const CbmModel model = train(train_set, hp);

    std::vector<int> labels;
    std::vector<int> decisions;
    std::vector<double> probs;
    for (auto i : test_idx) {
      const double p = predict_proba_row(model, data.rows[i]);
      labels.push_back(data.labels[i]);
      probs.push_back(p);
      decisions.push_back(decide(model, p));
    }
    FoldResult fold{f, train_idx.size(), test_idx.size(),
                    static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1)),
                    compute_metrics(labels, decisions, probs)};
    report.folds.push_back(std::move(fold));
  }

  auto summarize = [&](const std::string& name, auto getter) {
    std::vector<double> values;
    for (const auto& fold : report.folds) {
      if (auto v = getter(fold.metrics)) values.push_back(*v);
    }
    MetricSpread spread;
    spread.n = values.size();
    if (!values.empty()) {
      spread.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
      double ss = 0.0;
      for (double v : values) ss += (v - spread.mean) * (v - spread.mean);
      spread.std = std::sqrt(ss / static_cast<double>(values.size()));
    }
    report.aggregate[name] = spread;
  };
  summarize("accuracy", [](const Metrics& m) { return std::optional<double>(m.accuracy); });
  summarize("precision", [](const Metrics& m) { return std::optional<double>(m.precision); });
  summarize("recall", [](const Metrics& m) { return std::optional<double>(m.recall); });
  summarize("f1", [](const Metrics& m) { return std::optional<double>(m.f1); });
  summarize("roc_auc", [](const Metrics& m) { return m.roc_auc; });
  return report;
}

nlohmann::json CvReport::to_json() const {
  nlohmann::json folds_json = nlohmann::json::array();
  for (const auto& f : folds) {
    folds_json.push_back({{"fold", f.fold},
                          {"n_train", f.n_train},
                          {"n_test", f.n_test},
                          {"n_test_pos", f.n_test_pos},
                          {"metrics", f.metrics.to_json()}});
  }
  nlohmann::json agg = nlohmann::json::object();
  for (const auto& [name, s] : aggregate) agg[name] = {{"mean", s.mean}, {"std", s.std}, {"n", s.n}};
  return {{"k", k}, {"seed", seed}, {"folds", std::move(folds_json)}, {"aggregate", std::move(agg)}};
}

std::string CvReport::render_table() const {
  std::ostringstream out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-6s %6s %9s %9s %9s %9s %9s\n", "fold", "n", "accuracy", "precision", "recall",
                "f1", "auc");
  out << buf;
  for (const auto& f : folds) {
    const auto& m = f.metrics;
    char auc[16] = "n/a";
    if (m.roc_auc) std::snprintf(auc, sizeof auc, "%.3f", *m.roc_auc);
    std::snprintf(buf, sizeof buf, "%-6zu %6zu %9.3f %9.3f %9.3f %9.3f %9s\n", f.fold, f.n_test, m.accuracy,
                  m.precision, m.recall, m.f1, auc);
    out << buf;
  }
  auto cell = [&](const char* name) {
    auto it = aggregate.find(name);
    char c[32];
    if (it == aggregate.end() || it->second.n == 0) return std::string("n/a");
    std::snprintf(c, sizeof c, "%.3f±%.3f", it->second.mean, it->second.std);
    return std::string(c);
  };
  out << "mean   " << "accuracy " << cell("accuracy") << "  precision " << cell("precision") << "  recall "
      << cell("recall") << "  f1 " << cell("f1") << "  auc " << cell("roc_auc") << '\n';
  return out.str();
}

}  // namespace cofacil
