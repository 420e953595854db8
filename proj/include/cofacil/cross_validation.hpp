#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "cofacil/cbm_classifier.hpp"
#include "cofacil/metrics.hpp"

namespace cofacil {

/// Stratified, seeded fold index for every sample. Samples are grouped by
/// class (negatives first), shuffled within each class, then dealt to folds
/// round-robin across the concatenated order, so each fold's class counts
/// differ from the global proportion by less than one sample.
std::vector<std::size_t> stratified_folds(const std::vector<int>& labels, std::size_t k, std::uint64_t seed);

struct FoldResult {
  std::size_t fold = 0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  std::size_t n_test_pos = 0;
  Metrics metrics;
};

struct MetricSpread {
  double mean = 0.0;
  double std = 0.0;  // population
  std::size_t n = 0;
};

struct CvReport {
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::vector<FoldResult> folds;
  std::map<std::string, MetricSpread> aggregate;  // accuracy, precision, recall, f1, roc_auc

  nlohmann::json to_json() const;
  std::string render_table() const;
};

/// The scaler is refit inside train() on each training split only.
CvReport cross_validate(const TrainingSet& data, const Hyperparams& hp, std::size_t k = 5);

}  // namespace cofacil
