#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cofacil/concept_schema.hpp"
#include "cofacil/elastic_net.hpp"

namespace cofacil {

enum class ClassWeighting { Balanced, None };

std::string_view to_string(ClassWeighting weighting) noexcept;
ClassWeighting parse_class_weighting(std::string_view text);

struct Hyperparams {
  double inverse_reg_strength = 1.0;  // C
  double l1_ratio = 0.5;              // alpha
  ClassWeighting class_weighting = ClassWeighting::Balanced;
  double decision_threshold = 0.5;
  int max_iters = 10000;
  double tol = 1e-6;
  std::uint64_t seed = 0;

  void validate() const;  // throws InvalidArgument
  nlohmann::json to_json() const;
  static Hyperparams from_json(const nlohmann::json& doc);
  friend bool operator==(const Hyperparams&, const Hyperparams&) = default;
};

struct Scaler {
  std::vector<double> means;
  std::vector<double> stds;  // > 0; constant features get 1

  FeatureRow apply(const FeatureRow& row) const;
  friend bool operator==(const Scaler&, const Scaler&) = default;
};

/// Population z-score statistics. Needs at least two rows.
Scaler fit_scaler(const std::vector<FeatureRow>& rows);
inline FeatureRow apply_scaler(const Scaler& scaler, const FeatureRow& row) { return scaler.apply(row); }

/// s(y) = n / (2 n_y) when balanced, 1 otherwise.
std::vector<double> sample_weights(const std::vector<int>& labels, ClassWeighting weighting);

struct TrainingSet {
  std::string schema_version;
  std::vector<std::string> concept_names;
  std::vector<FeatureRow> rows;
  std::vector<int> labels;

  std::size_t size() const noexcept { return rows.size(); }
  TrainingSet subset(const std::vector<std::size_t>& indices) const;
};

struct TrainingManifest {
  std::size_t n_samples = 0;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;

  friend bool operator==(const TrainingManifest&, const TrainingManifest&) = default;
};

struct CbmModel {
  std::string schema_version;
  std::vector<std::string> concept_names;
  std::vector<double> coefficients;
  double intercept = 0.0;
  Scaler scaler;
  Hyperparams hyperparams;
  TrainingManifest manifest;
  std::string trained_at;

  std::size_t dimension() const noexcept { return coefficients.size(); }
  friend bool operator==(const CbmModel&, const CbmModel&) = default;
};

/// Standardizes the rows, then minimizes the weighted elastic-net logistic
/// objective on them.
CbmModel train(const TrainingSet& data, const Hyperparams& hp);

double predict_proba_row(const CbmModel& model, const FeatureRow& row);
double predict_proba(const CbmModel& model, const ConceptVector& vector);
inline int decide(const CbmModel& model, double probability) {
  return probability >= model.hyperparams.decision_threshold ? 1 : 0;
}
inline int decide(const CbmModel& model, const ConceptVector& vector) { return decide(model, predict_proba(model, vector)); }

/// Throws SchemaMismatch unless the model was trained on exactly this schema's concepts.
void check_compatible(const CbmModel& model, const ConceptSchema& schema);

struct FeatureReportRow {
  std::string concept_name;
  double coefficient = 0.0;
  double odds_ratio = 1.0;
};

/// Coefficients (standardized scale) with exp(coefficient), largest first.
std::vector<FeatureReportRow> feature_report(const CbmModel& model);
std::string render_feature_table(const std::vector<FeatureReportRow>& rows);
nlohmann::json feature_report_json(const std::vector<FeatureReportRow>& rows);

inline constexpr int kModelFormatVersion = 1;

nlohmann::json model_to_json(const CbmModel& model);
CbmModel model_from_json(const nlohmann::json& doc);  // throws CorruptArtifact
void save_model(const CbmModel& model, const std::string& path);

/// expected_schema_version: if set and different from the artifact's, throws
/// SchemaVersionMismatch unless allow_schema_mismatch.
CbmModel load_model(const std::string& path, const std::optional<std::string>& expected_schema_version = std::nullopt,
                    bool allow_schema_mismatch = false);

}  // namespace cofacil
