#include "cofacil/cbm_classifier.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "cofacil/error.hpp"

namespace cofacil {

std::string_view to_string(ClassWeighting weighting) noexcept {
  return weighting == ClassWeighting::Balanced ? "balanced" : "none";
}

ClassWeighting parse_class_weighting(std::string_view text) {
  if (text == "balanced") return ClassWeighting::Balanced;
  if (text == "none") return ClassWeighting::None;
  throw Error(ErrorCode::InvalidArgument, "class weighting must be 'balanced' or 'none'");
}

void Hyperparams::validate() const {
  if (!(inverse_reg_strength > 0.0) || !std::isfinite(inverse_reg_strength)) {
    throw Error(ErrorCode::InvalidArgument, "C must be a positive finite number");
  }
  if (!(l1_ratio >= 0.0 && l1_ratio <= 1.0)) throw Error(ErrorCode::InvalidArgument, "l1_ratio must be in [0,1]");
  if (!(decision_threshold > 0.0 && decision_threshold < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "decision threshold must be in (0,1)");
  }
  if (max_iters <= 0) throw Error(ErrorCode::InvalidArgument, "max_iters must be positive");
  if (!(tol > 0.0)) throw Error(ErrorCode::InvalidArgument, "tol must be positive");
}

nlohmann::json Hyperparams::to_json() const {
  return {{"C", inverse_reg_strength},
          {"l1_ratio", l1_ratio},
          {"class_weighting", to_string(class_weighting)},
          {"decision_threshold", decision_threshold},
          {"max_iters", max_iters},
          {"tol", tol},
          {"seed", seed}};
}

Hyperparams Hyperparams::from_json(const nlohmann::json& doc) {
  Hyperparams hp;
  hp.inverse_reg_strength = doc.value("C", hp.inverse_reg_strength);
  hp.l1_ratio = doc.value("l1_ratio", hp.l1_ratio);
  hp.class_weighting = parse_class_weighting(doc.value("class_weighting", std::string("balanced")));
  hp.decision_threshold = doc.value("decision_threshold", hp.decision_threshold);
  hp.max_iters = doc.value("max_iters", hp.max_iters);
  hp.tol = doc.value("tol", hp.tol);
  hp.seed = doc.value("seed", hp.seed);
  hp.validate();
  return hp;
}

FeatureRow Scaler::apply(const FeatureRow& row) const {
  if (row.size() != means.size()) throw Error(ErrorCode::DimensionMismatch, "row length differs from scaler");
  FeatureRow out(row.size());
  for (std::size_t j = 0; j < row.size(); ++j) out[j] = (row[j] - means[j]) / stds[j];
  return out;
}

Scaler fit_scaler(const std::vector<FeatureRow>& rows) {
  if (rows.size() < 2) throw Error(ErrorCode::EmptyDataset, "scaler needs at least two rows");
  const std::size_t dim = rows.front().size();
  Scaler s{std::vector<double>(dim, 0.0), std::vector<double>(dim, 0.0)};
  for (const auto& row : rows) {
    if (row.size() != dim) throw Error(ErrorCode::DimensionMismatch, "ragged feature rows");
    for (std::size_t j = 0; j < dim; ++j) s.means[j] += row[j];
  }
  const auto n = static_cast<double>(rows.size());
  for (auto& m : s.means) m /= n;
  for (const auto& row : rows) {
    for (std::size_t j = 0; j < dim; ++j) {
      const double d = row[j] - s.means[j];
      s.stds[j] += d * d;
    }
  }
  for (auto& sd : s.stds) {
    sd = std::sqrt(sd / n);
    if (!(sd > 1e-12)) sd = 1.0;
  }
  return s;
}

std::vector<double> sample_weights(const std::vector<int>& labels, ClassWeighting weighting) {
  std::vector<double> w(labels.size(), 1.0);
  if (weighting == ClassWeighting::None) return w;
  const auto n_pos = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
  const auto n = static_cast<double>(labels.size());
  const double n_neg = n - n_pos;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double n_y = labels[i] == 1 ? n_pos : n_neg;
    w[i] = n / (2.0 * n_y);
  }
  return w;
}

TrainingSet TrainingSet::subset(const std::vector<std::size_t>& indices) const {
  TrainingSet out{schema_version, concept_names, {}, {}};
  out.rows.reserve(indices.size());
  out.labels.reserve(indices.size());
  for (auto i : indices) {
    out.rows.push_back(rows.at(i));
    out.labels.push_back(labels.at(i));
  }
  return out;
}

CbmModel train(const TrainingSet& data, const Hyperparams& hp) {
  hp.validate();
  if (data.rows.empty()) throw Error(ErrorCode::EmptyDataset, "no training samples");
  if (data.labels.size() != data.rows.size()) throw Error(ErrorCode::DimensionMismatch, "rows and labels differ");
  const std::size_t dim = data.rows.front().size();
  for (const auto& row : data.rows) {
    if (row.size() != dim) throw Error(ErrorCode::DimensionMismatch, "ragged feature rows");
  }
  if (!data.concept_names.empty() && data.concept_names.size() != dim) {
    throw Error(ErrorCode::DimensionMismatch, "concept names do not match row length");
  }
  const auto n_pos = static_cast<std::size_t>(std::count(data.labels.begin(), data.labels.end(), 1));
  const auto n_neg = static_cast<std::size_t>(std::count(data.labels.begin(), data.labels.end(), 0));
  if (n_pos + n_neg != data.labels.size()) throw Error(ErrorCode::InvalidArgument, "labels must be 0 or 1");
  if (n_pos == 0 || n_neg == 0) throw Error(ErrorCode::SingleClassDataset, "training data needs both classes");

  CbmModel model;
  model.schema_version = data.schema_version;
  model.concept_names = data.concept_names;
  model.scaler = fit_scaler(data.rows);
  model.hyperparams = hp;

  std::vector<FeatureRow> scaled;
  scaled.reserve(data.rows.size());
  for (const auto& row : data.rows) scaled.push_back(model.scaler.apply(row));

  ElasticNetProblem problem(scaled, data.labels, sample_weights(data.labels, hp.class_weighting),
                            hp.inverse_reg_strength, hp.l1_ratio);
  auto solved = solve_proximal_gradient(problem, {hp.max_iters, hp.tol, false});

  model.coefficients = std::move(solved.params.w);
  model.intercept = solved.params.b;
  model.manifest = {data.rows.size(), n_pos, n_neg, solved.objective, solved.iterations, solved.converged};
  return model;
}

double predict_proba_row(const CbmModel& model, const FeatureRow& row) {
  if (row.size() != model.coefficients.size()) {
    throw Error(ErrorCode::DimensionMismatch, "row has " + std::to_string(row.size()) + " features, model expects " +
                                                  std::to_string(model.coefficients.size()));
  }
  const FeatureRow x = model.scaler.apply(row);
  double z = model.intercept;
  for (std::size_t j = 0; j < x.size(); ++j) z += model.coefficients[j] * x[j];
  return sigmoid(z);
}

double predict_proba(const CbmModel& model, const ConceptVector& vector) {
  if (vector.schema_version != model.schema_version || vector.values.size() != model.coefficients.size()) {
    throw Error(ErrorCode::SchemaMismatch, "vector (" + vector.schema_version + ", " +
                                               std::to_string(vector.values.size()) + " values) vs model (" +
                                               model.schema_version + ", " +
                                               std::to_string(model.coefficients.size()) + ")");
  }
  return predict_proba_row(model, to_feature_row(vector));
}

void check_compatible(const CbmModel& model, const ConceptSchema& schema) {
  if (model.schema_version != schema.version()) {
    throw Error(ErrorCode::SchemaMismatch,
                "model schema '" + model.schema_version + "' vs schema '" + schema.version() + "'");
  }
  if (model.concept_names != schema.names()) {
    throw Error(ErrorCode::SchemaMismatch, "model concepts differ from schema concepts");
  }
}

std::vector<FeatureReportRow> feature_report(const CbmModel& model) {
  std::vector<FeatureReportRow> rows;
  for (std::size_t j = 0; j < model.coefficients.size(); ++j) {
    std::string name = j < model.concept_names.size() ? model.concept_names[j] : "feature_" + std::to_string(j);
    rows.push_back({std::move(name), model.coefficients[j], std::exp(model.coefficients[j])});
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const auto& a, const auto& b) { return a.coefficient > b.coefficient; });
  return rows;
}

std::string render_feature_table(const std::vector<FeatureReportRow>& rows) {
  std::size_t width = 7;
  for (const auto& r : rows) width = std::max(width, r.concept_name.size());
  std::ostringstream out;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-*s  %11s  %10s\n", static_cast<int>(width), "concept", "coefficient", "odds_ratio");
  out << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-*s  %11.3f  %10.3f\n", static_cast<int>(width), r.concept_name.c_str(),
                  r.coefficient, r.odds_ratio);
    out << buf;
  }
  return out.str();
}

nlohmann::json feature_report_json(const std::vector<FeatureReportRow>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) {
    out.push_back({{"concept", r.concept_name}, {"coefficient", r.coefficient}, {"odds_ratio", r.odds_ratio}});
  }
  return out;
}

nlohmann::json model_to_json(const CbmModel& model) {
  const auto& m = model.manifest;
  return {{"format_version", kModelFormatVersion},
          {"schema_version", model.schema_version},
          {"concepts", model.concept_names},
          {"w", model.coefficients},
          {"b", model.intercept},
          {"scaler", {{"means", model.scaler.means}, {"stds", model.scaler.stds}}},
          {"hyperparams", model.hyperparams.to_json()},
          {"trained_at", model.trained_at},
          {"manifest",
           {{"n_samples", m.n_samples},
            {"n_pos", m.n_pos},
            {"n_neg", m.n_neg},
            {"objective", m.objective},
            {"iterations", m.iterations},
            {"converged", m.converged}}}};
}

CbmModel model_from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("format_version").get<int>() != kModelFormatVersion) {
      throw Error(ErrorCode::CorruptArtifact, "unsupported model format_version");
    }
    CbmModel model;
    model.schema_version = doc.at("schema_version").get<std::string>();
    model.concept_names = doc.at("concepts").get<std::vector<std::string>>();
    model.coefficients = doc.at("w").get<std::vector<double>>();
    model.intercept = doc.at("b").get<double>();
    model.scaler.means = doc.at("scaler").at("means").get<std::vector<double>>();
    model.scaler.stds = doc.at("scaler").at("stds").get<std::vector<double>>();
    model.hyperparams = Hyperparams::from_json(doc.at("hyperparams"));
    model.trained_at = doc.value("trained_at", std::string{});
    const auto& m = doc.at("manifest");
    model.manifest = {m.at("n_samples").get<std::size_t>(), m.at("n_pos").get<std::size_t>(),
                      m.at("n_neg").get<std::size_t>(),     m.at("objective").get<double>(),
                      m.at("iterations").get<int>(),        m.at("converged").get<bool>()};

    const std::size_t k = model.coefficients.size();
    if (k == 0 || model.concept_names.size() != k || model.scaler.means.size() != k || model.scaler.stds.size() != k) {
      throw Error(ErrorCode::CorruptArtifact, "inconsistent model dimensions");
    }
    for (double sd : model.scaler.stds) {
      if (!(sd > 0.0)) throw Error(ErrorCode::CorruptArtifact, "non-positive scaler stddev");
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::CorruptArtifact, e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::CorruptArtifact) throw;
    throw Error(ErrorCode::CorruptArtifact, e.what());
  }
}

void save_model(const CbmModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write model " + path);
  out << model_to_json(model).dump(2) << '\n';
  if (!out) throw Error(ErrorCode::Io, "failed writing model " + path);
}

CbmModel load_model(const std::string& path, const std::optional<std::string>& expected_schema_version,
                    bool allow_schema_mismatch) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open model " + path);
  auto doc = nlohmann::json::parse(in, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw Error(ErrorCode::CorruptArtifact, path + " is not a JSON object");
  CbmModel model = model_from_json(doc);
  if (expected_schema_version && *expected_schema_version != model.schema_version && !allow_schema_mismatch) {
    throw Error(ErrorCode::SchemaVersionMismatch,
                "model built for schema '" + model.schema_version + "', expected '" + *expected_schema_version + "'");
  }
  return model;
}

}  // namespace cofacil
