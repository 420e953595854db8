#include "cofacil/concept_schema.hpp"

#include <fstream>
#include <set>

#include "cofacil/error.hpp"

namespace cofacil {

std::string_view to_string(ConceptKind kind) noexcept {
  switch (kind) {
    case ConceptKind::Binary: return "binary";
    case ConceptKind::NumericCount: return "numeric_count";
    case ConceptKind::Ordinal: return "ordinal";
  }
  return "binary";
}

ConceptKind parse_concept_kind(std::string_view text) {
  if (text == "binary") return ConceptKind::Binary;
  if (text == "numeric_count") return ConceptKind::NumericCount;
  if (text == "ordinal") return ConceptKind::Ordinal;
  throw Error(ErrorCode::InvalidSchema, "unknown concept kind '" + std::string(text) + "'");
}

ConceptDef ConceptDef::binary(std::string name, std::string description) {
  return {std::move(name), ConceptKind::Binary, 0, 1, std::move(description)};
}

ConceptDef ConceptDef::ordinal(std::string name, std::string description) {
  return {std::move(name), ConceptKind::Ordinal, 0, kOrdinalMax, std::move(description)};
}

ConceptDef ConceptDef::count(std::string name, std::string description) {
  return {std::move(name), ConceptKind::NumericCount, 0, kUnbounded, std::move(description)};
}

ConceptSchema::ConceptSchema(std::string version, std::vector<ConceptDef> concepts)
    : version_(std::move(version)), concepts_(std::move(concepts)) {
  if (concepts_.empty()) throw Error(ErrorCode::InvalidSchema, "schema has no concepts");
  std::set<std::string> seen;
  for (const auto& def : concepts_) {
    if (def.name.empty()) throw Error(ErrorCode::InvalidSchema, "concept with empty name");
    if (!seen.insert(def.name).second) throw Error(ErrorCode::InvalidSchema, "duplicate concept '" + def.name + "'");
    if (def.min > def.max) throw Error(ErrorCode::InvalidSchema, "concept '" + def.name + "' has min > max");
  }
}

std::optional<std::size_t> ConceptSchema::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < concepts_.size(); ++i) {
    if (concepts_[i].name == name) return i;
  }
  return std::nullopt;
}

const ConceptDef& ConceptSchema::at(std::string_view name) const {
  auto index = index_of(name);
  if (!index) throw Error(ErrorCode::UnknownConcept, "'" + std::string(name) + "' is not in schema " + version_);
  return concepts_[*index];
}

std::vector<std::string> ConceptSchema::names() const {
  std::vector<std::string> out;
  out.reserve(concepts_.size());
  for (const auto& def : concepts_) out.push_back(def.name);
  return out;
}

nlohmann::json ConceptSchema::to_json() const {
  nlohmann::json concepts = nlohmann::json::array();
  for (const auto& def : concepts_) {
    concepts.push_back({
        {"name", def.name},
        {"kind", to_string(def.kind)},
        {"min", def.min},
        {"max", def.bounded_above() ? nlohmann::json(def.max) : nlohmann::json(nullptr)},
        {"description", def.description},
    });
  }
  return {{"version", version_}, {"concepts", std::move(concepts)}};
}

ConceptSchema ConceptSchema::from_json(const nlohmann::json& doc) {
  try {
    std::vector<ConceptDef> concepts;
    for (const auto& item : doc.at("concepts")) {
      ConceptDef def;
      def.name = item.at("name").get<std::string>();
      def.kind = parse_concept_kind(item.at("kind").get<std::string>());
      switch (def.kind) {
        case ConceptKind::Binary: def.max = 1; break;
        case ConceptKind::Ordinal: def.max = kOrdinalMax; break;
        case ConceptKind::NumericCount: def.max = kUnbounded; break;
      }
      def.min = item.value("min", 0);
      if (item.contains("max") && !item.at("max").is_null()) def.max = item.at("max").get<int>();
      def.description = item.value("description", std::string{});
      concepts.push_back(std::move(def));
    }
    return ConceptSchema(doc.at("version").get<std::string>(), std::move(concepts));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidSchema, e.what());
  }
}

ConceptSchema ConceptSchema::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open schema file " + path);
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::InvalidSchema, path + ": " + e.what());
  }
}

void ConceptSchema::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write schema file " + path);
  out << to_json().dump(2) << '\n';
}

ConceptSchema default_schema() {
  return ConceptSchema(
      "default-v1",
      {
          ConceptDef::binary("Privacy Issue",
                             "Another adult is present in or enters the participant's space, so the participant "
                             "cannot speak privately."),
          ConceptDef::binary("Missed Session Question",
                             "A participant asks about or tries to catch up on a previous session they missed."),
          ConceptDef::ordinal("Sad", "Intensity of sadness expressed in the segment (0 none, 5 overwhelming)."),
          ConceptDef::ordinal("Afraid", "Intensity of fear or worry expressed (0 none, 5 overwhelming)."),
          ConceptDef::ordinal("Admiration",
                              "Praise, respect or appreciation voiced toward another participant (0 none, 5 strong)."),
          ConceptDef::ordinal("Passive",
                              "Participants give minimal answers or wait without engaging (0 fully active, 5 fully "
                              "passive)."),
          ConceptDef::ordinal("Deny Changes",
                              "Resistance to or denial of the need for behaviour change (0 none, 5 strong denial)."),
          ConceptDef::ordinal("Goal Barrier Discussion Scale",
                              "Depth of discussion about obstacles to reaching a personal goal (0 none, 5 detailed)."),
          ConceptDef::ordinal("Goal Difficulty Scale",
                              "Perceived difficulty of the goal under discussion (0 trivial or no goal, 5 very hard)."),
          ConceptDef::binary("Goal Peer Support Question",
                             "Someone asks peers for support or offers help with a goal."),
          ConceptDef::count("Goal Refine Count", "Number of times a participant restates or sharpens a goal."),
          ConceptDef::ordinal("Engagement", "Overall level of group participation (0 none, 5 very high)."),
          ConceptDef::ordinal("Interaction", "Amount of back-and-forth between participants (0 none, 5 constant)."),
          ConceptDef::ordinal("Sentiment", "Overall emotional tone of the segment (0 very negative, 5 very positive)."),
      });
}

void check_vector(const ConceptSchema& schema, const ConceptVector& vector) {
  if (vector.schema_version != schema.version()) {
    throw Error(ErrorCode::SchemaMismatch,
                "vector schema '" + vector.schema_version + "' vs schema '" + schema.version() + "'");
  }
  if (vector.values.size() != schema.size()) {
    throw Error(ErrorCode::SchemaMismatch, "vector has " + std::to_string(vector.values.size()) +
                                               " values, schema has " + std::to_string(schema.size()));
  }
  for (std::size_t i = 0; i < schema.size(); ++i) {
    const auto& def = schema.concepts()[i];
    if (!def.contains(vector.values[i])) {
      throw Error(ErrorCode::OutOfRange, def.name + "=" + std::to_string(vector.values[i]));
    }
  }
}

ConceptVector validate_vector(const ConceptSchema& schema, const std::map<std::string, long long>& raw) {
  ConceptVector vector{schema.version(), std::vector<int>(schema.size(), 0)};
  for (const auto& [name, value] : raw) {
    auto index = schema.index_of(name);
    if (!index) throw Error(ErrorCode::UnknownConcept, "'" + name + "'");
    const auto& def = schema.concepts()[*index];
    if (!def.contains(value)) {
      throw Error(ErrorCode::OutOfRange, name + "=" + std::to_string(value) + " outside [" +
                                             std::to_string(def.min) + "," +
                                             (def.bounded_above() ? std::to_string(def.max) : "inf") + "]");
    }
    vector.values[*index] = static_cast<int>(value);
  }
  return vector;
}

int value_of(const ConceptSchema& schema, const ConceptVector& vector, std::string_view name) {
  auto index = schema.index_of(name);
  if (!index) throw Error(ErrorCode::UnknownConcept, "'" + std::string(name) + "'");
  if (*index >= vector.values.size()) throw Error(ErrorCode::SchemaMismatch, "vector shorter than schema");
  return vector.values[*index];
}

FeatureRow to_feature_row(const ConceptVector& vector) {
  return FeatureRow(vector.values.begin(), vector.values.end());
}

nlohmann::json vector_to_json(const ConceptSchema& schema, const ConceptVector& vector) {
  nlohmann::json out = nlohmann::json::object();
  for (std::size_t i = 0; i < schema.size() && i < vector.values.size(); ++i) {
    out[schema.concepts()[i].name] = vector.values[i];
  }
  return out;
}

ConceptVector vector_from_json(const ConceptSchema& schema, const nlohmann::json& object) {
  if (!object.is_object()) throw Error(ErrorCode::InvalidArgument, "concept vector must be a JSON object");
  std::map<std::string, long long> raw;
  for (const auto& [name, value] : object.items()) {
    if (!value.is_number_integer()) throw Error(ErrorCode::OutOfRange, name + " is not an integer");
    raw[name] = value.get<long long>();
  }
  return validate_vector(schema, raw);
}

}  // namespace cofacil
