#pragma once

#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace cofacil {

enum class ConceptKind { Binary, NumericCount, Ordinal };

std::string_view to_string(ConceptKind kind) noexcept;
ConceptKind parse_concept_kind(std::string_view text);

inline constexpr int kOrdinalMax = 5;
inline constexpr int kUnbounded = std::numeric_limits<int>::max();

struct ConceptDef {
  std::string name;
  ConceptKind kind = ConceptKind::Binary;
  int min = 0;
  int max = 1;  // kUnbounded for numeric counts
  std::string description;

  bool contains(long long value) const noexcept { return value >= min && value <= max; }
  bool bounded_above() const noexcept { return max != kUnbounded; }

  static ConceptDef binary(std::string name, std::string description);
  static ConceptDef ordinal(std::string name, std::string description);
  static ConceptDef count(std::string name, std::string description);

  friend bool operator==(const ConceptDef&, const ConceptDef&) = default;
};

using FeatureRow = std::vector<double>;

/// Ordered concept vocabulary. Feature index i always maps to concepts()[i].
class ConceptSchema {
 public:
  ConceptSchema(std::string version, std::vector<ConceptDef> concepts);

  const std::string& version() const noexcept { return version_; }
  const std::vector<ConceptDef>& concepts() const noexcept { return concepts_; }
  std::size_t size() const noexcept { return concepts_.size(); }

  std::optional<std::size_t> index_of(std::string_view name) const;
  const ConceptDef& at(std::string_view name) const;  // throws UnknownConcept
  std::vector<std::string> names() const;

  nlohmann::json to_json() const;
  static ConceptSchema from_json(const nlohmann::json& doc);
  static ConceptSchema load(const std::string& path);
  void save(const std::string& path) const;

  friend bool operator==(const ConceptSchema&, const ConceptSchema&) = default;

 private:
  std::string version_;
  std::vector<ConceptDef> concepts_;
};

struct ConceptVector {
  std::string schema_version;
  std::vector<int> values;

  friend bool operator==(const ConceptVector&, const ConceptVector&) = default;
};

/// Built-in vocabulary: every concept the facilitation study names.
ConceptSchema default_schema();

/// Strict validation: unknown names and out-of-range values are errors,
/// absent concepts default to 0.
ConceptVector validate_vector(const ConceptSchema& schema, const std::map<std::string, long long>& raw);

/// Throws OutOfRange / SchemaMismatch if the vector does not fit the schema.
void check_vector(const ConceptSchema& schema, const ConceptVector& vector);

int value_of(const ConceptSchema& schema, const ConceptVector& vector, std::string_view name);

FeatureRow to_feature_row(const ConceptVector& vector);

/// {name: value} object (keys sorted, as nlohmann::json stores them).
nlohmann::json vector_to_json(const ConceptSchema& schema, const ConceptVector& vector);
ConceptVector vector_from_json(const ConceptSchema& schema, const nlohmann::json& object);

}  // namespace cofacil
