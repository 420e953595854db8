#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "cofacil/backend.hpp"
#include "cofacil/concept_schema.hpp"
#include "cofacil/dataset_builder.hpp"

namespace cofacil {

struct ExtractionWarning {
  std::string concept_name;
  std::string issue;

  friend bool operator==(const ExtractionWarning&, const ExtractionWarning&) = default;
};

struct ExtractionResult {
  ConceptVector vector;
  std::string raw_response;  // kept for audit
  std::vector<ExtractionWarning> warnings;
};

struct ParsedConcepts {
  ConceptVector vector;
  std::vector<ExtractionWarning> warnings;
};

struct ExtractionOptions {
  RetryPolicy retry;
  std::uint64_t seed = 0;
};

Prompt extraction_prompt(const Segment& segment, const ConceptSchema& schema, std::uint64_t seed = 0);
Prompt repair_prompt(const Prompt& original, std::string_view bad_reply);

/// Lenient decoding of a model reply. Unknown keys are dropped, missing keys
/// become 0, out-of-range values are clamped and booleans become 0/1, each
/// with a warning. Throws UnparseableResponse if the reply holds no JSON object.
ParsedConcepts postprocess_response(std::string_view raw, const ConceptSchema& schema);

/// Empty segments short-circuit to the all-zero vector without a backend call.
ExtractionResult extract_concepts(const Segment& segment, const ConceptSchema& schema, LanguageBackend& backend,
                                  const ExtractionOptions& options = {});

nlohmann::json to_json(const ExtractionResult& result, const ConceptSchema& schema);
ExtractionResult extraction_from_json(const nlohmann::json& doc, const ConceptSchema& schema);

}  // namespace cofacil
