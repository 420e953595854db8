#include "cofacil/concept_extractor.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "cofacil/error.hpp"
#include "cofacil/logging.hpp"

namespace cofacil {
namespace {

std::string range_text(const ConceptDef& def) {
  std::ostringstream out;
  out << to_string(def.kind) << ", integer " << def.min << "-";
  if (def.bounded_above()) {
    out << def.max;
  } else {
    out << "any";
  }
  return out.str();
}

struct Coerced {
  long long value = 0;
  std::string issue;  // empty when the value was taken as-is
};

Coerced coerce(const nlohmann::json& value) {
  if (value.is_boolean()) return {value.get<bool>() ? 1 : 0, {}};
  if (value.is_number_integer()) {
    if (value.is_number_unsigned()) {
      auto u = value.get<unsigned long long>();
      if (u > static_cast<unsigned long long>(kUnbounded)) return {kUnbounded, "huge value"};
      return {static_cast<long long>(u), {}};
    }
    return {value.get<long long>(), {}};
  }
  if (value.is_number_float()) {
    const double d = value.get<double>();
    if (!std::isfinite(d)) return {0, "non-finite value defaulted to 0"};
    const double r = std::clamp(std::round(d), -1e15, 1e15);
    return {static_cast<long long>(r), r == d ? std::string{} : "rounded to nearest integer"};
  }
  if (value.is_string()) {
    const auto& s = value.get_ref<const std::string&>();
    long long parsed = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), parsed);
    if (ec == std::errc() && ptr == s.data() + s.size() && !s.empty()) return {parsed, "string coerced to integer"};
    if (s == "true" || s == "yes") return {1, "string coerced to 1"};
    if (s == "false" || s == "no") return {0, "string coerced to 0"};
  }
  return {0, "non-numeric value defaulted to 0"};
}

}  // namespace

Prompt extraction_prompt(const Segment& segment, const ConceptSchema& schema, std::uint64_t seed) {
  Prompt prompt;
  prompt.seed = seed;
  prompt.system =
      "You annotate one 60-second window of a facilitated group meeting. Score every concept listed below "
      "using only evidence in the transcript. Reply with exactly one JSON object that maps each concept name "
      "to an integer inside its range, and nothing else.";

  std::ostringstream concepts;
  for (const auto& def : schema.concepts()) {
    concepts << "- " << def.name << " (" << range_text(def) << "): " << def.description << '\n';
  }
  std::ostringstream grammar;
  grammar << "{";
  for (std::size_t i = 0; i < schema.size(); ++i) {
    if (i) grammar << ", ";
    grammar << '"' << schema.concepts()[i].name << "\": <int>";
  }
  grammar << "}";

  prompt.user = tagged_section("concepts", concepts.str()) + tagged_section("output_format", grammar.str()) +
                tagged_section("transcript", segment.text());
  return prompt;
}

Prompt repair_prompt(const Prompt& original, std::string_view bad_reply) {
  Prompt repaired = original;
  repaired.user += tagged_section("previous_reply", bad_reply);
  repaired.user +=
      "The previous reply could not be parsed. Reply again with a single JSON object in the output_format above.";
  return repaired;
}

ParsedConcepts postprocess_response(std::string_view raw, const ConceptSchema& schema) {
  auto object = first_json_object(raw);
  if (!object) throw Error(ErrorCode::UnparseableResponse, "reply contains no JSON object");

  ParsedConcepts out{{schema.version(), std::vector<int>(schema.size(), 0)}, {}};
  std::vector<bool> seen(schema.size(), false);
  for (const auto& [name, value] : object->items()) {
    auto index = schema.index_of(name);
    if (!index) {
      out.warnings.push_back({name, "unknown concept dropped"});
      continue;
    }
    const auto& def = schema.concepts()[*index];
    auto coerced = coerce(value);
    if (!coerced.issue.empty()) out.warnings.push_back({name, coerced.issue});
    long long v = coerced.value;
    if (v < def.min) {
      out.warnings.push_back({name, "clamped " + std::to_string(v) + " to " + std::to_string(def.min)});
      v = def.min;
    } else if (v > def.max) {
      out.warnings.push_back({name, "clamped " + std::to_string(v) + " to " + std::to_string(def.max)});
      v = def.max;
    }
    out.vector.values[*index] = static_cast<int>(v);
    seen[*index] = true;
  }
  for (std::size_t i = 0; i < schema.size(); ++i) {
    if (!seen[i]) out.warnings.push_back({schema.concepts()[i].name, "missing, defaulted to 0"});
  }
  return out;
}

ExtractionResult extract_concepts(const Segment& segment, const ConceptSchema& schema, LanguageBackend& backend,
                                  const ExtractionOptions& options) {
  if (segment.utterances.empty()) {
    return {{schema.version(), std::vector<int>(schema.size(), 0)}, "", {}};
  }
  const Prompt prompt = extraction_prompt(segment, schema, options.seed);
  const std::string digest = text_digest(segment.text());

  std::string raw = complete_with_retry(backend, prompt, options.retry);
  ParsedConcepts parsed;
  try {
    parsed = postprocess_response(raw, schema);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::UnparseableResponse) throw;
    logger()->warn("segment {}: unparseable extraction reply, asking once more", digest);
    raw = complete_with_retry(backend, repair_prompt(prompt, raw), options.retry);
    parsed = postprocess_response(raw, schema);
  }
  logger()->info("segment {} concepts {}", digest, vector_to_json(schema, parsed.vector).dump());
  return {std::move(parsed.vector), std::move(raw), std::move(parsed.warnings)};
}

nlohmann::json to_json(const ExtractionResult& result, const ConceptSchema& schema) {
  nlohmann::json warnings = nlohmann::json::array();
  for (const auto& w : result.warnings) warnings.push_back({{"concept", w.concept_name}, {"issue", w.issue}});
  return {{"schema_version", result.vector.schema_version},
          {"concepts", vector_to_json(schema, result.vector)},
          {"raw_response", result.raw_response},
          {"warnings", std::move(warnings)}};
}

ExtractionResult extraction_from_json(const nlohmann::json& doc, const ConceptSchema& schema) {
  ExtractionResult result;
  result.vector = vector_from_json(schema, doc.at("concepts"));
  result.raw_response = doc.value("raw_response", std::string{});
  for (const auto& w : doc.value("warnings", nlohmann::json::array())) {
    result.warnings.push_back({w.at("concept").get<std::string>(), w.at("issue").get<std::string>()});
  }
  return result;
}

}  // namespace cofacil
