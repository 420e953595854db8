#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cofacil/backend.hpp"
#include "cofacil/clock.hpp"
#include "cofacil/concept_schema.hpp"
#include "cofacil/context_integrator.hpp"
#include "cofacil/dataset_builder.hpp"

namespace cofacil {

inline constexpr std::size_t kMaxActionLength = 140;

struct StageGoals {
  int session_number = 1;  // 1, 2 or 3
  std::vector<std::string> goals;
  std::vector<std::string> agenda;

  void validate() const;  // throws InvalidGoals
  nlohmann::json to_json() const;
  static StageGoals from_json(const nlohmann::json& doc);
  friend bool operator==(const StageGoals&, const StageGoals&) = default;
};

/// Goals and agenda of each session of the three-week group programme.
StageGoals default_stage_goals(int session_number);

struct FewShotExample {
  std::string transcript_excerpt;
  std::string recommended_action;
  std::string rationale;
};

struct FewShotSet {
  std::vector<FewShotExample> examples;
  std::vector<std::string> warnings;
};

FewShotSet parse_fewshot(const nlohmann::json& doc);
FewShotSet load_fewshot(const std::string& path);

enum class SuggestionCategory { Goal, Redirect, Support, Other };

std::string_view to_string(SuggestionCategory category) noexcept;
/// Maps free-form labels such as "Goal-setting intervention" onto the closed
/// set; nullopt when nothing fits.
std::optional<SuggestionCategory> map_category(std::string_view label);

struct SegmentRef {
  std::string session_id;
  long long index = 0;

  friend bool operator==(const SegmentRef&, const SegmentRef&) = default;
};

struct Suggestion {
  SuggestionCategory category = SuggestionCategory::Other;
  std::string action;
  std::string rationale;
  SegmentRef segment_ref;
  std::string created_at;
  std::vector<std::string> warnings;

  nlohmann::json to_json() const;
  static Suggestion from_json(const nlohmann::json& doc);
};

struct AdvisorInput {
  const MeetingSummary& summary;
  const StageGoals& goals;
  const Segment& segment;
  SegmentRef segment_ref;
  const ConceptSchema& schema;
  const ConceptVector& concepts;
  const std::vector<FewShotExample>& fewshot;
};

struct AdvisorOptions {
  RetryPolicy retry;
  Clock clock = system_clock();
};

Prompt advisor_prompt(const AdvisorInput& input);

/// Parses {"category", "action", "rationale"} out of a reply. Throws
/// UnparseableResponse when no usable object is present.
Suggestion parse_suggestion(std::string_view reply, const SegmentRef& ref);

/// Only to be called for segments the classifier flagged.
Suggestion suggest(const AdvisorInput& input, LanguageBackend& backend, const AdvisorOptions& options = {});

}  // namespace cofacil
