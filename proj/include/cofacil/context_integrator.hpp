#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "cofacil/backend.hpp"
#include "cofacil/concept_schema.hpp"
#include "cofacil/dataset_builder.hpp"

namespace cofacil {

inline constexpr std::size_t kDefaultSummaryBudget = 2000;
inline constexpr std::string_view kTruncationMarker = " [...]";

struct MeetingSummary {
  std::string session_id;
  long long as_of_segment = -1;  // -1 before the first segment
  std::string text;
  std::vector<std::string> salient_flags;
  bool stale = false;                 // last update fell back to the previous text
  long long stale_since_segment = -1;  // first segment whose update failed, -1 if fresh

  nlohmann::json to_json() const;
  static MeetingSummary from_json(const nlohmann::json& doc);
  friend bool operator==(const MeetingSummary&, const MeetingSummary&) = default;
};

/// Cuts text to at most budget UTF-8 code points, ending with the marker
/// when anything was removed.
std::string truncate_to_budget(const std::string& text, std::size_t budget);
std::size_t utf8_length(std::string_view text) noexcept;

struct IntegratorOptions {
  std::size_t budget = kDefaultSummaryBudget;
  RetryPolicy retry;
};

Prompt summary_prompt(const MeetingSummary& prev, const Segment& segment, const ConceptSchema& schema,
                      const ConceptVector& concepts);

/// Folds one segment into the running summary. Never throws for backend
/// trouble: on failure the previous text is kept, the index still advances
/// and the summary is marked stale.
MeetingSummary update_summary(const MeetingSummary& prev, long long segment_index, const Segment& segment,
                              const ConceptSchema& schema, const ConceptVector& concepts, LanguageBackend& backend,
                              const IntegratorOptions& options = {});

}  // namespace cofacil
