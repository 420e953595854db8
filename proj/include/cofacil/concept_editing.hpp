#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cofacil/cbm_classifier.hpp"
#include "cofacil/concept_schema.hpp"
#include "cofacil/intervention_advisor.hpp"
#include "cofacil/jsonl_store.hpp"

namespace cofacil {

struct ConceptEdit {
  SegmentRef segment_ref;
  std::string concept_name;
  int old_value = 0;
  int new_value = 0;
  std::string editor;
  std::string edited_at;

  friend bool operator==(const ConceptEdit&, const ConceptEdit&) = default;
};

struct EditOutcome {
  ConceptEdit edit;
  double prob_before = 0.0;
  double prob_after = 0.0;
  int decision_before = 0;
  int decision_after = 0;
  bool flipped = false;

  nlohmann::json to_json() const;
  static EditOutcome from_json(const nlohmann::json& doc);
  friend bool operator==(const EditOutcome&, const EditOutcome&) = default;
};

/// Applies a human correction to the working vector and re-predicts.
/// Throws UnknownConcept, OutOfRange, or StaleEdit when old_value does not
/// match the stored value. The vector is untouched on error.
EditOutcome apply_edit(const CbmModel& model, const ConceptSchema& schema, ConceptVector& working,
                       const ConceptEdit& edit);

/// Re-applies logged edits, in order, to the original extraction.
ConceptVector replay_edits(const ConceptSchema& schema, const ConceptVector& original,
                           const std::vector<EditOutcome>& edits);

struct WhatIfRow {
  int value = 0;
  double probability = 0.0;
  int decision = 0;
};

/// Probability for each candidate value of one concept, others held fixed.
/// Binary and ordinal concepts sweep their whole range; counts try the
/// current value and +-1, +-2, +-5 (floored at 0).
std::vector<WhatIfRow> what_if(const CbmModel& model, const ConceptSchema& schema, const ConceptVector& vector,
                               std::string_view concept_name);

/// Append-only edit audit log for one session (edits.jsonl).
class EditLog {
 public:
  explicit EditLog(std::filesystem::path path);

  void append(const EditOutcome& outcome);
  std::vector<EditOutcome> history(long long segment_index) const;
  std::vector<EditOutcome> all() const;

 private:
  JsonlAppender appender_;
  mutable std::mutex mutex_;
  std::vector<EditOutcome> entries_;
};

/// Edits of one segment in application order; UnknownSegment if the index
/// is not below segment_count.
std::vector<EditOutcome> edit_history(const EditLog& log, const SegmentRef& ref, std::size_t segment_count);

}  // namespace cofacil
