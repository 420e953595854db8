#include "cofacil/concept_editing.hpp"

#include <algorithm>
#include <set>

#include "cofacil/error.hpp"

namespace cofacil {

nlohmann::json EditOutcome::to_json() const {
  return {{"segment_ref", {{"session_id", edit.segment_ref.session_id}, {"index", edit.segment_ref.index}}},
          {"concept", edit.concept_name},
          {"old_value", edit.old_value},
          {"new_value", edit.new_value},
          {"editor", edit.editor},
          {"edited_at", edit.edited_at},
          {"prob_before", prob_before},
          {"prob_after", prob_after},
          {"decision_before", decision_before},
          {"decision_after", decision_after},
          {"flipped", flipped}};
}

EditOutcome EditOutcome::from_json(const nlohmann::json& doc) {
  EditOutcome o;
  o.edit.segment_ref = {doc.at("segment_ref").at("session_id").get<std::string>(),
                        doc.at("segment_ref").at("index").get<long long>()};
  o.edit.concept_name = doc.at("concept").get<std::string>();
  o.edit.old_value = doc.at("old_value").get<int>();
  o.edit.new_value = doc.at("new_value").get<int>();
  o.edit.editor = doc.value("editor", std::string{});
  o.edit.edited_at = doc.value("edited_at", std::string{});
  o.prob_before = doc.at("prob_before").get<double>();
  o.prob_after = doc.at("prob_after").get<double>();
  o.decision_before = doc.at("decision_before").get<int>();
  o.decision_after = doc.at("decision_after").get<int>();
  o.flipped = doc.at("flipped").get<bool>();
  return o;
}

EditOutcome apply_edit(const CbmModel& model, const ConceptSchema& schema, ConceptVector& working,
                       const ConceptEdit& edit) {
  check_vector(schema, working);
  const auto index = schema.index_of(edit.concept_name);
  if (!index) throw Error(ErrorCode::UnknownConcept, "'" + edit.concept_name + "'");
  const auto& def = schema.concepts()[*index];
  if (!def.contains(edit.new_value)) {
    throw Error(ErrorCode::OutOfRange, edit.concept_name + "=" + std::to_string(edit.new_value));
  }
  if (working.values[*index] != edit.old_value) {
    throw Error(ErrorCode::StaleEdit, edit.concept_name + " is " + std::to_string(working.values[*index]) +
                                          ", edit expected " + std::to_string(edit.old_value));
  }

  EditOutcome outcome;
  outcome.edit = edit;
  outcome.prob_before = predict_proba(model, working);
  outcome.decision_before = decide(model, outcome.prob_before);
  ConceptVector next = working;
  next.values[*index] = edit.new_value;
  outcome.prob_after = predict_proba(model, next);
  outcome.decision_after = decide(model, outcome.prob_after);
  outcome.flipped = outcome.decision_before != outcome.decision_after;
  working = std::move(next);
  return outcome;
}

ConceptVector replay_edits(const ConceptSchema& schema, const ConceptVector& original,
                           const std::vector<EditOutcome>& edits) {
  ConceptVector v = original;
  for (const auto& outcome : edits) {
    const auto index = schema.index_of(outcome.edit.concept_name);
    if (!index) throw Error(ErrorCode::UnknownConcept, "'" + outcome.edit.concept_name + "'");
    if (v.values[*index] != outcome.edit.old_value) {
      throw Error(ErrorCode::StaleEdit, "edit log does not chain at " + outcome.edit.concept_name);
    }
    v.values[*index] = outcome.edit.new_value;
  }
  return v;
}

std::vector<WhatIfRow> what_if(const CbmModel& model, const ConceptSchema& schema, const ConceptVector& vector,
                               std::string_view concept_name) {
  const auto index = schema.index_of(concept_name);
  if (!index) throw Error(ErrorCode::UnknownConcept, "'" + std::string(concept_name) + "'");
  const auto& def = schema.concepts()[*index];

  std::set<int> candidates;
  if (def.bounded_above()) {
    for (int v = def.min; v <= def.max; ++v) candidates.insert(v);
  } else {
    const int current = vector.values.at(*index);
    for (int delta : {-5, -2, -1, 0, 1, 2, 5}) {
      const long long v = static_cast<long long>(current) + delta;
      candidates.insert(static_cast<int>(std::clamp<long long>(v, std::max(0, def.min), kUnbounded)));
    }
  }

  std::vector<WhatIfRow> rows;
  ConceptVector probe = vector;
  for (int v : candidates) {
    probe.values[*index] = v;
    const double p = predict_proba(model, probe);
    rows.push_back({v, p, decide(model, p)});
  }
  return rows;
}

EditLog::EditLog(std::filesystem::path path) : appender_(path) {
  for (const auto& record : read_jsonl(path)) {
    try {
      entries_.push_back(EditOutcome::from_json(record));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::CorruptArtifact, path.string() + ": " + e.what());
    }
  }
}

void EditLog::append(const EditOutcome& outcome) {
  std::lock_guard lock(mutex_);
  appender_.append(outcome.to_json());
  entries_.push_back(outcome);
}

std::vector<EditOutcome> EditLog::history(long long segment_index) const {
  std::lock_guard lock(mutex_);
  std::vector<EditOutcome> out;
  for (const auto& e : entries_) {
    if (e.edit.segment_ref.index == segment_index) out.push_back(e);
  }
  return out;
}

std::vector<EditOutcome> EditLog::all() const {
  std::lock_guard lock(mutex_);
  return entries_;
}

std::vector<EditOutcome> edit_history(const EditLog& log, const SegmentRef& ref, std::size_t segment_count) {
  if (ref.index < 0 || static_cast<std::size_t>(ref.index) >= segment_count) {
    throw Error(ErrorCode::UnknownSegment, "segment " + std::to_string(ref.index));
  }
  return log.history(ref.index);
}

}  // namespace cofacil
