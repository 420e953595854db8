#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "cofacil/backend.hpp"
#include "cofacil/cbm_classifier.hpp"
#include "cofacil/clock.hpp"
#include "cofacil/concept_editing.hpp"
#include "cofacil/concept_extractor.hpp"
#include "cofacil/concept_schema.hpp"
#include "cofacil/context_integrator.hpp"
#include "cofacil/delivery.hpp"
#include "cofacil/event_stream.hpp"
#include "cofacil/intervention_advisor.hpp"

namespace cofacil {

enum class SessionStatus { Active, Closed };

struct SegmentAnalysis {
  long long index = 0;
  Segment segment;
  ExtractionResult extraction;  // machine output, never modified
  ConceptVector working;        // extraction plus human edits
  double probability = 0.0;     // for the working vector
  int decision = 0;
  std::optional<Suggestion> suggestion;
  std::optional<Notification> notification;
  std::vector<EditOutcome> edits;
  std::vector<std::string> degraded;  // e.g. "summary_stale", "advice_unavailable"

  nlohmann::json to_json(const ConceptSchema& schema) const;
};

struct ServiceConfig {
  std::filesystem::path data_dir;    // sessions/<id>/...
  std::filesystem::path models_dir;  // <model_ref>.json
  ConceptSchema schema = default_schema();
  BackendPtr extractor;
  BackendPtr integrator;
  BackendPtr advisor;
  std::vector<FewShotExample> fewshot;
  RetryPolicy retry;
  std::size_t summary_budget = kDefaultSummaryBudget;
  double window_tolerance_s = 1.0;
  Clock clock = system_clock();
  std::function<std::string()> id_generator;  // random hex when empty
  std::shared_ptr<SpeechHook> speech_hook;    // text-only delivery when empty
};

struct IngestResult {
  SegmentAnalysis analysis;
  std::optional<std::string> backend_error;  // advisor failed; analysis stored degraded
};

struct EditRequest {
  std::string concept_name;
  int old_value = 0;
  int new_value = 0;
  std::string editor = "facilitator";
  bool request_advice = false;  // ask the advisor if the edit turns the decision on
};

struct EditResult {
  EditOutcome outcome;
  std::optional<Suggestion> suggestion;
};

/// Owns every live session. Each session has one logical writer (ingest and
/// edit serialize on the session) and any number of readers. Everything
/// returned to a caller has already been written to the session directory.
class SessionManager {
 public:
  explicit SessionManager(ServiceConfig config);
  ~SessionManager();
  SessionManager(const SessionManager&) = delete;
  SessionManager& operator=(const SessionManager&) = delete;

  std::string create_session(const StageGoals& goals, const std::string& model_ref);
  IngestResult ingest(const std::string& session_id, const Segment& segment);
  EditResult edit(const std::string& session_id, long long segment_index, const EditRequest& request);
  void close_session(const std::string& session_id);

  std::vector<SegmentAnalysis> timeline(const std::string& session_id) const;
  MeetingSummary summary(const std::string& session_id) const;
  nlohmann::json session_info(const std::string& session_id) const;
  std::vector<EditOutcome> edit_history(const std::string& session_id, long long segment_index) const;
  std::vector<WhatIfRow> what_if(const std::string& session_id, long long segment_index,
                                 const std::string& concept_name) const;
  std::vector<FeatureReportRow> features(const std::string& model_ref) const;
  std::shared_ptr<EventStream> events(const std::string& session_id) const;
  std::vector<std::string> session_ids() const;

  const ConceptSchema& schema() const noexcept { return config_.schema; }

  /// Wakes all event-stream readers so HTTP workers can exit.
  void shutdown();
  /// Blocks until queued speech deliveries have run.
  void flush_deliveries();

 private:
  struct Session;

  std::shared_ptr<Session> find(const std::string& session_id) const;
  std::shared_ptr<const CbmModel> model(const std::string& model_ref) const;
  std::shared_ptr<Session> open_session_dir(const std::filesystem::path& dir);
  void persist_meta(const Session& session) const;
  std::string next_id();

  ServiceConfig config_;
  mutable std::shared_mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  mutable std::mutex models_mutex_;
  mutable std::map<std::string, std::shared_ptr<const CbmModel>> models_;
  std::unique_ptr<DeliveryWorker> delivery_;
};

}  // namespace cofacil
