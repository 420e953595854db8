#include "cofacil/session_manager.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <regex>

#include "cofacil/error.hpp"
#include "cofacil/jsonl_store.hpp"
#include "cofacil/logging.hpp"

namespace cofacil {

namespace fs = std::filesystem;

struct SessionManager::Session {
  std::string id;
  fs::path dir;
  StageGoals goals;
  std::string model_ref;
  std::string created_at;
  std::shared_ptr<const CbmModel> model;
  SessionStatus status = SessionStatus::Active;
  MeetingSummary summary;
  std::vector<SegmentAnalysis> timeline;
  std::unique_ptr<JsonlAppender> timeline_log;
  std::unique_ptr<JsonlAppender> suggestion_log;
  std::unique_ptr<EditLog> edits;
  std::shared_ptr<EventStream> events;
  mutable std::mutex mutex;  // the single logical writer

  nlohmann::json meta() const {
    return {{"session_id", id},
            {"stage_goals", goals.to_json()},
            {"model_ref", model_ref},
            {"created_at", created_at},
            {"status", status == SessionStatus::Active ? "active" : "closed"}};
  }
};

namespace {

nlohmann::json optional_json(const auto& value) { return value ? value->to_json() : nlohmann::json(nullptr); }

bool valid_ref(const std::string& ref) {
  static const std::regex re(R"(^[A-Za-z0-9][A-Za-z0-9._-]{0,127}$)");
  return std::regex_match(ref, re);
}

nlohmann::json timeline_record(const SegmentAnalysis& a, const ConceptSchema& schema) {
  return {{"index", a.index},
          {"segment", to_json(a.segment)},
          {"extraction", to_json(a.extraction, schema)},
          {"probability", a.probability},
          {"decision", a.decision},
          {"suggestion", optional_json(a.suggestion)},
          {"notification", optional_json(a.notification)},
          {"degraded", a.degraded}};
}

Notification notification_from_json(const nlohmann::json& doc) {
  Notification n;
  n.suggestion_ref = {doc.at("suggestion_ref").at("session_id").get<std::string>(),
                      doc.at("suggestion_ref").at("index").get<long long>()};
  n.text_payload = doc.at("text_payload").get<std::string>();
  n.speech_payload = doc.at("speech_payload").get<std::string>();
  n.delivered_via = doc.at("delivered_via").get<std::set<std::string>>();
  return n;
}

}  // namespace

nlohmann::json SegmentAnalysis::to_json(const ConceptSchema& schema) const {
  nlohmann::json edits_json = nlohmann::json::array();
  for (const auto& e : edits) edits_json.push_back(e.to_json());
  return {{"index", index},
          {"segment", cofacil::to_json(segment)},
          {"extraction", cofacil::to_json(extraction, schema)},
          {"concepts", vector_to_json(schema, working)},
          {"probability", probability},
          {"decision", decision},
          {"suggestion", optional_json(suggestion)},
          {"notification", optional_json(notification)},
          {"edits", std::move(edits_json)},
          {"degraded", degraded}};
}

SessionManager::SessionManager(ServiceConfig config) : config_(std::move(config)) {
  if (!config_.extractor || !config_.integrator || !config_.advisor) {
    throw Error(ErrorCode::InvalidArgument, "service needs extractor, integrator and advisor backends");
  }
  fs::create_directories(config_.data_dir / "sessions");
  if (config_.speech_hook) delivery_ = std::make_unique<DeliveryWorker>(config_.speech_hook);
  for (const auto& entry : fs::directory_iterator(config_.data_dir / "sessions")) {
    if (!entry.is_directory() || !fs::exists(entry.path() / "session.json")) continue;
    auto session = open_session_dir(entry.path());
    sessions_.emplace(session->id, std::move(session));
  }
}

SessionManager::~SessionManager() { shutdown(); }

std::shared_ptr<SessionManager::Session> SessionManager::open_session_dir(const fs::path& dir) {
  auto meta_records = nlohmann::json::parse(std::ifstream(dir / "session.json"), nullptr, false);
  if (meta_records.is_discarded()) throw Error(ErrorCode::CorruptArtifact, (dir / "session.json").string());

  auto s = std::make_shared<Session>();
  s->dir = dir;
  s->id = meta_records.at("session_id").get<std::string>();
  s->goals = StageGoals::from_json(meta_records.at("stage_goals"));
  s->model_ref = meta_records.at("model_ref").get<std::string>();
  s->created_at = meta_records.value("created_at", std::string{});
  s->status = meta_records.value("status", std::string("active")) == "closed" ? SessionStatus::Closed
                                                                                : SessionStatus::Active;
  s->model = model(s->model_ref);

  s->summary.session_id = s->id;
  if (fs::exists(dir / "summary.json")) {
    auto doc = nlohmann::json::parse(std::ifstream(dir / "summary.json"), nullptr, false);
    if (doc.is_discarded()) throw Error(ErrorCode::CorruptArtifact, (dir / "summary.json").string());
    s->summary = MeetingSummary::from_json(doc);
  }

  s->edits = std::make_unique<EditLog>(dir / "edits.jsonl");
  for (const auto& record : read_jsonl(dir / "timeline.jsonl")) {
    SegmentAnalysis a;
    a.index = record.at("index").get<long long>();
    if (a.index != static_cast<long long>(s->timeline.size())) {
      throw Error(ErrorCode::CorruptArtifact, s->id + ": timeline indices are not contiguous");
    }
    a.segment = segment_from_json(record.at("segment"));
    a.extraction = extraction_from_json(record.at("extraction"), config_.schema);
    if (!record.at("suggestion").is_null()) a.suggestion = Suggestion::from_json(record.at("suggestion"));
    if (!record.at("notification").is_null()) a.notification = notification_from_json(record.at("notification"));
    a.degraded = record.value("degraded", std::vector<std::string>{});
    a.edits = s->edits->history(a.index);
    a.working = replay_edits(config_.schema, a.extraction.vector, a.edits);
    a.probability = predict_proba(*s->model, a.working);
    a.decision = decide(*s->model, a.probability);
    s->timeline.push_back(std::move(a));
  }
  for (const auto& record : read_jsonl(dir / "suggestions.jsonl")) {
    auto suggestion = Suggestion::from_json(record);
    auto idx = suggestion.segment_ref.index;
    if (idx >= 0 && idx < static_cast<long long>(s->timeline.size())) s->timeline[idx].suggestion = suggestion;
  }
  s->timeline_log = std::make_unique<JsonlAppender>(dir / "timeline.jsonl");
  s->suggestion_log = std::make_unique<JsonlAppender>(dir / "suggestions.jsonl");
  s->events = std::make_shared<EventStream>(dir / "events.jsonl");
  return s;
}

void SessionManager::persist_meta(const Session& session) const {
  write_file_atomic(session.dir / "session.json", session.meta().dump(2) + "\n");
}

std::string SessionManager::next_id() {
  if (config_.id_generator) return config_.id_generator();
  static thread_local std::mt19937_64 rng{std::random_device{}()};
  char buf[32];
  std::snprintf(buf, sizeof buf, "s-%016llx", static_cast<unsigned long long>(rng()));
  return buf;
}

std::shared_ptr<const CbmModel> SessionManager::model(const std::string& model_ref) const {
  if (!valid_ref(model_ref)) throw Error(ErrorCode::UnknownModel, "'" + model_ref + "'");
  std::lock_guard lock(models_mutex_);
  if (auto it = models_.find(model_ref); it != models_.end()) return it->second;
  const auto path = config_.models_dir / (model_ref + ".json");
  if (!fs::exists(path)) throw Error(ErrorCode::UnknownModel, "'" + model_ref + "'");
  auto loaded = std::make_shared<const CbmModel>(load_model(path.string()));
  check_compatible(*loaded, config_.schema);
  models_.emplace(model_ref, loaded);
  return loaded;
}

std::shared_ptr<SessionManager::Session> SessionManager::find(const std::string& session_id) const {
  std::shared_lock lock(sessions_mutex_);
  auto it = sessions_.find(session_id);
  if (it == sessions_.end()) throw Error(ErrorCode::UnknownSession, "'" + session_id + "'");
  return it->second;
}

std::string SessionManager::create_session(const StageGoals& goals, const std::string& model_ref) {
  goals.validate();
  auto loaded = model(model_ref);

  auto s = std::make_shared<Session>();
  {
    std::unique_lock lock(sessions_mutex_);
    do {
      s->id = next_id();
    } while (sessions_.contains(s->id) || !valid_ref(s->id));
    sessions_.emplace(s->id, s);  // reserve the id; s->mutex keeps readers out until populated
  }
  std::lock_guard session_lock(s->mutex);
  s->dir = config_.data_dir / "sessions" / s->id;
  fs::create_directories(s->dir);
  s->goals = goals;
  s->model_ref = model_ref;
  s->model = std::move(loaded);
  s->created_at = config_.clock();
  s->summary.session_id = s->id;
  s->edits = std::make_unique<EditLog>(s->dir / "edits.jsonl");
  s->timeline_log = std::make_unique<JsonlAppender>(s->dir / "timeline.jsonl");
  s->suggestion_log = std::make_unique<JsonlAppender>(s->dir / "suggestions.jsonl");
  s->events = std::make_shared<EventStream>(s->dir / "events.jsonl");
  write_file_atomic(s->dir / "summary.json", s->summary.to_json().dump(2) + "\n");
  persist_meta(*s);
  logger()->info("session {} created with model {}", s->id, model_ref);
  return s->id;
}

IngestResult SessionManager::ingest(const std::string& session_id, const Segment& input) {
  auto s = find(session_id);
  std::lock_guard lock(s->mutex);
  if (s->status == SessionStatus::Closed) throw Error(ErrorCode::SessionClosed, session_id);

  const double tol = config_.window_tolerance_s;
  if (std::abs((input.t1_s - input.t0_s) - kWindowSeconds) > tol || input.t0_s < 0.0) {
    throw Error(ErrorCode::InvalidArgument, "segments must be 60 s windows starting at t0 >= 0");
  }
  if (!s->timeline.empty() && std::abs(input.t0_s - s->timeline.back().segment.t1_s) > tol) {
    throw Error(ErrorCode::OutOfOrderSegment, "expected a window starting at " +
                                                  std::to_string(s->timeline.back().segment.t1_s) + ", got " +
                                                  std::to_string(input.t0_s));
  }

  SegmentAnalysis a;
  a.index = static_cast<long long>(s->timeline.size());
  a.segment = input;
  a.segment.session_id = s->id;
  std::stable_sort(a.segment.utterances.begin(), a.segment.utterances.end(),
                   [](const auto& x, const auto& y) { return x.t0_s < y.t0_s; });
  const SegmentRef ref{s->id, a.index};

  a.extraction = extract_concepts(a.segment, config_.schema, *config_.extractor, {config_.retry, 0});
  a.working = a.extraction.vector;
  a.probability = predict_proba(*s->model, a.working);
  a.decision = decide(*s->model, a.probability);

  MeetingSummary next_summary = update_summary(s->summary, a.index, a.segment, config_.schema, a.working,
                                               *config_.integrator, {config_.summary_budget, config_.retry});
  if (next_summary.stale) a.degraded.push_back("summary_stale");

  std::optional<std::string> backend_error;
  if (a.decision == 1) {
    try {
      AdvisorInput in{next_summary, s->goals, a.segment, ref, config_.schema, a.working, config_.fewshot};
      a.suggestion = suggest(in, *config_.advisor, {config_.retry, config_.clock});
      a.notification = render_notification(*a.suggestion, static_cast<bool>(delivery_));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::BackendUnavailable && e.code() != ErrorCode::UnparseableResponse) throw;
      a.degraded.push_back("advice_unavailable");
      backend_error = e.what();
      logger()->warn("session {} segment {}: advisor failed ({})", s->id, a.index, to_string(e.code()));
    }
  }

  s->timeline_log->append(timeline_record(a, config_.schema));
  write_file_atomic(s->dir / "summary.json", next_summary.to_json().dump(2) + "\n");
  s->summary = std::move(next_summary);
  s->timeline.push_back(a);

  logger()->info("session {} segment {} text={} concepts={} p={:.4f} decision={}", s->id, a.index,
                 text_digest(a.segment.text()), vector_to_json(config_.schema, a.working).dump(), a.probability,
                 a.decision);

  s->events->publish("segment_analyzed", a.to_json(config_.schema));
  s->events->publish("summary_updated", s->summary.to_json());
  if (a.suggestion) {
    s->events->publish("suggestion_created",
                       {{"suggestion", a.suggestion->to_json()}, {"notification", a.notification->to_json()}});
    if (delivery_) delivery_->enqueue(*a.notification);
  }
  return {std::move(a), std::move(backend_error)};
}

EditResult SessionManager::edit(const std::string& session_id, long long segment_index, const EditRequest& request) {
  auto s = find(session_id);
  std::lock_guard lock(s->mutex);
  if (segment_index < 0 || segment_index >= static_cast<long long>(s->timeline.size())) {
    throw Error(ErrorCode::UnknownSegment, "segment " + std::to_string(segment_index));
  }
  SegmentAnalysis& a = s->timeline[static_cast<std::size_t>(segment_index)];
  ConceptEdit edit{{s->id, segment_index}, request.concept_name, request.old_value,
                   request.new_value, request.editor, config_.clock()};

  ConceptVector working = a.working;
  EditOutcome outcome = apply_edit(*s->model, config_.schema, working, edit);
  s->edits->append(outcome);
  a.working = std::move(working);
  a.probability = outcome.prob_after;
  a.decision = outcome.decision_after;
  a.edits.push_back(outcome);

  EditResult result{outcome, std::nullopt};
  if (request.request_advice && a.decision == 1 && !a.suggestion) {
    try {
      AdvisorInput in{s->summary, s->goals, a.segment, {s->id, segment_index}, config_.schema, a.working,
                      config_.fewshot};
      auto suggestion = suggest(in, *config_.advisor, {config_.retry, config_.clock});
      s->suggestion_log->append(suggestion.to_json());
      a.suggestion = suggestion;
      a.notification = render_notification(suggestion, static_cast<bool>(delivery_));
      result.suggestion = std::move(suggestion);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::BackendUnavailable && e.code() != ErrorCode::UnparseableResponse) throw;
      logger()->warn("session {} segment {}: re-advice failed ({})", s->id, segment_index, to_string(e.code()));
    }
  }

  s->events->publish("edit_applied", {{"outcome", outcome.to_json()}, {"analysis", a.to_json(config_.schema)}});
  if (result.suggestion) {
    s->events->publish("suggestion_created",
                       {{"suggestion", result.suggestion->to_json()}, {"notification", a.notification->to_json()}});
    if (delivery_) delivery_->enqueue(*a.notification);
  }
  return result;
}

void SessionManager::close_session(const std::string& session_id) {
  auto s = find(session_id);
  std::lock_guard lock(s->mutex);
  if (s->status == SessionStatus::Closed) return;
  s->status = SessionStatus::Closed;
  persist_meta(*s);
  s->events->close("session_closed", {{"session_id", s->id}, {"segments", s->timeline.size()}});
}

std::vector<SegmentAnalysis> SessionManager::timeline(const std::string& session_id) const {
  auto s = find(session_id);
  std::lock_guard lock(s->mutex);
  return s->timeline;
}

MeetingSummary SessionManager::summary(const std::string& session_id) const {
  auto s = find(session_id);
  std::lock_guard lock(s->mutex);
  return s->summary;
}

nlohmann::json SessionManager::session_info(const std::string& session_id) const {
  auto s = find(session_id);
  std::lock_guard lock(s->mutex);
  auto info = s->meta();
  info["segments"] = s->timeline.size();
  info["last_event_id"] = s->events->last_seq();
  return info;
}

std::vector<EditOutcome> SessionManager::edit_history(const std::string& session_id, long long segment_index) const {
  auto s = find(session_id);
  std::lock_guard lock(s->mutex);
  return cofacil::edit_history(*s->edits, {s->id, segment_index}, s->timeline.size());
}

std::vector<WhatIfRow> SessionManager::what_if(const std::string& session_id, long long segment_index,
                                               const std::string& concept_name) const {
  auto s = find(session_id);
  std::lock_guard lock(s->mutex);
  if (segment_index < 0 || segment_index >= static_cast<long long>(s->timeline.size())) {
    throw Error(ErrorCode::UnknownSegment, "segment " + std::to_string(segment_index));
  }
  return cofacil::what_if(*s->model, config_.schema, s->timeline[static_cast<std::size_t>(segment_index)].working,
                          concept_name);
}

std::vector<FeatureReportRow> SessionManager::features(const std::string& model_ref) const {
  return feature_report(*model(model_ref));
}

std::shared_ptr<EventStream> SessionManager::events(const std::string& session_id) const {
  auto s = find(session_id);
  std::lock_guard lock(s->mutex);
  return s->events;
}

std::vector<std::string> SessionManager::session_ids() const {
  std::shared_lock lock(sessions_mutex_);
  std::vector<std::string> ids;
  for (const auto& [id, _] : sessions_) ids.push_back(id);
  return ids;
}

void SessionManager::shutdown() {
  std::shared_lock lock(sessions_mutex_);
  for (const auto& [_, s] : sessions_) {
    if (s->events) s->events->interrupt();
  }
}

void SessionManager::flush_deliveries() {
  if (delivery_) delivery_->drain();
}

}  // namespace cofacil
