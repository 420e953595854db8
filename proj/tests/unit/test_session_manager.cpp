#include <doctest.h>

#include <fstream>
#include <sstream>

#include <spdlog/sinks/ostream_sink.h>

#include "cofacil/logging.hpp"
#include "cofacil/session_manager.hpp"
#include "support/backends.hpp"
#include "support/check.hpp"
#include "support/service.hpp"

using namespace cofacil;

namespace {

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::vector<std::string> event_types(const EventStream& stream) {
  std::vector<std::string> out;
  for (const auto& e : stream.snapshot()) out.push_back(e.type);
  return out;
}

std::string run_scripted(const std::filesystem::path& dir) {
  SessionManager m(fixtures::mock_service(dir));
  const auto id = m.create_session(default_stage_goals(1), "fixture");
  for (const auto& seg : fixtures::scripted_session()) m.ingest(id, seg);
  return id;
}

}  // namespace

TEST_CASE("scripted session flows through the whole pipeline") {
  fixtures::TempDir dir;
  SessionManager m(fixtures::mock_service(dir.path()));
  const auto id = m.create_session(default_stage_goals(1), "fixture");
  CHECK(id == "session-1");
  const auto segments = fixtures::scripted_session();
  const auto expected = fixtures::scripted_decisions();
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto r = m.ingest(id, segments[i]);
    CHECK(r.analysis.index == static_cast<long long>(i));
    CHECK(r.analysis.decision == expected[i]);
    CHECK(r.analysis.suggestion.has_value() == (expected[i] == 1));
    CHECK_FALSE(r.backend_error.has_value());
    CHECK(r.analysis.degraded.empty());
  }
  const auto timeline = m.timeline(id);
  REQUIRE(timeline.size() == 5);
  CHECK(timeline[1].suggestion->category == SuggestionCategory::Redirect);
  CHECK(timeline[2].suggestion->category == SuggestionCategory::Support);

  const auto events = m.events(id)->snapshot();
  for (std::size_t i = 0; i < events.size(); ++i) CHECK(events[i].seq == static_cast<long long>(i + 1));
  CHECK(events.size() == 5 * 2 + 3);
  CHECK(events[0].type == "segment_analyzed");
  CHECK(events[1].type == "summary_updated");
  CHECK(events[4].type == "suggestion_created");

  const auto summary = m.summary(id);
  CHECK(summary.as_of_segment == 4);
  CHECK(summary.text.find("Sad") != std::string::npos);
  CHECK(m.session_info(id)["segments"] == 5);
}

TEST_CASE("the advisor is only consulted for flagged segments") {
  fixtures::TempDir dir;
  auto config = fixtures::mock_service(dir.path());
  auto counting = std::make_shared<fixtures::CountingBackend>(config.advisor);
  config.advisor = counting;
  SessionManager m(config);
  const auto id = m.create_session(default_stage_goals(1), "fixture");
  for (const auto& seg : fixtures::scripted_session()) m.ingest(id, seg);
  CHECK(counting->calls == 3);
}

TEST_CASE("timeline bytes are reproducible run to run") {
  fixtures::TempDir a, b;
  const auto id = run_scripted(a.path());
  CHECK(run_scripted(b.path()) == id);
  for (const char* file : {"timeline.jsonl", "events.jsonl", "summary.json", "session.json"}) {
    const auto left = slurp(a.path() / "sessions" / id / file);
    CHECK_MESSAGE(!left.empty(), file);
    CHECK_MESSAGE(left == slurp(b.path() / "sessions" / id / file), file);
  }
}

TEST_CASE("state survives a restart") {
  fixtures::TempDir dir;
  std::string id;
  nlohmann::json before;
  {
    SessionManager m(fixtures::mock_service(dir.path()));
    id = m.create_session(default_stage_goals(2), "fixture");
    const auto segs = fixtures::scripted_session();
    for (std::size_t i = 0; i < 3; ++i) m.ingest(id, segs[i]);
    m.edit(id, 2, {"Deny Changes", 4, 0, "ana"});
    for (const auto& a : m.timeline(id)) before.push_back(a.to_json(m.schema()));
  }
  SessionManager m(fixtures::mock_service(dir.path()));
  CHECK(m.session_ids() == std::vector<std::string>{id});
  nlohmann::json after;
  for (const auto& a : m.timeline(id)) after.push_back(a.to_json(m.schema()));
  CHECK(after == before);
  CHECK(m.timeline(id)[2].decision == 0);
  CHECK(m.edit_history(id, 2).size() == 1);
  CHECK(m.summary(id).as_of_segment == 2);
  const long long seq = m.events(id)->last_seq();
  m.ingest(id, fixtures::scripted_session()[3]);
  CHECK(m.events(id)->last_seq() == seq + 2);
  CHECK(m.timeline(id).size() == 4);
}

TEST_CASE("ingest ordering and validation") {
  fixtures::TempDir dir;
  SessionManager m(fixtures::mock_service(dir.path()));
  const auto id = m.create_session(default_stage_goals(1), "fixture");
  auto segs = fixtures::scripted_session();
  CHECK_ERROR_CODE(m.ingest("nope", segs[0]), ErrorCode::UnknownSession);
  m.ingest(id, segs[0]);
  CHECK_ERROR_CODE(m.ingest(id, segs[2]), ErrorCode::OutOfOrderSegment);
  CHECK_ERROR_CODE(m.ingest(id, segs[0]), ErrorCode::OutOfOrderSegment);
  Segment short_one = segs[1];
  short_one.t1_s = short_one.t0_s + 30;
  CHECK_ERROR_CODE(m.ingest(id, short_one), ErrorCode::InvalidArgument);
  m.ingest(id, segs[1]);
  CHECK(m.timeline(id).size() == 2);

  m.close_session(id);
  CHECK_ERROR_CODE(m.ingest(id, segs[2]), ErrorCode::SessionClosed);
  CHECK(m.events(id)->closed());
  CHECK(m.events(id)->snapshot().back().type == "session_closed");

  CHECK_ERROR_CODE(m.create_session(default_stage_goals(1), "missing"), ErrorCode::UnknownModel);
  CHECK_ERROR_CODE(m.create_session(default_stage_goals(1), "../etc/passwd"), ErrorCode::UnknownModel);
  StageGoals bad;
  CHECK_ERROR_CODE(m.create_session(bad, "fixture"), ErrorCode::InvalidGoals);
}

TEST_CASE("edits flip decisions and may request fresh advice") {
  fixtures::TempDir dir;
  SessionManager m(fixtures::mock_service(dir.path()));
  const auto id = m.create_session(default_stage_goals(1), "fixture");
  const auto segs = fixtures::scripted_session();
  for (std::size_t i = 0; i < 4; ++i) m.ingest(id, segs[i]);
  REQUIRE(m.timeline(id)[3].decision == 0);

  const auto passive = value_of(m.schema(), m.timeline(id)[3].working, "Passive");
  REQUIRE(passive > 0);
  EditRequest req{"Passive", passive, 0, "facilitator", true};
  CHECK_ERROR_CODE(m.edit(id, 3, {"Passive", passive + 1, 0}), ErrorCode::StaleEdit);
  CHECK_FALSE(m.edit(id, 3, {"Passive", passive, 0}).outcome.flipped);
  const auto r = m.edit(id, 3, {"Privacy Issue", 0, 1, "facilitator", true});
  CHECK(r.outcome.flipped);
  REQUIRE(r.suggestion.has_value());
  CHECK(r.suggestion->segment_ref.index == 3);
  const auto types = event_types(*m.events(id));
  CHECK(types[types.size() - 2] == "edit_applied");
  CHECK(types.back() == "suggestion_created");
  CHECK_ERROR_CODE(m.edit(id, 9, req), ErrorCode::UnknownSegment);
  CHECK(m.what_if(id, 3, "Sad").size() == 6);
  CHECK(m.features("fixture").front().concept_name == "Privacy Issue");
}

TEST_CASE("backend outages degrade instead of failing") {
  fixtures::TempDir dir;
  auto config = fixtures::mock_service(dir.path());
  config.advisor = std::make_shared<fixtures::DownBackend>();
  config.integrator = std::make_shared<fixtures::DownBackend>();
  SessionManager m(config);
  const auto id = m.create_session(default_stage_goals(1), "fixture");
  const auto segs = fixtures::scripted_session();
  m.ingest(id, segs[0]);
  const auto r = m.ingest(id, segs[1]);
  CHECK(r.analysis.decision == 1);
  CHECK_FALSE(r.analysis.suggestion.has_value());
  CHECK(r.backend_error.has_value());
  CHECK(r.analysis.degraded == std::vector<std::string>{"summary_stale", "advice_unavailable"});
  CHECK(m.timeline(id).size() == 2);

  auto broken = fixtures::mock_service(dir.path() / "other");
  broken.extractor = std::make_shared<fixtures::DownBackend>();
  SessionManager m2(broken);
  const auto id2 = m2.create_session(default_stage_goals(1), "fixture");
  CHECK_ERROR_CODE(m2.ingest(id2, segs[0]), ErrorCode::BackendUnavailable);
  CHECK(m2.timeline(id2).empty());
  CHECK(m2.events(id2)->last_seq() == 0);
}

TEST_CASE("logs carry digests, never transcript text") {
  std::ostringstream captured;
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(captured);
  auto previous = logger();
  auto capture = std::make_shared<spdlog::logger>("capture", sink);
  capture->set_level(spdlog::level::trace);
  set_logger(capture);
  {
    fixtures::TempDir dir;
    auto config = fixtures::mock_service(dir.path());
    config.advisor = std::make_shared<fixtures::DownBackend>();
    SessionManager m(config);
    const auto id = m.create_session(default_stage_goals(1), "fixture");
    for (const auto& seg : fixtures::scripted_session()) m.ingest(id, seg);
  }
  set_logger(previous);
  const std::string log = captured.str();
  CHECK(log.find(text_digest(fixtures::scripted_session()[1].text())) != std::string::npos);
  for (const auto& seg : fixtures::scripted_session()) {
    for (const auto& u : seg.utterances) CHECK_MESSAGE(log.find(u.text) == std::string::npos, u.text);
  }
}

TEST_CASE("ingest-to-suggestion stays under 500 ms per segment") {
  fixtures::TempDir dir;
  SessionManager m(fixtures::mock_service(dir.path()));
  const auto id = m.create_session(default_stage_goals(1), "fixture");
  for (const auto& seg : fixtures::scripted_session()) {
    const auto t0 = std::chrono::steady_clock::now();
    m.ingest(id, seg);
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0);
    CHECK(ms.count() < 500);
  }
}

namespace {

class SlowHook final : public SpeechHook {
 public:
  void speak(const Notification&) override {
    std::this_thread::sleep_for(std::chrono::milliseconds(300));
    ++spoken;
  }
  std::atomic<int> spoken{0};
};

}  // namespace

TEST_CASE("speech delivery does not block ingest") {
  fixtures::TempDir dir;
  auto config = fixtures::mock_service(dir.path());
  auto hook = std::make_shared<SlowHook>();
  config.speech_hook = hook;
  SessionManager m(config);
  const auto id = m.create_session(default_stage_goals(1), "fixture");
  const auto t0 = std::chrono::steady_clock::now();
  for (const auto& seg : fixtures::scripted_session()) m.ingest(id, seg);
  CHECK(std::chrono::steady_clock::now() - t0 < std::chrono::milliseconds(600));
  m.flush_deliveries();
  CHECK(hook->spoken == 3);
  CHECK(m.timeline(id)[1].notification->delivered_via.contains("speech"));
}
